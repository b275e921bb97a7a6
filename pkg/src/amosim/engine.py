"""Execution driver: configs, adversaries, traces.

``run(cfg)`` executes one of the built-in schedulers through the selected
core (compiled when available).  ``run_with_adversary`` drives the pure
automaton with an arbitrary adversary object and exists for replay,
exploration cross-checks and tests; built-in schedulers never go through
it, so both paths stay deterministic.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

from . import core
from ._prng import SplitMix64
from ._pyrun import SCHEDULER_CODES, AdversaryProtocolError
from .automaton import ProcessState, crash as crash_process, step as automaton_step
from .events import (
    A_CRASH,
    DRAIN_STATUSES,
    MODE_FLAGGED,
    MODE_PLAIN,
    MODE_WRITEALL,
    S_STOP,
    TERMINAL_STATUSES,
    CollisionWitness as CollisionWitnessEvent,
    CrashEvent,
    DoEvent,
    DoneWrite,
    FlagRaise,
    Termination,
)
from .registers import ConfigurationError, SharedMemory

DEFAULT_STARVATION_FACTOR = 64


def default_max_steps(n: int, m: int) -> int:
    return 64 * n * m * m


@dataclass(frozen=True)
class Config:
    """One execution's parameters."""

    n: int
    m: int
    beta: int
    f: int = 0
    mode: str = MODE_PLAIN
    seed: int = 0
    scheduler: str = "rr"
    crash_times: Optional[Tuple[Tuple[int, int], ...]] = None
    starvation_factor: int = DEFAULT_STARVATION_FACTOR
    max_steps: Optional[int] = None
    leftover_free: bool = False  # drain returns FREE instead of FREE \ TRY

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ConfigurationError("need at least one process")
        if self.n < self.m:
            raise ConfigurationError("need at least as many jobs as processes (n >= m)")
        if not 0 <= self.f <= self.m - 1:
            raise ConfigurationError("crash budget must satisfy 0 <= f <= m-1")
        if self.beta < 1:
            raise ConfigurationError("termination parameter beta must be >= 1")
        if self.mode not in (MODE_PLAIN, MODE_FLAGGED, MODE_WRITEALL):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.scheduler not in SCHEDULER_CODES:
            raise ConfigurationError(f"unknown scheduler {self.scheduler!r}")
        if self.scheduler == "theorem3":
            if self.m < 2 or self.f != self.m - 1:
                raise ConfigurationError("theorem3 adversary needs m >= 2 and f = m-1")
            if self.beta < self.m:
                raise ConfigurationError("theorem3 adversary needs beta >= m")
            if self.n < 2 * self.m - 1:
                raise ConfigurationError("theorem3 adversary needs n >= 2m-1")
            if self.mode != MODE_PLAIN:
                raise ConfigurationError("theorem3 adversary drives the plain automaton")
        if self.crash_times is not None:
            if len(self.crash_times) > self.f:
                raise ConfigurationError("scripted crashes exceed the crash budget f")
            if self.scheduler not in ("random", "crash-at"):
                raise ConfigurationError("scripted crashes need the random or crash-at scheduler")
        if self.beta < self.m:
            warnings.warn(
                f"beta={self.beta} < m={self.m}: termination is not guaranteed",
                stacklevel=2,
            )

    @property
    def effective_max_steps(self) -> int:
        return self.max_steps if self.max_steps is not None else default_max_steps(self.n, self.m)

    @property
    def flagged(self) -> bool:
        return self.mode in (MODE_FLAGGED, MODE_WRITEALL)

    @property
    def writeall(self) -> bool:
        return self.mode == MODE_WRITEALL

    def canonical_items(self) -> list:
        return [
            ("n", self.n), ("m", self.m), ("beta", self.beta), ("f", self.f),
            ("mode", self.mode), ("seed", self.seed), ("scheduler", self.scheduler),
            ("crash_times", list(map(list, self.crash_times)) if self.crash_times else None),
            ("starvation_factor", self.starvation_factor),
            ("max_steps", self.effective_max_steps),
            ("leftover_free", self.leftover_free),
        ]


class ExecutionTrace:
    """Ordered move log plus derived events and final state of one run."""

    def __init__(self, cfg: Config, data: dict,
                 base_jobs: Optional[List[Tuple[int, ...]]] = None, wa=None) -> None:
        self.cfg = cfg
        self._d = data
        self.base_jobs = base_jobs
        self.wa = wa

    # -- raw columns -------------------------------------------------------
    @property
    def actions(self) -> Sequence[int]:
        return self._d["actions"]

    @property
    def pids(self) -> Sequence[int]:
        return self._d["pids"]

    @property
    def args(self) -> Sequence[int]:
        return self._d["args"]

    @property
    def move_meters(self) -> Tuple[Sequence[int], Sequence[int], Sequence[int], Sequence[int]]:
        return self._d["reads"], self._d["writes"], self._d["set_ops"], self._d["rank_charges"]

    # -- events ------------------------------------------------------------
    @property
    def dos(self) -> List[Tuple[int, int, int]]:
        return self._d["dos"]

    @property
    def crashes(self) -> List[Tuple[int, int]]:
        return self._d["crashes"]

    @property
    def witnesses(self) -> List[Tuple[int, int, int, int, int, int]]:
        """(check_step, pid, witness_pid, job, kind, read_step) tuples."""
        return self._d["witnesses"]

    @property
    def done_writes(self) -> List[Tuple[int, int, int, int]]:
        return self._d["done_writes"]

    @property
    def flag_raises(self) -> List[Tuple[int, int]]:
        return self._d["flag_raises"]

    @property
    def terminations(self) -> List[Tuple[int, int]]:
        return self._d["terminations"]

    def do_events(self) -> List[DoEvent]:
        return [DoEvent(*e) for e in self.dos]

    def crash_events(self) -> List[CrashEvent]:
        return [CrashEvent(*e) for e in self.crashes]

    def witness_events(self) -> List[CollisionWitnessEvent]:
        return [CollisionWitnessEvent(*e) for e in self.witnesses]

    def done_write_events(self) -> List[DoneWrite]:
        return [DoneWrite(*e) for e in self.done_writes]

    def flag_events(self) -> List[FlagRaise]:
        return [FlagRaise(*e) for e in self.flag_raises]

    def termination_events(self) -> List[Termination]:
        return [Termination(*e) for e in self.terminations]

    def base_do_jobs(self) -> Iterator[Tuple[int, int, int]]:
        """Do events expanded to base jobs: yields (step, pid, base_job)."""
        if self.base_jobs is None:
            for (t, p, j) in self.dos:
                yield (t, p, j)
        else:
            for (t, p, j) in self.dos:
                for b in self.base_jobs[j]:
                    yield (t, p, b)

    # -- final state ---------------------------------------------------------
    @property
    def final_statuses(self) -> Tuple[int, ...]:
        return self._d["final_statuses"]

    @property
    def leftovers(self) -> dict:
        return self._d["leftovers"]

    @property
    def final_next(self) -> Tuple[int, ...]:
        return self._d["final_next"]

    @property
    def final_rows(self) -> Tuple[Tuple[int, ...], ...]:
        return self._d["final_rows"]

    @property
    def final_pos(self) -> Tuple[Tuple[int, ...], ...]:
        return self._d["final_pos"]

    @property
    def counters(self) -> dict:
        return self._d["counters"]

    @property
    def truncated(self) -> bool:
        return self._d["truncated"]

    @property
    def steps(self) -> int:
        return self._d["steps"]

    @property
    def crashes_used(self) -> int:
        return self._d["crashes_used"]

    def digest(self) -> str:
        """Stable hash of the full move log and derived events."""
        h = hashlib.sha256()
        for key in ("actions", "pids", "args", "reads", "writes", "set_ops", "rank_charges"):
            h.update(key.encode())
            h.update(",".join(map(str, self._d[key])).encode())
        for key in ("dos", "crashes", "witnesses", "done_writes", "flag_raises", "terminations"):
            h.update(key.encode())
            h.update(repr(list(map(tuple, self._d[key]))).encode())
        h.update(repr(self._d["final_statuses"]).encode())
        h.update(repr(sorted(self._d["leftovers"].items())).encode())
        h.update(repr(self._d["counters"]).encode())
        h.update(repr((self._d["truncated"], self._d["steps"])).encode())
        return h.hexdigest()


def run(cfg: Config, base_jobs: Optional[List[Tuple[int, ...]]] = None,
        wa=None, initial_stopped: Tuple[int, ...] = ()) -> ExecutionTrace:
    """Execute one run under a built-in scheduler."""
    data = core.run_core(
        n=cfg.n,
        m=cfg.m,
        beta=cfg.beta,
        f=cfg.f,
        flagged=cfg.flagged,
        writeall=cfg.writeall,
        leftover_free=cfg.leftover_free or cfg.writeall,
        scheduler=SCHEDULER_CODES[cfg.scheduler],
        seed=cfg.seed,
        crash_times=list(cfg.crash_times) if cfg.crash_times is not None else None,
        starvation_factor=cfg.starvation_factor,
        max_steps=cfg.effective_max_steps,
        initial_stopped=initial_stopped,
        base_jobs=base_jobs,
        wa=wa,
    )
    return ExecutionTrace(cfg, data, base_jobs=base_jobs, wa=wa)


# -- adversary objects (pure path) -------------------------------------------

STEP = "step"
CRASH = "crash"
HALT = "halt"


class Adversary:
    """Omniscient move chooser; observes the whole engine state."""

    def next_move(self, view: "EngineView") -> Tuple[str, int]:  # pragma: no cover
        raise NotImplementedError


class EngineView:
    """What an adversary may observe: everything."""

    def __init__(self, cfg: Config, shm: SharedMemory, procs: List[ProcessState],
                 crashes_used: int, step_index: int) -> None:
        self.cfg = cfg
        self.shm = shm
        self.procs = procs
        self.crashes_used = crashes_used
        self.step_index = step_index

    def live_non_ended(self) -> List[int]:
        barrier_open = all(
            p.status in TERMINAL_STATUSES or p.status in DRAIN_STATUSES
            for p in self.procs[1:]
        )
        out = []
        for p in self.procs[1:]:
            if p.status in TERMINAL_STATUSES:
                continue
            if p.status in DRAIN_STATUSES and not barrier_open:
                continue
            out.append(p.pid)
        return out


class ScriptedAdversary(Adversary):
    """Replays an explicit move list; used by counterexample replay."""

    def __init__(self, moves: Sequence[Tuple[str, int]]) -> None:
        self.moves = list(moves)
        self.i = 0

    def next_move(self, view: EngineView) -> Tuple[str, int]:
        if self.i >= len(self.moves):
            return (HALT, 0)
        mv = self.moves[self.i]
        self.i += 1
        return mv


class RoundRobinAdversary(Adversary):
    """Cycles over live, non-ended processes in pid order; never crashes."""

    def __init__(self, cfg: Config) -> None:
        self.m = cfg.m
        self.cursor = 1

    def next_move(self, view: EngineView) -> Tuple[str, int]:
        cands = view.live_non_ended()
        if not cands:
            return (HALT, 0)
        for off in range(self.m):
            p = ((self.cursor - 1 + off) % self.m) + 1
            if p in cands:
                self.cursor = (p % self.m) + 1
                return (STEP, p)
        return (HALT, 0)


class RandomAdversary(Adversary):
    """Seeded uniform scheduler with scripted crashes and a starvation cap."""

    def __init__(self, cfg: Config, seed: Optional[int] = None,
                 crash_times: Optional[Sequence[Tuple[int, int]]] = None) -> None:
        from ._prng import auto_crash_plan

        self.cfg = cfg
        self.rng = SplitMix64(cfg.seed if seed is None else seed)
        if crash_times is None:
            crash_times = cfg.crash_times
        if crash_times is None:
            crash_times = auto_crash_plan(cfg.seed if seed is None else seed,
                                          cfg.n, cfg.m, cfg.f) if cfg.f > 0 else []
        self.plan = list(crash_times)
        self.plan_idx = 0
        self.last_sched = [0] * (cfg.m + 1)

    def next_move(self, view: EngineView) -> Tuple[str, int]:
        t = view.step_index
        if self.plan_idx < len(self.plan) and self.plan[self.plan_idx][0] <= t:
            target = self.plan[self.plan_idx][1]
            self.plan_idx += 1
            return (CRASH, target)
        cands = view.live_non_ended()
        if not cands:
            return (HALT, 0)
        cap = self.cfg.m * self.cfg.starvation_factor
        overdue = [p for p in cands if t - self.last_sched[p] >= cap]
        if overdue:
            target = min(overdue, key=lambda p: (self.last_sched[p], p))
        else:
            target = cands[self.rng.bounded(len(cands))]
        self.last_sched[target] = t
        return (STEP, target)


class Theorem3Adversary(Adversary):
    """Worst-case strategy: announce-then-crash m-1 processes, run the last."""

    def __init__(self, cfg: Config) -> None:
        if cfg.m < 2 or cfg.f != cfg.m - 1 or cfg.beta < cfg.m:
            raise ConfigurationError("theorem3 adversary needs m >= 2, f = m-1, beta >= m")
        self.phase = 1
        self.m = cfg.m

    def next_move(self, view: EngineView) -> Tuple[str, int]:
        while self.phase < self.m:
            p = self.phase
            if view.procs[p].status in TERMINAL_STATUSES:
                self.phase += 1
                continue
            if view.shm.next_cells[p] != 0:
                self.phase += 1
                return (CRASH, p)
            return (STEP, p)
        if view.procs[self.m].status in TERMINAL_STATUSES:
            return (HALT, 0)
        return (STEP, self.m)


def round_robin_adversary(cfg: Config) -> RoundRobinAdversary:
    return RoundRobinAdversary(cfg)


def random_adversary(cfg: Config, seed: Optional[int] = None,
                     crash_times: Optional[Sequence[Tuple[int, int]]] = None) -> RandomAdversary:
    return RandomAdversary(cfg, seed=seed, crash_times=crash_times)


def theorem3_adversary(cfg: Config) -> Theorem3Adversary:
    return Theorem3Adversary(cfg)


def run_with_adversary(cfg: Config, adv: Adversary,
                       base_jobs: Optional[List[Tuple[int, ...]]] = None,
                       wa=None, initial_stopped: Tuple[int, ...] = ()) -> ExecutionTrace:
    """Drive the pure automaton with an arbitrary adversary object."""
    shm = SharedMemory(cfg.m, cfg.n, wa=wa)
    procs: List[ProcessState] = [None] + [  # type: ignore[list-item]
        ProcessState(pid=p, m=cfg.m, n=cfg.n, beta=cfg.beta, flagged=cfg.flagged)
        for p in range(1, cfg.m + 1)
    ]
    for p in initial_stopped:
        procs[p].status = S_STOP

    cols = {k: [] for k in ("actions", "pids", "args", "reads", "writes",
                            "set_ops", "rank_charges")}
    events = {k: [] for k in ("dos", "crashes", "witnesses", "done_writes",
                              "flag_raises", "terminations")}
    crashes_used = 0
    crash_targeted = [False] * (cfg.m + 1)
    t = 0
    truncated = False
    total_set_ops = 0
    total_rank = 0

    while not all(p.status in TERMINAL_STATUSES for p in procs[1:]):
        if t >= cfg.effective_max_steps:
            truncated = True
            break
        kind, target = adv.next_move(EngineView(cfg, shm, procs, crashes_used, t))
        if kind == HALT:
            truncated = True
            break
        if not 1 <= target <= cfg.m:
            raise AdversaryProtocolError(f"move names process {target} outside 1..{cfg.m}")
        if kind == CRASH:
            if crashes_used >= cfg.f:
                raise AdversaryProtocolError(f"crash budget {cfg.f} exceeded at move {t}")
            if crash_targeted[target]:
                raise AdversaryProtocolError(f"process {target} crashed twice")
            crash_targeted[target] = True
            crashes_used += 1
            crash_process(procs[target])
            events["crashes"].append((t, target))
            for key, val in (("actions", A_CRASH), ("pids", target), ("args", 0),
                             ("reads", 0), ("writes", 0), ("set_ops", 0),
                             ("rank_charges", 0)):
                cols[key].append(val)
        elif kind == STEP:
            st = procs[target]
            if st.status in TERMINAL_STATUSES:
                raise AdversaryProtocolError(f"process {target} stepped after it terminated")
            res = automaton_step(st, shm, t, writeall=cfg.writeall, base_jobs=base_jobs,
                                 leftover_free=cfg.leftover_free or cfg.writeall)
            cols["actions"].append(res.action)
            cols["pids"].append(target)
            cols["args"].append(res.arg)
            cols["reads"].append(res.reads)
            cols["writes"].append(res.writes)
            cols["set_ops"].append(res.set_ops)
            cols["rank_charges"].append(res.rank_charge)
            total_set_ops += res.set_ops
            total_rank += res.rank_charge
            if res.did_job:
                events["dos"].append((t, target, res.did_job))
            if res.done_write[1]:
                events["done_writes"].append((t, target, res.done_write[0], res.done_write[1]))
            if res.flag_raised:
                events["flag_raises"].append((t, target))
            if res.ended:
                events["terminations"].append((t, target))
            for (q, job, kind_w, read_step) in res.emitted_witnesses:
                events["witnesses"].append((t, target, q, job, kind_w, read_step))
        else:
            raise AdversaryProtocolError(f"unknown move kind {kind!r}")
        t += 1

    data = dict(cols)
    data.update(events)
    data.update({
        "final_statuses": tuple(p.status for p in procs[1:]),
        "leftovers": {p.pid: p.leftover for p in procs[1:] if p.leftover is not None},
        "final_next": tuple(shm.next_cells[1:]),
        "final_rows": tuple(shm.row_prefix(q) for q in range(1, cfg.m + 1)),
        "final_flag": shm.flag,
        "final_pos": tuple(tuple(p.pos[1:]) for p in procs[1:]),
        "counters": {
            "transitions": t,
            "shm_reads": shm.reads,
            "shm_writes": shm.writes,
            "set_ops": total_set_ops,
            "rank_charges": total_rank,
        },
        "truncated": truncated,
        "steps": t,
        "crashes_used": crashes_used,
    })
    return ExecutionTrace(cfg, data, base_jobs=base_jobs, wa=wa)
