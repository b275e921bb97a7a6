"""Iterated runs over super-job levels, and the Write-All variant.

The level algorithm is the flagged automaton with termination parameter
3*m^2.  Jobs at one level are groups of consecutive base jobs; between
invocations the engine's scheduler barrier lets every participant finish
its drain against quiescent memory, so all survivors return the same
leftover set and the next level's grouping is consistent everywhere.

The plain iterated driver feeds the drained FREE-minus-TRY set forward
(announced-but-unperformed jobs are sacrificed to preserve at-most-once);
the Write-All driver feeds FREE forward and finishes with every survivor
writing out whatever remains, which gives at-least-once coverage of the
whole array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from . import core
from ._prng import SplitMix64
from ._pyrun import SCHEDULER_CODES
from .engine import ExecutionTrace
from .events import log_weight
from .ledger import WorkReport
from .registers import ConfigurationError, InvariantError

LEVEL_SEED_SALT = 0xA0761D6478BD642F
CRASH_SEED_SALT = 0xE7037ED1A0B428DB
SWEEP_SEED_SALT = 0x8EBC6AF09C88C6E3

LEVEL_BETA_FACTOR = 3  # level termination parameter is 3 * m^2


@dataclass(frozen=True)
class SuperJob:
    """A group of consecutive base jobs addressed as one task at a level."""

    id: int
    level: int
    base_jobs: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.base_jobs:
            raise ValueError("super-jobs carry at least one base job")


@dataclass(frozen=True)
class LevelSchedule:
    """Granularity schedule: 1, m*L(n)*L(m), descending powers, then 1."""

    n: int
    m: int
    eps: float
    inv_eps: int
    granularities: Tuple[int, ...]

    @classmethod
    def build(cls, n: int, m: int, eps: float) -> "LevelSchedule":
        if eps <= 0:
            raise ConfigurationError("epsilon must be positive")
        inv = round(1.0 / eps)
        if inv < 1 or abs(inv - 1.0 / eps) > 1e-9:
            raise ConfigurationError("1/epsilon must be a positive integer")
        ln, lm = log_weight(n), log_weight(m)
        sizes = [m * ln * lm]
        for i in range(1, inv + 1):
            raw = (m ** (1.0 - i * eps)) * ln * (lm ** (1 + i))
            s = max(1, math.ceil(raw))
            sizes.append(min(s, sizes[-1]))  # keep the schedule non-increasing
        sizes.append(1)
        return cls(n=n, m=m, eps=eps, inv_eps=inv,
                   granularities=(1, *sizes))

    @property
    def invocation_sizes(self) -> Tuple[int, ...]:
        return self.granularities[1:]


def mapf(jobs: Sequence[SuperJob], size1: int, size2: int, level: int) -> List[SuperJob]:
    """Regroup a sorted survivor set from granularity size1 to size2.

    Growing groups ceil(size2/size1) consecutive survivors; shrinking splits
    each survivor into consecutive chunks of size2 base jobs.  New canonical
    ids are 1, 2, 3, ... in ascending order; the union of base jobs is
    preserved exactly.
    """
    js = sorted(jobs, key=lambda sj: sj.id)
    if not js:
        return []
    out: List[SuperJob] = []
    if size2 >= size1:
        g = max(1, math.ceil(size2 / size1))
        for k in range(0, len(js), g):
            base = tuple(b for sj in js[k:k + g] for b in sj.base_jobs)
            out.append(SuperJob(id=len(out) + 1, level=level, base_jobs=base))
    else:
        for sj in js:
            for k in range(0, len(sj.base_jobs), size2):
                out.append(SuperJob(id=len(out) + 1, level=level,
                                    base_jobs=sj.base_jobs[k:k + size2]))
    return out


@dataclass(frozen=True)
class LevelConfig:
    """Config stand-in for one level invocation (universe may be < m)."""

    n: int
    m: int
    beta: int
    f: int
    mode: str
    seed: int
    scheduler: str
    leftover_free: bool


@dataclass
class LevelRecord:
    level: int
    size: int
    job_count: int
    super_jobs_done: int
    base_jobs_done: int
    leftover_count: int
    steps: int
    crashes: int
    work: Optional[WorkReport]
    truncated: bool


@dataclass
class IterativeSummary:
    n: int
    m: int
    f: int
    eps: float
    seed: int
    scheduler: str
    writeall: bool
    schedule: Tuple[int, ...]
    levels: List[LevelRecord]
    traces: List[ExecutionTrace]
    base_jobs_done: int
    leftover_base_jobs: Tuple[int, ...]
    weighted_total: int
    sweep_writes: int
    wa_coverage: Optional[int]
    truncated: bool
    crashes_used: int

    @property
    def effectiveness_floor(self) -> int:
        """Explicit-constant lower bound on base jobs performed."""
        m, n = self.m, self.n
        stages = 2 + round(1.0 / self.eps)
        loss = stages * (m - 1) * m * log_weight(n) * log_weight(m)
        loss += LEVEL_BETA_FACTOR * m * m + m - 2
        return n - loss


def _level_crash_plan(seed: int, m: int, f: int, n_levels: int):
    """Pre-draw crash targets: (level, fraction, pid) with distinct pids."""
    rng = SplitMix64(seed ^ CRASH_SEED_SALT)
    pids = list(range(1, m + 1))
    for i in range(f):
        j = i + rng.bounded(m - i)
        pids[i], pids[j] = pids[j], pids[i]
    plan = []
    for k in range(f):
        level = rng.bounded(n_levels)
        frac = rng.next_u64()
        plan.append((level, frac, pids[k]))
    return plan


def run_kk_prime(jobs: Sequence[SuperJob], level: int, m: int, seed: int,
                 scheduler: str, stopped: Tuple[int, ...],
                 crash_times: Optional[List[Tuple[int, int]]],
                 f_budget: int, leftover_free: bool, writeall: bool,
                 wa=None, starvation_factor: int = 64):
    """One flagged invocation over a level's job set behind the barrier.

    Returns (trace, canonical leftover ids, per-process leftover dict); all
    surviving processes must agree on the leftover set.
    """
    k = len(jobs)
    beta = LEVEL_BETA_FACTOR * m * m
    base_map: List[Tuple[int, ...]] = [()] + [sj.base_jobs for sj in jobs]
    data = core.run_core(
        n=k, m=m, beta=beta, f=f_budget,
        flagged=True, writeall=writeall, leftover_free=leftover_free,
        scheduler=SCHEDULER_CODES[scheduler], seed=seed,
        crash_times=crash_times if crash_times is not None else [],
        starvation_factor=starvation_factor,
        max_steps=64 * max(k, 1) * m * m + 64 * m * m,
        initial_stopped=stopped, base_jobs=base_map, wa=wa,
    )
    cfg = LevelConfig(n=k, m=m, beta=beta, f=f_budget, mode="flagged",
                      seed=seed, scheduler=scheduler, leftover_free=leftover_free)
    trace = ExecutionTrace(cfg, data, base_jobs=base_map, wa=wa)
    views = [trace.leftovers[p] for p in sorted(trace.leftovers)]
    canonical: Tuple[int, ...] = ()
    if views:
        canonical = views[0]
        for v in views[1:]:
            if v != canonical:
                raise InvariantError(
                    f"post-barrier leftover views disagree at level {level}: "
                    f"{views}"
                )
    return trace, canonical, dict(trace.leftovers)


def _run_levels(n: int, m: int, eps: float, f: int, seed: int, scheduler: str,
                writeall: bool, starvation_factor: int = 64) -> IterativeSummary:
    if m < 1 or n < 1:
        raise ConfigurationError("need n >= 1 and m >= 1")
    if not 0 <= f <= m - 1:
        raise ConfigurationError("crash budget must satisfy 0 <= f <= m-1")
    if scheduler not in ("rr", "random"):
        raise ConfigurationError("iterated runs use the rr or random scheduler")
    sched = LevelSchedule.build(n, m, eps)
    sizes = sched.invocation_sizes
    n_stages = len(sizes) + (1 if writeall else 0)
    plan = _level_crash_plan(seed, m, f, n_stages) if f > 0 else []
    seed_rng = SplitMix64(seed ^ LEVEL_SEED_SALT)
    level_seeds = [seed_rng.next_u64() for _ in range(len(sizes))]

    wa = [0] * (n + 1) if writeall else None
    current: List[SuperJob] = [SuperJob(id=i, level=0, base_jobs=(i,))
                               for i in range(1, n + 1)]
    prev_size = 1
    stopped: Tuple[int, ...] = ()
    crashes_used = 0
    levels: List[LevelRecord] = []
    traces: List[ExecutionTrace] = []
    truncated = False
    weighted = 0
    base_done_total = 0

    for li, size in enumerate(sizes):
        jobs = mapf(current, prev_size, size, level=li + 1)
        prev_size = size
        if not jobs:
            levels.append(LevelRecord(level=li + 1, size=size, job_count=0,
                                      super_jobs_done=0, base_jobs_done=0,
                                      leftover_count=0, steps=0, crashes=0,
                                      work=None, truncated=False))
            current = []
            continue
        # ~1.25x the expected level length, so drawn crash times usually land
        # inside the level (unfired crashes just leave budget unspent).
        k_jobs = max(len(jobs), 1)
        horizon = (k_jobs * (3 * m + 4) + 2 * m * m + 2 * m) * 5 // 4 + 32
        level_crashes = [
            ((frac * horizon) >> 64, pid)
            for (lvl, frac, pid) in plan
            if lvl == li and pid not in stopped
        ]
        level_crashes.sort(key=lambda e: e[0])
        trace, canonical, _ = run_kk_prime(
            jobs, li + 1, m, level_seeds[li], scheduler, stopped,
            level_crashes, f - crashes_used, leftover_free=writeall, writeall=writeall,
            wa=wa, starvation_factor=starvation_factor,
        )
        traces.append(trace)
        crashes_used += trace.crashes_used
        stopped = tuple(sorted(set(stopped) | {p for (_, p) in trace.crashes}))
        truncated = truncated or trace.truncated
        base_done = sum(len(jobs[j - 1].base_jobs) for (_, _, j) in trace.dos)
        base_done_total += base_done
        lw = WorkReport.from_counters(trace.counters, max(len(jobs), 1))
        weighted += lw.weighted_total
        levels.append(LevelRecord(
            level=li + 1, size=size, job_count=len(jobs),
            super_jobs_done=len(trace.dos), base_jobs_done=base_done,
            leftover_count=len(canonical), steps=trace.steps,
            crashes=len(trace.crashes), work=lw, truncated=trace.truncated,
        ))
        current = [jobs[j - 1] for j in canonical]

    leftover_base = tuple(sorted(b for sj in current for b in sj.base_jobs))

    sweep_writes = 0
    if writeall:
        sweep_writes, swept = _final_sweep(
            leftover_base, m, stopped, plan, seed, wa, f - crashes_used,
            stage=len(sizes))
        crashes_used += swept
    else:
        weighted += base_done_total  # unit charge per base job performed

    wa_cov = sum(wa[1:]) if writeall else None
    if writeall:
        weighted += sweep_writes

    return IterativeSummary(
        n=n, m=m, f=f, eps=eps, seed=seed, scheduler=scheduler,
        writeall=writeall, schedule=sched.granularities, levels=levels,
        traces=traces, base_jobs_done=base_done_total,
        leftover_base_jobs=leftover_base, weighted_total=weighted,
        sweep_writes=sweep_writes, wa_coverage=wa_cov, truncated=truncated,
        crashes_used=crashes_used,
    )


def _final_sweep(leftover: Tuple[int, ...], m: int, stopped: Tuple[int, ...],
                 plan, seed: int, wa, budget: int, stage: int) -> Tuple[int, int]:
    """Write-All tail: every survivor performs the whole leftover set."""
    survivors = [p for p in range(1, m + 1) if p not in stopped]
    cursors = {p: 0 for p in survivors}
    total = len(leftover) * len(survivors)
    sweep_crashes = sorted(
        (((frac * max(total, 1)) >> 64), pid)
        for (lvl, frac, pid) in plan if lvl == stage and pid not in stopped
    )
    rng = SplitMix64(seed ^ SWEEP_SEED_SALT)
    writes = 0
    crashed = 0
    t = 0
    ci = 0
    while True:
        live = [p for p in survivors if cursors.get(p) is not None
                and cursors[p] < len(leftover)]
        if not live:
            break
        if ci < len(sweep_crashes) and sweep_crashes[ci][0] <= t and crashed < budget:
            pid = sweep_crashes[ci][1]
            ci += 1
            if cursors.get(pid) is not None:
                cursors[pid] = None  # crashed mid-sweep
                crashed += 1
            t += 1
            continue
        p = live[rng.bounded(len(live))]
        job = leftover[cursors[p]]
        wa[job] = 1
        writes += 1
        cursors[p] += 1
        t += 1
    return writes, crashed


def run_iterative(n: int, m: int, eps: float, f: int = 0, seed: int = 0,
                  scheduler: str = "random",
                  starvation_factor: int = 64) -> IterativeSummary:
    """Iterated at-most-once execution (super-job levels, flagged runs)."""
    return _run_levels(n, m, eps, f, seed, scheduler, writeall=False,
                       starvation_factor=starvation_factor)


def run_writeall(n: int, m: int, eps: float, f: int = 0, seed: int = 0,
                 scheduler: str = "random",
                 starvation_factor: int = 64) -> IterativeSummary:
    """Write-All execution: same schedule, FREE fed forward, final sweep."""
    return _run_levels(n, m, eps, f, seed, scheduler, writeall=True,
                       starvation_factor=starvation_factor)
