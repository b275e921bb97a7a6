"""Trace checkers: at-most-once, effectiveness bounds, work, collisions.

All functions are pure over ExecutionTrace objects.  Multi-level runs are
checked by passing a sequence of traces; base-job expansion uses each
trace's own super-job map.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .engine import Config, ExecutionTrace
from .events import log_weight

Traces = Union[ExecutionTrace, Sequence[ExecutionTrace]]


def _as_traces(tr: Traces) -> Sequence[ExecutionTrace]:
    return [tr] if isinstance(tr, ExecutionTrace) else list(tr)


@dataclass(frozen=True)
class AmoViolation:
    job: int
    events: Tuple[Tuple[int, int, int], ...]  # (step, pid, base_job)


@dataclass(frozen=True)
class AmoResult:
    ok: bool
    violations: Tuple[AmoViolation, ...] = ()


def check_at_most_once(tr: Traces) -> AmoResult:
    """Every base job is performed at most once across the given traces."""
    seen: Dict[int, List[Tuple[int, int, int]]] = defaultdict(list)
    for trace in _as_traces(tr):
        for (t, p, b) in trace.base_do_jobs():
            seen[b].append((t, p, b))
    violations = tuple(
        AmoViolation(job=b, events=tuple(evs)) for b, evs in sorted(seen.items()) if len(evs) > 1
    )
    return AmoResult(ok=not violations, violations=violations)


def effectiveness(tr: Traces) -> int:
    """Number of distinct base jobs performed."""
    jobs = set()
    for trace in _as_traces(tr):
        for (_, _, b) in trace.base_do_jobs():
            jobs.add(b)
    return len(jobs)


def effectiveness_bound(n: int, m: int, beta: int) -> int:
    return n - (beta + m - 2)


@dataclass(frozen=True)
class BoundResult:
    ok: bool
    done: int
    bound: int
    universal_headroom: int  # distance below the n - f ceiling over all algorithms


def check_effectiveness_bound(tr: ExecutionTrace, cfg: Optional[Config] = None) -> BoundResult:
    """Completed fair runs must perform at least n - (beta + m - 2) jobs."""
    if cfg is None:
        cfg = tr.cfg
    if tr.truncated:
        raise ValueError("effectiveness bound applies to completed executions only")
    done = effectiveness(tr)
    bound = effectiveness_bound(cfg.n, cfg.m, cfg.beta)
    return BoundResult(
        ok=done >= bound,
        done=done,
        bound=bound,
        universal_headroom=(cfg.n - cfg.f) - done,
    )


@dataclass(frozen=True)
class WorkReport:
    transitions: int
    shm_reads: int
    shm_writes: int
    set_ops: int
    rank_charges: int
    weighted_total: int

    @classmethod
    def from_counters(cls, counters: dict, universe: int) -> "WorkReport":
        weighted = (
            counters["shm_reads"]
            + counters["shm_writes"]
            + counters["set_ops"] * log_weight(universe)
            + counters["rank_charges"]
        )
        return cls(
            transitions=counters["transitions"],
            shm_reads=counters["shm_reads"],
            shm_writes=counters["shm_writes"],
            set_ops=counters["set_ops"],
            rank_charges=counters["rank_charges"],
            weighted_total=weighted,
        )


def work(tr: ExecutionTrace) -> WorkReport:
    """Aggregate the trace's online counters into the weighted work report."""
    return WorkReport.from_counters(tr.counters, tr.cfg.n)


def recompute_work(tr: ExecutionTrace) -> WorkReport:
    """Re-derive the report from the raw move log (must equal ``work``)."""
    reads_col, writes_col, setops_col, rank_col = tr.move_meters
    counters = {
        "transitions": len(tr.actions),
        "shm_reads": sum(reads_col),
        "shm_writes": sum(writes_col),
        "set_ops": sum(setops_col),
        "rank_charges": sum(rank_col),
    }
    return WorkReport.from_counters(counters, tr.cfg.n)


def work_ratio(report: WorkReport, n: int, m: int) -> float:
    """weighted_total normalized by the n*m*log(n)*log(m) work bound shape."""
    return report.weighted_total / (n * m * log_weight(n) * log_weight(m))


@dataclass(frozen=True)
class CollisionLedger:
    """Per ordered pair (p, q): how often p abandoned a job after seeing q claim it."""

    counts: Dict[Tuple[int, int], int]
    events: Tuple[Tuple[int, int, int, int, int, int], ...]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def collision_ledger(tr: ExecutionTrace) -> CollisionLedger:
    counts: Dict[Tuple[int, int], int] = Counter()
    for ev in tr.witnesses:
        (_, p, q, _, _, _) = ev
        counts[(p, q)] += 1
    return CollisionLedger(counts=dict(counts), events=tuple(map(tuple, tr.witnesses)))


def pair_collision_cap(n: int, m: int, p: int, q: int) -> int:
    return 2 * math.ceil(n / (m * abs(q - p)))


def total_collision_cap(n: int, m: int) -> int:
    return 4 * (n + 1) * log_weight(m)


@dataclass(frozen=True)
class CollisionCheck:
    ok: bool
    total: int
    total_cap: int
    max_pair_ratio: float
    violations: Tuple[str, ...]


def check_collision_bounds(tr: ExecutionTrace, cfg: Optional[Config] = None) -> CollisionCheck:
    """Per-pair and total collision caps (proved only for beta >= 3 m^2)."""
    if cfg is None:
        cfg = tr.cfg
    led = collision_ledger(tr)
    violations: List[str] = []
    max_ratio = 0.0
    for (p, q), c in sorted(led.counts.items()):
        cap = pair_collision_cap(cfg.n, cfg.m, p, q)
        max_ratio = max(max_ratio, c / cap)
        if c > cap:
            violations.append(f"pair ({p},{q}): {c} collisions > cap {cap}")
    total_cap = total_collision_cap(cfg.n, cfg.m)
    if cfg.m >= 2 and led.total > total_cap:
        violations.append(f"total collisions {led.total} > cap {total_cap}")
    return CollisionCheck(
        ok=not violations,
        total=led.total,
        total_cap=total_cap,
        max_pair_ratio=max_ratio,
        violations=tuple(violations),
    )


@dataclass(frozen=True)
class DoneRowCheck:
    ok: bool
    mismatches: Tuple[str, ...]


def check_done_rows_vs_do_events(tr: ExecutionTrace) -> DoneRowCheck:
    """Each nonzero done cell records an earlier Do of that job, in order."""
    dos_by_pid: Dict[int, List[Tuple[int, int]]] = defaultdict(list)  # pid -> [(t, job)]
    for (t, p, j) in tr.dos:
        dos_by_pid[p].append((t, j))
    writes_by_pid: Dict[int, List[Tuple[int, int, int]]] = defaultdict(list)
    for (t, p, slot, j) in tr.done_writes:
        writes_by_pid[p].append((t, slot, j))
    mismatches: List[str] = []
    for p in range(1, tr.cfg.m + 1):
        writes = writes_by_pid.get(p, [])
        dos = dos_by_pid.get(p, [])
        if len(writes) > len(dos):
            mismatches.append(f"row {p}: {len(writes)} writes but only {len(dos)} do events")
            continue
        for k, (wt, slot, wj) in enumerate(writes):
            if slot != k + 1:
                mismatches.append(f"row {p}: write #{k + 1} landed in slot {slot}")
            dt, dj = dos[k]
            if wj != dj:
                mismatches.append(f"row {p} slot {slot}: wrote {wj} but do #{k + 1} was {dj}")
            elif wt <= dt:
                mismatches.append(f"row {p} slot {slot}: write at {wt} precedes its do at {dt}")
        # The final matrix must agree with the write log.
        row = tr.final_rows[p - 1]
        if list(row) != [wj for (_, _, wj) in writes]:
            mismatches.append(f"row {p}: final contents {row} disagree with write log")
    return DoneRowCheck(ok=not mismatches, mismatches=tuple(mismatches))


def check_metering(tr: ExecutionTrace) -> bool:
    """Shared-access counters equal the per-move reads/writes in the log."""
    reads_col, writes_col, _, _ = tr.move_meters
    return (
        tr.counters["shm_reads"] == sum(reads_col)
        and tr.counters["shm_writes"] == sum(writes_col)
    )
