"""Per-process transition function for the at-most-once algorithm.

Each process owns three sets over the job universe: FREE (jobs it believes
available), DONE (jobs it knows performed) and TRY (jobs it last saw
announced by others).  The round structure is: pick a candidate by rank,
announce it, sweep the announce cells, poll the done rows, then check the
candidate is in neither TRY nor DONE before performing it.

A process terminates when fewer than ``beta`` candidates remain visible.
In flagged mode it instead raises a shared termination flag and re-scans
memory ("drains") before ending, returning the set of jobs it can prove
nobody will perform; the drain statuses exist so the scan stays one shared
access per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .events import (
    A_CHECK,
    A_COMP_NEXT,
    A_DO,
    A_DONE,
    A_DRAIN_DONE,
    A_DRAIN_TRY,
    A_GATHER_DONE,
    A_GATHER_TRY,
    A_SET_NEXT,
    S_CHECK,
    S_COMP_NEXT,
    S_DO,
    S_DONE,
    S_DRAIN_DONE,
    S_DRAIN_TRY,
    S_END,
    S_GATHER_DONE,
    S_GATHER_TRY,
    S_SET_NEXT,
    S_STOP,
    W_DONE,
    W_TRY,
    log_weight,
)
from .ranked_set import RankedSet, select_excluding
from .registers import SharedMemory


class BugTrap(AssertionError):
    """An internal guard the algorithm's invariants make unreachable fired."""


@dataclass
class ProcessState:
    """Automaton state of one process, plus the drain-phase cursors."""

    pid: int
    m: int
    n: int
    beta: int
    flagged: bool = False
    status: int = S_COMP_NEXT
    free: RankedSet = field(default=None)  # type: ignore[assignment]
    done: RankedSet = field(default=None)  # type: ignore[assignment]
    try_set: RankedSet = field(default=None)  # type: ignore[assignment]
    pos: List[int] = field(default=None)  # type: ignore[assignment]
    nxt: int = 0  # 0 = undefined
    q: int = 1
    drain_try: Optional[RankedSet] = None
    # collision observations since the last candidate pick: (q, job, kind, step)
    witnesses: List[Tuple[int, int, int, int]] = field(default_factory=list)
    leftover: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.free is None:
            self.free = RankedSet(self.n, full=True)
        if self.done is None:
            self.done = RankedSet(self.n)
        if self.try_set is None:
            self.try_set = RankedSet(self.n)
        if self.pos is None:
            self.pos = [1] * (self.m + 1)

    @property
    def terminated(self) -> bool:
        return self.status in (S_END, S_STOP)


@dataclass
class StepResult:
    """Observable effects of one automaton step."""

    action: int
    arg: int = 0
    reads: int = 0
    writes: int = 0
    set_ops: int = 0
    rank_charge: int = 0
    did_job: int = 0          # job performed by a do step, else 0
    done_write: Tuple[int, int] = (0, 0)  # (slot, job) for a done step
    emitted_witnesses: Tuple[Tuple[int, int, int, int], ...] = ()
    flag_raised: bool = False
    ended: bool = False


def free_minus_try_size(st: ProcessState) -> Tuple[int, int]:
    """|FREE \\ TRY| and the membership ops spent computing it."""
    overlap = 0
    ops = 0
    for x in st.try_set:
        ops += 1
        if st.free.contains(x):
            overlap += 1
    return len(st.free) - overlap, ops


def target_rank(pid: int, m: int, free_size: int) -> int:
    """Rank used to spread candidate picks across processes.

    Exact integer form of splitting the visible pool into m intervals and
    taking the first element of interval ``pid``; falls back to rank = pid
    when the pool is too small to split.
    """
    if free_size - (m - 1) >= m:
        return ((pid - 1) * (free_size - m + 1)) // m + 1
    return pid


def leftover_ids(st: ProcessState, subtract_try: bool, charge: bool) -> Tuple[Tuple[int, ...], int]:
    """FREE (optionally minus TRY) as sorted ids, plus membership ops charged."""
    ops = 0
    if not subtract_try:
        return tuple(st.free.to_list()), ops
    out = []
    try_set = st.try_set
    for x in st.free:
        if charge:
            ops += 1
        if not try_set._member[x]:
            out.append(x)
    return tuple(out), ops


_ENABLED = {
    S_COMP_NEXT: A_COMP_NEXT,
    S_SET_NEXT: A_SET_NEXT,
    S_GATHER_TRY: A_GATHER_TRY,
    S_GATHER_DONE: A_GATHER_DONE,
    S_CHECK: A_CHECK,
    S_DO: A_DO,
    S_DONE: A_DONE,
    S_DRAIN_TRY: A_DRAIN_TRY,
    S_DRAIN_DONE: A_DRAIN_DONE,
}


def enabled_action(st: ProcessState) -> Optional[int]:
    """The unique locally controlled action the status enables, or None
    once the process has ended or crashed."""
    return _ENABLED.get(st.status)


def step(st: ProcessState, shm: SharedMemory, step_index: int,
         writeall: bool = False, base_jobs: Optional[List[Tuple[int, ...]]] = None,
         leftover_free: bool = False) -> StepResult:
    """Run the unique enabled action of ``st`` and return its effects.

    ``base_jobs`` maps job ids to base-job tuples when jobs are super-jobs;
    in write-all mode a do step also writes one wa cell per base job.
    ``leftover_free`` makes the drain return FREE instead of FREE minus TRY.
    """
    s = st.status
    if s == S_COMP_NEXT:
        return _comp_next(st, shm, step_index, leftover_free)
    if s == S_SET_NEXT:
        shm.write_next(st.pid, st.nxt)
        st.status = S_GATHER_TRY
        return StepResult(action=A_SET_NEXT, arg=st.nxt, writes=1)
    if s == S_GATHER_TRY:
        return _gather_try(st, shm, step_index)
    if s == S_GATHER_DONE:
        return _gather_done(st, shm, step_index)
    if s == S_CHECK:
        return _check(st, shm)
    if s == S_DO:
        return _do(st, shm, writeall, base_jobs)
    if s == S_DONE:
        return _done(st, shm)
    if s == S_DRAIN_TRY:
        return _drain_try(st, shm)
    if s == S_DRAIN_DONE:
        return _drain_done(st, shm, leftover_free)
    raise BugTrap(f"no enabled action in status {s}")


def crash(st: ProcessState) -> None:
    """Adversary stop action; a no-op on already-ended processes."""
    if st.status != S_END:
        st.status = S_STOP
    st.witnesses.clear()


def _comp_next(st: ProcessState, shm: SharedMemory, step_index: int,
               leftover_free: bool) -> StepResult:
    st.witnesses.clear()
    visible, ops = free_minus_try_size(st)
    if visible >= st.beta:
        rank = target_rank(st.pid, st.m, len(st.free))
        st.nxt = select_excluding(st.free, list(st.try_set), rank)
        charge = (len(st.try_set) + 1) * log_weight(st.n)
        st.q = 1
        st.try_set = RankedSet(st.n)
        st.status = S_SET_NEXT
        return StepResult(action=A_COMP_NEXT, arg=st.nxt, set_ops=ops, rank_charge=charge)
    if not st.flagged:
        st.leftover, _ = leftover_ids(st, subtract_try=True, charge=False)
        st.status = S_END
        return StepResult(action=A_COMP_NEXT, arg=0, set_ops=ops, ended=True)
    shm.raise_flag(st.pid)
    _enter_drain(st)
    return StepResult(action=A_COMP_NEXT, arg=0, set_ops=ops, writes=1, flag_raised=True)


def _gather_try(st: ProcessState, shm: SharedMemory, step_index: int) -> StepResult:
    arg = -1
    reads = 0
    set_ops = 0
    if st.q != st.pid:
        v = shm.read_next(st.pid, st.q)
        reads = 1
        arg = v
        if 1 <= v <= st.n:
            st.try_set.insert(v)
            set_ops = 1
        if v == st.nxt:
            st.witnesses.append((st.q, st.nxt, W_TRY, step_index))
    if st.q + 1 <= st.m:
        st.q += 1
    else:
        st.q = 1
        st.status = S_GATHER_DONE
    return StepResult(action=A_GATHER_TRY, arg=arg, reads=reads, set_ops=set_ops)


def _gather_done(st: ProcessState, shm: SharedMemory, step_index: int) -> StepResult:
    arg = -1
    reads = 0
    set_ops = 0
    q = st.q
    if q != st.pid and st.pos[q] <= st.n:
        v = shm.read_done(st.pid, q, st.pos[q])
        reads = 1
        arg = v
        if v > 0:
            # Observational test, not charged: collision detection per the
            # done-cell read with the candidate absent from TRY.
            if v == st.nxt and not st.try_set._member[v]:
                st.witnesses.append((q, st.nxt, W_DONE, step_index))
            if not st.done.insert(v):
                raise BugTrap(f"done value {v} reported twice to process {st.pid}")
            if not st.free.remove(v):
                raise BugTrap(f"job {v} left FREE twice for process {st.pid}")
            set_ops = 2
            st.pos[q] += 1  # stay on this row next step
        else:
            st.q += 1
    else:
        st.q += 1
    if st.q > st.m:
        st.q = 1
        st.status = S_CHECK
    return StepResult(action=A_GATHER_DONE, arg=arg, reads=reads, set_ops=set_ops)


def _check(st: ProcessState, shm: SharedMemory) -> StepResult:
    reads = 0
    if st.flagged:
        reads = 1
        if shm.read_flag(st.pid) == 1:
            _enter_drain(st)
            return StepResult(action=A_CHECK, arg=2, reads=reads)
    set_ops = 1
    blocked = st.try_set.contains(st.nxt)
    if not blocked:
        set_ops = 2
        blocked = st.done.contains(st.nxt)
    if blocked:
        st.status = S_COMP_NEXT
        emitted = tuple(st.witnesses)
        if not emitted:
            raise BugTrap("failed check without a collision observation")
        return StepResult(action=A_CHECK, arg=0, reads=reads, set_ops=set_ops,
                          emitted_witnesses=emitted)
    st.status = S_DO
    return StepResult(action=A_CHECK, arg=1, reads=reads, set_ops=set_ops)


def _do(st: ProcessState, shm: SharedMemory, writeall: bool,
        base_jobs: Optional[List[Tuple[int, ...]]]) -> StepResult:
    writes = 0
    if writeall:
        expansion = base_jobs[st.nxt] if base_jobs is not None else (st.nxt,)
        for b in expansion:
            shm.wa_write(st.pid, b)
        writes = len(expansion)
    st.status = S_DONE
    return StepResult(action=A_DO, arg=st.nxt, writes=writes, did_job=st.nxt)


def _done(st: ProcessState, shm: SharedMemory) -> StepResult:
    slot = st.pos[st.pid]
    shm.write_done(st.pid, slot, st.nxt)
    if not st.done.insert(st.nxt):
        raise BugTrap(f"process {st.pid} recorded job {st.nxt} twice")
    if not st.free.remove(st.nxt):
        raise BugTrap(f"job {st.nxt} left FREE twice for process {st.pid}")
    st.pos[st.pid] += 1
    st.status = S_COMP_NEXT
    return StepResult(action=A_DONE, arg=st.nxt, writes=1, set_ops=2,
                      done_write=(slot, st.nxt))


def _enter_drain(st: ProcessState) -> None:
    st.drain_try = RankedSet(st.n)
    st.q = 1
    st.status = S_DRAIN_TRY
    st.witnesses.clear()


def _drain_try(st: ProcessState, shm: SharedMemory) -> StepResult:
    # Unlike the gather sweep, the drain reads its own announce cell too, so
    # every drained view is a pure function of shared memory.
    v = shm.read_next(st.pid, st.q)
    set_ops = 0
    if 1 <= v <= st.n:
        st.drain_try.insert(v)
        set_ops = 1
    if st.q + 1 <= st.m:
        st.q += 1
    else:
        st.try_set = st.drain_try
        st.drain_try = None
        st.q = 1
        st.status = S_DRAIN_DONE
    return StepResult(action=A_DRAIN_TRY, arg=v, reads=1, set_ops=set_ops)


def _drain_done(st: ProcessState, shm: SharedMemory, leftover_free: bool) -> StepResult:
    arg = -1
    reads = 0
    set_ops = 0
    q = st.q
    if q != st.pid and st.pos[q] <= st.n:
        v = shm.read_done(st.pid, q, st.pos[q])
        reads = 1
        arg = v
        if v > 0:
            if not st.done.insert(v):
                raise BugTrap(f"done value {v} reported twice to process {st.pid}")
            if not st.free.remove(v):
                raise BugTrap(f"job {v} left FREE twice for process {st.pid}")
            set_ops = 2
            st.pos[q] += 1
        else:
            st.q += 1
    else:
        st.q += 1
    ended = False
    if st.q > st.m:
        st.leftover, ops = leftover_ids(st, subtract_try=not leftover_free, charge=True)
        set_ops += ops
        st.status = S_END
        ended = True
    return StepResult(action=A_DRAIN_DONE, arg=arg, reads=reads, set_ops=set_ops, ended=ended)
