"""Pure-Python execution core: one move per loop iteration.

This is the reference implementation of the run loop; ``amosim._core``
re-implements it in Cython and must produce byte-identical trace payloads
(see tests/test_kernel_equivalence.py).
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from ._prng import SplitMix64, auto_crash_plan
from .automaton import ProcessState, crash as crash_process, step as automaton_step
from .events import (
    A_CRASH,
    DRAIN_STATUSES,
    S_STOP,
    TERMINAL_STATUSES,
)
from .registers import SharedMemory

SCHED_RR = 0
SCHED_RANDOM = 1
SCHED_THEOREM3 = 2
SCHED_CRASH_AT = 3

SCHEDULER_CODES = {
    "rr": SCHED_RR,
    "random": SCHED_RANDOM,
    "theorem3": SCHED_THEOREM3,
    "crash-at": SCHED_CRASH_AT,
}


class AdversaryProtocolError(RuntimeError):
    """The adversary issued a move its contract forbids."""


def run_core(
    n: int,
    m: int,
    beta: int,
    f: int,
    flagged: bool,
    writeall: bool,
    leftover_free: bool,
    scheduler: int,
    seed: int,
    crash_times: Optional[List[Tuple[int, int]]],
    starvation_factor: int,
    max_steps: int,
    initial_stopped: Tuple[int, ...] = (),
    base_jobs: Optional[List[Tuple[int, ...]]] = None,
    wa=None,
) -> dict:
    shm = SharedMemory(m, n, wa=wa)
    procs = [None] + [
        ProcessState(pid=p, m=m, n=n, beta=beta, flagged=flagged) for p in range(1, m + 1)
    ]
    for p in initial_stopped:
        procs[p].status = S_STOP

    if crash_times is None:
        crash_times = auto_crash_plan(seed, n, m, f) if (scheduler == SCHED_RANDOM and f > 0) else []
    crash_times = list(crash_times)

    rng = SplitMix64(seed)
    actions: List[int] = []
    pids: List[int] = []
    args: List[int] = []
    reads: List[int] = []
    writes: List[int] = []
    set_ops: List[int] = []
    rank_charges: List[int] = []
    dos: List[Tuple[int, int, int]] = []
    crashes: List[Tuple[int, int]] = []
    witnesses: List[Tuple[int, int, int, int, int, int]] = []
    done_writes: List[Tuple[int, int, int, int]] = []
    flag_raises: List[Tuple[int, int]] = []
    terminations: List[Tuple[int, int]] = []

    crashes_used = 0
    crash_targeted = [False] * (m + 1)
    plan_idx = 0
    rr_cursor = 1
    last_sched = [0] * (m + 1)
    t3_phase = 1  # theorem3: next process to run-and-crash
    t = 0
    truncated = False
    total_set_ops = 0
    total_rank = 0

    def schedulable_pids() -> List[int]:
        barrier_open = True
        for p in range(1, m + 1):
            if procs[p].status not in TERMINAL_STATUSES and procs[p].status not in DRAIN_STATUSES:
                barrier_open = False
                break
        out = []
        for p in range(1, m + 1):
            s = procs[p].status
            if s in TERMINAL_STATUSES:
                continue
            if s in DRAIN_STATUSES and not barrier_open:
                continue
            out.append(p)
        return out

    def all_terminated() -> bool:
        return all(procs[p].status in TERMINAL_STATUSES for p in range(1, m + 1))

    while not all_terminated():
        if t >= max_steps:
            truncated = True
            break
        # -- choose a move -------------------------------------------------
        move_kind = 0  # 0 = step, 1 = crash
        target = 0
        if scheduler in (SCHED_RANDOM, SCHED_CRASH_AT) and plan_idx < len(crash_times) \
                and crash_times[plan_idx][0] <= t:
            target = crash_times[plan_idx][1]
            plan_idx += 1
            move_kind = 1
        elif scheduler == SCHED_THEOREM3:
            if t3_phase < m and procs[t3_phase].status not in TERMINAL_STATUSES:
                target = t3_phase
                if shm.next_cells[target] != 0:
                    move_kind = 1
                    t3_phase += 1
            elif t3_phase < m:
                t3_phase += 1
                continue
            else:
                target = m
        else:
            cands = schedulable_pids()
            if not cands:
                truncated = True
                break
            if scheduler == SCHED_RANDOM:
                overdue = [p for p in cands if t - last_sched[p] >= m * starvation_factor]
                if overdue:
                    target = min(overdue, key=lambda p: (last_sched[p], p))
                else:
                    target = cands[rng.bounded(len(cands))]
                last_sched[target] = t
            else:  # round robin (rr and crash-at between scripted crashes)
                target = 0
                for off in range(m):
                    p = ((rr_cursor - 1 + off) % m) + 1
                    if p in cands:
                        target = p
                        break
                rr_cursor = (target % m) + 1

        # -- apply it ------------------------------------------------------
        if move_kind == 1:
            if crashes_used >= f:
                raise AdversaryProtocolError(f"crash budget {f} exceeded at move {t}")
            if crash_targeted[target]:
                raise AdversaryProtocolError(f"process {target} crashed twice")
            crash_targeted[target] = True
            crashes_used += 1
            crash_process(procs[target])
            crashes.append((t, target))
            actions.append(A_CRASH)
            pids.append(target)
            args.append(0)
            reads.append(0)
            writes.append(0)
            set_ops.append(0)
            rank_charges.append(0)
        else:
            st = procs[target]
            res = automaton_step(st, shm, t, writeall=writeall, base_jobs=base_jobs,
                                 leftover_free=leftover_free)
            actions.append(res.action)
            pids.append(target)
            args.append(res.arg)
            reads.append(res.reads)
            writes.append(res.writes)
            set_ops.append(res.set_ops)
            rank_charges.append(res.rank_charge)
            total_set_ops += res.set_ops
            total_rank += res.rank_charge
            if res.did_job:
                dos.append((t, target, res.did_job))
            if res.done_write[1]:
                done_writes.append((t, target, res.done_write[0], res.done_write[1]))
            if res.flag_raised:
                flag_raises.append((t, target))
            if res.ended:
                terminations.append((t, target))
            for (q, job, kind, read_step) in res.emitted_witnesses:
                witnesses.append((t, target, q, job, kind, read_step))
        t += 1

    leftovers = {
        p: procs[p].leftover for p in range(1, m + 1) if procs[p].leftover is not None
    }
    return {
        "actions": actions,
        "pids": pids,
        "args": args,
        "reads": reads,
        "writes": writes,
        "set_ops": set_ops,
        "rank_charges": rank_charges,
        "dos": dos,
        "crashes": crashes,
        "witnesses": witnesses,
        "done_writes": done_writes,
        "flag_raises": flag_raises,
        "terminations": terminations,
        "final_statuses": tuple(procs[p].status for p in range(1, m + 1)),
        "leftovers": leftovers,
        "final_next": tuple(shm.next_cells[1:]),
        "final_rows": tuple(shm.row_prefix(q) for q in range(1, m + 1)),
        "final_flag": shm.flag,
        "final_pos": tuple(tuple(procs[p].pos[1:]) for p in range(1, m + 1)),
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
    }
