"""Pure-Python exhaustive exploration core.

States are canonical tuples; FREE and DONE are derived from the done rows
and read cursors rather than stored, so two interleavings that produced the
same knowledge collapse to one state.  Job sets are bitmasks (bit j-1 =
job j), which caps the explorer universe at 63 jobs - far beyond the
intended desk scale.

The search is a memoized depth-first walk computing, per state, the minimum
number of distinct jobs performed over all completions.  A process is
"pending" when it performed its current job but crashed before recording
it; the pending job rides along in the canonical state so the performed
set stays a function of the state alone.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .events import (
    S_CHECK,
    S_COMP_NEXT,
    S_DO,
    S_DONE,
    S_END,
    S_GATHER_DONE,
    S_GATHER_TRY,
    S_SET_NEXT,
    S_STOP,
)

# Crash moves are only branched where the victim's next action would write
# shared memory or check; crashes elsewhere are behaviorally subsumed.
CRASH_BRANCH_STATUSES = (S_SET_NEXT, S_DONE, S_CHECK)

MAX_EXPLORER_JOBS = 63

_ONSTACK = -2


def target_rank(pid: int, m: int, free_size: int) -> int:
    if free_size - (m - 1) >= m:
        return ((pid - 1) * (free_size - m + 1)) // m + 1
    return pid


def _nth_bit(mask: int, r: int) -> int:
    """1-based id of the r-th lowest set bit."""
    seen = 0
    j = 0
    while mask:
        if mask & 1:
            seen += 1
            if seen == r:
                return j + 1
        mask >>= 1
        j += 1
    raise IndexError(f"rank {r} exceeds population")


def initial_state(n: int, m: int) -> tuple:
    procs = tuple((S_COMP_NEXT, 0, 1, (1,) * m, 0) for _ in range(m))
    return (0, (0,) * m, ((),) * m, procs)


def _done_mask(state: tuple, pid: int) -> int:
    (_, _, rows, procs) = state
    mask = 0
    for b in rows[pid - 1]:
        mask |= 1 << (b - 1)
    pos = procs[pid - 1][3]
    for q in range(1, len(rows) + 1):
        if q == pid:
            continue
        row = rows[q - 1]
        for k in range(min(pos[q - 1] - 1, len(row))):
            mask |= 1 << (row[k] - 1)
    return mask


def performed_mask(state: tuple) -> int:
    (_, _, rows, procs) = state
    mask = 0
    for row in rows:
        for b in row:
            mask |= 1 << (b - 1)
    for pr in procs:
        if pr[0] == S_DONE:
            mask |= 1 << (pr[1] - 1)
        elif pr[0] == S_STOP and pr[1]:
            mask |= 1 << (pr[1] - 1)
    return mask


def is_terminal(state: tuple) -> bool:
    return all(pr[0] in (S_END, S_STOP) for pr in state[3])


def apply_step(state: tuple, pid: int, n: int, m: int, beta: int) -> Tuple[tuple, bool]:
    """Successor after one step of ``pid``; second item flags an
    at-most-once violation (a do of an already-performed job)."""
    (crashes, nxt_cells, rows, procs) = state
    pr = procs[pid - 1]
    status, nxt, q, pos, try_mask = pr
    full = (1 << n) - 1
    violation = False

    if status == S_COMP_NEXT:
        free = full & ~_done_mask(state, pid)
        visible = free & ~try_mask
        vis_count = bin(visible).count("1")
        if vis_count >= beta:
            r = target_rank(pid, m, bin(free).count("1"))
            if r > vis_count:
                # Reachable only for beta < m, where the pick is undefined:
                # the rank falls outside the pool.  No execution extends here.
                return None, False
            job = _nth_bit(visible, r)
            new_pr = (S_SET_NEXT, job, 1, pos, 0)
        else:
            new_pr = (S_END,)
    elif status == S_SET_NEXT:
        nxt_cells = nxt_cells[: pid - 1] + (nxt,) + nxt_cells[pid:]
        new_pr = (S_GATHER_TRY, nxt, q, pos, try_mask)
    elif status == S_GATHER_TRY:
        if q != pid:
            v = nxt_cells[q - 1]
            if 1 <= v <= n:
                try_mask |= 1 << (v - 1)
        if q + 1 <= m:
            new_pr = (S_GATHER_TRY, nxt, q + 1, pos, try_mask)
        else:
            new_pr = (S_GATHER_DONE, nxt, 1, pos, try_mask)
    elif status == S_GATHER_DONE:
        new_q = q
        new_pos = pos
        if q != pid and pos[q - 1] <= n:
            row = rows[q - 1]
            v = row[pos[q - 1] - 1] if pos[q - 1] - 1 < len(row) else 0
            if v > 0:
                new_pos = pos[: q - 1] + (pos[q - 1] + 1,) + pos[q:]
            else:
                new_q = q + 1
        else:
            new_q = q + 1
        if new_q > m:
            new_pr = (S_CHECK, nxt, 1, new_pos, try_mask)
        else:
            new_pr = (S_GATHER_DONE, nxt, new_q, new_pos, try_mask)
    elif status == S_CHECK:
        blocked = (try_mask | _done_mask(state, pid)) >> (nxt - 1) & 1
        if blocked:
            # nxt is dead at comp_next (always reassigned before any read),
            # so canonicalize it away and merge the states.
            new_pr = (S_COMP_NEXT, 0, 1, pos, try_mask)
        else:
            new_pr = (S_DO, nxt, q, pos, try_mask)
    elif status == S_DO:
        if performed_mask(state) >> (nxt - 1) & 1:
            violation = True
        new_pr = (S_DONE, nxt, q, pos, try_mask)
    elif status == S_DONE:
        rows = rows[: pid - 1] + (rows[pid - 1] + (nxt,),) + rows[pid:]
        new_pos = pos[: pid - 1] + (pos[pid - 1] + 1,) + pos[pid:]
        new_pr = (S_COMP_NEXT, 0, 1, new_pos, try_mask)
    else:
        raise AssertionError(f"stepping terminal status {status}")

    procs = procs[: pid - 1] + (new_pr,) + procs[pid:]
    return (crashes, nxt_cells, rows, procs), violation


def apply_crash(state: tuple, pid: int) -> tuple:
    (crashes, nxt_cells, rows, procs) = state
    pr = procs[pid - 1]
    pending = pr[1] if pr[0] == S_DONE else 0
    procs = procs[: pid - 1] + ((S_STOP, pending),) + procs[pid:]
    return (crashes + 1, nxt_cells, rows, procs)


def successors(state: tuple, n: int, m: int, beta: int, f: int,
               prune_crashes: bool,
               blocked_flag: Optional[list] = None) -> List[Tuple[int, tuple, bool]]:
    """(move, successor, violation) triples; move = pid for a step, -pid
    for a crash.  A step whose candidate pick is undefined (beta < m
    corner) is dropped; ``blocked_flag[0]`` is set when that happens."""
    out: List[Tuple[int, tuple, bool]] = []
    procs = state[3]
    for pid in range(1, m + 1):
        if procs[pid - 1][0] not in (S_END, S_STOP):
            succ, viol = apply_step(state, pid, n, m, beta)
            if succ is None:
                if blocked_flag is not None:
                    blocked_flag[0] = True
                continue
            out.append((pid, succ, viol))
    if state[0] < f:
        for pid in range(1, m + 1):
            status = procs[pid - 1][0]
            if status in (S_END, S_STOP):
                continue
            if prune_crashes and status not in CRASH_BRANCH_STATUSES:
                continue
            out.append((-pid, apply_crash(state, pid), False))
    return out


def explore_core(n: int, m: int, beta: int, f: int, depth_limit: int,
                 prune_crashes: bool = True) -> dict:
    if n > MAX_EXPLORER_JOBS:
        raise ValueError(f"explorer handles up to {MAX_EXPLORER_JOBS} jobs")
    root = initial_state(n, m)
    memo: Dict[tuple, int] = {}
    terminals = 0
    max_depth = 0
    nonterm = False
    depth_exceeded = False
    blocked = [False]
    violation_path: Optional[List[int]] = None

    # Iterative DFS frames: [state, successor list, child index, best-so-far].
    UNREACHED = 1 << 30
    stack: List[list] = [[root, None, 0, UNREACHED, 0]]
    memo[root] = _ONSTACK
    while stack:
        frame = stack[-1]
        state, succs, idx, best, _ = frame
        if succs is None:
            if len(stack) > max_depth:
                max_depth = len(stack)
            if len(stack) > depth_limit:
                depth_exceeded = True
                break
            if is_terminal(state):
                terminals += 1
                memo[state] = bin(performed_mask(state)).count("1")
                stack.pop()
                if stack:
                    stack[-1][3] = min(stack[-1][3], memo[state])
                continue
            frame[1] = succs = successors(state, n, m, beta, f, prune_crashes,
                                          blocked_flag=blocked)
        if idx < len(succs):
            frame[2] = idx + 1
            move, child, viol = succs[idx]
            if viol:
                violation_path = [fr[4] for fr in stack[1:]] + [move]
                # fr[4] records the move that produced the frame's state.
                break
            got = memo.get(child)
            if got is None:
                memo[child] = _ONSTACK
                stack.append([child, None, 0, UNREACHED, move])
            elif got == _ONSTACK:
                nonterm = True  # cycle: an infinite execution exists
            else:
                frame[3] = min(frame[3], got)
            continue
        # all children done; best stays UNREACHED when no fair completion
        # exists below this state (cycles or blocked picks only)
        memo[state] = best
        stack.pop()
        if stack:
            stack[-1][3] = min(stack[-1][3], memo[state])

    states_visited = len(memo)
    min_eff = None
    if violation_path is None and not depth_exceeded:
        g = memo.get(root)
        if g is not None and g != UNREACHED and g != _ONSTACK:
            min_eff = g

    min_path: Optional[List[int]] = None
    if min_eff is not None:
        min_path = []
        cur = root
        while not is_terminal(cur):
            for move, child, viol in successors(cur, n, m, beta, f, prune_crashes):
                if memo.get(child) == memo[cur]:
                    min_path.append(move)
                    cur = child
                    break
            else:  # pragma: no cover - would mean memo inconsistency
                raise AssertionError("failed to reconstruct a witness path")

    return {
        "states_visited": states_visited,
        "terminal_states": terminals,
        "min_effectiveness": min_eff,
        "min_path": min_path,
        "violation_path": violation_path,
        "max_depth": max_depth,
        "nontermination_possible": nonterm,
        "depth_exceeded": depth_exceeded,
        "undefined_rank_seen": blocked[0],
    }
