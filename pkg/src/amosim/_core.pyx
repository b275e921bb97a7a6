# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled execution core.

Mirrors amosim._pyrun.run_core and amosim._pyexplore.explore_core move for
move; tests/test_kernel_equivalence.py asserts byte-identical payloads.
Keep the three implementations in lockstep when touching semantics.
"""

from libc.stdint cimport uint64_t, int64_t, uint8_t, int32_t
from libc.stdlib cimport calloc, free
from libc.string cimport memcpy, memset
from libcpp.vector cimport vector

from ._prng import auto_crash_plan
from ._pyrun import AdversaryProtocolError
from .automaton import BugTrap
from .registers import ConfigurationError, InvariantError

# Status / action / witness codes: keep equal to amosim.events.
cdef enum:
    S_COMP_NEXT = 0
    S_SET_NEXT = 1
    S_GATHER_TRY = 2
    S_GATHER_DONE = 3
    S_CHECK = 4
    S_DO = 5
    S_DONE = 6
    S_END = 7
    S_STOP = 8
    S_DRAIN_TRY = 9
    S_DRAIN_DONE = 10

cdef enum:
    A_COMP_NEXT = 0
    A_SET_NEXT = 1
    A_GATHER_TRY = 2
    A_GATHER_DONE = 3
    A_CHECK = 4
    A_DO = 5
    A_DONE = 6
    A_CRASH = 7
    A_DRAIN_TRY = 8
    A_DRAIN_DONE = 9

cdef enum:
    W_TRY = 0
    W_DONE = 1

cdef enum:
    SCHED_RR = 0
    SCHED_RANDOM = 1
    SCHED_THEOREM3 = 2
    SCHED_CRASH_AT = 3


cdef inline int log_weight(long long x) nogil:
    cdef int b = 0
    if x < 1:
        return 1
    while x > 0:
        x >>= 1
        b += 1
    return b


# ---------------------------------------------------------------------------
# splitmix64
# ---------------------------------------------------------------------------

cdef inline uint64_t sm_next(uint64_t* state) nogil:
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)

cdef extern from *:
    ctypedef unsigned long long uint128 "unsigned __int128"


cdef inline uint64_t sm_bounded(uint64_t* state, uint64_t k) nogil:
    return <uint64_t>(((<uint128>sm_next(state)) * (<uint128>k)) >> 64)


# ---------------------------------------------------------------------------
# Fenwick tree over 1..cap with membership bytes (FREE sets)
# ---------------------------------------------------------------------------

cdef inline void fen_add(int32_t* tree, int cap, int x, int delta) nogil:
    while x <= cap:
        tree[x] += delta
        x += x & (-x)

cdef inline int fen_select(int32_t* tree, int cap, int highbit, int rank) nogil:
    # highbit = largest power of two <= cap; assumes 1 <= rank <= size.
    cdef int pos = 0
    cdef int half = highbit
    cdef int nxt
    while half:
        nxt = pos + half
        if nxt <= cap and tree[nxt] < rank:
            rank -= tree[nxt]
            pos = nxt
        half >>= 1
    return pos + 1


cdef int select_excluding_c(int32_t* tree, uint8_t* bits, int size, int cap,
                            int highbit, int32_t* excl, int n_excl, int rank) except -1:
    """Rank into FREE minus the sorted exclusion list (ids absent from FREE
    are ignored); mirrors ranked_set.select_excluding."""
    cdef int r = rank
    cdef int i, x, c
    if rank < 1:
        raise BugTrap("rank below 1 in candidate selection")
    for i in range(n_excl):
        x = excl[i]
        if not bits[x]:
            continue
        if r > size:
            raise BugTrap("rank exceeded pool in candidate selection")
        c = fen_select(tree, cap, highbit, r)
        if x <= c:
            r += 1
        else:
            break
    if r > size:
        raise BugTrap("rank exceeded pool in candidate selection")
    return fen_select(tree, cap, highbit, r)


# ---------------------------------------------------------------------------
# run_core
# ---------------------------------------------------------------------------

def run_core(int n, int m, int beta, int f,
             bint flagged, bint writeall, bint leftover_free,
             int scheduler, object seed, object crash_times,
             int starvation_factor, long long max_steps,
             object initial_stopped=(), object base_jobs=None, object wa=None):
    cdef int cap = n
    cdef int highbit = 1
    while highbit * 2 <= cap:
        highbit *= 2

    # shared memory
    cdef vector[int32_t] next_cells
    cdef vector[int32_t] done_flat          # (m+1) x (n+1)
    cdef int flag = 0
    next_cells.assign(m + 1, 0)
    done_flat.assign((m + 1) * (n + 1), 0)
    cdef long long shm_reads = 0, shm_writes = 0

    # per-process automaton state
    cdef vector[int32_t] status, nxt, qq
    cdef vector[int32_t] pos                # (m+1) x (m+1)
    status.assign(m + 1, S_COMP_NEXT)
    nxt.assign(m + 1, 0)
    qq.assign(m + 1, 1)
    pos.assign((m + 1) * (m + 1), 1)

    cdef vector[int32_t] free_tree          # (m+1) x (n+1)
    cdef vector[uint8_t] free_bits
    cdef vector[int32_t] free_size
    cdef vector[uint8_t] done_bits
    cdef vector[int32_t] done_size
    free_tree.assign((m + 1) * (n + 1), 0)
    free_bits.assign((m + 1) * (n + 1), 0)
    free_size.assign(m + 1, 0)
    done_bits.assign((m + 1) * (n + 1), 0)
    done_size.assign(m + 1, 0)

    cdef int p, j, i
    for p in range(1, m + 1):
        for j in range(1, n + 1):
            free_bits[p * (n + 1) + j] = 1
            free_tree[p * (n + 1) + j] += 1
            i = j + (j & (-j))
            if i <= n:
                free_tree[p * (n + 1) + i] += free_tree[p * (n + 1) + j]
        free_size[p] = n

    # TRY as small sorted array + membership bytes; drain rebuild alongside
    cdef vector[int32_t] try_items          # (m+1) x m
    cdef vector[int32_t] try_count
    cdef vector[uint8_t] try_bits           # (m+1) x (n+1)
    cdef vector[int32_t] drain_items
    cdef vector[int32_t] drain_count
    cdef vector[uint8_t] drain_bits
    try_items.assign((m + 1) * (m + 1), 0)
    try_count.assign(m + 1, 0)
    try_bits.assign((m + 1) * (n + 1), 0)
    drain_items.assign((m + 1) * (m + 1), 0)
    drain_count.assign(m + 1, 0)
    drain_bits.assign((m + 1) * (n + 1), 0)

    # collision witness buffers: flat per process, stride 4 (q, job, kind, step)
    cdef vector[vector[int64_t]] wit
    wit.resize(m + 1)

    for p in initial_stopped:
        status[<int>p] = S_STOP

    if crash_times is None:
        if scheduler == SCHED_RANDOM and f > 0:
            crash_times = auto_crash_plan(seed, n, m, f)
        else:
            crash_times = []
    cdef vector[int64_t] plan_t
    cdef vector[int32_t] plan_p
    for entry in crash_times:
        plan_t.push_back(<int64_t>entry[0])
        plan_p.push_back(<int32_t>entry[1])

    cdef uint64_t rng = <uint64_t>(<unsigned long long>(int(seed) & 0xFFFFFFFFFFFFFFFF))

    # trace columns
    cdef vector[uint8_t] col_action
    cdef vector[int32_t] col_pid
    cdef vector[int64_t] col_arg
    cdef vector[int32_t] col_reads, col_writes, col_setops, col_rank
    cdef vector[int64_t] ev_dos, ev_crashes, ev_witness, ev_donew, ev_flag, ev_term

    leftovers = {}

    cdef long long t = 0
    cdef int crashes_used = 0
    cdef vector[uint8_t] crash_targeted
    crash_targeted.assign(m + 1, 0)
    cdef int plan_idx = 0
    cdef int rr_cursor = 1
    cdef vector[int64_t] last_sched
    last_sched.assign(m + 1, 0)
    cdef int t3_phase = 1
    cdef bint truncated = False
    cdef long long total_setops = 0, total_rank = 0

    cdef int move_kind, target, ncands, k, off, s
    cdef int visible, ops, r, job, v, slot, overlap
    cdef long long starv_cap = <long long>m * starvation_factor
    cdef int64_t best_seen
    cdef int arg_v, reads_v, writes_v, setops_v, rank_v
    cdef bint barrier_open
    cdef vector[int32_t] cands
    cands.reserve(m)

    while True:
        # halt when every process is terminal
        k = 0
        for p in range(1, m + 1):
            if status[p] == S_END or status[p] == S_STOP:
                k += 1
        if k == m:
            break
        if t >= max_steps:
            truncated = True
            break

        # ---- choose a move (mirrors _pyrun) -----------------------------
        move_kind = 0
        target = 0
        if (scheduler == SCHED_RANDOM or scheduler == SCHED_CRASH_AT) \
                and plan_idx < <int>plan_t.size() and plan_t[plan_idx] <= t:
            target = plan_p[plan_idx]
            plan_idx += 1
            move_kind = 1
        elif scheduler == SCHED_THEOREM3:
            if t3_phase < m and status[t3_phase] != S_END and status[t3_phase] != S_STOP:
                target = t3_phase
                if next_cells[target] != 0:
                    move_kind = 1
                    t3_phase += 1
            elif t3_phase < m:
                t3_phase += 1
                continue
            else:
                target = m
        else:
            barrier_open = True
            for p in range(1, m + 1):
                s = status[p]
                if s != S_END and s != S_STOP and s != S_DRAIN_TRY and s != S_DRAIN_DONE:
                    barrier_open = False
                    break
            cands.clear()
            for p in range(1, m + 1):
                s = status[p]
                if s == S_END or s == S_STOP:
                    continue
                if (s == S_DRAIN_TRY or s == S_DRAIN_DONE) and not barrier_open:
                    continue
                cands.push_back(p)
            if cands.size() == 0:
                truncated = True
                break
            if scheduler == SCHED_RANDOM:
                target = 0
                best_seen = -1
                for k in range(<int>cands.size()):
                    p = cands[k]
                    if t - last_sched[p] >= starv_cap:
                        if target == 0 or last_sched[p] < best_seen:
                            target = p
                            best_seen = last_sched[p]
                if target == 0:
                    target = cands[<int>sm_bounded(&rng, cands.size())]
                last_sched[target] = t
            else:
                target = 0
                for off in range(m):
                    p = ((rr_cursor - 1 + off) % m) + 1
                    for k in range(<int>cands.size()):
                        if cands[k] == p:
                            target = p
                            break
                    if target:
                        break
                rr_cursor = (target % m) + 1

        # ---- apply the move ---------------------------------------------
        if move_kind == 1:
            if crashes_used >= f:
                raise AdversaryProtocolError(f"crash budget {f} exceeded at move {t}")
            if crash_targeted[target]:
                raise AdversaryProtocolError(f"process {target} crashed twice")
            crash_targeted[target] = 1
            crashes_used += 1
            if status[target] != S_END:
                status[target] = S_STOP
            wit[target].clear()
            ev_crashes.push_back(t); ev_crashes.push_back(target)
            col_action.push_back(A_CRASH); col_pid.push_back(target)
            col_arg.push_back(0); col_reads.push_back(0); col_writes.push_back(0)
            col_setops.push_back(0); col_rank.push_back(0)
            t += 1
            continue

        p = target
        s = status[p]
        arg_v = 0; reads_v = 0; writes_v = 0; setops_v = 0; rank_v = 0

        if s == S_COMP_NEXT:
            wit[p].clear()
            overlap = 0
            for k in range(try_count[p]):
                if free_bits[p * (n + 1) + try_items[p * (m + 1) + k]]:
                    overlap += 1
            setops_v = try_count[p]
            visible = free_size[p] - overlap
            if visible >= beta:
                if free_size[p] - (m - 1) >= m:
                    r = ((p - 1) * (free_size[p] - m + 1)) // m + 1
                else:
                    r = p
                job = select_excluding_c(&free_tree[p * (n + 1)], &free_bits[p * (n + 1)],
                                         free_size[p], n, highbit,
                                         &try_items[p * (m + 1)], try_count[p], r)
                nxt[p] = job
                rank_v = (try_count[p] + 1) * log_weight(n)
                qq[p] = 1
                for k in range(try_count[p]):
                    try_bits[p * (n + 1) + try_items[p * (m + 1) + k]] = 0
                try_count[p] = 0
                status[p] = S_SET_NEXT
                arg_v = job
            elif not flagged:
                out = []
                for j in range(1, n + 1):
                    if free_bits[p * (n + 1) + j] and not try_bits[p * (n + 1) + j]:
                        out.append(j)
                leftovers[p] = tuple(out)
                status[p] = S_END
                ev_term.push_back(t); ev_term.push_back(p)
                arg_v = 0
            else:
                flag = 1
                shm_writes += 1
                writes_v = 1
                ev_flag.push_back(t); ev_flag.push_back(p)
                drain_count[p] = 0
                qq[p] = 1
                status[p] = S_DRAIN_TRY
                arg_v = 0
            col_action.push_back(A_COMP_NEXT)

        elif s == S_SET_NEXT:
            if nxt[p] == 0:
                raise InvariantError("announce cells are never reset to 0")
            next_cells[p] = nxt[p]
            shm_writes += 1
            writes_v = 1
            arg_v = nxt[p]
            status[p] = S_GATHER_TRY
            col_action.push_back(A_SET_NEXT)

        elif s == S_GATHER_TRY:
            arg_v = -1
            if qq[p] != p:
                v = next_cells[qq[p]]
                shm_reads += 1
                reads_v = 1
                arg_v = v
                if 1 <= v <= n:
                    setops_v = 1
                    if not try_bits[p * (n + 1) + v]:
                        try_bits[p * (n + 1) + v] = 1
                        # insert into the sorted item list
                        k = try_count[p]
                        while k > 0 and try_items[p * (m + 1) + k - 1] > v:
                            try_items[p * (m + 1) + k] = try_items[p * (m + 1) + k - 1]
                            k -= 1
                        try_items[p * (m + 1) + k] = v
                        try_count[p] += 1
                if v == nxt[p]:
                    wit[p].push_back(qq[p]); wit[p].push_back(nxt[p])
                    wit[p].push_back(W_TRY); wit[p].push_back(t)
            if qq[p] + 1 <= m:
                qq[p] += 1
            else:
                qq[p] = 1
                status[p] = S_GATHER_DONE
            col_action.push_back(A_GATHER_TRY)

        elif s == S_GATHER_DONE:
            arg_v = -1
            k = qq[p]
            if k != p and pos[p * (m + 1) + k] <= n:
                v = done_flat[k * (n + 1) + pos[p * (m + 1) + k]]
                shm_reads += 1
                reads_v = 1
                arg_v = v
                if v > 0:
                    if v == nxt[p] and not try_bits[p * (n + 1) + v]:
                        wit[p].push_back(k); wit[p].push_back(nxt[p])
                        wit[p].push_back(W_DONE); wit[p].push_back(t)
                    if done_bits[p * (n + 1) + v]:
                        raise BugTrap(f"done value {v} reported twice to process {p}")
                    done_bits[p * (n + 1) + v] = 1
                    done_size[p] += 1
                    if not free_bits[p * (n + 1) + v]:
                        raise BugTrap(f"job {v} left FREE twice for process {p}")
                    free_bits[p * (n + 1) + v] = 0
                    free_size[p] -= 1
                    fen_add(&free_tree[p * (n + 1)], n, v, -1)
                    setops_v = 2
                    pos[p * (m + 1) + k] += 1
                else:
                    qq[p] += 1
            else:
                qq[p] += 1
            if qq[p] > m:
                qq[p] = 1
                status[p] = S_CHECK
            col_action.push_back(A_GATHER_DONE)

        elif s == S_CHECK:
            if flagged:
                shm_reads += 1
                reads_v = 1
                if flag == 1:
                    drain_count[p] = 0
                    qq[p] = 1
                    status[p] = S_DRAIN_TRY
                    wit[p].clear()
                    arg_v = 2
                    col_action.push_back(A_CHECK)
                    col_pid.push_back(p); col_arg.push_back(arg_v)
                    col_reads.push_back(reads_v); col_writes.push_back(writes_v)
                    col_setops.push_back(setops_v); col_rank.push_back(rank_v)
                    total_setops += setops_v; total_rank += rank_v
                    t += 1
                    continue
            setops_v = 1
            v = 1 if try_bits[p * (n + 1) + nxt[p]] else 0
            if not v:
                setops_v = 2
                v = 1 if done_bits[p * (n + 1) + nxt[p]] else 0
            if v:
                status[p] = S_COMP_NEXT
                if wit[p].size() == 0:
                    raise BugTrap("failed check without a collision observation")
                for k in range(0, <int>wit[p].size(), 4):
                    ev_witness.push_back(t); ev_witness.push_back(p)
                    ev_witness.push_back(wit[p][k]); ev_witness.push_back(wit[p][k + 1])
                    ev_witness.push_back(wit[p][k + 2]); ev_witness.push_back(wit[p][k + 3])
                arg_v = 0
            else:
                status[p] = S_DO
                arg_v = 1
            col_action.push_back(A_CHECK)

        elif s == S_DO:
            if writeall:
                if base_jobs is not None:
                    expansion = base_jobs[nxt[p]]
                else:
                    expansion = (nxt[p],)
                for b in expansion:
                    if wa is None:
                        raise ConfigurationError("write-all array not configured")
                    if not 1 <= <int>b < len(wa):
                        raise ConfigurationError(f"write-all index {b} out of range")
                    wa[<int>b] = 1
                writes_v = len(expansion)
                shm_writes += writes_v
            ev_dos.push_back(t); ev_dos.push_back(p); ev_dos.push_back(nxt[p])
            arg_v = nxt[p]
            status[p] = S_DONE
            col_action.push_back(A_DO)

        elif s == S_DONE:
            slot = pos[p * (m + 1) + p]
            if slot > n:
                raise ConfigurationError(f"done index {slot} outside 1..{n}")
            if done_flat[p * (n + 1) + slot] != 0:
                raise InvariantError(f"done[{p}][{slot}] already written (write-once)")
            if slot > 1 and done_flat[p * (n + 1) + slot - 1] == 0:
                raise InvariantError(f"done row {p} must grow as a prefix")
            done_flat[p * (n + 1) + slot] = nxt[p]
            shm_writes += 1
            writes_v = 1
            if done_bits[p * (n + 1) + nxt[p]]:
                raise BugTrap(f"process {p} recorded job {nxt[p]} twice")
            done_bits[p * (n + 1) + nxt[p]] = 1
            done_size[p] += 1
            if not free_bits[p * (n + 1) + nxt[p]]:
                raise BugTrap(f"job {nxt[p]} left FREE twice for process {p}")
            free_bits[p * (n + 1) + nxt[p]] = 0
            free_size[p] -= 1
            fen_add(&free_tree[p * (n + 1)], n, nxt[p], -1)
            setops_v = 2
            pos[p * (m + 1) + p] += 1
            status[p] = S_COMP_NEXT
            arg_v = nxt[p]
            ev_donew.push_back(t); ev_donew.push_back(p)
            ev_donew.push_back(slot); ev_donew.push_back(nxt[p])
            col_action.push_back(A_DONE)

        elif s == S_DRAIN_TRY:
            v = next_cells[qq[p]]
            shm_reads += 1
            reads_v = 1
            arg_v = v
            if 1 <= v <= n:
                setops_v = 1
                if not drain_bits[p * (n + 1) + v]:
                    drain_bits[p * (n + 1) + v] = 1
                    k = drain_count[p]
                    while k > 0 and drain_items[p * (m + 1) + k - 1] > v:
                        drain_items[p * (m + 1) + k] = drain_items[p * (m + 1) + k - 1]
                        k -= 1
                    drain_items[p * (m + 1) + k] = v
                    drain_count[p] += 1
            if qq[p] + 1 <= m:
                qq[p] += 1
            else:
                # swap the rebuilt snapshot in as TRY
                for k in range(try_count[p]):
                    try_bits[p * (n + 1) + try_items[p * (m + 1) + k]] = 0
                for k in range(drain_count[p]):
                    v = drain_items[p * (m + 1) + k]
                    try_items[p * (m + 1) + k] = v
                    try_bits[p * (n + 1) + v] = 1
                try_count[p] = drain_count[p]
                drain_count[p] = 0
                qq[p] = 1
                status[p] = S_DRAIN_DONE
            col_action.push_back(A_DRAIN_TRY)

        elif s == S_DRAIN_DONE:
            arg_v = -1
            k = qq[p]
            if k != p and pos[p * (m + 1) + k] <= n:
                v = done_flat[k * (n + 1) + pos[p * (m + 1) + k]]
                shm_reads += 1
                reads_v = 1
                arg_v = v
                if v > 0:
                    if done_bits[p * (n + 1) + v]:
                        raise BugTrap(f"done value {v} reported twice to process {p}")
                    done_bits[p * (n + 1) + v] = 1
                    done_size[p] += 1
                    if not free_bits[p * (n + 1) + v]:
                        raise BugTrap(f"job {v} left FREE twice for process {p}")
                    free_bits[p * (n + 1) + v] = 0
                    free_size[p] -= 1
                    fen_add(&free_tree[p * (n + 1)], n, v, -1)
                    setops_v = 2
                    pos[p * (m + 1) + k] += 1
                else:
                    qq[p] += 1
            else:
                qq[p] += 1
            if qq[p] > m:
                out = []
                if leftover_free:
                    for j in range(1, n + 1):
                        if free_bits[p * (n + 1) + j]:
                            out.append(j)
                else:
                    for j in range(1, n + 1):
                        if free_bits[p * (n + 1) + j]:
                            setops_v += 1
                            if not try_bits[p * (n + 1) + j]:
                                out.append(j)
                leftovers[p] = tuple(out)
                status[p] = S_END
                ev_term.push_back(t); ev_term.push_back(p)
            col_action.push_back(A_DRAIN_DONE)

        else:
            raise BugTrap(f"no enabled action in status {s}")

        col_pid.push_back(p)
        col_arg.push_back(arg_v)
        col_reads.push_back(reads_v)
        col_writes.push_back(writes_v)
        col_setops.push_back(setops_v)
        col_rank.push_back(rank_v)
        total_setops += setops_v
        total_rank += rank_v
        t += 1

    # ---- package the payload exactly like the pure core -----------------
    cdef long long idx
    actions = [0] * col_action.size()
    pids = [0] * col_pid.size()
    args = [0] * col_arg.size()
    reads_l = [0] * col_reads.size()
    writes_l = [0] * col_writes.size()
    setops_l = [0] * col_setops.size()
    rank_l = [0] * col_rank.size()
    for idx in range(<long long>col_action.size()):
        actions[idx] = col_action[idx]
        pids[idx] = col_pid[idx]
        args[idx] = col_arg[idx]
        reads_l[idx] = col_reads[idx]
        writes_l[idx] = col_writes[idx]
        setops_l[idx] = col_setops[idx]
        rank_l[idx] = col_rank[idx]

    dos = [(ev_dos[idx], ev_dos[idx + 1], ev_dos[idx + 2])
           for idx in range(0, <long long>ev_dos.size(), 3)]
    crashes = [(ev_crashes[idx], ev_crashes[idx + 1])
               for idx in range(0, <long long>ev_crashes.size(), 2)]
    witnesses = [(ev_witness[idx], ev_witness[idx + 1], ev_witness[idx + 2],
                  ev_witness[idx + 3], ev_witness[idx + 4], ev_witness[idx + 5])
                 for idx in range(0, <long long>ev_witness.size(), 6)]
    done_writes = [(ev_donew[idx], ev_donew[idx + 1], ev_donew[idx + 2], ev_donew[idx + 3])
                   for idx in range(0, <long long>ev_donew.size(), 4)]
    flag_raises = [(ev_flag[idx], ev_flag[idx + 1])
                   for idx in range(0, <long long>ev_flag.size(), 2)]
    terminations = [(ev_term[idx], ev_term[idx + 1])
                    for idx in range(0, <long long>ev_term.size(), 2)]

    final_rows = []
    for p in range(1, m + 1):
        row = []
        for j in range(1, n + 1):
            v = done_flat[p * (n + 1) + j]
            if v == 0:
                break
            row.append(v)
        final_rows.append(tuple(row))

    return {
        "actions": actions,
        "pids": pids,
        "args": args,
        "reads": reads_l,
        "writes": writes_l,
        "set_ops": setops_l,
        "rank_charges": rank_l,
        "dos": dos,
        "crashes": crashes,
        "witnesses": witnesses,
        "done_writes": done_writes,
        "flag_raises": flag_raises,
        "terminations": terminations,
        "final_statuses": tuple(status[p] for p in range(1, m + 1)),
        "leftovers": leftovers,
        "final_next": tuple(next_cells[p] for p in range(1, m + 1)),
        "final_rows": tuple(final_rows),
        "final_flag": flag,
        "final_pos": tuple(tuple(pos[p * (m + 1) + k] for k in range(1, m + 1))
                           for p in range(1, m + 1)),
        "counters": {
            "transitions": t,
            "shm_reads": shm_reads,
            "shm_writes": shm_writes,
            "set_ops": total_setops,
            "rank_charges": total_rank,
        },
        "truncated": truncated,
        "steps": t,
        "crashes_used": crashes_used,
    }


# ---------------------------------------------------------------------------
# explorer
# ---------------------------------------------------------------------------

DEF XMAX_N = 63
DEF XMAX_M = 12
DEF XBUF = 1104

cdef struct XState:
    int crashes
    int next_c[XMAX_M + 1]
    int rowlen[XMAX_M + 1]
    int rows[XMAX_M + 1][XMAX_N + 1]
    int status[XMAX_M + 1]
    int nxt[XMAX_M + 1]
    int q[XMAX_M + 1]
    int pending[XMAX_M + 1]
    int pos[XMAX_M + 1][XMAX_M + 1]
    uint64_t try_mask[XMAX_M + 1]


cdef int x_encode(XState* st, int n, int m, char* buf) nogil:
    cdef int o = 0, p, k
    buf[o] = <char>st.crashes; o += 1
    for p in range(1, m + 1):
        buf[o] = <char>st.next_c[p]; o += 1
    for p in range(1, m + 1):
        buf[o] = <char>st.rowlen[p]; o += 1
        for k in range(st.rowlen[p]):
            buf[o] = <char>st.rows[p][k]; o += 1
    for p in range(1, m + 1):
        buf[o] = <char>st.status[p]; o += 1
        if st.status[p] == S_STOP:
            buf[o] = <char>st.pending[p]; o += 1
        elif st.status[p] != S_END:
            buf[o] = <char>st.nxt[p]; o += 1
            buf[o] = <char>st.q[p]; o += 1
            for k in range(1, m + 1):
                buf[o] = <char>st.pos[p][k]; o += 1
            memcpy(buf + o, &st.try_mask[p], 8); o += 8
    return o


cdef void x_decode(const char* buf, int n, int m, XState* st) nogil:
    cdef int o = 0, p, k
    st.crashes = <unsigned char>buf[o]; o += 1
    for p in range(1, m + 1):
        st.next_c[p] = <unsigned char>buf[o]; o += 1
    for p in range(1, m + 1):
        st.rowlen[p] = <unsigned char>buf[o]; o += 1
        for k in range(st.rowlen[p]):
            st.rows[p][k] = <unsigned char>buf[o]; o += 1
    for p in range(1, m + 1):
        st.status[p] = <unsigned char>buf[o]; o += 1
        st.pending[p] = 0
        st.nxt[p] = 0
        st.q[p] = 1
        st.try_mask[p] = 0
        if st.status[p] == S_STOP:
            st.pending[p] = <unsigned char>buf[o]; o += 1
        elif st.status[p] != S_END:
            st.nxt[p] = <unsigned char>buf[o]; o += 1
            st.q[p] = <unsigned char>buf[o]; o += 1
            for k in range(1, m + 1):
                st.pos[p][k] = <unsigned char>buf[o]; o += 1
            memcpy(&st.try_mask[p], buf + o, 8); o += 8


cdef inline uint64_t x_mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef void x_fingerprint(const char* buf, int length, uint64_t* h1, uint64_t* h2) nogil:
    cdef uint64_t a = <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t b = <uint64_t>0xC2B2AE3D27D4EB4F
    cdef uint64_t chunk
    cdef int i = 0
    while i + 8 <= length:
        memcpy(&chunk, buf + i, 8)
        a = x_mix(a ^ chunk)
        b = x_mix(b + (chunk * <uint64_t>0xD1B54A32D192ED03))
        i += 8
    chunk = 0
    if i < length:
        memcpy(&chunk, buf + i, length - i)
        a = x_mix(a ^ chunk)
        b = x_mix(b + (chunk * <uint64_t>0xD1B54A32D192ED03))
    a = x_mix(a ^ <uint64_t>length)
    if a == 0 and b == 0:
        a = 1
    h1[0] = a
    h2[0] = b


cdef class FingerprintMap:
    """Open-addressed map from 128-bit state fingerprints to int32 values."""

    cdef uint64_t* k1
    cdef uint64_t* k2
    cdef int32_t* vals
    cdef uint64_t capacity, used

    def __cinit__(self, uint64_t initial=1 << 16):
        self.capacity = initial
        self.used = 0
        self._alloc(initial)

    cdef void _alloc(self, uint64_t cap):
        self.k1 = <uint64_t*>calloc(cap, sizeof(uint64_t))
        self.k2 = <uint64_t*>calloc(cap, sizeof(uint64_t))
        self.vals = <int32_t*>calloc(cap, sizeof(int32_t))
        if self.k1 == NULL or self.k2 == NULL or self.vals == NULL:
            raise MemoryError("exploration table allocation failed")

    def __dealloc__(self):
        if self.k1 != NULL:
            free(self.k1)
        if self.k2 != NULL:
            free(self.k2)
        if self.vals != NULL:
            free(self.vals)

    cdef void _grow(self):
        cdef uint64_t old_cap = self.capacity
        cdef uint64_t* ok1 = self.k1
        cdef uint64_t* ok2 = self.k2
        cdef int32_t* ov = self.vals
        cdef uint64_t new_cap = old_cap * 2
        self.capacity = new_cap
        self._alloc(new_cap)
        cdef uint64_t i, idx, mask
        mask = new_cap - 1
        for i in range(old_cap):
            if ok1[i] == 0 and ok2[i] == 0:
                continue
            idx = ok1[i] & mask
            while self.k1[idx] != 0 or self.k2[idx] != 0:
                idx = (idx + 1) & mask
            self.k1[idx] = ok1[i]
            self.k2[idx] = ok2[i]
            self.vals[idx] = ov[i]
        free(ok1); free(ok2); free(ov)

    cdef int32_t get(self, uint64_t h1, uint64_t h2, int32_t missing) nogil:
        cdef uint64_t mask = self.capacity - 1
        cdef uint64_t idx = h1 & mask
        while True:
            if self.k1[idx] == 0 and self.k2[idx] == 0:
                return missing
            if self.k1[idx] == h1 and self.k2[idx] == h2:
                return self.vals[idx]
            idx = (idx + 1) & mask

    cdef void put(self, uint64_t h1, uint64_t h2, int32_t val):
        cdef uint64_t mask = self.capacity - 1
        cdef uint64_t idx = h1 & mask
        while True:
            if self.k1[idx] == 0 and self.k2[idx] == 0:
                self.k1[idx] = h1
                self.k2[idx] = h2
                self.vals[idx] = val
                self.used += 1
                if self.used * 10 >= self.capacity * 6:
                    self._grow()
                return
            if self.k1[idx] == h1 and self.k2[idx] == h2:
                self.vals[idx] = val
                return
            idx = (idx + 1) & mask


cdef inline int x_popcount(uint64_t x) nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef inline int x_nth_bit(uint64_t mask, int r) nogil:
    cdef int j = 0, seen = 0
    while mask:
        if mask & 1:
            seen += 1
            if seen == r:
                return j + 1
        mask >>= 1
        j += 1
    return -1


cdef uint64_t x_done_mask(XState* st, int m, int pid) nogil:
    cdef uint64_t mask = 0
    cdef int k, q, lim
    for k in range(st.rowlen[pid]):
        mask |= (<uint64_t>1) << (st.rows[pid][k] - 1)
    for q in range(1, m + 1):
        if q == pid:
            continue
        lim = st.pos[pid][q] - 1
        if lim > st.rowlen[q]:
            lim = st.rowlen[q]
        for k in range(lim):
            mask |= (<uint64_t>1) << (st.rows[q][k] - 1)
    return mask


cdef uint64_t x_performed_mask(XState* st, int m) nogil:
    cdef uint64_t mask = 0
    cdef int p, k
    for p in range(1, m + 1):
        for k in range(st.rowlen[p]):
            mask |= (<uint64_t>1) << (st.rows[p][k] - 1)
        if st.status[p] == S_DONE and st.nxt[p]:
            mask |= (<uint64_t>1) << (st.nxt[p] - 1)
        elif st.status[p] == S_STOP and st.pending[p]:
            mask |= (<uint64_t>1) << (st.pending[p] - 1)
    return mask


cdef bint x_terminal(XState* st, int m) nogil:
    cdef int p
    for p in range(1, m + 1):
        if st.status[p] != S_END and st.status[p] != S_STOP:
            return False
    return True


cdef int x_apply_step(XState* st, int pid, int n, int m, int beta) nogil:
    """Mutates st by one step of pid; returns 1 on an at-most-once
    violation, 2 when the step is undefined (beta < m rank overflow)."""
    cdef int s = st.status[pid]
    cdef uint64_t full = ((<uint64_t>1) << n) - 1
    cdef uint64_t free_m, visible
    cdef int viol = 0, r, job, v, k
    if s == S_COMP_NEXT:
        free_m = full & ~x_done_mask(st, m, pid)
        visible = free_m & ~st.try_mask[pid]
        if x_popcount(visible) >= beta:
            k = x_popcount(free_m)
            if k - (m - 1) >= m:
                r = ((pid - 1) * (k - m + 1)) // m + 1
            else:
                r = pid
            job = x_nth_bit(visible, r)
            if job < 0:
                return 2
            st.status[pid] = S_SET_NEXT
            st.nxt[pid] = job
            st.q[pid] = 1
            st.try_mask[pid] = 0
        else:
            st.status[pid] = S_END
    elif s == S_SET_NEXT:
        st.next_c[pid] = st.nxt[pid]
        st.status[pid] = S_GATHER_TRY
    elif s == S_GATHER_TRY:
        if st.q[pid] != pid:
            v = st.next_c[st.q[pid]]
            if 1 <= v <= n:
                st.try_mask[pid] |= (<uint64_t>1) << (v - 1)
        if st.q[pid] + 1 <= m:
            st.q[pid] += 1
        else:
            st.q[pid] = 1
            st.status[pid] = S_GATHER_DONE
    elif s == S_GATHER_DONE:
        k = st.q[pid]
        if k != pid and st.pos[pid][k] <= n:
            v = st.rows[k][st.pos[pid][k] - 1] if st.pos[pid][k] - 1 < st.rowlen[k] else 0
            if v > 0:
                st.pos[pid][k] += 1
            else:
                st.q[pid] += 1
        else:
            st.q[pid] += 1
        if st.q[pid] > m:
            st.q[pid] = 1
            st.status[pid] = S_CHECK
    elif s == S_CHECK:
        if ((st.try_mask[pid] | x_done_mask(st, m, pid)) >> (st.nxt[pid] - 1)) & 1:
            st.status[pid] = S_COMP_NEXT
            st.nxt[pid] = 0  # dead value: canonicalize for state merging
            st.q[pid] = 1
        else:
            st.status[pid] = S_DO
    elif s == S_DO:
        if (x_performed_mask(st, m) >> (st.nxt[pid] - 1)) & 1:
            viol = 1
        st.status[pid] = S_DONE
    elif s == S_DONE:
        st.rows[pid][st.rowlen[pid]] = st.nxt[pid]
        st.rowlen[pid] += 1
        st.pos[pid][pid] += 1
        st.status[pid] = S_COMP_NEXT
        st.nxt[pid] = 0
        st.q[pid] = 1
    return viol


cdef void x_apply_crash(XState* st, int pid) nogil:
    st.pending[pid] = st.nxt[pid] if st.status[pid] == S_DONE else 0
    st.status[pid] = S_STOP
    st.crashes += 1


cdef struct XFrame:
    char buf[XBUF]
    int buflen
    int moves[2 * XMAX_M]
    int nmoves
    int idx
    int best
    int move_taken
    uint64_t h1, h2


cdef int x_moves(XState* st, int n, int m, int f, bint prune, int* out) nogil:
    cdef int cnt = 0, pid, s
    for pid in range(1, m + 1):
        s = st.status[pid]
        if s != S_END and s != S_STOP:
            out[cnt] = pid
            cnt += 1
    if st.crashes < f:
        for pid in range(1, m + 1):
            s = st.status[pid]
            if s == S_END or s == S_STOP:
                continue
            if prune and s != S_SET_NEXT and s != S_DONE and s != S_CHECK:
                continue
            out[cnt] = -pid
            cnt += 1
    return cnt


def explore_core(int n, int m, int beta, int f, long long depth_limit,
                 bint prune_crashes=True):
    if n > XMAX_N:
        raise ValueError(f"explorer handles up to {XMAX_N} jobs")
    if m > XMAX_M:
        raise ValueError(f"explorer handles up to {XMAX_M} processes")

    cdef int32_t ONSTACK = -2
    cdef int32_t MISSING = -9
    cdef int32_t UNREACHED = 1 << 30

    cdef XState root
    memset(&root, 0, sizeof(XState))
    cdef int p, k
    for p in range(1, m + 1):
        root.status[p] = S_COMP_NEXT
        root.q[p] = 1
        for k in range(1, m + 1):
            root.pos[p][k] = 1

    cdef FingerprintMap memo = FingerprintMap()
    cdef vector[XFrame] stack
    stack.reserve(1024)

    cdef XFrame fr
    memset(&fr, 0, sizeof(XFrame))
    fr.buflen = x_encode(&root, n, m, fr.buf)
    x_fingerprint(fr.buf, fr.buflen, &fr.h1, &fr.h2)
    fr.nmoves = -1
    fr.idx = 0
    fr.best = UNREACHED
    fr.move_taken = 0
    memo.put(fr.h1, fr.h2, ONSTACK)
    stack.push_back(fr)

    cdef long long terminals = 0
    cdef long long max_depth = 0
    cdef bint nonterm = False
    cdef bint depth_exceeded = False
    cdef bint blocked_seen = False
    violation_path = None

    cdef XState cur
    cdef XFrame* top
    cdef XFrame child
    cdef int move, viol
    cdef int32_t got, g
    cdef uint64_t ch1, ch2
    cdef char cbuf[XBUF]
    cdef int cbuflen

    while stack.size() > 0:
        top = &stack[stack.size() - 1]
        if top.nmoves < 0:
            if <long long>stack.size() > max_depth:
                max_depth = stack.size()
            if <long long>stack.size() > depth_limit:
                depth_exceeded = True
                break
            x_decode(top.buf, n, m, &cur)
            if x_terminal(&cur, m):
                terminals += 1
                g = x_popcount(x_performed_mask(&cur, m))
                memo.put(top.h1, top.h2, g)
                stack.pop_back()
                if stack.size() > 0:
                    if g < stack[stack.size() - 1].best:
                        stack[stack.size() - 1].best = g
                continue
            top.nmoves = x_moves(&cur, n, m, f, prune_crashes, top.moves)
        if top.idx < top.nmoves:
            move = top.moves[top.idx]
            top.idx += 1
            x_decode(top.buf, n, m, &cur)
            viol = 0
            if move > 0:
                viol = x_apply_step(&cur, move, n, m, beta)
            else:
                x_apply_crash(&cur, -move)
            if viol == 2:
                blocked_seen = True
                continue
            if viol:
                path = []
                for k in range(1, <int>stack.size()):
                    path.append(stack[k].move_taken)
                path.append(move)
                violation_path = path
                break
            cbuflen = x_encode(&cur, n, m, cbuf)
            x_fingerprint(cbuf, cbuflen, &ch1, &ch2)
            got = memo.get(ch1, ch2, MISSING)
            if got == MISSING:
                memo.put(ch1, ch2, ONSTACK)
                memcpy(child.buf, cbuf, cbuflen)
                child.buflen = cbuflen
                child.h1 = ch1
                child.h2 = ch2
                child.nmoves = -1
                child.idx = 0
                child.best = UNREACHED
                child.move_taken = move
                stack.push_back(child)
            elif got == ONSTACK:
                nonterm = True
            else:
                if got < top.best:
                    top.best = got
            continue
        g = top.best
        memo.put(top.h1, top.h2, g)
        stack.pop_back()
        if stack.size() > 0:
            if g < stack[stack.size() - 1].best:
                stack[stack.size() - 1].best = g

    cdef long long states_visited = <long long>memo.used
    min_eff = None
    cdef XFrame rootf
    memset(&rootf, 0, sizeof(XFrame))
    rootf.buflen = x_encode(&root, n, m, rootf.buf)
    x_fingerprint(rootf.buf, rootf.buflen, &rootf.h1, &rootf.h2)
    cdef int32_t root_g = memo.get(rootf.h1, rootf.h2, MISSING)
    if violation_path is None and not depth_exceeded \
            and root_g != MISSING and root_g != ONSTACK and root_g != UNREACHED:
        min_eff = <int>root_g

    min_path = None
    cdef int moves_buf[2 * XMAX_M]
    cdef int nmv, mi
    cdef XState scratch
    if min_eff is not None:
        min_path = []
        x_decode(rootf.buf, n, m, &cur)
        g = root_g
        while not x_terminal(&cur, m):
            nmv = x_moves(&cur, n, m, f, prune_crashes, moves_buf)
            for mi in range(nmv):
                move = moves_buf[mi]
                scratch = cur
                if move > 0:
                    if x_apply_step(&scratch, move, n, m, beta) == 2:
                        continue
                else:
                    x_apply_crash(&scratch, -move)
                cbuflen = x_encode(&scratch, n, m, cbuf)
                x_fingerprint(cbuf, cbuflen, &ch1, &ch2)
                got = memo.get(ch1, ch2, MISSING)
                if got == g:
                    min_path.append(move)
                    cur = scratch
                    break
            else:
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
        "undefined_rank_seen": blocked_seen,
    }
