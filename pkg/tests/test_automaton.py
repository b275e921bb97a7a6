"""Transition-level tests, hand-traced from the algorithm's action table."""

import pytest

from amosim.automaton import (
    BugTrap,
    ProcessState,
    crash,
    free_minus_try_size,
    step,
    target_rank,
)
from amosim.events import (
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
)
from amosim.ranked_set import RankedSet
from amosim.registers import SharedMemory


def make_state(pid, m, n, beta, **kw):
    return ProcessState(pid=pid, m=m, n=n, beta=beta, **kw)


class TestCompNext:
    def test_rank_split_pid1(self):
        # n=10, m=2, FREE=all, TRY empty: interval width (10-1)/2 >= 1,
        # pid 1 takes rank 1 -> job 1.
        st = make_state(1, 2, 10, 2)
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert st.nxt == 1
        assert st.status == S_SET_NEXT
        assert res.rank_charge == (0 + 1) * 4  # L(10) = 4

    def test_rank_split_pid2(self):
        st = make_state(2, 2, 10, 2)
        shm = SharedMemory(2, 10)
        step(st, shm, 0)
        assert st.nxt == 5  # floor(1 * 4.5) + 1 = 5

    def test_small_pool_falls_back_to_pid_rank(self):
        st = make_state(2, 3, 3, 3)
        shm = SharedMemory(3, 3)
        step(st, shm, 0)
        assert st.nxt == 2  # (3 - 2)/3 < 1, so rank = pid = 2

    def test_threshold_ends_plain(self):
        st = make_state(1, 2, 10, 2)
        st.free = RankedSet.from_iterable(10, [9])
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert st.status == S_END
        assert res.ended
        assert st.leftover == (9,)

    def test_threshold_raises_flag_in_flagged_mode(self):
        st = make_state(1, 2, 10, 2, flagged=True)
        st.free = RankedSet.from_iterable(10, [9])
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert res.flag_raised
        assert shm.flag == 1
        assert st.status == S_DRAIN_TRY

    def test_try_membership_charged(self):
        st = make_state(1, 2, 10, 2)
        st.try_set = RankedSet.from_iterable(10, [3, 8])
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert res.set_ops == 2  # one membership test per TRY element
        assert res.rank_charge == (2 + 1) * 4
        assert len(st.try_set) == 0  # TRY reset after the pick

    def test_pick_skips_try(self):
        st = make_state(1, 2, 10, 2)
        st.try_set = RankedSet.from_iterable(10, [1])
        shm = SharedMemory(2, 10)
        step(st, shm, 0)
        assert st.nxt == 2  # rank 1 of FREE \ TRY


def test_target_rank_formula():
    assert target_rank(1, 2, 10) == 1
    assert target_rank(2, 2, 10) == 5
    assert target_rank(2, 3, 3) == 2
    assert target_rank(3, 3, 50) == 33


def test_free_minus_try_counts_only_overlap():
    st = make_state(1, 2, 10, 2)
    st.free = RankedSet.from_iterable(10, [1, 2, 3])
    st.try_set = RankedSet.from_iterable(10, [2, 9])  # 9 not in FREE
    visible, ops = free_minus_try_size(st)
    assert visible == 2
    assert ops == 2


class TestGatherTry:
    def test_reads_other_and_loops(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_GATHER_TRY
        st.nxt = 3
        st.q = 2
        shm = SharedMemory(2, 10)
        shm.write_next(2, 7)
        res = step(st, shm, 5)
        assert res.reads == 1
        assert 7 in st.try_set
        assert st.q == 1
        assert st.status == S_GATHER_DONE

    def test_skips_own_cell(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_GATHER_TRY
        st.q = 1
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert res.reads == 0
        assert st.q == 2
        assert st.status == S_GATHER_TRY

    def test_unset_cell_not_inserted(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_GATHER_TRY
        st.q = 2
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert res.set_ops == 0
        assert len(st.try_set) == 0

    def test_sentinel_value_filtered(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_GATHER_TRY
        st.q = 2
        shm = SharedMemory(2, 10)
        shm.write_next(2, 11)  # n + 1 sentinel: read but never joins TRY
        step(st, shm, 0)
        assert len(st.try_set) == 0

    def test_collision_witness_recorded(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_GATHER_TRY
        st.nxt = 7
        st.q = 2
        shm = SharedMemory(2, 10)
        shm.write_next(2, 7)
        step(st, shm, 9)
        assert st.witnesses == [(2, 7, W_TRY, 9)]


class TestGatherDone:
    def setup_method(self):
        self.shm = SharedMemory(2, 10)
        self.st = make_state(1, 2, 10, 2)
        self.st.status = S_GATHER_DONE
        self.st.nxt = 3
        self.st.q = 2

    def test_hit_stays_on_row(self):
        self.shm.write_done(2, 1, 4)
        res = step(self.st, self.shm, 0)
        assert res.set_ops == 2
        assert 4 in self.st.done
        assert not self.st.free.contains(4)
        assert self.st.pos[2] == 2
        assert self.st.q == 2  # same row polled again next step

    def test_empty_cell_advances(self):
        res = step(self.st, self.shm, 0)
        assert res.reads == 1
        assert res.set_ops == 0
        assert self.st.q == 1
        assert self.st.status == S_CHECK

    def test_own_row_skipped_without_read(self):
        self.st.q = 1
        res = step(self.st, self.shm, 0)
        assert res.reads == 0
        assert self.st.q == 2

    def test_exhausted_row_not_read(self):
        self.st.pos[2] = 11  # beyond row width
        res = step(self.st, self.shm, 0)
        assert res.reads == 0
        assert self.st.status == S_CHECK

    def test_done_witness_requires_absent_from_try(self):
        self.shm.write_done(2, 1, 3)
        res = step(self.st, self.shm, 4)
        assert self.st.witnesses == [(2, 3, W_DONE, 4)]

    def test_done_witness_suppressed_when_in_try(self):
        self.st.try_set.insert(3)
        self.shm.write_done(2, 1, 3)
        step(self.st, self.shm, 4)
        assert self.st.witnesses == []


class TestCheck:
    def test_pass_moves_to_do(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_CHECK
        st.nxt = 5
        st.try_set.insert(2)
        st.done.insert(1)
        st.free.remove(1)
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert st.status == S_DO
        assert res.set_ops == 2

    def test_try_member_fails_and_emits_witness(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_CHECK
        st.nxt = 5
        st.try_set.insert(5)
        st.witnesses.append((2, 5, W_TRY, 3))
        shm = SharedMemory(2, 10)
        res = step(st, shm, 7)
        assert st.status == S_COMP_NEXT
        assert res.emitted_witnesses == ((2, 5, W_TRY, 3),)
        assert res.set_ops == 1  # short-circuit on the TRY test

    def test_failed_check_without_witness_is_a_bug(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_CHECK
        st.nxt = 5
        st.try_set.insert(5)
        shm = SharedMemory(2, 10)
        with pytest.raises(BugTrap):
            step(st, shm, 0)

    def test_flagged_check_reads_flag_and_drains(self):
        st = make_state(1, 2, 10, 2, flagged=True)
        st.status = S_CHECK
        st.nxt = 5
        shm = SharedMemory(2, 10)
        shm.raise_flag(2)
        res = step(st, shm, 0)
        assert res.reads == 1
        assert st.status == S_DRAIN_TRY


class TestDoDone:
    def test_do_emits_job_and_advances(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_DO
        st.nxt = 5
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert res.did_job == 5
        assert st.status == S_DONE

    def test_do_writeall_expands_base_jobs(self):
        wa = [0] * 11
        st = make_state(1, 2, 3, 2)
        st.status = S_DO
        st.nxt = 2
        shm = SharedMemory(2, 3, wa=wa)
        base = [(), (1, 2), (3, 4, 5), (6,)]
        res = step(st, shm, 0, writeall=True, base_jobs=base)
        assert wa[3] == wa[4] == wa[5] == 1
        assert res.writes == 3

    def test_done_writes_row_and_updates_sets(self):
        st = make_state(1, 2, 10, 2)
        st.status = S_DONE
        st.nxt = 5
        shm = SharedMemory(2, 10)
        res = step(st, shm, 0)
        assert shm.done_rows[1][1] == 5
        assert res.done_write == (1, 5)
        assert res.writes == 1 and res.set_ops == 2
        assert st.pos[1] == 2
        assert 5 in st.done and not st.free.contains(5)
        assert st.status == S_COMP_NEXT


class TestDrain:
    def test_drain_reads_all_next_cells_including_own(self):
        st = make_state(1, 2, 10, 2, flagged=True)
        st.status = S_DRAIN_TRY
        st.drain_try = RankedSet(10)
        st.q = 1
        shm = SharedMemory(2, 10)
        shm.write_next(1, 4)
        shm.write_next(2, 9)
        step(st, shm, 0)  # reads own cell
        assert st.q == 2
        step(st, shm, 1)
        assert st.status == S_DRAIN_DONE
        assert sorted(st.try_set) == [4, 9]

    def test_drain_done_polls_to_exhaustion_then_ends(self):
        st = make_state(1, 2, 4, 2, flagged=True)
        st.status = S_DRAIN_DONE
        st.q = 1
        shm = SharedMemory(2, 4)
        shm.write_done(2, 1, 3)
        shm.write_done(2, 2, 1)
        steps = 0
        while st.status == S_DRAIN_DONE:
            step(st, shm, steps)
            steps += 1
        assert st.status == S_END
        assert sorted(st.done) == [1, 3]
        assert st.leftover == (2, 4)

    def test_announced_job_excluded_from_leftover(self):
        st = make_state(1, 2, 4, 2, flagged=True)
        st.status = S_DRAIN_TRY
        st.drain_try = RankedSet(4)
        st.q = 1
        shm = SharedMemory(2, 4)
        shm.write_next(2, 2)  # crashed process q announced job 2
        while st.status != S_END:
            step(st, shm, 0)
        assert 2 not in st.leftover
        assert st.leftover == (1, 3, 4)

    def test_leftover_free_keeps_try(self):
        st = make_state(1, 2, 4, 2, flagged=True)
        st.status = S_DRAIN_TRY
        st.drain_try = RankedSet(4)
        st.q = 1
        shm = SharedMemory(2, 4)
        shm.write_next(2, 2)
        while st.status != S_END:
            step(st, shm, 0, leftover_free=True)
        assert st.leftover == (1, 2, 3, 4)


def test_crash_absorbing_and_noop_after_end():
    st = make_state(1, 2, 10, 2)
    crash(st)
    assert st.status == S_STOP
    crash(st)
    assert st.status == S_STOP
    st2 = make_state(2, 2, 10, 2)
    st2.status = S_END
    crash(st2)
    assert st2.status == S_END  # recorded by the engine, no semantic effect
