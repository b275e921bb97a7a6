import pytest

from amosim.engine import Config, ExecutionTrace, run
from amosim.events import log_weight
from amosim import ledger


def fake_trace(cfg, **overrides):
    data = {
        "actions": [], "pids": [], "args": [], "reads": [], "writes": [],
        "set_ops": [], "rank_charges": [],
        "dos": [], "crashes": [], "witnesses": [], "done_writes": [],
        "flag_raises": [], "terminations": [],
        "final_statuses": tuple([7] * cfg.m),
        "leftovers": {},
        "final_next": tuple([0] * cfg.m),
        "final_rows": tuple([()] * cfg.m),
        "final_flag": 0,
        "final_pos": tuple([(1,) * cfg.m] * cfg.m),
        "counters": {"transitions": 0, "shm_reads": 0, "shm_writes": 0,
                     "set_ops": 0, "rank_charges": 0},
        "truncated": False,
        "steps": 0,
        "crashes_used": 0,
    }
    data.update(overrides)
    return ExecutionTrace(cfg, data)


@pytest.fixture
def cfg():
    return Config(n=10, m=2, beta=2)


class TestAtMostOnce:
    def test_duplicate_is_violation(self, cfg):
        tr = fake_trace(cfg, dos=[(1, 1, 3), (5, 2, 3)])
        res = ledger.check_at_most_once(tr)
        assert not res.ok
        assert res.violations[0].job == 3

    def test_empty_trace_ok(self, cfg):
        assert ledger.check_at_most_once(fake_trace(cfg)).ok

    def test_engine_trace_ok(self):
        tr = run(Config(n=40, m=4, beta=4, f=3, seed=11, scheduler="random"))
        assert ledger.check_at_most_once(tr).ok

    def test_super_job_expansion(self, cfg):
        base = [(), (1, 2), (3, 4)]
        t1 = fake_trace(cfg, dos=[(1, 1, 1)])
        t1.base_jobs = base
        t2 = fake_trace(cfg, dos=[(9, 2, 1)])
        t2.base_jobs = [(), (2, 5)]  # base job 2 done again at another level
        res = ledger.check_at_most_once([t1, t2])
        assert not res.ok
        assert res.violations[0].job == 2


class TestEffectiveness:
    def test_distinct_count(self, cfg):
        tr = fake_trace(cfg, dos=[(1, 1, 3), (2, 2, 5), (7, 1, 3)])
        assert ledger.effectiveness(tr) == 2

    def test_bound_formula(self):
        assert ledger.effectiveness_bound(100, 2, 2) == 98
        assert ledger.effectiveness_bound(10, 3, 9) == 0

    def test_bound_checker(self):
        tr = run(Config(n=50, m=3, beta=3, f=2, scheduler="theorem3"))
        res = ledger.check_effectiveness_bound(tr)
        assert res.ok and res.done == res.bound == 46
        assert res.universal_headroom == (50 - 2) - 46

    def test_truncated_rejected(self, cfg):
        tr = fake_trace(cfg, truncated=True)
        with pytest.raises(ValueError):
            ledger.check_effectiveness_bound(tr)

    def test_degenerate_bound_passes(self):
        cfg = Config(n=10, m=3, beta=9)
        tr = fake_trace(cfg)
        assert ledger.check_effectiveness_bound(tr).ok


class TestWork:
    def test_single_write_step(self, cfg):
        tr = fake_trace(
            cfg,
            counters={"transitions": 1, "shm_reads": 0, "shm_writes": 1,
                      "set_ops": 0, "rank_charges": 0},
        )
        assert ledger.work(tr).weighted_total == 1

    def test_done_action_charge(self, cfg):
        # one write plus two set ops at L(10) = 4
        tr = fake_trace(
            cfg,
            counters={"transitions": 1, "shm_reads": 0, "shm_writes": 1,
                      "set_ops": 2, "rank_charges": 0},
        )
        assert ledger.work(tr).weighted_total == 1 + 2 * 4

    def test_solo_run_hand_sum(self):
        # Derived by hand from the 4-round solo trace: 8 + 16*L(4) + 12 = 68.
        tr = run(Config(n=4, m=1, beta=1, scheduler="rr"))
        assert ledger.work(tr).weighted_total == 68

    def test_recompute_matches_online(self):
        tr = run(Config(n=30, m=3, beta=3, f=2, seed=4, scheduler="random"))
        assert ledger.recompute_work(tr) == ledger.work(tr)

    def test_metering_exactness(self):
        tr = run(Config(n=30, m=3, beta=27, f=0, seed=8, scheduler="random",
                        mode="flagged"))
        assert ledger.check_metering(tr)


class TestCollisions:
    def test_pair_caps(self):
        assert ledger.pair_collision_cap(100, 2, 1, 2) == 100
        assert ledger.pair_collision_cap(64, 4, 1, 4) == 12

    def test_total_cap_uses_clamped_log(self):
        # 4 * (n + 1) * L(m); L(2) = 2
        assert ledger.total_collision_cap(100, 2) == 808

    def test_ledger_counts_ordered_pairs(self, cfg):
        tr = fake_trace(cfg, witnesses=[(9, 1, 2, 5, 0, 3), (20, 1, 2, 7, 1, 15),
                                        (30, 2, 1, 9, 0, 22)])
        led = ledger.collision_ledger(tr)
        assert led.counts == {(1, 2): 2, (2, 1): 1}
        assert led.total == 3

    def test_engine_run_within_caps(self):
        cfg = Config(n=100, m=2, beta=12, f=0, seed=17, scheduler="random")
        tr = run(cfg)
        res = ledger.check_collision_bounds(tr)
        assert res.ok
        assert res.total <= res.total_cap

    def test_violation_detected(self, cfg):
        tr = fake_trace(cfg, witnesses=[(i, 1, 2, 5, 0, i) for i in range(101)])
        res = ledger.check_collision_bounds(tr)
        assert not res.ok  # pair cap for (n=10, m=2, |q-p|=1) is 2*ceil(10/2)=10

    def test_forced_collision_emits_witness(self):
        """Hand-built interleaving where both processes claim job 2.

        Process 1 completes job 1 before process 2 wakes; process 2 then
        splits the full pool and announces job 2; process 1 recomputes, picks
        rank 1 of {2,3,4} = job 2 too, reads the announcement during its
        sweep, and must abandon at check - emitting a try-kind witness.
        """
        from amosim.engine import ScriptedAdversary, run_with_adversary
        from amosim.events import W_TRY

        cfg = Config(n=4, m=2, beta=2, f=0, scheduler="rr")
        moves = ([("step", 1)] * 9 + [("step", 2)] * 2 + [("step", 1)] * 7)
        tr = run_with_adversary(cfg, ScriptedAdversary(moves))
        led = ledger.collision_ledger(tr)
        assert led.counts == {(1, 2): 1}
        (_, pid, witness, job, kind, read_step) = tr.witnesses[0]
        assert (pid, witness, job, kind) == (1, 2, 2, W_TRY)
        assert read_step < tr.witnesses[0][0]  # read precedes the failed check
        assert ledger.check_collision_bounds(tr).ok


class TestDoneRows:
    def test_engine_trace_consistent(self):
        tr = run(Config(n=30, m=3, beta=3, f=2, seed=21, scheduler="random"))
        assert ledger.check_done_rows_vs_do_events(tr).ok

    def test_forged_write_before_do_detected(self, cfg):
        tr = fake_trace(
            cfg,
            dos=[(5, 1, 3)],
            done_writes=[(2, 1, 1, 3)],
            final_rows=((3,), ()),
        )
        assert not ledger.check_done_rows_vs_do_events(tr).ok

    def test_forged_unmatched_write_detected(self, cfg):
        tr = fake_trace(cfg, done_writes=[(2, 1, 1, 3)], final_rows=((3,), ()))
        assert not ledger.check_done_rows_vs_do_events(tr).ok

    def test_empty_ok(self, cfg):
        assert ledger.check_done_rows_vs_do_events(fake_trace(cfg)).ok


def test_work_ratio_shape():
    cfg = Config(n=64, m=2, beta=12)
    tr = run(Config(n=64, m=2, beta=12, seed=3, scheduler="random"))
    r = ledger.work_ratio(ledger.work(tr), cfg.n, cfg.m)
    assert 0 < r < 50
