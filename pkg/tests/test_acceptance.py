"""Acceptance suite: one test per criterion, at the stated tolerances.

Each test prints `ACCEPTANCE <k>: PASS|FAIL - <detail>` so the gate can be
read off a plain pytest -s run.  The grid sizes follow the stated budgets;
with the compiled core the whole module runs in a few minutes.
"""

import json
import random

import pytest

from amosim import ledger
from amosim.cli import build_run_record
from amosim.engine import Config, run
from amosim.events import log_weight
from amosim.explorer import explore
from amosim.hierarchy import run_iterative, run_writeall
from amosim.ranked_set import RankedSet, select_excluding


def verdict(k: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {k}: {detail}"


EXPLORATIONS = [
    ((4, 2, 2, 1), 2),
    ((5, 2, 2, 1), 3),
    ((6, 3, 3, 2), 2),
]


@pytest.fixture(scope="module")
def exploration_reports():
    return {args: explore(*args) for (args, _) in EXPLORATIONS}


def test_criterion_1_exhaustive_correctness(exploration_reports):
    details = []
    ok = True
    for (args, _) in EXPLORATIONS:
        rep = exploration_reports[args]
        ok &= rep.amo_ok and not rep.depth_exceeded
        details.append(f"{args}: {rep.states_visited} states, violations=0"
                       if rep.amo_ok else f"{args}: VIOLATION {rep.violation_path}")
    verdict(1, ok, "; ".join(details))


def test_criterion_2_exhaustive_effectiveness(exploration_reports):
    details = []
    ok = True
    for (args, floor) in EXPLORATIONS:
        rep = exploration_reports[args]
        ok &= rep.min_effectiveness is not None and rep.min_effectiveness >= floor
        details.append(f"{args}: min_eff {rep.min_effectiveness} >= {floor}")
    verdict(2, ok, "; ".join(details))


def test_criterion_3_worst_case_tightness():
    results = []
    ok = True
    for (n, m, beta, expected) in [(50, 3, 3, 46), (20, 2, 2, 18)]:
        tr = run(Config(n=n, m=m, beta=beta, f=m - 1, scheduler="theorem3"))
        done = ledger.effectiveness(tr)
        ok &= done == expected and not tr.truncated
        results.append(f"(n={n},m={m},beta={beta}): done {done} == {expected}")
    verdict(3, ok, "; ".join(results))


RANDOM_GRID = [
    (n, m, beta, f)
    for n in (100, 1000)
    for m in (2, 3, 4, 8)
    for beta in ("m", "3m2")
    for f in ("0", "m-1")
]
N_SEEDS = 100


@pytest.fixture(scope="module")
def random_grid_results():
    """Criterion 4/5 shared sweep: per config, run 100 seeds and collect."""
    out = []
    for (n, m, beta_tok, f_tok) in RANDOM_GRID:
        beta = m if beta_tok == "m" else 3 * m * m
        f = 0 if f_tok == "0" else m - 1
        for seed in range(N_SEEDS):
            cfg = Config(n=n, m=m, beta=beta, f=f, seed=seed, scheduler="random")
            tr = run(cfg)
            amo_ok = ledger.check_at_most_once(tr).ok
            done = ledger.effectiveness(tr)
            bound = ledger.effectiveness_bound(n, m, beta)
            coll = ledger.check_collision_bounds(tr) if beta == 3 * m * m else None
            out.append({
                "n": n, "m": m, "beta": beta, "f": f, "seed": seed,
                "truncated": tr.truncated, "amo_ok": amo_ok,
                "bound_ok": done >= bound, "collisions": coll,
                "collision_events": ledger.collision_ledger(tr).total,
            })
    return out


def test_criterion_4_randomized_soundness(random_grid_results):
    total = len(random_grid_results)
    truncated = sum(1 for r in random_grid_results if r["truncated"])
    amo_bad = sum(1 for r in random_grid_results if not r["amo_ok"])
    bound_bad = sum(1 for r in random_grid_results
                    if not r["truncated"] and not r["bound_ok"])
    ok = truncated == 0 and amo_bad == 0 and bound_bad == 0
    verdict(4, ok, f"{total} runs: truncated={truncated}, amo_failures={amo_bad}, "
                   f"bound_failures={bound_bad}")


def test_criterion_5_collision_bounds(random_grid_results):
    checked = 0
    bad = 0
    worst_ratio = 0.0
    witnessed = 0  # collision events over the whole grid (pipeline sanity)
    for r in random_grid_results:
        witnessed += r["collision_events"]
        coll = r["collisions"]
        if coll is None:
            continue
        checked += 1
        worst_ratio = max(worst_ratio, coll.max_pair_ratio)
        if not coll.ok:
            bad += 1
    # The fixed seed grid deterministically produces collisions in the
    # beta = m half, so a zero here would mean the ledger went blind.
    ok = checked > 0 and bad == 0 and witnessed > 0
    verdict(5, ok, f"{checked} beta=3m^2 runs: violations={bad}, "
                   f"worst pair ratio {worst_ratio:.3f}; "
                   f"{witnessed} collision events observed grid-wide")


def test_criterion_6_work_scaling():
    ratios = {}
    for m in (2, 4, 8):
        for n in (2**10, 2**12, 2**14):
            beta = 3 * m * m
            worst = 0.0
            for seed in range(20):
                cfg = Config(n=n, m=m, beta=beta, f=0, seed=seed, scheduler="random")
                tr = run(cfg)
                assert not tr.truncated
                worst = max(worst, ledger.work_ratio(ledger.work(tr), n, m))
            ratios[(m, n)] = worst
    details = []
    ok = True
    for m in (2, 4, 8):
        row = [ratios[(m, n)] for n in (2**10, 2**12, 2**14)]
        spread = max(row) / min(row)
        ok &= spread <= 2.0
        details.append(f"m={m}: worst ratios {[round(r, 3) for r in row]} spread {spread:.2f}x")
    verdict(6, ok, "; ".join(details))


def test_criterion_7_iterated_algorithm():
    ok = True
    details = []
    for m in (2, 4):
        n = 2**14
        floor = n - ((2 + 1) * (m - 1) * m * log_weight(n) * log_weight(m)
                     + 3 * m * m + m - 2)
        worst_done = None
        worst_c = 0.0
        for f in (0, m - 1):
            for seed in range(20):
                s = run_iterative(n, m, 1.0, f=f, seed=seed)
                amo = ledger.check_at_most_once(s.traces)
                ok &= amo.ok and not s.truncated
                ok &= s.base_jobs_done >= floor
                worst_done = (s.base_jobs_done if worst_done is None
                              else min(worst_done, s.base_jobs_done))
                c = s.weighted_total / (n + m**4 * log_weight(n))
                worst_c = max(worst_c, c)
        details.append(f"m={m}: min done {worst_done} >= {floor}, "
                       f"work C <= {worst_c:.2f} (trend only)")
    verdict(7, ok, "; ".join(details))


def test_criterion_8_write_all():
    ok = True
    covs = []
    for f in (0, 3):
        for seed in range(20):
            s = run_writeall(2**12, 4, 1.0, f=f, seed=seed)
            ok &= s.wa_coverage == 2**12 and not s.truncated
            covs.append(s.wa_coverage)
    verdict(8, ok, f"40 runs: coverage always {sorted(set(covs))} of {2**12}")


def test_criterion_9_ranked_set_oracle():
    rng = random.Random(0xBEEF)
    bad = 0
    for _ in range(10_000):
        cap = rng.randint(1, 512)
        items = rng.sample(range(1, cap + 1), rng.randint(1, cap))
        s = RankedSet.from_iterable(cap, items)
        x_items = rng.sample(range(1, cap + 1), rng.randint(0, min(10, cap)))
        pool = sorted(set(items) - set(x_items))
        if not pool:
            continue
        i = rng.randint(1, len(pool))
        if select_excluding(s, x_items, i) != pool[i - 1]:
            bad += 1
    verdict(9, bad == 0, f"10000 randomized queries, mismatches={bad}")


def test_criterion_10_determinism():
    cfg = Config(n=200, m=4, beta=48, f=3, seed=0xD5EED, scheduler="random")
    rec1, ok1 = build_run_record(cfg)
    rec2, ok2 = build_run_record(cfg)
    identical = json.dumps(rec1, sort_keys=True) == json.dumps(rec2, sort_keys=True)
    verdict(10, identical and ok1 and ok2,
            f"records bit-identical={identical}, digest {rec1['trace_digest'][:16]}...")
