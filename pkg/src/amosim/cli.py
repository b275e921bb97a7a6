"""Command-line front end.

stdout carries machine-readable JSON records only (one per line);
human-oriented summaries and warnings go to stderr.  Exit codes: 0 all
checks passed, 1 a property was violated, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import warnings
from typing import List, Optional, Sequence, Tuple

from . import core, ledger
from .engine import Config, run
from .events import MODE_FLAGGED, MODE_PLAIN
from .explorer import explore
from .hierarchy import run_iterative, run_writeall
from .registers import ConfigurationError

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _threads() -> int:
    raw = os.environ.get("AMO_SIM_THREADS", "")
    try:
        v = int(raw)
        if v >= 1:
            return v
    except ValueError:
        pass
    return os.cpu_count() or 1


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    sys.stdout.flush()


def _info(msg: str) -> None:
    sys.stderr.write(msg + "\n")


def run_id_for(cfg: Config) -> str:
    blob = json.dumps(cfg.canonical_items(), sort_keys=False)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_run_record(cfg: Config) -> Tuple[dict, bool]:
    """Execute one configuration and assemble its flat result record."""
    trace = run(cfg)
    amo = ledger.check_at_most_once(trace)
    rows_ok = ledger.check_done_rows_vs_do_events(trace).ok
    meter_ok = ledger.check_metering(trace)
    report = ledger.work(trace)
    done_count = ledger.effectiveness(trace)
    bound = ledger.effectiveness_bound(cfg.n, cfg.m, cfg.beta)
    bound_ok: Optional[bool] = None
    if not trace.truncated:
        bound_ok = done_count >= bound
    coll = ledger.check_collision_bounds(trace)
    collision_claimed = cfg.beta >= 3 * cfg.m * cfg.m
    collisions_ok: Optional[bool] = coll.ok if collision_claimed else None

    record = {
        "record": "run",
        "run_id": run_id_for(cfg),
        "n": cfg.n,
        "m": cfg.m,
        "beta": cfg.beta,
        "f": cfg.f,
        "mode": cfg.mode,
        "scheduler": cfg.scheduler,
        "seed": cfg.seed,
        "crash_at": [f"{t}:{p}" for (t, p) in (cfg.crash_times or ())],
        "max_steps": cfg.effective_max_steps,
        "steps": trace.steps,
        "truncated": trace.truncated,
        "crashes": trace.crashes_used,
        "done_count": done_count,
        "effectiveness_bound": bound,
        "bound_ok": bound_ok,
        "amo_ok": amo.ok,
        "done_rows_ok": rows_ok,
        "metering_ok": meter_ok,
        "transitions": report.transitions,
        "shm_reads": report.shm_reads,
        "shm_writes": report.shm_writes,
        "set_ops": report.set_ops,
        "rank_charges": report.rank_charges,
        "weighted_total": report.weighted_total,
        "work_ratio": round(ledger.work_ratio(report, cfg.n, cfg.m), 6),
        "collisions_total": coll.total,
        "collisions_total_cap": coll.total_cap,
        "collisions_max_pair_ratio": round(coll.max_pair_ratio, 6),
        "collisions_ok": collisions_ok,
        "trace_digest": trace.digest(),
        "kernel": core.kernel_name(),
    }
    hard_truncation = trace.truncated and cfg.beta >= cfg.m
    ok = (
        amo.ok
        and rows_ok
        and meter_ok
        and bound_ok is not False
        and collisions_ok is not False
        and not hard_truncation
    )
    return record, ok


def _parse_crash_at(values: Optional[Sequence[str]]) -> Optional[Tuple[Tuple[int, int], ...]]:
    if not values:
        return None
    out = []
    for item in values:
        try:
            t_s, p_s = item.split(":")
            out.append((int(t_s), int(p_s)))
        except ValueError as exc:
            raise ConfigurationError(f"bad --crash-at entry {item!r}; want STEP:PID") from exc
    return tuple(out)


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigurationError(f"unknown config key {key!r}")
        if getattr(args, attr) is None:
            setattr(args, attr, value)


def _require(args: argparse.Namespace, names: Sequence[str]) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise ConfigurationError(f"missing required option --{name.replace('_', '-')}")


def cmd_run(args: argparse.Namespace) -> int:
    _require(args, ["n", "m", "beta"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = Config(
            n=args.n, m=args.m, beta=args.beta, f=args.f or 0,
            mode=args.mode or MODE_PLAIN,
            seed=args.seed or 0,
            scheduler=args.scheduler or "rr",
            crash_times=_parse_crash_at(args.crash_at),
            max_steps=args.max_steps,
        )
    for w in caught:
        _info(f"warning: {w.message}")
    record, ok = build_run_record(cfg)
    _emit(record)
    _info(
        f"run {record['run_id']}: done {record['done_count']}/{cfg.n} "
        f"(bound {record['effectiveness_bound']}), amo_ok={record['amo_ok']}, "
        f"steps={record['steps']}"
        + (" [TRUNCATED]" if record["truncated"] else "")
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def _grid_values(raw: str, m: int) -> List[int]:
    """Parse a sweep token list; beta/f support m-relative forms."""
    out = []
    for token in raw.split(","):
        token = token.strip().lower()
        if token == "m":
            out.append(m)
        elif token in ("3m2", "3m^2"):
            out.append(3 * m * m)
        elif token == "m-1":
            out.append(m - 1)
        else:
            out.append(int(token))
    return out


def _sweep_one(item):
    cfg_kwargs, index = item
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = Config(**cfg_kwargs)
    record, ok = build_run_record(cfg)
    record["sweep_index"] = index
    return record, ok


def cmd_sweep(args: argparse.Namespace) -> int:
    _require(args, ["n", "m", "beta"])
    jobs = []
    index = 0
    for n in [int(x) for x in str(args.n).split(",")]:
        for m in [int(x) for x in str(args.m).split(",")]:
            for beta in _grid_values(str(args.beta), m):
                for f in _grid_values(str(args.f if args.f is not None else "0"), m):
                    for s in range(args.seeds):
                        jobs.append((dict(
                            n=n, m=m, beta=beta, f=f,
                            mode=args.mode or MODE_PLAIN,
                            seed=(args.seed or 0) + s,
                            scheduler=args.scheduler or "random",
                        ), index))
                        index += 1

    nproc = min(_threads(), len(jobs)) or 1
    results: List[Tuple[dict, bool]] = []
    if nproc > 1 and len(jobs) > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(nproc) as pool:
            results = pool.map(_sweep_one, jobs)
    else:
        results = [_sweep_one(j) for j in jobs]

    out_fh = open(args.out, "w") if args.out else None
    all_ok = True
    agg: dict = {}
    for record, ok in results:
        all_ok &= ok
        line = json.dumps(record, sort_keys=True)
        if out_fh:
            out_fh.write(line + "\n")
        else:
            sys.stdout.write(line + "\n")
        key = (record["n"], record["m"], record["beta"], record["f"])
        bucket = agg.setdefault(key, {"runs": 0, "ratios": [], "amo_fail": 0,
                                      "bound_fail": 0, "coll_fail": 0, "trunc": 0})
        bucket["runs"] += 1
        bucket["ratios"].append(record["work_ratio"])
        bucket["amo_fail"] += 0 if record["amo_ok"] else 1
        bucket["bound_fail"] += 1 if record["bound_ok"] is False else 0
        bucket["coll_fail"] += 1 if record["collisions_ok"] is False else 0
        bucket["trunc"] += 1 if record["truncated"] else 0
    if out_fh:
        out_fh.close()

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "m", "beta", "f", "runs", "mean_work_ratio",
                        "max_work_ratio", "amo_failures", "bound_failures",
                        "collision_failures", "truncated"])
            for (n, m, beta, f), b in sorted(agg.items()):
                ratios = b["ratios"]
                w.writerow([n, m, beta, f, b["runs"],
                            round(sum(ratios) / len(ratios), 6),
                            round(max(ratios), 6), b["amo_fail"],
                            b["bound_fail"], b["coll_fail"], b["trunc"]])
    _info(f"sweep: {len(results)} runs, all_ok={all_ok}")
    return EXIT_OK if all_ok else EXIT_VIOLATION


def _iterate_common(args: argparse.Namespace, writeall: bool) -> int:
    _require(args, ["n", "m", "epsilon"])
    runner = run_writeall if writeall else run_iterative
    summary = runner(args.n, args.m, args.epsilon, f=args.f or 0,
                     seed=args.seed or 0, scheduler=args.scheduler or "random")
    amo = ledger.check_at_most_once(summary.traces)
    for rec in summary.levels:
        _emit({
            "record": "level",
            "level": rec.level,
            "size": rec.size,
            "job_count": rec.job_count,
            "super_jobs_done": rec.super_jobs_done,
            "base_jobs_done": rec.base_jobs_done,
            "leftover_count": rec.leftover_count,
            "steps": rec.steps,
            "crashes": rec.crashes,
            "weighted_total": rec.work.weighted_total if rec.work else 0,
            "truncated": rec.truncated,
        })
    floor = summary.effectiveness_floor
    floor_ok = summary.base_jobs_done >= floor
    result = {
        "record": "writeall_summary" if writeall else "iterate_summary",
        "n": summary.n,
        "m": summary.m,
        "f": summary.f,
        "epsilon": summary.eps,
        "seed": summary.seed,
        "scheduler": summary.scheduler,
        "schedule": list(summary.schedule),
        "base_jobs_done": summary.base_jobs_done,
        "effectiveness_floor": floor,
        "floor_ok": floor_ok,
        "amo_ok": amo.ok,
        "leftover_base_jobs": len(summary.leftover_base_jobs),
        "weighted_total": summary.weighted_total,
        "crashes": summary.crashes_used,
        "truncated": summary.truncated,
        "kernel": core.kernel_name(),
    }
    ok = amo.ok and not summary.truncated
    if writeall:
        result["wa_coverage"] = summary.wa_coverage
        result["sweep_writes"] = summary.sweep_writes
        ok = ok and summary.wa_coverage == summary.n
    else:
        ok = ok and floor_ok
    _emit(result)
    _info(
        f"{'writeall' if writeall else 'iterate'}: done {summary.base_jobs_done}/{summary.n}"
        + (f", coverage {summary.wa_coverage}" if writeall else f", floor {floor}")
        + f", amo_ok={amo.ok}"
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_iterate(args: argparse.Namespace) -> int:
    return _iterate_common(args, writeall=False)


def cmd_writeall(args: argparse.Namespace) -> int:
    return _iterate_common(args, writeall=True)


def cmd_explore(args: argparse.Namespace) -> int:
    _require(args, ["n", "m", "beta"])
    report = explore(args.n, args.m, args.beta, args.f or 0,
                     depth_limit=args.depth_limit,
                     prune_crashes=not args.no_crash_pruning)
    _emit(report.to_record())
    _info(
        f"explore({args.n},{args.m},{args.beta},{args.f or 0}): "
        f"{report.states_visited} states, min_eff={report.min_effectiveness} "
        f"(bound {report.effectiveness_bound}), amo_ok={report.amo_ok}"
    )
    return EXIT_OK if report.ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amosim",
        description="Simulator and checker for at-most-once task execution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, scheds) -> None:
        p.add_argument("--n", type=int, help="number of jobs")
        p.add_argument("--m", type=int, help="number of processes")
        p.add_argument("--f", type=int, help="crash budget (< m)")
        p.add_argument("--seed", type=int, help="64-bit run seed")
        p.add_argument("--scheduler", choices=scheds)
        p.add_argument("--config", help="JSON file with the same keys as the flags")

    p_run = sub.add_parser("run", help="one execution plus its checks")
    common(p_run, ["rr", "random", "theorem3", "crash-at"])
    p_run.add_argument("--beta", type=int, help="termination parameter")
    p_run.add_argument("--mode", choices=[MODE_PLAIN, MODE_FLAGGED])
    p_run.add_argument("--crash-at", action="append", metavar="STEP:PID",
                       help="scripted crash (repeatable)")
    p_run.add_argument("--max-steps", type=int)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid of runs, JSONL + CSV aggregate")
    common(p_sweep, ["rr", "random"])
    p_sweep.add_argument("--beta", help="comma list; accepts m and 3m2 tokens")
    p_sweep.add_argument("--mode", choices=[MODE_PLAIN, MODE_FLAGGED])
    p_sweep.add_argument("--seeds", type=int, default=10, help="seeds per cell")
    p_sweep.add_argument("--out", help="JSONL output path (default stdout)")
    p_sweep.add_argument("--csv", help="CSV aggregate path")
    p_sweep.set_defaults(func=cmd_sweep)
    # sweep's --n/--m accept comma lists; keep them as strings
    for act in p_sweep._actions:
        if act.dest in ("n", "m", "f"):
            act.type = str

    p_it = sub.add_parser("iterate", help="iterated super-job execution")
    common(p_it, ["rr", "random"])
    p_it.add_argument("--epsilon", type=float, help="1/epsilon must be integral")
    p_it.set_defaults(func=cmd_iterate)

    p_wa = sub.add_parser("writeall", help="write-all execution")
    common(p_wa, ["rr", "random"])
    p_wa.add_argument("--epsilon", type=float)
    p_wa.set_defaults(func=cmd_writeall)

    p_ex = sub.add_parser("explore", help="exhaustive interleaving exploration")
    common(p_ex, [])
    p_ex.add_argument("--beta", type=int)
    p_ex.add_argument("--depth-limit", type=int)
    p_ex.add_argument("--no-crash-pruning", action="store_true",
                      help="branch crashes at every status")
    p_ex.set_defaults(func=cmd_explore)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage already; normalize other codes
        return EXIT_CONFIG if exc.code not in (0,) else 0
    try:
        _apply_config_file(args, parser)
        if args.command == "sweep":
            for attr in ("n", "m", "f"):
                if getattr(args, attr) is not None:
                    setattr(args, attr, str(getattr(args, attr)))
        return args.func(args)
    except ConfigurationError as exc:
        _info(f"configuration error: {exc}")
        return EXIT_CONFIG
    except Exception as exc:  # property violations surfaced as errors
        _info(f"error: {type(exc).__name__}: {exc}")
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
