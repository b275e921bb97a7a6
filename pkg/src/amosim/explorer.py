"""Bounded exhaustive exploration of interleavings and crash placements.

Verifies, over every schedule the adversary could produce for a small
instance, that no job is performed twice, and that every terminal execution
performs at least n - (beta + m - 2) jobs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from . import core
from .engine import Config, ExecutionTrace, ScriptedAdversary, run_with_adversary
from .registers import ConfigurationError


@dataclass(frozen=True)
class ExplorationReport:
    n: int
    m: int
    beta: int
    f: int
    crash_pruning: bool
    states_visited: int
    terminal_states: int
    min_effectiveness: Optional[int]
    effectiveness_bound: int
    bound_ok: bool
    amo_ok: bool
    violation_path: Optional[Tuple[int, ...]]
    min_path: Optional[Tuple[int, ...]]
    max_depth: int
    nontermination_possible: bool
    depth_exceeded: bool
    undefined_rank_seen: bool
    elapsed_seconds: float

    @property
    def ok(self) -> bool:
        return self.amo_ok and self.bound_ok and not self.depth_exceeded

    def to_record(self) -> dict:
        return {
            "record": "exploration",
            "n": self.n,
            "m": self.m,
            "beta": self.beta,
            "f": self.f,
            "crash_pruning": self.crash_pruning,
            "states_visited": self.states_visited,
            "terminal_states": self.terminal_states,
            "min_effectiveness": self.min_effectiveness,
            "effectiveness_bound": self.effectiveness_bound,
            "bound_ok": self.bound_ok,
            "amo_ok": self.amo_ok,
            "violation_path": list(self.violation_path) if self.violation_path else None,
            "min_path": list(self.min_path) if self.min_path else None,
            "max_depth": self.max_depth,
            "nontermination_possible": self.nontermination_possible,
            "depth_exceeded": self.depth_exceeded,
            "undefined_rank_seen": self.undefined_rank_seen,
            "elapsed_seconds": round(self.elapsed_seconds, 3),
        }


def explore(n: int, m: int, beta: int, f: int,
            depth_limit: Optional[int] = None,
            prune_crashes: bool = True) -> ExplorationReport:
    if m < 1 or n < m:
        raise ConfigurationError("need n >= m >= 1")
    if not 0 <= f <= m - 1:
        raise ConfigurationError("crash budget must satisfy 0 <= f <= m-1")
    if depth_limit is None:
        depth_limit = 64 * n * m * m
    start = time.perf_counter()
    res = core.explore_core(n=n, m=m, beta=beta, f=f, depth_limit=depth_limit,
                            prune_crashes=prune_crashes)
    elapsed = time.perf_counter() - start
    bound = n - (beta + m - 2)
    min_eff = res["min_effectiveness"]
    bound_ok = min_eff is not None and min_eff >= bound
    if res["nontermination_possible"] and beta >= m:
        # Would contradict wait-freedom; surface as a failed bound.
        bound_ok = False
    if res["depth_exceeded"]:
        bound_ok = False
    return ExplorationReport(
        n=n, m=m, beta=beta, f=f,
        crash_pruning=prune_crashes,
        states_visited=res["states_visited"],
        terminal_states=res["terminal_states"],
        min_effectiveness=min_eff,
        effectiveness_bound=bound,
        bound_ok=bound_ok,
        amo_ok=res["violation_path"] is None,
        violation_path=tuple(res["violation_path"]) if res["violation_path"] else None,
        min_path=tuple(res["min_path"]) if res["min_path"] else None,
        max_depth=res["max_depth"],
        nontermination_possible=res["nontermination_possible"],
        depth_exceeded=res["depth_exceeded"],
        undefined_rank_seen=res["undefined_rank_seen"],
        elapsed_seconds=elapsed,
    )


def path_to_moves(path: Sequence[int]) -> List[Tuple[str, int]]:
    """Explorer move codes (pid steps, -pid crashes) to adversary moves."""
    return [("step", mv) if mv > 0 else ("crash", -mv) for mv in path]


def counterexample_replay(n: int, m: int, beta: int, f: int,
                          path: Sequence[int]) -> ExecutionTrace:
    """Replay an explored choice sequence through the reference engine."""
    cfg = Config(n=n, m=m, beta=beta, f=f, scheduler="rr")
    return run_with_adversary(cfg, ScriptedAdversary(path_to_moves(path)))
