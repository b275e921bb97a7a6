"""Shared constants: process statuses, action codes, event kinds, cost model.

Both the pure-Python engine and the compiled core emit traces in terms of
these codes, so they live in one dependency-free module.
"""

from __future__ import annotations

from typing import NamedTuple

# Process status codes (ProcessState.status).
S_COMP_NEXT = 0
S_SET_NEXT = 1
S_GATHER_TRY = 2
S_GATHER_DONE = 3
S_CHECK = 4
S_DO = 5
S_DONE = 6
S_END = 7
S_STOP = 8
S_DRAIN_TRY = 9   # flagged variant: rebuilding the announce snapshot before ending
S_DRAIN_DONE = 10  # flagged variant: polling done rows to exhaustion before ending

STATUS_NAMES = {
    S_COMP_NEXT: "comp_next",
    S_SET_NEXT: "set_next",
    S_GATHER_TRY: "gather_try",
    S_GATHER_DONE: "gather_done",
    S_CHECK: "check",
    S_DO: "do",
    S_DONE: "done",
    S_END: "end",
    S_STOP: "stop",
    S_DRAIN_TRY: "drain_try",
    S_DRAIN_DONE: "drain_done",
}

TERMINAL_STATUSES = (S_END, S_STOP)
DRAIN_STATUSES = (S_DRAIN_TRY, S_DRAIN_DONE)

# Action codes recorded per engine move.
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

ACTION_NAMES = {
    A_COMP_NEXT: "compNext",
    A_SET_NEXT: "setNext",
    A_GATHER_TRY: "gatherTry",
    A_GATHER_DONE: "gatherDone",
    A_CHECK: "check",
    A_DO: "do",
    A_DONE: "done",
    A_CRASH: "crash",
    A_DRAIN_TRY: "drainTry",
    A_DRAIN_DONE: "drainDone",
}

# Collision witness kinds.
W_TRY = 0
W_DONE = 1

WITNESS_NAMES = {W_TRY: "try", W_DONE: "done"}

# Execution modes.
MODE_PLAIN = "plain"
MODE_FLAGGED = "flagged"
MODE_WRITEALL = "writeall"


class DoEvent(NamedTuple):
    step: int
    pid: int
    job: int


class CrashEvent(NamedTuple):
    step: int
    pid: int


class CollisionWitness(NamedTuple):
    """One collision of `pid` with `witness` on `job`, observed at `read_step`.

    Emitted at `step` (the failing check); `kind` records whether the
    observation was an announce-cell read or a done-cell read.
    """

    step: int
    pid: int
    witness: int
    job: int
    kind: int
    read_step: int


class DoneWrite(NamedTuple):
    step: int
    pid: int
    slot: int
    job: int


class FlagRaise(NamedTuple):
    step: int
    pid: int


class Termination(NamedTuple):
    step: int
    pid: int


def log_weight(x: int) -> int:
    """Cost-model logarithm: max(1, ceil(log2(x + 1))).

    Computed exactly via bit_length (ceil(log2(x + 1)) == x.bit_length() for
    x >= 1), so compiled and pure paths cannot disagree on rounding.
    """
    if x < 1:
        return 1
    return x.bit_length()
