"""Atomic read/write shared memory with per-access metering.

One read or write touches exactly one cell.  Cells follow a single-writer
discipline (announce cell p and done row p are written only by process p),
enforced here as bug traps rather than trusted.  The counters are simulation
bookkeeping: the scheduling adversary may observe them, simulated processes
may not.
"""

from __future__ import annotations

from typing import List, Tuple


class ConfigurationError(ValueError):
    """An id or index fell outside the configured universe."""


class InvariantError(AssertionError):
    """A shared-memory invariant (write-once, prefix growth) was broken."""


class SharedMemory:
    """Registers for one execution: announce array, done matrix, flag, wa."""

    __slots__ = (
        "m",
        "n",
        "next_cells",
        "done_rows",
        "flag",
        "wa",
        "reads_by",
        "writes_by",
        "reads",
        "writes",
    )

    def __init__(self, m: int, n: int, wa=None) -> None:
        if m < 1 or n < 1:
            raise ConfigurationError("need m >= 1 processes and n >= 1 jobs")
        self.m = m
        self.n = n
        self.next_cells: List[int] = [0] * (m + 1)  # 1-based; 0 = unset
        self.done_rows: List[List[int]] = [[0] * (n + 1) for _ in range(m + 1)]
        self.flag = 0
        # 1-based buffer shared across an iterated run; owned by the caller.
        self.wa = wa
        self.reads_by = [0] * (m + 1)
        self.writes_by = [0] * (m + 1)
        self.reads = 0
        self.writes = 0

    def _check_pid(self, p: int) -> None:
        if not 1 <= p <= self.m:
            raise ConfigurationError(f"process id {p} outside 1..{self.m}")

    # -- announce cells ----------------------------------------------------

    def read_next(self, reader: int, q: int) -> int:
        self._check_pid(reader)
        self._check_pid(q)
        self.reads_by[reader] += 1
        self.reads += 1
        return self.next_cells[q]

    def write_next(self, p: int, v: int) -> None:
        self._check_pid(p)
        if v == 0:
            raise InvariantError("announce cells are never reset to 0")
        if not 1 <= v <= self.n + 1:
            raise ConfigurationError(f"announced value {v} outside 1..{self.n + 1}")
        self.writes_by[p] += 1
        self.writes += 1
        self.next_cells[p] = v

    # -- done matrix --------------------------------------------------------

    def read_done(self, reader: int, q: int, j: int) -> int:
        self._check_pid(reader)
        self._check_pid(q)
        if not 1 <= j <= self.n:
            raise ConfigurationError(f"done index {j} outside 1..{self.n}")
        self.reads_by[reader] += 1
        self.reads += 1
        return self.done_rows[q][j]

    def write_done(self, p: int, j: int, v: int) -> None:
        self._check_pid(p)
        if not 1 <= j <= self.n:
            raise ConfigurationError(f"done index {j} outside 1..{self.n}")
        if not 1 <= v <= self.n:
            raise ConfigurationError(f"done value {v} outside 1..{self.n}")
        row = self.done_rows[p]
        if row[j] != 0:
            raise InvariantError(f"done[{p}][{j}] already holds {row[j]} (write-once)")
        if j > 1 and row[j - 1] == 0:
            raise InvariantError(f"done row {p} must grow as a prefix (gap before {j})")
        self.writes_by[p] += 1
        self.writes += 1
        row[j] = v

    # -- termination flag (flagged variant) ----------------------------------

    def read_flag(self, reader: int) -> int:
        self._check_pid(reader)
        self.reads_by[reader] += 1
        self.reads += 1
        return self.flag

    def raise_flag(self, p: int) -> None:
        self._check_pid(p)
        self.writes_by[p] += 1
        self.writes += 1
        self.flag = 1  # monotone: never lowered

    # -- write-all array ------------------------------------------------------

    def wa_write(self, p: int, i: int) -> None:
        self._check_pid(p)
        if self.wa is None:
            raise ConfigurationError("write-all array not configured")
        if not 1 <= i < len(self.wa):
            raise ConfigurationError(f"write-all index {i} outside 1..{len(self.wa) - 1}")
        self.writes_by[p] += 1
        self.writes += 1
        self.wa[i] = 1

    # -- snapshots -----------------------------------------------------------

    def row_prefix(self, q: int) -> Tuple[int, ...]:
        """Nonzero prefix of done row q."""
        row = self.done_rows[q]
        out = []
        for j in range(1, self.n + 1):
            if row[j] == 0:
                break
            out.append(row[j])
        return tuple(out)

    def snapshot(self) -> dict:
        return {
            "next": tuple(self.next_cells[1:]),
            "done": tuple(self.row_prefix(q) for q in range(1, self.m + 1)),
            "flag": self.flag,
            "wa": tuple(int(v) for v in self.wa[1:]) if self.wa is not None else None,
        }
