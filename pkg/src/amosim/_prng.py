"""Deterministic 64-bit generator shared by the pure and compiled paths.

splitmix64 with Lemire-style bounded draws; both implementations must emit
identical streams so traces reproduce bit-for-bit regardless of which core
ran them.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
CRASH_PLAN_SALT = 0xD1B54A32D192ED03


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def bounded(self, k: int) -> int:
        """Uniform-ish draw in [0, k); k >= 1."""
        return (self.next_u64() * k) >> 64


def auto_crash_plan(seed: int, n: int, m: int, f: int) -> list:
    """Deterministic schedule of f crashes: distinct pids at drawn move indices."""
    rng = SplitMix64(seed ^ CRASH_PLAN_SALT)
    pids = list(range(1, m + 1))
    for i in range(f):
        j = i + rng.bounded(m - i)
        pids[i], pids[j] = pids[j], pids[i]
    horizon = max(1, 4 * n * m)
    times = sorted(rng.bounded(horizon) for _ in range(f))
    return list(zip(times, pids[:f]))
