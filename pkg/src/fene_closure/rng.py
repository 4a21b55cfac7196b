"""Counter-based random streams.

Every normal draw is a pure function of ``(seed, step, particle, draw)``. The
step counter lives on :class:`RngStream` and advances once per ensemble step,
so replaying a step, retrying a rejected move, or splitting the particle range
across workers all reproduce identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

MASK64 = (1 << 64) - 1
_STEP_MUL = 0xD1B54A32D192ED03
_SEED_OFF = 0x632BE59BD9B4E019


def mix64(z: int) -> int:
    """SplitMix64 finalizer on Python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def step_word(seed: int, step: int) -> np.uint64:
    """64-bit stream word for one step; particle and draw indices are hashed in the kernels."""
    key = mix64((seed & MASK64) + _SEED_OFF)
    return np.uint64(mix64(key ^ ((step * _STEP_MUL) & MASK64)))


@dataclass
class RngStream:
    """Seeded stream with a step counter.

    Parameters
    ----------
    seed : int
    counter : int
        Index of the next step to be drawn.
    sign : int
        ``-1`` negates every normal draw (antithetic stream).
    """

    seed: int
    counter: int = 0
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def next_step(self) -> int:
        s = self.counter
        self.counter += 1
        return s

    def word(self, step: int) -> np.uint64:
        return step_word(self.seed, step)

    def normals(self, n: int, step: int | None = None) -> np.ndarray:
        """``n`` standard normals for particles ``0..n-1`` at draw 0 of ``step``."""
        if step is None:
            step = self.next_step()
        idx = np.arange(n, dtype=np.int64)
        return _kernels.get().normals(self.word(step), idx, np.zeros(n, np.int64), float(self.sign))

    def uniforms(self, n: int, step: int | None = None) -> np.ndarray:
        if step is None:
            step = self.next_step()
        idx = np.arange(n, dtype=np.int64)
        return _kernels.get().uniforms(self.word(step), idx, np.zeros(n, np.int64))

    def spawn(self) -> "RngStream":
        """Independent copy sharing seed and position (for common random numbers)."""
        return RngStream(self.seed, self.counter, self.sign)
