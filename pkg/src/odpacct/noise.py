"""Seeded randomness for mechanisms, with a deterministic zero-noise mode for golden tests."""

from __future__ import annotations

import numpy as np


class NoiseSource:
    """Randomness provider handed to every mechanism.

    ``NoiseSource(seed)`` wraps a PCG64 generator, so equal seeds give equal
    streams. ``NoiseSource.zero()`` returns 0 from every noise draw and a
    fixed value (0.5 unless pinned) from ``uniform``.

    A single instance must not be shared between concurrent runs.
    """

    def __init__(self, seed: int | None = None):
        self.seed = seed
        self._rng: np.random.Generator | None = np.random.default_rng(seed)
        self._pinned_uniform = 0.5

    @classmethod
    def zero(cls, uniform: float = 0.5) -> "NoiseSource":
        src = cls.__new__(cls)
        src.seed = None
        src._rng = None
        src._pinned_uniform = float(uniform)
        return src

    @classmethod
    def spawn(cls, seed: int, n: int) -> list["NoiseSource"]:
        """Independent child sources, e.g. one per Monte-Carlo worker."""
        children = np.random.SeedSequence(seed).spawn(n)
        out = []
        for child in children:
            src = cls.__new__(cls)
            src.seed = seed
            src._rng = np.random.default_rng(child)
            src._pinned_uniform = 0.5
            out.append(src)
        return out

    @property
    def is_zero(self) -> bool:
        return self._rng is None

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            raise RuntimeError("zero-noise source has no generator")
        return self._rng

    def uniform(self, size=None):
        if self._rng is None:
            return self._pinned_uniform if size is None else np.full(size, self._pinned_uniform)
        return self._rng.random(size)

    def laplace(self, scale: float, size=None):
        if scale < 0:
            raise ValueError(f"Laplace scale must be non-negative, got {scale}")
        if self._rng is None or scale == 0:
            return 0.0 if size is None else np.zeros(size)
        return self._rng.laplace(0.0, scale, size)

    def gamma(self, shape: float, scale: float, size=None):
        if self._rng is None:
            return 0.0 if size is None else np.zeros(size)
        return self._rng.gamma(shape, scale, size)

    def normal(self, size=None):
        if self._rng is None:
            return 0.0 if size is None else np.zeros(size)
        return self._rng.standard_normal(size)

    def __repr__(self) -> str:
        if self._rng is None:
            return f"NoiseSource.zero(uniform={self._pinned_uniform})"
        return f"NoiseSource(seed={self.seed})"
