"""Laplace primitives, the toy coin-flip mechanism and the Sparse Vector Technique.

SVT's output partition is indexed by the number c' of "above" answers; the
cell with c' tops costs ``eps1 + (c'/c) * eps2``. The sparse-vector release
re-invests the unspent ``((c - c')/c) * eps2`` into the value release.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import BOTTOM, BOTTOM_CELL, VALUE_CELL, OdpGuarantee
from .noise import NoiseSource

STOP = None
"""End-of-stream token for SVT query streams."""


def laplace_quantile(scale: float, p: float) -> float:
    """Inverse CDF of the zero-centred Laplace distribution."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if p >= 0.5:
        return -scale * math.log(2.0 * (1.0 - p))
    return scale * math.log(2.0 * p)


# -- toy mechanism -------------------------------------------------------------


def toy_mechanism(f_value: float, eps: float, noise: NoiseSource):
    """Flip a fair coin; on heads release ``f_value + Lap(1/eps)``, on tails return ⊥."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if noise.uniform() < 0.5:
        return f_value + noise.laplace(1.0 / eps)
    return BOTTOM


def toy_guarantee(eps: float) -> OdpGuarantee:
    return OdpGuarantee(((VALUE_CELL, eps), (BOTTOM_CELL, 0.0)), 0.0)


def toy_cell(output) -> str:
    return BOTTOM_CELL if output is BOTTOM else VALUE_CELL


# -- sparse vector technique ---------------------------------------------------


@dataclass(frozen=True)
class SvtParams:
    eps1: float
    eps2: float
    c: int
    sensitivity: float = 1.0

    def __post_init__(self):
        if not (self.eps1 > 0 and self.eps2 > 0 and self.sensitivity > 0):
            raise ValueError("eps1, eps2 and sensitivity must be positive")
        if isinstance(self.c, bool) or int(self.c) != self.c or self.c < 1:
            raise ValueError(f"c must be a positive integer, got {self.c!r}")
        object.__setattr__(self, "c", int(self.c))

    @property
    def threshold_scale(self) -> float:
        return self.sensitivity / self.eps1

    @property
    def query_scale(self) -> float:
        return 2.0 * self.c * self.sensitivity / self.eps2


@dataclass(frozen=True)
class SvtTranscript:
    answers: tuple[bool, ...]  # True is ⊤ (above threshold)

    @property
    def top_count(self) -> int:
        return sum(self.answers)

    @property
    def top_indices(self) -> list[int]:
        return [i for i, a in enumerate(self.answers) if a]


def svt_run(
    params: SvtParams,
    queries: Iterable[float | None],
    thresholds: Sequence[float] | float,
    noise: NoiseSource,
) -> SvtTranscript:
    """Run SVT over a pull-based stream of query answers.

    The stream ends at an explicit ``STOP`` token or when exhausted; the run
    also stops once ``params.c`` tops have been output. ``thresholds`` is
    either one threshold per query or a single shared value.
    """
    rho = noise.laplace(params.threshold_scale)
    answers: list[bool] = []
    count = 0
    for i, q in enumerate(queries):
        if q is STOP or count >= params.c:
            break
        if np.isscalar(thresholds):
            t = float(thresholds)
        else:
            if i >= len(thresholds):
                raise ValueError(f"no threshold for query {i}; got {len(thresholds)} thresholds")
            t = thresholds[i]
        nu = noise.laplace(params.query_scale)
        top = q + nu >= t + rho
        answers.append(bool(top))
        count += top
    return SvtTranscript(tuple(answers))


def svt_odp_guarantee(params: SvtParams) -> OdpGuarantee:
    """Cells c' = 0..c; cell c' costs eps1 + (c'/c) eps2, delta 0."""
    c = params.c
    return OdpGuarantee(tuple((k, params.eps1 + (k / c) * params.eps2) for k in range(c + 1)), 0.0)


def split_svt_budget(eps_svt: float, c: int) -> tuple[float, float]:
    """Split an SVT budget so that eps1/eps2 = (2c)^(-2/3)."""
    if eps_svt <= 0:
        raise ValueError("eps_svt must be positive")
    if isinstance(c, bool) or int(c) != c or c < 1:
        raise ValueError(f"c must be a positive integer, got {c!r}")
    eps1 = eps_svt / (1.0 + (2.0 * c) ** (2.0 / 3.0))
    return eps1, eps_svt - eps1


# -- sparse vector release -----------------------------------------------------


def release_budget(params: SvtParams, eps3: float, top_count: int) -> float:
    """Value-release budget after SVT realized ``top_count`` tops (reclaims unspent eps2)."""
    return eps3 + ((params.c - top_count) / params.c) * params.eps2


def odp_entry_scale(params: SvtParams, eps3: float, top_count: int, value_sensitivity: float = 1.0) -> float:
    """Laplace scale per released entry when the budget is split over the realized count."""
    if top_count < 1:
        raise ValueError("no entries released")
    return value_sensitivity * top_count / release_budget(params, eps3, top_count)


def baseline_entry_scale(params: SvtParams, eps3: float, value_sensitivity: float = 1.0) -> float:
    """Worst-case scale: eps3 split over all c possible entries."""
    return value_sensitivity * params.c / eps3


@dataclass(frozen=True)
class SparseReleaseResult:
    released_indices: tuple[int, ...]
    released_values: tuple[float, ...]
    per_entry_scale: float | None
    realized_cell: int
    transcript: SvtTranscript


def sparse_release(
    values: Sequence[float],
    value_sensitivity: float,
    params: SvtParams,
    eps3: float,
    threshold: float,
    noise: NoiseSource,
) -> SparseReleaseResult:
    """Release noisy values of the entries whose magnitude passes SVT."""
    if eps3 <= 0:
        raise ValueError("eps3 must be positive")
    values = [float(v) for v in values]
    transcript = svt_run(params, (abs(v) for v in values), threshold, noise)
    idx = transcript.top_indices
    k = len(idx)
    if k == 0:
        return SparseReleaseResult((), (), None, 0, transcript)
    scale = odp_entry_scale(params, eps3, k, value_sensitivity)
    released = tuple(values[i] + noise.laplace(scale) for i in idx)
    return SparseReleaseResult(tuple(idx), released, scale, k, transcript)


def sparse_release_guarantee(params: SvtParams, eps3: float) -> OdpGuarantee:
    """Joint guarantee of SVT plus the re-budgeted release: every cell costs eps1 + eps2 + eps3.

    Because the release re-invests exactly what SVT did not spend, the total
    equals the DP bound; the gain is less noise per released entry.
    """
    total = params.eps1 + params.eps2 + eps3
    return OdpGuarantee(tuple((k, total) for k in range(params.c + 1)), 0.0)


def svt_top_counts(
    query_values: np.ndarray,
    threshold: float,
    params: SvtParams,
    rho: np.ndarray,
    nu: np.ndarray,
) -> np.ndarray:
    """Vectorized c' for a batch of SVT runs on a fixed query list.

    ``rho`` has shape (trials,), ``nu`` shape (trials, n_queries). Answers
    after the c-th top are never produced, so c' = min(c, #tops over all
    queries), whatever the order.
    """
    tops = (query_values[None, :] + nu) >= (threshold + rho[:, None])
    return np.minimum(tops.sum(axis=1), params.c)


@dataclass(frozen=True)
class NoiseStudyRow:
    n_large: int
    odp_expected_noise: float
    odp_stderr: float
    baseline_noise: float
    release_rate: float
    trials: int


def sparse_release_noise_study(
    n_entries: int,
    n_large: int | Iterable[int],
    params: SvtParams,
    eps3: float,
    trials: int,
    noise: NoiseSource,
    *,
    large_value: float = 1000.0,
    threshold: float = 500.0,
    value_sensitivity: float = 1.0,
) -> list[NoiseStudyRow]:
    """Monte-Carlo estimate of the expected per-entry absolute release noise.

    For each trial SVT noise (rho, nu) is drawn and c' computed; the
    expected |Lap(b)| of a released entry is b, so the trial contributes the
    ODP scale for its c'. Trials with c' = 0 release nothing and are left out
    of the mean. The baseline column is the fixed worst-case scale.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    counts = [n_large] if isinstance(n_large, (int, np.integer)) else list(n_large)
    base = baseline_entry_scale(params, eps3, value_sensitivity)
    kk = np.arange(1, params.c + 1)
    scale_by_count = np.concatenate(
        [[np.nan], value_sensitivity * kk / (eps3 + ((params.c - kk) / params.c) * params.eps2)]
    )
    rows = []
    for m in counts:
        if not 0 <= m <= n_entries:
            raise ValueError(f"n_large={m} outside [0, {n_entries}]")
        q = np.zeros(n_entries)
        q[:m] = abs(large_value)
        rho = noise.laplace(params.threshold_scale, size=trials)
        nu = noise.laplace(params.query_scale, size=(trials, n_entries))
        c_prime = svt_top_counts(q, threshold, params, np.asarray(rho), np.asarray(nu))
        released = c_prime > 0
        scales = scale_by_count[c_prime[released]]
        n_rel = int(released.sum())
        if n_rel:
            mean = float(scales.mean())
            se = float(scales.std(ddof=1) / math.sqrt(n_rel)) if n_rel > 1 else float("inf")
        else:
            mean, se = float("nan"), float("nan")
        rows.append(NoiseStudyRow(int(m), mean, se, base, n_rel / trials, trials))
    return rows
