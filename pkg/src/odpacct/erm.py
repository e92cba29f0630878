"""L2-regularized logistic regression with output perturbation and a private release test.

The tested mechanism perturbs the minimizer, scores it on a held-out test
set, and only releases it if the noisy error is at most a threshold. A ⊥
answer reveals only the outcome of the test, which is why it is cheaper.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BOTTOM, BOTTOM_CELL, VALUE_CELL, OdpGuarantee
from .mechanisms import laplace_quantile
from .noise import NoiseSource

_NORM_SLACK = 1e-9
_F_RESOLUTION = 8 * np.finfo(float).eps


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Covariates ``x`` (n, d) with row norms <= 1 and labels ``y`` in [-1, 1]."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} covariate rows but {y.shape[0]} labels")
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms > 1.0 + _NORM_SLACK):
            bad = int(np.argmax(norms))
            raise ValueError(f"row {bad} has L2 norm {norms[bad]:.6g} > 1")
        if np.any(np.abs(y) > 1.0):
            raise ValueError("labels must lie in [-1, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_csv(cls, path: str | Path, normalize: bool = False) -> "Dataset":
        """Read columns x_1..x_d, y. ``normalize`` rescales rows with norm > 1 onto the unit ball."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "y" not in reader.fieldnames:
                raise ValueError(f"{path}: header must contain x_1..x_d and y")
            xcols = sorted((c for c in reader.fieldnames if c.startswith("x_")), key=lambda c: int(c[2:]))
            rows = list(reader)
        x = np.array([[float(r[c]) for c in xcols] for r in rows])
        y = np.array([float(r["y"]) for r in rows])
        if normalize:
            norms = np.linalg.norm(x, axis=1, keepdims=True)
            x = x / np.maximum(norms, 1.0)
        return cls(x, y)

    def split(self, train_frac: float, rng: np.random.Generator | None = None) -> tuple["Dataset", "Dataset"]:
        n_train = train_size(self.n, train_frac)
        idx = np.arange(self.n) if rng is None else rng.permutation(self.n)
        tr, te = idx[:n_train], idx[n_train:]
        return Dataset(self.x[tr], self.y[tr]), Dataset(self.x[te], self.y[te])


@dataclass(frozen=True)
class ErmConfig:
    lam: float = 1.0
    tolerance: float = 1e-8
    max_iterations: int = 10_000

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("regularization strength must be positive")


def objective(p: np.ndarray, data: Dataset, lam: float) -> float:
    z = data.y * (data.x @ p)
    return float(np.mean(np.logaddexp(0.0, -z)) + 0.5 * lam * p @ p)


def gradient(p: np.ndarray, data: Dataset, lam: float) -> np.ndarray:
    z = data.y * (data.x @ p)
    # d/dz log(1 + e^-z) = -sigmoid(-z)
    coef = -data.y * np.exp(-np.logaddexp(0.0, z))
    return data.x.T @ coef / data.n + lam * p


def train_logreg(train: Dataset, cfg: ErmConfig = ErmConfig()) -> np.ndarray:
    """Minimize the regularized logistic loss by gradient descent with Armijo backtracking."""
    if train.n == 0:
        raise ValueError("empty training set")
    p = np.zeros(train.d)
    f = objective(p, train, cfg.lam)
    step = 1.0
    for _ in range(cfg.max_iterations):
        g = gradient(p, train, cfg.lam)
        gnorm2 = float(g @ g)
        if math.sqrt(gnorm2) <= cfg.tolerance:
            return p
        step = min(step * 2.0, 1e3)
        while step >= 1e-12:
            cand = p - step * g
            f_cand = objective(cand, train, cfg.lam)
            if f_cand <= f - 0.5 * step * gnorm2:
                break
            # Near the optimum the decrease drops below float resolution of the
            # objective; fall back to requiring a smaller gradient.
            if abs(f_cand - f) <= _F_RESOLUTION * abs(f) and np.linalg.norm(gradient(cand, train, cfg.lam)) ** 2 < gnorm2:
                break
            step *= 0.5
        else:
            raise ConvergenceError(f"line search failed at gradient norm {math.sqrt(gnorm2):.3g}")
        p, f = cand, f_cand
    raise ConvergenceError(f"gradient norm still above {cfg.tolerance} after {cfg.max_iterations} iterations")


def erm_noise(d: int, n_train: int, lam: float, eps: float, noise: NoiseSource) -> np.ndarray:
    """Draw q with density proportional to exp(-(n lam eps / 2) ||q||).

    In polar form the norm is Gamma(d, 2 / (n lam eps)) and the direction is
    uniform on the sphere.
    """
    norm = noise.gamma(d, 2.0 / (n_train * lam * eps))
    g = np.asarray(noise.normal(d), dtype=float).reshape(d)
    gn = np.linalg.norm(g)
    if norm == 0 or gn == 0:
        return np.zeros(d)
    return norm * g / gn


def erm_output_perturb(train: Dataset, eps1: float, cfg: ErmConfig, noise: NoiseSource) -> np.ndarray:
    if eps1 <= 0:
        raise ValueError("eps1 must be positive")
    p_min = train_logreg(train, cfg)
    return p_min + erm_noise(train.d, train.n, cfg.lam, eps1, noise)


def sensitivity_bound(n_train: int, lam: float) -> float:
    """L2 sensitivity of the regularized minimizer: 2 / (n lam)."""
    return 2.0 / (n_train * lam)


def predict(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Model output mapped to [-1, 1]: 2 sigmoid(p.x) - 1 = tanh(p.x / 2)."""
    return np.tanh(0.5 * (x @ p))


def error_score(p: np.ndarray, test: Dataset) -> float:
    """Mean absolute error of the [-1, 1]-valued prediction; lies in [0, 2]."""
    if test.n == 0:
        raise ValueError("empty test set")
    return float(np.mean(np.abs(predict(p, test.x) - test.y)))


def score_noise_scale(n_train: int, n_test: int, lam: float) -> float:
    """The ``a`` in Lap(a / eps2): the larger of the test- and train-side sensitivities of the score."""
    x = 2.0 / (n_train * lam)
    train_side = 2.0 * math.expm1(x) if x < 700 else math.inf
    return max(2.0 / n_test, train_side)


def logreg_test_odp(eps1: float, eps2: float, n_train: int, n_test: int, lam: float) -> OdpGuarantee:
    if min(eps1, eps2, n_train, n_test, lam) <= 0:
        raise ValueError("all parameters must be positive")
    a = score_noise_scale(n_train, n_test, lam)
    eps_value = max(eps1, (2.0 / n_test) / a * eps2)
    eps_bottom = min(eps_value, eps2)
    return OdpGuarantee(((VALUE_CELL, eps_value), (BOTTOM_CELL, eps_bottom)), 0.0)


@dataclass(frozen=True)
class TestedOutput:
    __test__ = False  # not a pytest class

    value: object  # parameter vector or BOTTOM
    realized_cell: str
    guarantee: OdpGuarantee
    noisy_score: float


def logreg_with_test(
    train: Dataset,
    test: Dataset,
    eps1: float,
    eps2: float,
    cfg: ErmConfig,
    t: float,
    noise: NoiseSource,
) -> TestedOutput:
    """Release the perturbed model only if its noisy test error is <= t."""
    if eps1 <= 0 or eps2 <= 0:
        raise ValueError("eps1 and eps2 must be positive")
    p_tilde = erm_output_perturb(train, eps1, cfg, noise)
    a = score_noise_scale(train.n, test.n, cfg.lam)
    noisy = error_score(p_tilde, test) + noise.laplace(a / eps2)
    g = logreg_test_odp(eps1, eps2, train.n, test.n, cfg.lam)
    if noisy <= t:
        return TestedOutput(p_tilde, VALUE_CELL, g, noisy)
    return TestedOutput(BOTTOM, BOTTOM_CELL, g, noisy)


def train_size(n: int, train_frac: float) -> int:
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie in (0, 1)")
    n_train = int(round(train_frac * n))
    if n_train < 1 or n_train >= n:
        raise ValueError(f"split of n={n} at {train_frac} leaves an empty side")
    return n_train


def noise_percentile(
    n: int,
    eps2: float,
    lam: float = 1.0,
    train_frac: float = 0.7,
    pct: float = 0.95,
    absolute: bool = False,
) -> float:
    """Percentile of the noise added to the test error for a dataset of n records.

    By default the one-sided percentile of r ~ Lap(a/eps2); with
    ``absolute`` the percentile of |r|.
    """
    if not 0.5 < pct < 1.0:
        raise ValueError("pct must lie in (0.5, 1)")
    if eps2 <= 0 or lam <= 0:
        raise ValueError("eps2 and lam must be positive")
    n_train = train_size(n, train_frac)
    scale = score_noise_scale(n_train, n - n_train, lam) / eps2
    if absolute:
        return -scale * math.log1p(-pct)
    return laplace_quantile(scale, pct)
