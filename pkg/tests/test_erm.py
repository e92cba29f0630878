import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from odpacct.core import BOTTOM, BOTTOM_CELL, VALUE_CELL
from odpacct.erm import (
    ConvergenceError,
    Dataset,
    ErmConfig,
    erm_noise,
    erm_output_perturb,
    error_score,
    gradient,
    logreg_test_odp,
    logreg_with_test,
    noise_percentile,
    objective,
    sensitivity_bound,
    score_noise_scale,
    train_logreg,
)
from odpacct.mechanisms import laplace_quantile
from odpacct.noise import NoiseSource


def random_dataset(rng, n, d):
    x = rng.normal(size=(n, d))
    x /= np.maximum(np.linalg.norm(x, axis=1, keepdims=True), 1.0) * rng.uniform(1.0, 2.0, size=(n, 1))
    w = rng.normal(size=d)
    y = np.where(x @ w + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    return Dataset(x, y)


def test_dataset_validation():
    with pytest.raises(ValueError, match="norm"):
        Dataset(np.array([[1.0, 1.0]]), np.array([1.0]))
    with pytest.raises(ValueError):
        Dataset(np.array([[0.1]]), np.array([1.5]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(2))


def test_dataset_from_csv(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("x_2,x_1,y\n0.0,3.0,1\n0.1,0.2,-1\n")
    with pytest.raises(ValueError):
        Dataset.from_csv(f)
    ds = Dataset.from_csv(f, normalize=True)
    assert ds.x[0] == pytest.approx([1.0, 0.0])  # columns ordered x_1, x_2
    assert ds.x[1] == pytest.approx([0.2, 0.1])
    assert list(ds.y) == [1.0, -1.0]
    bad = tmp_path / "bad.csv"
    bad.write_text("x_1,label\n0.1,1\n")
    with pytest.raises(ValueError, match="header"):
        Dataset.from_csv(bad)


def test_split_sizes():
    ds = random_dataset(np.random.default_rng(0), 1000, 3)
    tr, te = ds.split(0.7, np.random.default_rng(1))
    assert (tr.n, te.n) == (700, 300)
    with pytest.raises(ValueError):
        ds.split(1.0)


def test_symmetric_data_gives_zero_minimizer():
    x = np.array([[0.5, 0.2], [-0.5, -0.2], [0.1, -0.7], [-0.1, 0.7]])
    y = np.array([1.0, 1.0, -1.0, -1.0])  # mirrored covariates with the same label cancel
    p = train_logreg(Dataset(x, y))
    assert np.linalg.norm(p) < 1e-8
    assert np.linalg.norm(gradient(p, Dataset(x, y), 1.0)) <= 1e-8


def test_empty_features_give_zero_minimizer():
    p = train_logreg(Dataset(np.zeros((5, 3)), np.array([1, -1, 1, 1, 1.0])), ErmConfig(lam=0.5))
    assert np.all(p == 0.0)


def test_converged_gradient_is_small():
    ds = random_dataset(np.random.default_rng(2), 300, 4)
    p = train_logreg(ds, ErmConfig(lam=0.1))
    assert np.linalg.norm(gradient(p, ds, 0.1)) <= 1e-8


def test_non_convergence_raises():
    ds = random_dataset(np.random.default_rng(2), 300, 4)
    with pytest.raises(ConvergenceError):
        train_logreg(ds, ErmConfig(lam=1e-3, tolerance=1e-14, max_iterations=3))
    with pytest.raises(ValueError):
        ErmConfig(lam=0.0)
    with pytest.raises(ValueError):
        train_logreg(Dataset(np.zeros((0, 2)), np.zeros(0)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, 200, 5)
    h = 1e-5
    for _ in range(10):
        p = rng.normal(size=5)
        g = gradient(p, ds, 1.0)
        fd = np.array([(objective(p + h * e, ds, 1.0) - objective(p - h * e, ds, 1.0)) / (2 * h) for e in np.eye(5)])
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-6


def test_minimizer_sensitivity_bound():
    rng = np.random.default_rng(4)
    n, d, lam = 200, 5, 1.0
    bound = sensitivity_bound(n, lam)
    worst = 0.0
    for _ in range(40):
        ds = random_dataset(rng, n, d)
        i = rng.integers(n)
        x2, y2 = ds.x.copy(), ds.y.copy()
        v = rng.normal(size=d)
        x2[i] = v / np.linalg.norm(v)
        y2[i] = -y2[i]
        p, p2 = train_logreg(ds, ErmConfig(lam)), train_logreg(Dataset(x2, y2), ErmConfig(lam))
        worst = max(worst, np.linalg.norm(p - p2))
    assert worst <= bound + 1e-6


def test_zero_noise_perturbation_is_minimizer():
    ds = random_dataset(np.random.default_rng(5), 100, 3)
    cfg = ErmConfig(1.0)
    assert np.array_equal(erm_output_perturb(ds, 0.5, cfg, NoiseSource.zero()), train_logreg(ds, cfg))


def test_noise_norm_is_gamma():
    d, n, lam, eps = 4, 500, 1.0, 0.5
    noise = NoiseSource(6)
    norms = np.array([np.linalg.norm(erm_noise(d, n, lam, eps, noise)) for _ in range(100_000)])
    scale = 2 / (n * lam * eps)
    assert norms.mean() == pytest.approx(d * scale, rel=0.01)
    assert stats.kstest(norms, stats.gamma(d, scale=scale).cdf).statistic < 0.01


def test_noise_direction_is_uniform():
    noise = NoiseSource(7)
    dirs = np.array([erm_noise(3, 100, 1.0, 1.0, noise) for _ in range(20_000)])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    assert np.abs(dirs.mean(axis=0)).max() < 0.03


def test_error_score_examples():
    ds = Dataset(np.array([[0.3], [-0.2]]), np.array([1.0, 1.0]))
    assert error_score(np.zeros(1), ds) == 1.0
    confident = Dataset(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]))
    assert error_score(np.array([80.0]), confident) < 1e-12
    with pytest.raises(ValueError):
        error_score(np.zeros(1), Dataset(np.zeros((0, 1)), np.zeros(0)))


@given(st.integers(0, 2**31), st.integers(2, 40))
def test_error_score_range_and_test_sensitivity(seed, n):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n, 3)
    p = rng.normal(scale=5, size=3)
    s = error_score(p, ds)
    assert 0.0 <= s <= 2.0
    x2, y2 = ds.x.copy(), ds.y.copy()
    x2[0] = -x2[0]
    y2[0] = -1.0 if y2[0] > 0 else 1.0
    assert abs(error_score(p, Dataset(x2, y2)) - s) <= 2.0 / n + 1e-12


def test_noise_scale_example():
    a = score_noise_scale(700, 300, 1.0)
    assert 2 * math.expm1(2 / 700) == pytest.approx(0.0057224, abs=1e-7)
    assert a == pytest.approx(2 / 300, abs=1e-15)


def test_tested_guarantee_examples():
    g = logreg_test_odp(0.9, 0.1, 700, 300, 1.0)
    assert g.as_dict() == {VALUE_CELL: 0.9, BOTTOM_CELL: 0.1}
    g = logreg_test_odp(0.4, 0.4, 700, 300, 1.0)
    assert g.as_dict() == {VALUE_CELL: 0.4, BOTTOM_CELL: 0.4}
    assert g.delta == 0.0


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.integers(1, 10_000), st.integers(1, 10_000), st.floats(1e-3, 10))
def test_bottom_never_costs_more(e1, e2, n_train, n_test, lam):
    g = logreg_test_odp(e1, e2, n_train, n_test, lam)
    assert g.epsilon(BOTTOM_CELL) <= g.epsilon(VALUE_CELL)
    assert g.epsilon(VALUE_CELL) >= e1


def test_logreg_with_test_zero_noise():
    rng = np.random.default_rng(8)
    ds = random_dataset(rng, 400, 3)
    tr, te = ds.split(0.7, rng)
    cfg = ErmConfig(1.0)
    score = error_score(train_logreg(tr, cfg), te)
    hi = logreg_with_test(tr, te, 0.9, 0.1, cfg, score + 0.2, NoiseSource.zero())
    lo = logreg_with_test(tr, te, 0.9, 0.1, cfg, score - 0.2, NoiseSource.zero())
    assert hi.realized_cell == VALUE_CELL and isinstance(hi.value, np.ndarray)
    assert lo.realized_cell == BOTTOM_CELL and lo.value is BOTTOM
    assert lo.guarantee.epsilon(BOTTOM_CELL) == 0.1 < hi.guarantee.epsilon(VALUE_CELL)


def test_noise_percentile_spot_value():
    v = noise_percentile(1000, 0.1, 1.0, 0.7, 0.95)
    assert v == pytest.approx(0.1535, abs=1e-4)
    assert v == pytest.approx((2 / 300) / 0.1 * math.log(10), abs=1e-12)
    assert v == laplace_quantile(score_noise_scale(700, 300, 1.0) / 0.1, 0.95)


def test_noise_percentile_absolute_variant():
    scale = (2 / 300) / 0.1
    assert noise_percentile(1000, 0.1, absolute=True) == pytest.approx(scale * math.log(20), rel=1e-12)


def test_noise_percentile_matches_samples():
    scale = score_noise_scale(700, 300, 1.0) / 0.1
    x = NoiseSource(9).laplace(scale, size=1_000_000)
    assert np.quantile(x, 0.95) == pytest.approx(noise_percentile(1000, 0.1), rel=0.01)
    assert np.quantile(np.abs(x), 0.95) == pytest.approx(noise_percentile(1000, 0.1, absolute=True), rel=0.01)


@given(st.floats(0.01, 5), st.integers(10, 5000), st.integers(1, 5000))
def test_noise_percentile_monotone_and_scaling(eps2, n, extra):
    a, b = noise_percentile(n, eps2), noise_percentile(n + extra, eps2)
    assert b <= a * (1 + 1e-12)
    assert noise_percentile(n, 2 * eps2) == pytest.approx(a / 2, rel=1e-12)


@pytest.mark.parametrize("kwargs", [dict(n=1), dict(n=100, pct=0.4), dict(n=100, train_frac=1.0), dict(n=100, eps2=0.0)])
def test_noise_percentile_errors(kwargs):
    args = dict(n=100, eps2=0.1)
    args.update(kwargs)
    with pytest.raises(ValueError):
        noise_percentile(**args)
