import numpy as np
import pytest

from mqrif.exceptions import MQRIFError
from mqrif.huber import MQuantileSpec
from mqrif.oracles import (DgpConfig, brute_force_theta, run_coverage, simulate,
                           univariate_expectile_oracle, univariate_quantile_oracle)
from mqrif.solver import fit_unconditional

U = np.array([1.0, 1.0]) / np.sqrt(2.0)


def test_quantile_oracle_examples():
    assert univariate_quantile_oracle(np.arange(1, 10), 0.25) == 3.0
    assert univariate_quantile_oracle([5.0], 0.3) == 5.0
    assert univariate_quantile_oracle(np.arange(10), 0.3) == 2.0


def test_expectile_oracle_examples():
    assert univariate_expectile_oracle([0.0, 1.0], 0.25) == pytest.approx(0.25, abs=1e-12)
    y = np.random.default_rng(0).normal(size=37)
    assert univariate_expectile_oracle(y, 0.5) == pytest.approx(y.mean(), abs=1e-14)


def test_expectile_oracle_solves_its_equation():
    y = np.random.default_rng(1).exponential(size=101)
    e = univariate_expectile_oracle(y, 0.1)
    w = np.where(y > e, 0.2, 1.8)
    assert abs(np.sum(w * (y - e))) < 1e-9


def test_brute_force_mean():
    Y = np.random.default_rng(2).normal(size=(100, 2))
    th = brute_force_theta(Y, MQuantileSpec.make(0.5, U, 1e6), grid_step=0.02)
    np.testing.assert_allclose(th, Y.mean(0), atol=0.02)


def test_brute_force_symmetric_four_points():
    Y = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]) + [2.0, 3.0]
    th = brute_force_theta(Y, MQuantileSpec.make(0.5, U, 0.0), grid_step=0.01)
    np.testing.assert_allclose(th, [2.0, 3.0], atol=0.01)


@pytest.mark.parametrize("tau,c", [(0.1, 0.0), (0.25, 1.0), (0.5, 1e6), (0.1, 1e6)])
def test_brute_force_agrees_with_irls(tau, c):
    Y = np.random.default_rng(3).normal(size=(150, 2))
    spec = MQuantileSpec.make(tau, U, c)
    np.testing.assert_allclose(brute_force_theta(Y, spec, grid_step=0.05),
                               fit_unconditional(Y, spec).theta, atol=0.1)


def test_brute_force_univariate():
    y = np.random.default_rng(4).normal(size=41)
    spec = MQuantileSpec.make(0.3, [1.0], 1e6)
    th = brute_force_theta(y, spec, grid_step=0.01)
    assert th[0] == pytest.approx(univariate_expectile_oracle(y, 0.3), abs=0.01)


def test_brute_force_box_too_small():
    Y = np.random.default_rng(5).normal(size=(50, 2)) + 10.0
    with pytest.raises(MQRIFError, match="box"):
        brute_force_theta(Y, MQuantileSpec.make(0.5, U, 1.0), search_box=[(0, 1), (0, 1)])


def test_brute_force_dimension_limit():
    with pytest.raises(ValueError):
        brute_force_theta(np.zeros((5, 3)), MQuantileSpec.make(0.5, [1, 0, 0], 1.0))


@pytest.mark.parametrize("kw", [dict(kind="uniform"), dict(n=5), dict(contamination_rate=1.0),
                                dict(correlation=1.0), dict(noise_scale=-1.0)])
def test_dgp_validation(kw):
    with pytest.raises(ValueError):
        DgpConfig(**kw)


def test_simulate_deterministic_and_shaped():
    dgp = DgpConfig(n=50, seed=3)
    Y1, X1 = simulate(dgp)
    Y2, X2 = simulate(dgp)
    assert np.array_equal(Y1, Y2) and np.array_equal(X1, X2)
    assert Y1.shape == (50, 2) and X1.shape == (50, 3)
    assert np.all(X1[:, 0] == 1.0)


def test_simulate_contamination_rows():
    clean = simulate(DgpConfig(kind="gaussian-linear", n=200, seed=1))[0]
    dirty = simulate(DgpConfig(kind="contaminated", n=200, seed=1, contamination_rate=0.1))[0]
    assert np.sum(np.any(clean != dirty, axis=1)) == 20


def test_simulate_correlation():
    Y, X = simulate(DgpConfig(kind="correlated-gaussian", n=20_000, correlation=0.6,
                              B=np.zeros((1, 2)), seed=2))
    assert np.corrcoef(Y.T)[0, 1] == pytest.approx(0.6, abs=0.02)


def test_coverage_level_zero():
    dgp = DgpConfig(n=200, seed=0)
    assert run_coverage(dgp, MQuantileSpec.make(0.5, U, 1e6), reps=5, level=0.0) == 0.0


def test_coverage_small_run_reasonable():
    dgp = DgpConfig(n=300, seed=0)
    cov = run_coverage(dgp, MQuantileSpec.make(0.3, U, 1.0), reps=40, level=0.9)
    assert 0.75 <= cov <= 1.0


def test_coverage_parallel_matches_serial():
    dgp = DgpConfig(n=150, seed=4)
    spec = MQuantileSpec.make(0.5, U, 1e6)
    assert run_coverage(dgp, spec, reps=10) == run_coverage(dgp, spec, reps=10, n_jobs=3)


def test_coverage_requires_slopes():
    with pytest.raises(ValueError):
        run_coverage(DgpConfig(n=50, B=np.zeros((1, 2))), MQuantileSpec.make(0.5, U, 1.0), reps=5)
