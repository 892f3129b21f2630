import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from annealcast.errors import ConfigError, ConvergenceError
from annealcast.lasso import LassoConfig, kkt_residual, lambda_max, lasso_fit, objective, soft_threshold

from oracles import lasso_objective, lasso_reference


def test_soft_threshold_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    with pytest.raises(ConfigError):
        soft_threshold(1.0, -0.1)


def test_config_needs_exactly_one_target():
    with pytest.raises(ConfigError):
        LassoConfig()
    with pytest.raises(ConfigError):
        LassoConfig(lam=1.0, target_support=3)
    with pytest.raises(ConfigError):
        LassoConfig(lam=1.0, tol=0)


@pytest.mark.parametrize("seed", range(5))
def test_zero_penalty_is_least_squares(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 5))
    y = X @ rng.standard_normal(5) + 1.5 + rng.standard_normal(30)
    model = lasso_fit(X, y, LassoConfig(lam=0.0, tol=1e-14))
    A = np.hstack([np.ones((30, 1)), X])
    ols = np.linalg.lstsq(A, y, rcond=None)[0]
    assert np.max(np.abs(model.coef - ols[1:])) <= 1e-8
    assert abs(model.intercept - ols[0]) <= 1e-8


def test_lambda_max_zeroes_everything():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 6))
    y = rng.standard_normal(40) + 3
    model = lasso_fit(X, y, LassoConfig(lam=lambda_max(X, y)))
    assert not model.coef.any()
    assert model.intercept == pytest.approx(y.mean(), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_objective_matches_reference_solver(seed):
    rng = np.random.default_rng(1000 + seed)
    X = rng.standard_normal((20, 5))
    y = X @ rng.standard_normal(5) + rng.standard_normal(20)
    lam = rng.uniform(0.05, 0.8) * lambda_max(X, y)
    model = lasso_fit(X, y, LassoConfig(lam=lam))
    ref_coef, ref_b = lasso_reference(X, y, lam)
    got = lasso_objective(X, y, model.coef, model.intercept, lam)
    assert abs(got - lasso_objective(X, y, ref_coef, ref_b, lam)) <= 1e-6
    assert got == pytest.approx(objective(X, y, model.coef, model.intercept, lam), abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def test_kkt_certificate(seed, frac):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((50, 20))
    y = X[:, :4] @ rng.standard_normal(4) + rng.standard_normal(50)
    lam = frac * lambda_max(X, y)
    model = lasso_fit(X, y, LassoConfig(lam=lam))
    assert kkt_residual(X, y, model, lam) <= 1e-6 * max(1.0, lam)


def test_objective_nonincreasing_over_sweeps():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((80, 30))
    X[:, 1] = X[:, 0] + 0.01 * rng.standard_normal(80)  # collinear pair slows CD down
    y = X[:, 0] + rng.standard_normal(80)
    model = lasso_fit(X, y, LassoConfig(lam=0.05 * lambda_max(X, y)))
    trace = np.array(model.train_loss_trace)
    assert len(trace) > 2
    assert np.all(np.diff(trace) <= 1e-9 * trace[0])


@pytest.mark.parametrize("target", [1, 5, 12])
def test_target_support_finds_the_largest_penalty(target):
    rng = np.random.default_rng(target)
    X = rng.standard_normal((100, 40))
    y = X[:, :15] @ rng.uniform(0.5, 2, 15) + rng.standard_normal(100)
    model = lasso_fit(X, y, LassoConfig(target_support=target))
    lam = model.meta["lam"]
    assert len(model.support) >= target
    above = lasso_fit(X, y, LassoConfig(lam=lam * (1 + 1e-5)))
    assert len(above.support) < target
    assert kkt_residual(X, y, model, lam) <= 1e-6 * max(1.0, lam)


def test_convergence_error_reports_residual():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((50, 10))
    y = rng.standard_normal(50)
    with pytest.raises(ConvergenceError) as err:
        lasso_fit(X, y, LassoConfig(lam=0.01, max_sweeps=1, tol=1e-15))
    assert err.value.residual is not None and err.value.residual > 0


def test_constant_column_stays_zero():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((40, 4))
    X[:, 2] = 7.0
    y = X[:, 0] + rng.standard_normal(40)
    model = lasso_fit(X, y, LassoConfig(lam=0.0, tol=1e-13))
    assert model.coef[2] == 0.0
