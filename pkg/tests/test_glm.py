import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.special import expit

from robustde.errors import ConfigError, DegenerateTargetError, SeparationWarning, SingularDesignError
from robustde.glm import (
    OUTCOME_DESIGN,
    DesignSpec,
    LogisticFit,
    check_rank,
    fit_logistic,
    fit_ols,
    predict_prob,
)


def test_design_matrix_columns():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    rows = OUTCOME_DESIGN.matrix([0, 1], [1, 1], x)
    np.testing.assert_array_equal(rows, [[1, 0, 1, 0, 1, 2], [1, 1, 1, 1, 3, 4]])
    assert OUTCOME_DESIGN.names(("X1", "X2")) == ["intercept", "A", "W", "A:W", "X1", "X2"]
    assert DesignSpec(w=True, x=(1,)).matrix(0.0, [5, 6], x).tolist() == [[1, 5, 2], [1, 6, 4]]


def test_interaction_needs_main_effects():
    with pytest.raises(ConfigError):
        DesignSpec(a=True, aw=True)


def test_ols_recovers_coefficients_within_3se():
    rng = np.random.default_rng(3)
    n = 4000
    rows = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    beta = np.array([0.5, -1.0, 2.0])
    y = rows @ beta + rng.standard_normal(n)
    f = fit_ols(rows, y)
    se = np.sqrt(np.diag(f.resid_var * np.linalg.inv(rows.T @ rows)))
    assert np.all(np.abs(f.coef - beta) < 3 * se)
    np.testing.assert_allclose(f.coef, np.linalg.lstsq(rows, y, rcond=None)[0], atol=1e-10)


def test_weighted_ols_matches_row_duplication():
    rng = np.random.default_rng(4)
    rows = np.column_stack([np.ones(30), rng.standard_normal(30)])
    y = rng.standard_normal(30)
    k = rng.integers(1, 4, size=30)
    dup = fit_ols(np.repeat(rows, k, axis=0), np.repeat(y, k))
    np.testing.assert_allclose(fit_ols(rows, y, weights=k).coef, dup.coef, atol=1e-12)


def test_collinear_term_is_named():
    x = np.arange(10.0)
    rows = np.column_stack([np.ones(10), x, 2 * x])
    with pytest.raises(SingularDesignError) as ei:
        fit_ols(rows, x, names=["intercept", "X1", "X2"])
    assert ei.value.term in {"X1", "X2"}
    with pytest.raises(SingularDesignError):
        check_rank(np.column_stack([np.ones(5), np.zeros(5)]))


def _mle(rows, t):
    def nll(b):
        eta = rows @ b
        return np.sum(np.logaddexp(0, eta) - t * eta)

    return minimize(nll, np.zeros(rows.shape[1]), method="BFGS", options={"gtol": 1e-10}).x


def test_logistic_matches_generic_optimiser():
    rng = np.random.default_rng(5)
    n = 3000
    rows = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    beta = np.array([-0.3, 0.8, -0.5])
    t = (rng.random(n) < expit(rows @ beta)).astype(float)
    f = fit_logistic(rows, t)
    assert f.converged
    np.testing.assert_allclose(f.coef, _mle(rows, t), atol=1e-5)
    p = expit(rows @ f.coef)
    cov = np.linalg.inv((rows * (p * (1 - p))[:, None]).T @ rows)
    assert np.all(np.abs(f.coef - beta) < 3 * np.sqrt(np.diag(cov)))


def test_logistic_score_below_tolerance():
    rng = np.random.default_rng(6)
    rows = np.column_stack([np.ones(200), rng.standard_normal(200)])
    t = (rng.random(200) < 0.4).astype(float)
    f = fit_logistic(rows, t)
    assert np.max(np.abs(rows.T @ (t - expit(rows @ f.coef)))) < 1e-8


def test_logistic_single_class():
    with pytest.raises(DegenerateTargetError):
        fit_logistic(np.ones((4, 1)), np.zeros(4))


def test_logistic_separation_warns():
    x = np.linspace(-1, 1, 20)
    rows = np.column_stack([np.ones(20), x])
    with pytest.warns(SeparationWarning):
        fit_logistic(rows, (x > 0).astype(float))


def test_saturated_logistic_hits_cell_proportions():
    cells = np.array([0] * 3 + [1] * 5 + [0] * 2 + [1] * 2, float)
    grp = np.array([0] * 8 + [1] * 4, float)
    f = fit_logistic(np.column_stack([np.ones(12), grp]), cells)
    p = predict_prob(f, [[1, 0], [1, 1]], clip=None)
    np.testing.assert_allclose(p, [5 / 8, 2 / 4], atol=1e-14)


def test_clip_bounds_checked():
    f = LogisticFit(coef=np.array([0.0, 1.0]), converged=True, iterations=1)
    with pytest.raises(ConfigError):
        predict_prob(f, np.ones((1, 2)), clip=(0.5, 0.2))
    assert predict_prob(f, np.array([[1.0, 1e6]]), clip=(0.05, 0.95))[0] == 0.95


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 100))
def test_weight_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    rows = np.column_stack([np.ones(50), rng.standard_normal(50)])
    t = (rng.random(50) < 0.5).astype(float)
    t[:2] = [0, 1]
    w = rng.uniform(0.5, 2, 50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeparationWarning)
        a = fit_logistic(rows, t, w)
        b = fit_logistic(rows, t, w * scale)
    np.testing.assert_allclose(a.coef, b.coef, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(fit_ols(rows, t, w).coef, fit_ols(rows, t, w * scale).coef, atol=1e-12)
