import math

import numpy as np
import pytest
from scipy.integrate import quad

from robustde.errors import ConfigError
from robustde.sensitivity import (
    binary_components,
    bound,
    default_gamma,
    gap_binary,
    gap_conditional,
    gap_conditional_from_components,
    gap_from_components,
    sensitivity_report,
    tv_binary,
)
from robustde.simulate import draw, get_case
from robustde.tabular import Dataset


def _sig(t):
    return 1.0 / (1.0 + math.exp(-t))


def _phi(x):
    return math.exp(-x * x / 2) / math.sqrt(2 * math.pi)


def _case3_tv(x):
    # mediator ordering: P(W=1|x) mixes over A, P(W=1|A=0,x) does not
    pi = _sig(-0.1 + 0.5 * x)
    p0 = _sig(-0.4 + 0.6 * x)
    p1 = _sig(-0.4 + 1.4 + 0.6 * x)
    return abs(pi * p1 + (1 - pi) * p0 - p0)


def test_population_tv_equals_gap_for_case3():
    e_tv = quad(lambda x: _case3_tv(x) * _phi(x), -12, 12, epsabs=1e-13, limit=200)[0]
    assert e_tv == pytest.approx(0.14418465818, abs=1e-10)
    # Delta(1,x) - Delta(0,x) = 1 and P(W=1|x) >= P(W=1|A=0,x), so gap = E[TV]
    gap = gap_from_components(0.8, 1.8, 0.5 + e_tv, 0.5)
    assert gap == pytest.approx(e_tv)


def test_gap_forms_agree_at_population_values():
    x = np.linspace(-3, 3, 13)
    pi = 1 / (1 + np.exp(-(-0.1 + 0.5 * x)))
    p0 = 1 / (1 + np.exp(-(-0.4 + 0.6 * x)))
    p1 = 1 / (1 + np.exp(-(1.0 + 0.6 * x)))
    marg = pi * p1 + (1 - pi) * p0
    d0, d1 = 0.8 + 0 * x, 1.8 + 0 * x
    np.testing.assert_allclose(
        gap_from_components(d0, d1, marg, p0),
        gap_conditional_from_components(pi, d0, d1, p1, p0),
        atol=1e-15,
    )


def test_gap_is_zero_without_interaction():
    assert gap_from_components(np.ones(3), np.ones(3), [0.2, 0.5, 0.9], [0.1, 0.1, 0.1]).tolist() == [0, 0, 0]


def test_bound():
    assert bound(1.0, 2.0, 0.1) == pytest.approx((0.8, 1.2))
    with pytest.raises(ConfigError):
        bound(1.0, -1.0, 0.1)


def test_default_gamma_is_interaction_coefficient():
    d = draw(get_case(3), 2000, 4)
    n = d.n
    rows = np.column_stack([np.ones(n), d.a, d.w, d.a * d.w, d.x[:, 0]])
    b = np.linalg.lstsq(rows, d.y, rcond=None)[0]
    assert default_gamma(d) == pytest.approx(abs(b[3]), rel=1e-10)


def test_tv_zero_without_treated_units():
    d = Dataset(x=np.zeros((4, 1)), a=[0, 0, 0, 0], w=[0, 1, 0, 1], y=[1.0, 2, 3, 4])
    assert tv_binary(d) == 0.0


def test_plug_in_gap_close_to_truth_on_large_sample():
    d = draw(get_case(3), 40000, 17)
    assert gap_binary(d) == pytest.approx(0.1442, abs=0.015)
    assert gap_conditional(d) == pytest.approx(gap_binary(d), abs=0.01)
    c = binary_components(d)
    assert np.all((c.p_a0 > 0) & (c.p_a0 < 1))


def test_continuous_focal_needs_user_inputs():
    rng = np.random.default_rng(0)
    d = Dataset(x=rng.standard_normal((50, 1)), a=np.arange(50) % 2, w=rng.standard_normal(50), y=rng.standard_normal(50))
    with pytest.raises(ConfigError, match="gamma"):
        sensitivity_report(d, 0.3)
    r = sensitivity_report(d, 0.3, gamma=2.0, e_tv=0.1)
    assert r.gap_estimate is None
    assert r.interval == pytest.approx((0.1, 0.5))


def test_report_dict():
    d = draw(get_case(3), 1000, 1)
    r = sensitivity_report(d, 1.3)
    out = r.to_dict()
    assert out["interval_lo"] == pytest.approx(1.3 - out["gamma"] * out["e_tv"])
    assert 0 <= out["e_tv"] <= 1


def test_population_bound_is_tight_for_case3():
    from robustde.simulate import truth

    t = truth(3)
    e_tv = quad(lambda x: _case3_tv(x) * _phi(x), -12, 12, epsabs=1e-13, limit=200)[0]
    lo, hi = bound(t.psi_true, 1.0, e_tv)
    # lower endpoint lands on lambda: the guarantee holds with equality
    assert lo == pytest.approx(t.lambda_true, abs=1e-10)
    assert hi > t.lambda_true


@pytest.mark.parametrize("g1, g2, e1, e2", [(0.0, 1.0, 0.1, 0.1), (1.0, 1.0, 0.1, 0.3), (0.5, 2.0, 0.0, 0.2)])
def test_bound_width_monotone(g1, g2, e1, e2):
    w = lambda g, e: np.subtract(*bound(0.0, g, e)[::-1])  # noqa: E731
    assert w(g2, e2) >= w(g1, e1)
    assert bound(1.3, 0.0, 0.4) == (1.3, 1.3)
    assert bound(0.0, 2.0, 0.25) == (-0.5, 0.5)


def test_gap_dominated_by_bound_on_mediator_data():
    d = draw(get_case(3), 20000, 23)
    r = sensitivity_report(d, 1.35)
    assert abs(r.gap_estimate) <= r.gamma * r.e_tv + 0.01


def test_gap_near_zero_without_interaction():
    gaps = [gap_binary(draw(get_case(2), 2000, s)) for s in range(30)]
    mcse = np.std(gaps, ddof=1) / np.sqrt(len(gaps))
    assert abs(np.mean(gaps)) <= 2 * mcse + 1e-12
