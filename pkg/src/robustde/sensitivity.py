"""Gap between ``psi`` and the natural direct effect, and sensitivity bounds.

Under a mediator model the natural direct effect lies within
``psi +/- Gamma * E[TV(X)]`` whenever the oscillation of ``Delta(., x)`` over
``w`` is bounded by ``Gamma``. For binary ``W`` the gap has the exact form::

    psi - NDE = E[ {Delta(1,X) - Delta(0,X)} {P(W=1|X) - P(W=1|A=0,X)} ]

All estimates here are plug-ins from parametric working models fitted on
the full sample: the outcome regression on ``(1, A, W, AW, X)`` and logistic
models for ``W`` on ``(1, X)`` and on ``(1, A, X)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossfit import LinearOutcome
from .errors import ConfigError
from .glm import MARGINAL_DESIGN, MEDIATOR_DESIGN, OUTCOME_DESIGN, fit_logistic
from .tabular import Dataset, is_binary_focal


@dataclass(frozen=True)
class SensitivityReport:
    gap_estimate: float | None
    e_tv: float
    gamma: float
    interval: tuple
    psi_hat: float

    def to_dict(self) -> dict:
        return {
            "psi_hat": self.psi_hat,
            "gap": self.gap_estimate,
            "e_tv": self.e_tv,
            "gamma": self.gamma,
            "interval_lo": self.interval[0],
            "interval_hi": self.interval[1],
        }


@dataclass(frozen=True)
class BinaryComponents:
    """Fitted per-observation ingredients for a binary focal variable."""

    delta0: np.ndarray   # Delta_hat(0, X_i)
    delta1: np.ndarray   # Delta_hat(1, X_i)
    p_marg: np.ndarray   # P_hat(W=1 | X_i)
    p_a0: np.ndarray     # P_hat(W=1 | A=0, X_i)
    p_a1: np.ndarray     # P_hat(W=1 | A=1, X_i)


def _require_binary(d: Dataset):
    if not is_binary_focal(d):
        raise ConfigError("this operation needs a binary focal variable W")


def binary_components(d: Dataset, weights=None) -> BinaryComponents:
    _require_binary(d)
    d.require_both_arms()
    q = LinearOutcome(OUTCOME_DESIGN).fit(d, slice(None), weights)
    marg = fit_logistic(MARGINAL_DESIGN.matrix(0.0, 0.0, d.x), d.w, weights)
    cond = fit_logistic(MEDIATOR_DESIGN.matrix(d.a, 0.0, d.x), d.w, weights)
    return BinaryComponents(
        delta0=q.contrast(0.0, d.x),
        delta1=q.contrast(1.0, d.x),
        p_marg=marg.predict(MARGINAL_DESIGN.matrix(0.0, 0.0, d.x)),
        p_a0=cond.predict(MEDIATOR_DESIGN.matrix(0.0, 0.0, d.x)),
        p_a1=cond.predict(MEDIATOR_DESIGN.matrix(1.0, 0.0, d.x)),
    )


def gap_from_components(delta0, delta1, p_marg, p_a0) -> np.ndarray:
    """Per-x binary-W gap ``{Delta(1,x) - Delta(0,x)} {P(W=1|x) - P(W=1|A=0,x)}``."""
    return (np.asarray(delta1) - delta0) * (np.asarray(p_marg) - p_a0)


def gap_conditional_from_components(pi, delta0, delta1, p_a1, p_a0) -> np.ndarray:
    """Per-x gap in conditional-expectation form,
    ``pi(x) {E[Delta(W,x) | A=1, x] - E[Delta(W,x) | A=0, x]}``, for binary W."""
    e1 = np.asarray(delta0) + (np.asarray(delta1) - delta0) * p_a1
    e0 = np.asarray(delta0) + (np.asarray(delta1) - delta0) * p_a0
    return np.asarray(pi) * (e1 - e0)


def gap_binary(d: Dataset, weights=None) -> float:
    """Plug-in estimate of ``psi - lambda`` for a binary focal variable."""
    c = binary_components(d, weights)
    g = gap_from_components(c.delta0, c.delta1, c.p_marg, c.p_a0)
    return float(np.average(g, weights=weights))


def gap_conditional(d: Dataset, weights=None) -> float:
    """Diagnostic: the gap via ``pi_hat(x)`` and the ``W | A, X`` model.

    Agrees with :func:`gap_binary` only to the extent that the two working
    models for ``W`` are mutually compatible.
    """
    c = binary_components(d, weights)
    rows = MARGINAL_DESIGN.matrix(0.0, 0.0, d.x)
    pi = fit_logistic(rows, d.a, weights).predict(rows)
    g = gap_conditional_from_components(pi, c.delta0, c.delta1, c.p_a1, c.p_a0)
    return float(np.average(g, weights=weights))


def tv_binary(d: Dataset, weights=None) -> float:
    """Estimate of ``E[TV(X)]``: mean of ``|P(W=1|X) - P(W=1|A=0,X)|``."""
    _require_binary(d)
    n1 = int(d.a.sum())
    if n1 == 0:
        # Without treated units F(W|X) and F(W|A=0,X) coincide.
        return 0.0
    c = binary_components(d, weights)
    return float(np.average(np.abs(c.p_marg - c.p_a0), weights=weights))


def default_gamma(d: Dataset, weights=None) -> float:
    """``max_i |Delta_hat(1, X_i) - Delta_hat(0, X_i)|`` (the absolute A*W
    coefficient under the default outcome design)."""
    c = binary_components(d, weights)
    return float(np.max(np.abs(c.delta1 - c.delta0)))


def bound(psi_hat: float, gamma: float, e_tv: float) -> tuple:
    """``(psi_hat - gamma * e_tv, psi_hat + gamma * e_tv)``."""
    if gamma < 0 or e_tv < 0:
        raise ConfigError("gamma and e_tv must be nonnegative")
    half = gamma * e_tv
    return psi_hat - half, psi_hat + half


def sensitivity_report(
    d: Dataset, psi_hat: float, gamma: float | None = None, e_tv: float | None = None, weights=None
) -> SensitivityReport:
    """Gap, ``E[TV]`` and interval for ``d``.

    For binary ``W``, ``gamma`` defaults to :func:`default_gamma` and ``e_tv``
    to :func:`tv_binary`. For continuous ``W`` both must be supplied.
    """
    binary = is_binary_focal(d)
    if not binary and (gamma is None or e_tv is None):
        raise ConfigError(
            "continuous W: supply both gamma (bound on the oscillation of Delta in w) "
            "and e_tv (E[TV(X)]); neither can be estimated for continuous W"
        )
    gap = gap_binary(d, weights) if binary else None
    if e_tv is None:
        e_tv = tv_binary(d, weights)
    if gamma is None:
        gamma = default_gamma(d, weights)
    if not 0 <= e_tv <= 1:
        raise ConfigError("e_tv must lie in [0, 1]")
    return SensitivityReport(gap, float(e_tv), float(gamma), bound(psi_hat, gamma, e_tv), psi_hat)
