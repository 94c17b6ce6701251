"""Cross-fitted one-step estimator, mediation-formula comparator and tests.

``estimate_psi`` targets ``psi(P) = E[Q(1,W,X) - Q(0,W,X)]``, which keeps the
same meaning whether ``W`` is a confounder or a mediator. ``estimate_lambda``
is the parametric plug-in for ``E[ int Delta(w,X) dF(w | A=0, X) ]`` (the
natural direct effect under a mediator model), included as a comparator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .crossfit import (
    DEFAULT_K,
    LinearOutcome,
    LogisticExposure,
    ScoreVector,
    assign_folds,
    fit_nuisances,
    score,
)
from .errors import ConfigError, DataError, NumericError
from .glm import DEFAULT_CLIP, MEDIATOR_DESIGN, OUTCOME_DESIGN, DesignSpec, fit_logistic, fit_ols
from .resample import derive_seed, iid_multiplicities, percentile_ci, percentile_pvalue
from .tabular import Dataset, is_binary_focal

DEFAULT_ALPHA = 0.05


def z_quantile(alpha: float) -> float:
    """Two-sided standard normal critical value ``z_{1 - alpha/2}``."""
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    return float(norm.ppf(1 - alpha / 2))


@dataclass(frozen=True)
class EstimateResult:
    estimand: str
    point: float
    se: float | None
    ci: tuple | None
    n: int
    K: int | None
    seed: int | None
    clip: tuple | None
    alpha: float

    def to_dict(self) -> dict:
        out = asdict(self)
        ci = out.pop("ci")
        out["ci_lo"], out["ci_hi"] = (None, None) if ci is None else ci
        out["clip"] = None if self.clip is None else list(self.clip)
        order = ["estimand", "point", "se", "ci_lo", "ci_hi", "n", "K", "seed", "clip", "alpha"]
        return {k: out[k] for k in order}


@dataclass(frozen=True)
class UnionTestResult:
    p_C: float
    p_M: float
    p_max: float
    reject: bool
    alpha: float

    def to_dict(self) -> dict:
        return asdict(self)


def cross_fitted_scores(
    d: Dataset,
    *,
    seed: int,
    K: int = DEFAULT_K,
    clip=DEFAULT_CLIP,
    weights=None,
    outcome=None,
    exposure=None,
) -> ScoreVector:
    """Assign folds, fit nuisances on complements and return held-out scores."""
    d.require_both_arms()
    folds = assign_folds(d.n, K, seed)
    nf = fit_nuisances(d, folds, clip, weights, outcome, exposure)
    return score(d, nf, folds)


def influence_se(phi) -> float:
    """``sqrt( sum (phi_i - mean)^2 / (n (n - 1)) )``."""
    phi = np.asarray(phi, float)
    n = len(phi)
    if n < 2:
        raise DataError("standard error needs at least two observations")
    c = phi - phi.mean()
    return math.sqrt(float(c @ c) / (n * (n - 1)))


def wald_ci(point: float, se: float, alpha: float) -> tuple:
    z = z_quantile(alpha)
    return point - z * se, point + z * se


def estimate_psi(
    d: Dataset,
    *,
    seed: int,
    K: int = DEFAULT_K,
    clip=DEFAULT_CLIP,
    alpha: float = DEFAULT_ALPHA,
    outcome=None,
    exposure=None,
) -> EstimateResult:
    """Cross-fitted one-step estimate of ``psi`` with a Wald interval.

    Parameters
    ----------
    d : Dataset
    seed : int
        Seed for the fold partition; recorded in the result.
    K : int
        Number of folds.
    clip : (float, float)
        Truncation bounds for the fitted exposure probabilities.
    alpha : float
        One minus the confidence level.
    outcome, exposure : learners, optional
        Replace the default linear outcome regression on ``(1, A, W, AW, X)``
        and logistic exposure model on ``(1, W, X)``.
    """
    sv = cross_fitted_scores(d, seed=seed, K=K, clip=clip, outcome=outcome, exposure=exposure)
    point = float(np.mean(sv.phi))
    se = influence_se(sv.phi)
    return EstimateResult(
        "psi", point, se, wald_ci(point, se, alpha), d.n, K, seed, tuple(clip), alpha
    )


def lambda_contrasts(
    d: Dataset,
    weights=None,
    outcome_design: DesignSpec = OUTCOME_DESIGN,
    mediator_design: DesignSpec = MEDIATOR_DESIGN,
) -> np.ndarray:
    """Per-observation ``int Delta_hat(w, X_i) dF_hat(w | A=0, X_i)``.

    ``Delta_hat`` is affine in ``w`` under any :class:`DesignSpec`, so for a
    continuous focal variable it is evaluated at the fitted mean
    ``E_hat[W | A=0, X_i]`` (linear mediator model). For binary ``W`` the
    mediator model is logistic and the two levels are averaged explicitly.
    """
    d.require_both_arms()
    q = LinearOutcome(outcome_design).fit(d, slice(None), weights)
    m_rows = mediator_design.matrix(d.a, 0.0, d.x)
    m_rows0 = mediator_design.matrix(0.0, 0.0, d.x)
    m_names = mediator_design.names(d.x_names)
    if is_binary_focal(d):
        med = fit_logistic(m_rows, d.w, weights, names=m_names)
        p0 = med.predict(m_rows0)
        return (1 - p0) * q.contrast(0.0, d.x) + p0 * q.contrast(1.0, d.x)
    med = fit_ols(m_rows, d.w, weights, names=m_names)
    return q.contrast(med.predict(m_rows0), d.x)


def _mean(values, weights=None) -> float:
    if weights is None:
        return float(np.mean(values))
    weights = np.asarray(weights, float)
    return float(weights @ values / weights.sum())


def estimate_lambda(
    d: Dataset,
    *,
    seed: int | None = None,
    alpha: float = DEFAULT_ALPHA,
    weights=None,
    outcome_design: DesignSpec = OUTCOME_DESIGN,
    mediator_design: DesignSpec = MEDIATOR_DESIGN,
) -> EstimateResult:
    """Mediation-formula plug-in comparator (no standard error).

    Intervals come from :func:`bootstrap_lambda`; the plug-in standard error
    would ignore nuisance estimation and is deliberately not reported.
    """
    point = _mean(lambda_contrasts(d, weights, outcome_design, mediator_design), weights)
    return EstimateResult("lambda", point, None, None, d.n, None, seed, None, alpha)


def _resampled(d: Dataset, mult, base_weight=None):
    keep = np.flatnonzero(mult > 0)
    w = mult[keep].astype(float)
    if base_weight is not None:
        w = w * np.asarray(base_weight, float)[keep]
    return d.subset(keep), w


def bootstrap_lambda(d: Dataset, *, B: int, seed: int, **kwargs) -> np.ndarray:
    """Row-bootstrap replicates of :func:`estimate_lambda`.

    Replicate ``b`` draws from the child stream ``(seed, b)``; a replicate
    whose resample lacks an exposure level is recorded as NaN.
    """
    if B < 1:
        raise ConfigError("B must be at least 1")
    reps = np.empty(B)
    for b in range(B):
        rng = np.random.default_rng(derive_seed(seed, b))
        sub, w = _resampled(d, iid_multiplicities(d.n, rng))
        try:
            reps[b] = _mean(lambda_contrasts(sub, w, **kwargs), w)
        except (DataError, NumericError):
            reps[b] = np.nan
    return reps


def wald_p(point: float, se: float) -> float:
    """Two-sided normal p-value of ``point / se``.

    With ``se == 0`` the p-value is 1 when ``point == 0`` and 0 otherwise.
    """
    if se < 0:
        raise ConfigError("standard error must be nonnegative")
    if se == 0:
        return 1.0 if point == 0 else 0.0
    return float(2 * norm.sf(abs(point) / se))


def union_test(p_C: float, p_M: float, alpha: float = DEFAULT_ALPHA) -> UnionTestResult:
    """Intersection-union test of the composite null of no direct effect.

    Rejects only when both the confounder-model and the mediator-model tests
    reject, i.e. when ``max(p_C, p_M) < alpha``.
    """
    for name, v in (("p_C", p_C), ("p_M", p_M), ("alpha", alpha)):
        if not 0 <= v <= 1:
            raise ConfigError(f"{name} must lie in [0, 1], got {v}")
    p_max = max(p_C, p_M)
    return UnionTestResult(float(p_C), float(p_M), float(p_max), bool(p_max < alpha), float(alpha))


def direct_effect_union_test(
    d: Dataset,
    *,
    seed: int,
    B: int = 200,
    K: int = DEFAULT_K,
    clip=DEFAULT_CLIP,
    alpha: float = DEFAULT_ALPHA,
) -> UnionTestResult:
    """Union test with ``p_C`` from the Wald test of the one-step estimate and
    ``p_M`` from inverting the bootstrap percentile interval of the comparator."""
    psi = estimate_psi(d, seed=seed, K=K, clip=clip, alpha=alpha)
    reps = bootstrap_lambda(d, B=B, seed=seed)
    reps = reps[np.isfinite(reps)]
    return union_test(wald_p(psi.point, psi.se), percentile_pvalue(reps), alpha)


def lambda_bootstrap_ci(d: Dataset, *, B: int, seed: int, alpha: float = DEFAULT_ALPHA) -> tuple:
    reps = bootstrap_lambda(d, B=B, seed=seed)
    return percentile_ci(reps[np.isfinite(reps)], alpha)
