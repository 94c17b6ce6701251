"""Least-squares and logistic working models for the nuisance regressions.

Both fitters accept optional nonnegative weights. Weights are normalised to
mean one before fitting, so multiplying them by a constant leaves the
coefficients unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.special import expit

from .errors import ConfigError, DegenerateTargetError, NumericError, SeparationWarning, SingularDesignError

RANK_TOL = 1e-10
SCORE_TOL = 1e-8
MAX_ITER = 100
SEPARATION_NORM = 1e3
SATURATED_ETA = 36.0  # expit(36) rounds to within 3e-16 of 1
DEFAULT_CLIP = (0.01, 0.99)


@dataclass(frozen=True)
class DesignSpec:
    """Term set over ``(1, A, W, A*W, X)``; the intercept is always present.

    ``x`` is ``True`` for every covariate column, ``False`` for none, or a
    tuple of column indices.
    """

    a: bool = False
    w: bool = False
    aw: bool = False
    x: bool | tuple = True

    def __post_init__(self):
        if self.aw and not (self.a and self.w):
            raise ConfigError("an A*W term needs both A and W in the design")
        if not isinstance(self.x, bool):
            object.__setattr__(self, "x", tuple(int(j) for j in self.x))

    def _x_cols(self, p):
        if self.x is True:
            return list(range(p))
        if self.x is False:
            return []
        return list(self.x)

    def width(self, p: int) -> int:
        return 1 + self.a + self.w + self.aw + len(self._x_cols(p))

    def names(self, x_names) -> list:
        out = ["intercept"]
        out += ["A"] * self.a + ["W"] * self.w + ["A:W"] * self.aw
        return out + [x_names[j] for j in self._x_cols(len(x_names))]

    def matrix(self, a, w, x) -> np.ndarray:
        """Design rows for the given columns; ``a`` or ``w`` may be scalars."""
        x = np.asarray(x, float)
        n = x.shape[0]
        a = np.broadcast_to(np.asarray(a, float), (n,))
        w = np.broadcast_to(np.asarray(w, float), (n,))
        cols = [np.ones(n)]
        if self.a:
            cols.append(a)
        if self.w:
            cols.append(w)
        if self.aw:
            cols.append(a * w)
        cols += [x[:, j] for j in self._x_cols(x.shape[1])]
        return np.column_stack(cols)


# Working models used in the simulation study and the application.
OUTCOME_DESIGN = DesignSpec(a=True, w=True, aw=True)
EXPOSURE_DESIGN = DesignSpec(w=True)
MEDIATOR_DESIGN = DesignSpec(a=True)
MARGINAL_DESIGN = DesignSpec()


@dataclass(frozen=True)
class LinearFit:
    coef: np.ndarray
    resid_var: float
    names: tuple = ()

    def predict(self, rows) -> np.ndarray:
        return np.asarray(rows, float) @ self.coef


@dataclass(frozen=True)
class LogisticFit:
    coef: np.ndarray
    converged: bool
    iterations: int
    names: tuple = ()

    def linear_predictor(self, rows) -> np.ndarray:
        return np.asarray(rows, float) @ self.coef

    def predict(self, rows, clip=None) -> np.ndarray:
        return predict_prob(self, rows, clip)


def _normalise_weights(weights, n):
    if weights is None:
        return None
    w = np.asarray(weights, float)
    if w.shape != (n,):
        raise ConfigError("weights must have one entry per row")
    if not np.all(np.isfinite(w)) or np.any(w < 0) or not np.any(w > 0):
        raise ConfigError("weights must be finite, nonnegative and not all zero")
    return w / w.mean()


def _default_names(k, names):
    if names is None:
        return tuple(f"col{j}" for j in range(k))
    if len(names) != k:
        raise ConfigError("names must match the design width")
    return tuple(names)


def _pivoted_qr(rows, names):
    """Rank-checked pivoted QR of column-standardised ``rows``."""
    n, k = rows.shape
    norms = np.sqrt(np.einsum("ij,ij->j", rows, rows))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        term = names[zero[0]]
        raise SingularDesignError(f"design column '{term}' is identically zero", term)
    if n < k:
        raise SingularDesignError(f"design has {k} columns but only {n} rows", names[-1])
    q, r, piv = qr(rows / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > RANK_TOL * diag[0]))
    if rank < k:
        term = names[piv[rank]]
        raise SingularDesignError(f"design is rank deficient: term '{term}' is collinear", term)
    return q, r, piv, norms


def check_rank(rows, names=None):
    """Raise :class:`SingularDesignError` if ``rows`` lacks full column rank."""
    rows = np.asarray(rows, float)
    _pivoted_qr(rows, _default_names(rows.shape[1], names))


def fit_ols(rows, y, weights=None, names=None) -> LinearFit:
    """(Weighted) least squares via a pivoted QR decomposition."""
    rows = np.asarray(rows, float)
    y = np.asarray(y, float)
    n, k = rows.shape
    names = _default_names(k, names)
    w = _normalise_weights(weights, n)
    if w is None:
        xs, ys = rows, y
    else:
        sw = np.sqrt(w)
        xs, ys = rows * sw[:, None], y * sw
    q, r, piv, norms = _pivoted_qr(xs, names)
    z = solve_triangular(r, q.T @ ys)
    coef = np.empty(k)
    coef[piv] = z / norms[piv]
    resid = ys - xs @ coef
    dof = n - k
    resid_var = float(resid @ resid / dof) if dof > 0 else 0.0
    return LinearFit(coef=coef, resid_var=resid_var, names=names)


def _deviance(eta, t, w):
    # -2 * log-likelihood, stable for large |eta|
    ll = -(t * np.logaddexp(0.0, -eta) + (1.0 - t) * np.logaddexp(0.0, eta))
    return -2.0 * float(np.sum(ll if w is None else w * ll))


def fit_logistic(rows, target, weights=None, names=None, tol=SCORE_TOL, max_iter=MAX_ITER) -> LogisticFit:
    """Logistic regression by iteratively reweighted least squares.

    Iterates Newton steps (halved while the deviance increases) until the
    largest absolute component of the weighted score is below ``tol``, or
    ``max_iter`` iterations. A diverging coefficient vector (norm above 1e3
    while unconverged) is reported as separation with a warning and
    ``converged=False``.
    """
    rows = np.asarray(rows, float)
    t = np.asarray(target, float)
    n, k = rows.shape
    names = _default_names(k, names)
    if not np.all((t == 0) | (t == 1)):
        raise ConfigError("logistic target must be binary 0/1")
    w = _normalise_weights(weights, n)
    present = t if w is None else t[w > 0]
    if present.size == 0 or present.min() == present.max():
        raise DegenerateTargetError("logistic target has a single class")
    _pivoted_qr(rows if w is None else rows * np.sqrt(w)[:, None], names)

    beta = np.zeros(k)
    eta = np.zeros(n)
    dev = _deviance(eta, t, w)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(eta)
        resid = t - p
        v = p * (1.0 - p)
        if w is not None:
            resid = w * resid
            v = w * v
        score = rows.T @ resid
        info = (rows * v[:, None]).T @ rows
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise NumericError("singular information matrix in logistic fit") from None
        if np.max(np.abs(score)) < tol:
            # Final full Newton step from a point already inside tolerance.
            beta = beta + step
            converged = True
            break
        scale = 1.0
        while True:
            cand = beta + scale * step
            cand_eta = rows @ cand
            cand_dev = _deviance(cand_eta, t, w)
            if cand_dev <= dev + 1e-12 * abs(dev) or scale < 1e-10:
                break
            scale *= 0.5
        beta, eta, dev = cand, cand_eta, cand_dev
        if np.linalg.norm(beta) > SEPARATION_NORM:
            warnings.warn(
                "logistic fit diverging (coefficient norm > 1e3); possible separation",
                SeparationWarning,
                stacklevel=2,
            )
            break
    if converged and np.max(np.abs(eta)) > SATURATED_ETA:
        warnings.warn(
            "fitted probabilities numerically 0 or 1; possible separation",
            SeparationWarning,
            stacklevel=2,
        )
    return LogisticFit(coef=beta, converged=converged, iterations=it, names=names)


def _check_clip(clip):
    lo, hi = clip
    if not 0.0 < lo < hi < 1.0:
        raise ConfigError(f"clip bounds must satisfy 0 < lo < hi < 1, got {clip}")
    return lo, hi


def predict_prob(f: LogisticFit, rows, clip=DEFAULT_CLIP) -> np.ndarray:
    """``expit(rows @ coef)``, clamped into ``clip`` unless ``clip`` is None."""
    p = expit(np.asarray(rows, float) @ f.coef)
    if clip is None:
        return p
    lo, hi = _check_clip(clip)
    return np.clip(p, lo, hi)
