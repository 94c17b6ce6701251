"""K-fold partitioning, out-of-fold nuisance fits and held-out scores.

Nuisance learners follow a small fit/predict contract so that the default
parametric working models can be swapped for other learners:

* an outcome learner has ``fit(d, idx, weights) -> fitted`` where
  ``fitted.predict(a, w, x)`` returns the regression of ``Y`` on ``(A, W, X)``;
* an exposure learner has ``fit(d, idx, weights) -> fitted`` where
  ``fitted.predict(w, x)`` returns unclipped ``P(A=1 | W, X)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateFoldError, NumericError
from .glm import (
    DEFAULT_CLIP,
    EXPOSURE_DESIGN,
    OUTCOME_DESIGN,
    DesignSpec,
    LinearFit,
    LogisticFit,
    _check_clip,
    fit_logistic,
    fit_ols,
)
from .tabular import Dataset

DEFAULT_K = 5


@dataclass(frozen=True)
class FoldAssignment:
    """Fold label (``0..K-1``) for every observation."""

    fold: np.ndarray
    K: int
    seed: int

    def indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold == k)

    def complement(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold != k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold, minlength=self.K)


def assign_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Random partition of ``range(n)`` into ``K`` folds of near-equal size.

    A permutation drawn from ``numpy.random.default_rng(seed)`` is cut into
    contiguous blocks; the first ``n % K`` blocks get one extra element.
    """
    if not isinstance(K, (int, np.integer)) or K < 2 or K > n:
        raise ConfigError(f"number of folds must satisfy 2 <= K <= n (K={K}, n={n})")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, K)
    fold = np.empty(n, dtype=np.intp)
    start = 0
    for k in range(K):
        stop = start + base + (k < extra)
        fold[perm[start:stop]] = k
        start = stop
    fold.flags.writeable = False
    return FoldAssignment(fold=fold, K=int(K), seed=seed)


@dataclass(frozen=True)
class FittedOutcome:
    design: DesignSpec
    fit: LinearFit

    def predict(self, a, w, x) -> np.ndarray:
        return self.design.matrix(a, w, x) @ self.fit.coef

    def contrast(self, w, x) -> np.ndarray:
        """``Q(1, w, x) - Q(0, w, x)``."""
        return self.predict(1.0, w, x) - self.predict(0.0, w, x)


@dataclass(frozen=True)
class FittedExposure:
    design: DesignSpec
    fit: LogisticFit

    def predict(self, w, x) -> np.ndarray:
        return self.fit.predict(self.design.matrix(0.0, w, x))


@dataclass(frozen=True)
class LinearOutcome:
    """Least-squares outcome regression on ``design``."""

    design: DesignSpec = OUTCOME_DESIGN

    def fit(self, d: Dataset, idx, weights=None) -> FittedOutcome:
        rows = self.design.matrix(d.a[idx], d.w[idx], d.x[idx])
        fit = fit_ols(rows, d.y[idx], weights, names=self.design.names(d.x_names))
        return FittedOutcome(self.design, fit)


@dataclass(frozen=True)
class LogisticExposure:
    """Logistic exposure model ``P(A=1 | W, X)`` on ``design``."""

    design: DesignSpec = EXPOSURE_DESIGN

    def __post_init__(self):
        if self.design.a:
            raise ConfigError("the exposure model cannot include A")

    def fit(self, d: Dataset, idx, weights=None) -> FittedExposure:
        rows = self.design.matrix(0.0, d.w[idx], d.x[idx])
        fit = fit_logistic(rows, d.a[idx], weights, names=self.design.names(d.x_names))
        return FittedExposure(self.design, fit)


@dataclass(frozen=True)
class NuisanceFit:
    """Per-fold nuisance fits; entry ``k`` never saw fold ``k``."""

    outcome: tuple
    exposure: tuple
    clip: tuple
    train_sizes: tuple

    @property
    def K(self) -> int:
        return len(self.outcome)


@dataclass(frozen=True)
class ScoreVector:
    """Held-out one-step contributions and plug-in contrasts."""

    phi: np.ndarray
    delta: np.ndarray

    def __len__(self):
        return len(self.phi)


def fit_nuisances(
    d: Dataset,
    folds: FoldAssignment,
    clip=DEFAULT_CLIP,
    weights=None,
    outcome=None,
    exposure=None,
) -> NuisanceFit:
    """Fit the outcome and exposure learners on each training complement."""
    if len(folds.fold) != d.n:
        raise ConfigError("fold assignment does not match the dataset size")
    clip = _check_clip(clip)
    outcome = outcome or LinearOutcome()
    exposure = exposure or LogisticExposure()
    w_all = None if weights is None else np.asarray(weights, float)
    q_fits, g_fits, sizes = [], [], []
    for k in range(folds.K):
        train = folds.complement(k)
        w_k = None if w_all is None else w_all[train]
        a_k = d.a[train] if w_k is None else d.a[train][w_k > 0]
        if a_k.size == 0 or a_k.min() == a_k.max():
            raise DegenerateFoldError(
                f"training complement of fold {k} has a single exposure level; "
                "try fewer folds"
            )
        q_fits.append(outcome.fit(d, train, w_k))
        g_fits.append(exposure.fit(d, train, w_k))
        sizes.append(len(train))
    return NuisanceFit(tuple(q_fits), tuple(g_fits), clip, tuple(sizes))


def score(d: Dataset, nf: NuisanceFit, folds: FoldAssignment) -> ScoreVector:
    """Held-out (uncentred) efficient-influence-function contributions.

    For ``i`` in fold ``k``, with ``Q`` and ``g`` fitted without fold ``k``::

        phi_i = A/g (Y - Q(1,W,X)) - (1-A)/(1-g) (Y - Q(0,W,X)) + Q(1,W,X) - Q(0,W,X)
    """
    if len(folds.fold) != d.n or nf.K != folds.K:
        raise ConfigError("nuisance fits, folds and data are inconsistent")
    lo, hi = nf.clip
    phi = np.empty(d.n)
    delta = np.empty(d.n)
    for k in range(folds.K):
        idx = folds.indices(k)
        w, x, a, y = d.w[idx], d.x[idx], d.a[idx], d.y[idx]
        q1 = nf.outcome[k].predict(1.0, w, x)
        q0 = nf.outcome[k].predict(0.0, w, x)
        g = np.clip(nf.exposure[k].predict(w, x), lo, hi)
        if not np.all((g > 0) & (g < 1)):
            raise NumericError("exposure probabilities outside (0, 1) after clipping")
        delta[idx] = q1 - q0
        phi[idx] = a / g * (y - q1) - (1 - a) / (1 - g) * (y - q0) + q1 - q0
    phi.flags.writeable = False
    delta.flags.writeable = False
    return ScoreVector(phi=phi, delta=delta)
