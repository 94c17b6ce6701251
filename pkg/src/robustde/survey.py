"""Survey-weighted estimation and within-stratum PSU bootstrap.

Weighted estimates are Hajek means (``sum(w f) / sum(w)``) of held-out scores
or comparator contrasts, with the survey weights also entering every
nuisance fit. Replicate ``b`` of the PSU bootstrap multiplies each unit's
weight by the number of times its PSU was drawn, then refits everything.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .crossfit import DEFAULT_K
from .errors import ConfigError, DataError, LonelyPSUWarning, NumericError
from .estimator import (
    DEFAULT_ALPHA,
    EstimateResult,
    _resampled,
    cross_fitted_scores,
    lambda_contrasts,
    wald_ci,
)
from .glm import DEFAULT_CLIP
from .resample import derive_seed, parallel_map, percentile_ci, psu_multiplicities
from .simulate import draw, get_case
from .tabular import Dataset, SurveyDesign

TARGETS = ("psi", "lambda", "difference")
MAX_SKIP_FRACTION = 0.05


def six_year_weight(w2: float) -> float:
    """Pool three 2-year cycles: the 6-year weight is one third of the 2-year weight."""
    if not w2 > 0:
        raise DataError(f"2-year weight must be positive, got {w2}")
    return w2 / 3.0


def hajek_mean(values, weights) -> float:
    """Ratio-normalised weighted mean ``sum(w * v) / sum(w)``."""
    values = np.asarray(values, float)
    weights = np.asarray(weights, float)
    if values.size == 0:
        raise DataError("cannot take the mean of an empty vector")
    if values.shape != weights.shape:
        raise DataError("values and weights differ in length")
    if np.any(weights <= 0):
        raise DataError("weights must be positive")
    # Normalising first makes equal weights reproduce np.mean bit for bit.
    weights = weights / weights.mean()
    return float(np.sum(weights * values) / np.sum(weights))


def linearization_se(values, design: SurveyDesign) -> float:
    """Taylor-linearisation standard error of the Hajek mean of ``values``.

    With ``z_i = w_i (v_i - mean) / sum(w)`` and PSU totals ``z_hj``::

        var = sum_h m_h / (m_h - 1) sum_j (z_hj - zbar_h)^2

    Strata with a single PSU contribute zero (with a warning).
    """
    v = np.asarray(values, float)
    w = design.weight
    z = w * (v - hajek_mean(v, w)) / w.sum()
    s_code, c_code = design.codes()
    totals = np.bincount(c_code, weights=z)
    c_stratum = np.empty(len(totals), dtype=np.intp)
    c_stratum[c_code] = s_code
    var = 0.0
    lonely = 0
    for h in np.unique(c_stratum):
        t = totals[c_stratum == h]
        m = len(t)
        if m < 2:
            lonely += 1
            continue
        var += m / (m - 1) * float(np.sum((t - t.mean()) ** 2))
    if lonely:
        warnings.warn(
            f"{lonely} stratum/strata with a single PSU contribute no variance",
            LonelyPSUWarning,
            stacklevel=2,
        )
    return float(np.sqrt(var))


def _survey(d: Dataset) -> SurveyDesign:
    if d.survey is None:
        raise ConfigError("dataset has no survey design (weight/stratum/psu)")
    return d.survey


def estimate_psi_weighted(
    d: Dataset, *, seed: int, K: int = DEFAULT_K, clip=DEFAULT_CLIP, alpha: float = DEFAULT_ALPHA
) -> EstimateResult:
    """Survey-weighted cross-fitted one-step estimate with design-based SE.

    The standard error treats the held-out scores as the analysis variable
    of a weighted mean and linearises over strata and PSUs.
    """
    design = _survey(d)
    sv = cross_fitted_scores(d, seed=seed, K=K, clip=clip, weights=design.weight)
    point = hajek_mean(sv.phi, design.weight)
    se = linearization_se(sv.phi, design)
    return EstimateResult("psi", point, se, wald_ci(point, se, alpha), d.n, K, seed, tuple(clip), alpha)


def estimate_lambda_weighted(d: Dataset, *, seed: int | None = None, alpha: float = DEFAULT_ALPHA) -> EstimateResult:
    """Survey-weighted comparator; intervals only via :func:`psu_bootstrap`."""
    w = _survey(d).weight
    point = hajek_mean(lambda_contrasts(d, w), w)
    return EstimateResult("lambda", point, None, None, d.n, None, seed, None, alpha)


@dataclass(frozen=True)
class BootstrapResult:
    replicates: dict
    ci: dict
    B: int
    seed: int
    skipped: int
    alpha: float

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "seed": self.seed,
            "alpha": self.alpha,
            "skipped": self.skipped,
            "boot_ci": {k: list(v) for k, v in self.ci.items()},
        }


def _weighted_targets(d, weights, targets, seed, K, clip) -> dict:
    out = {}
    if "psi" in targets or "difference" in targets:
        sv = cross_fitted_scores(d, seed=seed, K=K, clip=clip, weights=weights)
        out["psi"] = hajek_mean(sv.phi, weights)
    if "lambda" in targets or "difference" in targets:
        out["lambda"] = hajek_mean(lambda_contrasts(d, weights), weights)
    if "difference" in targets:
        out["difference"] = out["psi"] - out["lambda"]
    return {k: out[k] for k in targets}


def _replicate(task):
    d, b, seed, targets, K, clip = task
    design = d.survey
    s_code, c_code = design.codes()
    rng = np.random.default_rng(derive_seed(seed, b))
    sub, w = _resampled(d, psu_multiplicities(s_code, c_code, rng), design.weight)
    try:
        return _weighted_targets(sub, w, targets, seed, K, clip)
    except (DataError, NumericError):
        return None


def psu_bootstrap(
    d: Dataset,
    *,
    B: int,
    seed: int,
    targets=TARGETS,
    K: int = DEFAULT_K,
    clip=DEFAULT_CLIP,
    alpha: float = DEFAULT_ALPHA,
    threads=None,
) -> BootstrapResult:
    """Within-stratum PSU bootstrap of the weighted estimators.

    Every replicate refits all nuisance models under the replicate weights
    and re-partitions its rows into folds using ``seed``. All targets share
    the same PSU draws, so the ``difference`` interval is coherent with the
    other two. Replicates whose resample lacks an exposure level (or hits
    another data/numeric failure) are skipped; more than 5% skipped aborts.
    """
    _survey(d)
    targets = tuple(targets)
    unknown = set(targets) - set(TARGETS)
    if unknown or not targets:
        raise ConfigError(f"unknown bootstrap target(s): {sorted(unknown)}; choose from {TARGETS}")
    if B < 1:
        raise ConfigError("B must be at least 1")
    results = parallel_map(_replicate, [(d, b, seed, targets, K, tuple(clip)) for b in range(B)], threads)
    kept = [r for r in results if r is not None]
    skipped = B - len(kept)
    if skipped > MAX_SKIP_FRACTION * B:
        raise NumericError(f"{skipped} of {B} bootstrap replicates were degenerate")
    reps = {t: np.array([r[t] for r in kept]) for t in targets}
    ci = {t: percentile_ci(reps[t], alpha) for t in targets}
    return BootstrapResult(reps, ci, B, seed, skipped, alpha)


def draw_survey_sample(
    spec,
    seed,
    n_strata: int = 2,
    psus_per_stratum: int = 10,
    units_per_psu: int = 120,
    inclusion=((0.15, 0.45), (0.40, 0.10)),
    cluster_sd: float = 0.0,
) -> Dataset:
    """Stratified cluster sample with informative, W-dependent selection.

    Each PSU holds ``units_per_psu`` population units drawn from the case
    ``spec`` with covariate ``X = c U_psu + sqrt(1 - c^2) E`` (``c =
    cluster_sd``), so ``X`` stays standard normal. Units are Poisson-sampled
    with probability ``inclusion[h][W]`` and weighted by its inverse.
    """
    spec = get_case(spec)
    if not 0 <= cluster_sd < 1:
        raise ConfigError("cluster_sd must lie in [0, 1)")
    if len(inclusion) < n_strata:
        raise ConfigError("need inclusion probabilities for every stratum")
    ss = np.random.default_rng(seed)
    parts = []
    for h in range(n_strata):
        for j in range(psus_per_stratum):
            child = int(ss.integers(2**63))
            rng = np.random.default_rng(child)
            x = cluster_sd * rng.standard_normal() + np.sqrt(1 - cluster_sd**2) * rng.standard_normal(units_per_psu)
            pop = draw(spec, units_per_psu, rng, x=x)
            pi = np.where(pop.w == 1, inclusion[h][1], inclusion[h][0])
            keep = np.flatnonzero(rng.random(units_per_psu) < pi)
            parts.append((pop.subset(keep), 1.0 / pi[keep], h, j))
    x = np.concatenate([p.x for p, *_ in parts])
    a = np.concatenate([p.a for p, *_ in parts])
    w = np.concatenate([p.w for p, *_ in parts])
    y = np.concatenate([p.y for p, *_ in parts])
    weight = np.concatenate([wt for _, wt, _, _ in parts])
    stratum = np.concatenate([np.full(p.n, h) for p, _, h, _ in parts])
    psu = np.concatenate([np.full(p.n, j) for p, _, _, j in parts])
    return Dataset(x=x, a=a, w=w, y=y, survey=SurveyDesign(weight, stratum, psu), x_names=("X",))
