"""Data-generating processes, quadrature truths and the Monte Carlo study.

Three cases share ``X ~ N(0, 1)`` and standard normal outcome noise:

1. confounder with interaction: ``W`` precedes ``A``;
2. mediator without interaction: ``W`` follows ``A``;
3. mediator with interaction.

All randomness flows from ``numpy.random.default_rng`` seeded with a
``SeedSequence``; replicate ``r`` of case ``c`` at size ``n`` uses the child
stream ``SeedSequence(master_seed, spawn_key=(c, n, r))``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .crossfit import DEFAULT_K, LinearOutcome, LogisticExposure
from .errors import ConfigError, NumericError, RobustDEError
from .estimator import estimate_lambda, estimate_psi
from .glm import DEFAULT_CLIP, EXPOSURE_DESIGN, OUTCOME_DESIGN
from .resample import derive_seed, parallel_map
from .tabular import Dataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DgpSpec:
    """Structural equations for one simulation case.

    ``w_first`` selects the confounder ordering (``W`` generated before
    ``A``). Linear predictors::

        W | X      : w0 + wx X            (w_first)
        A | W, X   : a0 + ax X + aw W     (w_first)
        A | X      : a0 + ax X            (mediator ordering)
        W | A, X   : w0 + wa A + wx X     (mediator ordering)
        Y          : y0 + ya A + yw W + yaw A W + yx X + N(0, 1)
    """

    case: int
    label: str
    w_first: bool
    w0: float
    wx: float
    a0: float
    ax: float
    aw: float = 0.0
    wa: float = 0.0
    y0: float = 0.5
    ya: float = 0.8
    yw: float = 0.9
    yaw: float = 0.0
    yx: float = 0.4


CASES = {
    1: DgpSpec(1, "Confounder with interaction", True, w0=-0.2, wx=0.6, a0=-0.1, ax=0.5, aw=1.3, yaw=1.0),
    2: DgpSpec(2, "Mediator without interaction", False, w0=-0.4, wx=0.6, a0=-0.1, ax=0.5, wa=1.4),
    3: DgpSpec(3, "Mediator with interaction", False, w0=-0.4, wx=0.6, a0=-0.1, ax=0.5, wa=1.4, yaw=1.0),
}


def get_case(case) -> DgpSpec:
    if isinstance(case, DgpSpec):
        return case
    try:
        return CASES[int(case)]
    except (KeyError, ValueError):
        raise ConfigError(f"unknown simulation case {case!r}; expected 1, 2 or 3") from None


def draw(spec: DgpSpec, n: int, seed, x=None) -> Dataset:
    """``n`` iid rows from ``spec``; ``x`` optionally fixes the covariate."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    spec = get_case(spec)
    rng = np.random.default_rng(seed)
    xv = rng.standard_normal(n)
    if x is not None:
        xv = np.broadcast_to(np.asarray(x, float), (n,)).copy()
    if spec.w_first:
        w = (rng.random(n) < expit(spec.w0 + spec.wx * xv)).astype(float)
        a = (rng.random(n) < expit(spec.a0 + spec.ax * xv + spec.aw * w)).astype(float)
    else:
        a = (rng.random(n) < expit(spec.a0 + spec.ax * xv)).astype(float)
        w = (rng.random(n) < expit(spec.w0 + spec.wa * a + spec.wx * xv)).astype(float)
    eps = rng.standard_normal(n)
    y = spec.y0 + spec.ya * a + spec.yw * w + spec.yaw * a * w + spec.yx * xv + eps
    return Dataset(x=xv[:, None], a=a, w=w, y=y, x_names=("X",))


# ---------------------------------------------------------------------------
# Population quantities as functions of x
# ---------------------------------------------------------------------------

def p_w_given_x(spec: DgpSpec, x) -> np.ndarray:
    """``P(W = 1 | X = x)``."""
    if spec.w_first:
        return expit(spec.w0 + spec.wx * x)
    pi = expit(spec.a0 + spec.ax * x)
    return pi * expit(spec.w0 + spec.wa + spec.wx * x) + (1 - pi) * expit(spec.w0 + spec.wx * x)


def p_w_given_a0_x(spec: DgpSpec, x) -> np.ndarray:
    """``P(W = 1 | A = 0, X = x)``."""
    if not spec.w_first:
        return expit(spec.w0 + spec.wx * x)
    pw = expit(spec.w0 + spec.wx * x)
    not_a1 = 1 - expit(spec.a0 + spec.ax * x + spec.aw)
    not_a0 = 1 - expit(spec.a0 + spec.ax * x)
    return pw * not_a1 / (pw * not_a1 + (1 - pw) * not_a0)


def p_a_given_x(spec: DgpSpec, x) -> np.ndarray:
    """``P(A = 1 | X = x)``."""
    if not spec.w_first:
        return expit(spec.a0 + spec.ax * x)
    pw = expit(spec.w0 + spec.wx * x)
    return pw * expit(spec.a0 + spec.ax * x + spec.aw) + (1 - pw) * expit(spec.a0 + spec.ax * x)


def gauss_hermite_mean(f, nodes: int = 64, tol: float = 1e-13, max_nodes: int = 1024) -> float:
    """``E[f(X)]`` for ``X ~ N(0, 1)``; node count doubles until two
    successive rules agree to ``tol``."""
    prev = None
    while nodes <= max_nodes:
        x, wts = np.polynomial.hermite_e.hermegauss(nodes)
        val = float(np.dot(wts, f(x)) / np.sqrt(2 * np.pi))
        if prev is not None and abs(val - prev) < tol:
            return val
        prev = val
        nodes *= 2
    return prev


@dataclass(frozen=True)
class TruthPair:
    psi_true: float
    lambda_true: float
    method: str = "quadrature"


def truth(spec) -> TruthPair:
    """Population ``psi`` and ``lambda`` by Gauss-Hermite quadrature.

    ``Delta(w, x) = ya + yaw w`` for every case, so ``psi = ya + yaw E[W]``
    and ``lambda = ya + yaw E[P(W=1 | A=0, X)]``.
    """
    spec = get_case(spec)
    if spec.yaw == 0:
        return TruthPair(spec.ya, spec.ya, "closed-form")
    ew = gauss_hermite_mean(lambda x: p_w_given_x(spec, x))
    ew0 = gauss_hermite_mean(lambda x: p_w_given_a0_x(spec, x))
    return TruthPair(spec.ya + spec.yaw * ew, spec.ya + spec.yaw * ew0)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicateTask:
    spec: DgpSpec
    n: int
    rep: int
    master_seed: int
    K: int = DEFAULT_K
    clip: tuple = DEFAULT_CLIP
    outcome_design: object = OUTCOME_DESIGN
    exposure_design: object = EXPOSURE_DESIGN
    with_lambda: bool = True


def run_replicate(task: ReplicateTask):
    """``(psi_hat, se, lambda_hat)`` for one replicate, or ``None`` on failure."""
    ss = derive_seed(task.master_seed, task.spec.case, task.n, task.rep)
    data_seed, fold_seed = ss.spawn(2)
    d = draw(task.spec, task.n, data_seed)
    fold_seed = int(fold_seed.generate_state(1, np.uint64)[0])
    try:
        psi = estimate_psi(
            d,
            seed=fold_seed,
            K=task.K,
            clip=task.clip,
            outcome=LinearOutcome(task.outcome_design),
            exposure=LogisticExposure(task.exposure_design),
        )
        lam = estimate_lambda(d).point if task.with_lambda else np.nan
    except RobustDEError as exc:
        log.debug("replicate %s failed: %s", task.rep, exc)
        return None
    return psi.point, psi.se, lam


@dataclass(frozen=True)
class ReplicateSet:
    psi: np.ndarray
    se: np.ndarray
    lam: np.ndarray
    failures: int


def run_replicates(spec, n: int, reps: int, master_seed: int, threads=None, **task_kw) -> ReplicateSet:
    """Run ``reps`` replicates; aborts when more than 1% fail."""
    spec = get_case(spec)
    tasks = [ReplicateTask(spec, n, r, master_seed, **task_kw) for r in range(reps)]
    out = parallel_map(run_replicate, tasks, threads)
    ok = [o for o in out if o is not None]
    failures = reps - len(ok)
    if failures > 0.01 * reps:
        raise NumericError(f"{failures} of {reps} replicates failed (case {spec.case}, n={n})")
    arr = np.array(ok, float).reshape(len(ok), 3)
    return ReplicateSet(arr[:, 0], arr[:, 1], arr[:, 2], failures)


@dataclass(frozen=True)
class SimSummary:
    case: int
    label: str
    n: int
    reps: int
    failures: int
    master_seed: int
    psi_true: float
    lambda_true: float
    mc_mean_psi: float
    bias_psi: float
    rmse_psi: float
    coverage95: float
    mc_sd_psi: float
    mean_se: float
    mc_mean_lambda: float
    lambda_bias_to_psi: float
    psi_estimates: np.ndarray = field(repr=False, compare=False)
    lambda_estimates: np.ndarray = field(repr=False, compare=False)


def summarize(spec, n, rs: ReplicateSet, master_seed, alpha=0.05) -> SimSummary:
    from .estimator import z_quantile

    spec = get_case(spec)
    tp = truth(spec)
    z = z_quantile(alpha)
    err = rs.psi - tp.psi_true
    covered = np.abs(err) <= z * rs.se
    sd = float(np.std(rs.psi, ddof=1)) if len(rs.psi) > 1 else 0.0
    lam_mean = float(np.mean(rs.lam))
    return SimSummary(
        case=spec.case,
        label=spec.label,
        n=n,
        reps=len(rs.psi),
        failures=rs.failures,
        master_seed=master_seed,
        psi_true=tp.psi_true,
        lambda_true=tp.lambda_true,
        mc_mean_psi=float(np.mean(rs.psi)),
        bias_psi=float(np.mean(err)),
        rmse_psi=float(np.sqrt(np.mean(err**2))),
        coverage95=float(np.mean(covered)),
        mc_sd_psi=sd,
        mean_se=float(np.mean(rs.se)),
        mc_mean_lambda=lam_mean,
        lambda_bias_to_psi=lam_mean - tp.psi_true,
        psi_estimates=rs.psi,
        lambda_estimates=rs.lam,
    )


def run_study(
    reps: int = 500,
    ns=(500, 2000),
    K: int = DEFAULT_K,
    master_seed: int | None = None,
    cases=(1, 2, 3),
    clip=DEFAULT_CLIP,
    threads=None,
) -> list:
    """Monte Carlo study over ``cases x ns``; one :class:`SimSummary` per cell.

    Comparator bias is measured against ``psi_true``, not ``lambda_true``.
    """
    if master_seed is None:
        raise ConfigError("a master seed is required")
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    out = []
    for case in cases:
        spec = get_case(case)
        for n in ns:
            rs = run_replicates(spec, n, reps, master_seed, threads, K=K, clip=tuple(clip))
            out.append(summarize(spec, n, rs, master_seed))
            log.info("case %d n=%d done", spec.case, n)
    return out


TABLE_COLUMNS = [
    "case", "label", "n", "mean_psi", "bias", "rmse", "coverage95",
    "mean_comparator", "comparator_bias_to_psi",
    "psi_true", "lambda_true", "mc_sd_psi", "mean_se", "reps", "failures", "master_seed",
]


def _g(v) -> str:
    return format(v, ".17g") if isinstance(v, float) else str(v)


def summary_rows(summaries) -> list:
    rows = []
    for s in summaries:
        rows.append([
            s.case, s.label, s.n, s.mc_mean_psi, s.bias_psi, s.rmse_psi, s.coverage95,
            s.mc_mean_lambda, s.lambda_bias_to_psi, s.psi_true, s.lambda_true,
            s.mc_sd_psi, s.mean_se, s.reps, s.failures, s.master_seed,
        ])
    return rows


def write_summary_csv(summaries, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TABLE_COLUMNS)
        for row in summary_rows(summaries):
            out.writerow([_g(v) for v in row])


def emit_plot_data(summaries, out_dir) -> tuple:
    """Write long-format replicate estimates and reference lines.

    Returns the paths of ``plot_data.csv`` (case, n, method, replicate,
    estimate) and ``reference_lines.csv`` (case, psi_true, lambda_true).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / "plot_data.csv"
    ref_path = out_dir / "reference_lines.csv"
    with data_path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["case", "n", "method", "replicate", "estimate"])
        for s in summaries:
            for method, est in (("psi_cf", s.psi_estimates), ("comparator", s.lambda_estimates)):
                for r, v in enumerate(est):
                    out.writerow([s.case, s.n, method, r, _g(float(v))])
    seen = {}
    for s in summaries:
        seen.setdefault(s.case, (s.psi_true, s.lambda_true))
    with ref_path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["case", "psi_true", "lambda_true"])
        for case, (p, lam) in sorted(seen.items()):
            out.writerow([case, _g(p), _g(lam)])
    return data_path, ref_path


def with_coefficients(spec, **coefs) -> DgpSpec:
    """Copy of a case with some structural coefficients replaced."""
    return replace(get_case(spec), **coefs)
