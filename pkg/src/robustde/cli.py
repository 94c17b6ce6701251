"""Command-line front end.

Subcommands: ``estimate``, ``sensitivity``, ``simulate``, ``survey-bootstrap``
and ``expand``. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical failure; errors are reported on stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, RobustDEError
from .estimator import (
    direct_effect_union_test,
    estimate_lambda,
    estimate_psi,
    lambda_bootstrap_ci,
)
from .resample import resolve_threads
from .sensitivity import bound, sensitivity_report
from .simulate import emit_plot_data, run_study, write_summary_csv
from .survey import estimate_lambda_weighted, estimate_psi_weighted, psu_bootstrap
from .tabular import ColumnSpec, expand_categorical, is_binary_focal, load_csv

log = logging.getLogger("robustde")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("config", message, 2)


def _fail(category, message, code):
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")
    sys.exit(code)


def _csv_list(text, cast=str):
    try:
        return [cast(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _ints(text):
    return _csv_list(text, int)


def _floats(text):
    return _csv_list(text, float)


def _add_data_flags(p, survey=False):
    g = p.add_argument_group("data")
    g.add_argument("--data", required=True, help="input CSV (comma-separated, header row, UTF-8)")
    g.add_argument("--exposure", default="A", help="binary exposure column (default: A)")
    g.add_argument("--focal", default="W", help="focal variable column (default: W)")
    g.add_argument("--outcome", default="Y", help="outcome column (default: Y)")
    g.add_argument("--covariates", type=_csv_list, default=[], help="comma-separated covariate columns")
    g.add_argument("--weight", required=survey, default=None, help="survey weight column")
    g.add_argument("--stratum", default=None, help="stratum column")
    g.add_argument("--psu", default=None, help="PSU column (nested in stratum)")


def _add_fit_flags(p):
    p.add_argument("--seed", type=int, required=True, help="RNG seed (mandatory)")
    p.add_argument("--K", type=int, default=5, help="number of cross-fitting folds (default: 5)")
    p.add_argument("--clip-lo", type=float, default=0.01)
    p.add_argument("--clip-hi", type=float, default=0.99)
    p.add_argument("--alpha", type=float, default=0.05)


def _spec(args) -> ColumnSpec:
    return ColumnSpec(
        exposure=args.exposure,
        focal=args.focal,
        outcome=args.outcome,
        covariates=tuple(args.covariates),
        weight=args.weight,
        stratum=args.stratum,
        psu=args.psu,
    )


def _config_echo(args) -> dict:
    keep = ("seed", "K", "alpha", "B", "gamma", "e_tv", "targets", "reps", "ns", "cases")
    out = {"command": args.command}
    if hasattr(args, "clip_lo"):
        out["clip"] = [args.clip_lo, args.clip_hi]
    for k in keep:
        if hasattr(args, k):
            out[k] = getattr(args, k)
    return out


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _flat_csv(rows: list) -> str:
    buf = io.StringIO()
    cols = list(rows[0].keys())
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in rows:
        wr.writerow(["" if r[c] is None else (format(r[c], ".17g") if isinstance(r[c], float) else
                     json.dumps(r[c]) if isinstance(r[c], list) else r[c]) for c in cols])
    return buf.getvalue()


def cmd_estimate(args) -> int:
    d = load_csv(args.data, _spec(args))
    clip = (args.clip_lo, args.clip_hi)
    psi = estimate_psi(d, seed=args.seed, K=args.K, clip=clip, alpha=args.alpha)
    results = [psi.to_dict()]
    report = {"config": _config_echo(args), "n_dropped": d.n_dropped}
    if args.with_lambda:
        lam = estimate_lambda(d, seed=args.seed, alpha=args.alpha).to_dict()
        if args.B:
            lam["ci_lo"], lam["ci_hi"] = lambda_bootstrap_ci(d, B=args.B, seed=args.seed, alpha=args.alpha)
        results.append(lam)
    report["results"] = results
    if args.union:
        ut = direct_effect_union_test(d, seed=args.seed, B=args.B or 200, K=args.K, clip=clip, alpha=args.alpha)
        report["union_test"] = ut.to_dict()
    if args.format == "csv":
        rows = [dict(r, n_dropped=d.n_dropped) for r in results]
        _emit(_flat_csv(rows), args.out)
    else:
        _emit(_dumps(report), args.out)
    return 0


def cmd_sensitivity(args) -> int:
    d = load_csv(args.data, _spec(args))
    if not is_binary_focal(d) and args.gamma is None:
        raise ConfigError("continuous focal variable: --gamma is required (and --e-tv)")
    if not is_binary_focal(d) and args.e_tv is None:
        raise ConfigError("continuous focal variable: --e-tv is required")
    psi = estimate_psi(d, seed=args.seed, K=args.K, clip=(args.clip_lo, args.clip_hi), alpha=args.alpha)
    rep = sensitivity_report(d, psi.point, gamma=args.gamma, e_tv=args.e_tv)
    if args.gamma is None:
        sys.stderr.write(
            "note: gamma defaults to the fitted |A:W| coefficient, a working-model "
            "estimate rather than a known bound\n"
        )
    if args.gamma_sweep:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["gamma", "lo", "hi"])
        for g in args.gamma_sweep:
            lo, hi = bound(rep.psi_hat, g, rep.e_tv)
            wr.writerow([format(g, ".17g"), format(lo, ".17g"), format(hi, ".17g")])
        _emit(buf.getvalue(), args.out)
        return 0
    report = {"config": _config_echo(args), "n_dropped": d.n_dropped, "psi": psi.to_dict()}
    report.update(rep.to_dict())
    _emit(_dumps(report), args.out)
    return 0


def cmd_simulate(args) -> int:
    threads = resolve_threads(args.threads)
    summaries = run_study(
        reps=args.reps, ns=tuple(args.ns), K=args.K, master_seed=args.seed,
        cases=tuple(args.cases), threads=threads,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(summaries, out_dir / "summary.csv")
    emit_plot_data(summaries, out_dir)
    (out_dir / "config.json").write_text(_dumps(_config_echo(args)), encoding="utf-8")
    sys.stdout.write((out_dir / "summary.csv").read_text(encoding="utf-8"))
    return 0


def cmd_survey_bootstrap(args) -> int:
    d = load_csv(args.data, _spec(args))
    clip = (args.clip_lo, args.clip_hi)
    psi = estimate_psi_weighted(d, seed=args.seed, K=args.K, clip=clip, alpha=args.alpha)
    points = {"psi": psi.point}
    if "lambda" in args.targets or "difference" in args.targets:
        points["lambda"] = estimate_lambda_weighted(d, seed=args.seed).point
        points["difference"] = points["psi"] - points["lambda"]
    boot = psu_bootstrap(
        d, B=args.B, seed=args.seed, targets=args.targets, K=args.K, clip=clip,
        alpha=args.alpha, threads=resolve_threads(args.threads),
    )
    report = {
        "config": _config_echo(args),
        "n": d.n,
        "n_dropped": d.n_dropped,
        "point": {t: points[t] for t in args.targets},
        "design_se": psi.se,
        "design_ci": list(psi.ci),
        "boot_ci": {t: list(boot.ci[t]) for t in args.targets},
        "skipped": boot.skipped,
    }
    _emit(_dumps(report), args.out)
    return 0


def cmd_expand(args) -> int:
    path = Path(args.data)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, body = expand_categorical(rows[0], [r for r in rows[1:] if r], args.columns)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(body)
    _emit(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robustde", description="Model-robust direct effect estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="cross-fitted one-step estimate (and comparator)")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--lambda", dest="with_lambda", action="store_true", help="also report the comparator")
    p.add_argument("--union", action="store_true", help="run the intersection-union test")
    p.add_argument("--B", type=int, default=0, help="bootstrap replicates for comparator interval / p_M")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sensitivity", help="gap and sensitivity interval for the natural direct effect")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--gamma", type=float, default=None, help="bound on the oscillation of Delta in w")
    p.add_argument("--e-tv", dest="e_tv", type=float, default=None, help="E[TV(X)] (required for continuous W)")
    p.add_argument("--gamma-sweep", type=_floats, default=None, help="comma-separated gammas; emits CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("simulate", help="Monte Carlo study: bias, RMSE and coverage per case and n")
    p.add_argument("--cases", type=_ints, default=[1, 2, 3])
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--ns", type=_ints, default=[500, 2000])
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", default="sim_out")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("survey-bootstrap", help="survey-weighted estimates with PSU bootstrap")
    _add_data_flags(p, survey=True)
    _add_fit_flags(p)
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--targets", type=_csv_list, default=["psi", "lambda", "difference"])
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_survey_bootstrap)

    p = sub.add_parser("expand", help="dummy-code categorical columns of a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--columns", type=_csv_list, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_expand)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RobustDEError as exc:
        _fail(exc.category, str(exc), exc.exit_code)


if __name__ == "__main__":
    sys.exit(main())
