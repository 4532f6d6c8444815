"""Command-line entry point: ``balweights {simulate,weigh,balance-report}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .balancing import DEFAULT_LAMBDA, DEFAULT_MAX_ITER, DEFAULT_TOL, att_balancing_weights
from .data import Dataset, WeightVector
from .dataio import (
    ColumnSchema,
    format_table,
    load_dataset_csv,
    read_weights_csv,
    write_json,
    write_rows_csv,
    write_weights_csv,
)
from .diagnostics import balance_report
from .errors import BalweightsError, DataError
from .estimation import weighted_effect
from .propensity import DEFAULT_CLIP, FitOptions, fit_logistic, predict_propensity, model_weights
from .simulation import DGP, DESIGN_GRIDS, ScenarioConfig, SimMethod, grid_rows, run_scenario, GRID_COLUMNS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 1, 2, 3

log = logging.getLogger("balweights")

WEIGH_METHODS = ("ipw-att", "overlap", "balancing-att")
SIM_METHODS = {"ipw-att": SimMethod.IPW_ATT, "overlap": SimMethod.OVERLAP, "balancing-att": SimMethod.BALANCING_ATT}
COLUMN_LABELS = {"ipw-att": "IPW-ATT", "overlap": "Overlap Weights", "balancing-att": "Bal. Weights-ATT"}

DEFAULTS: dict[str, Any] = {
    "lambda": DEFAULT_LAMBDA,
    "clip": DEFAULT_CLIP,
    "tol": DEFAULT_TOL,
    "max-iter": DEFAULT_MAX_ITER,
    "logit-tol": FitOptions().tol,
    "n": 1000,
    "reps": 1000,
    "seed": 0,
    "workers": 1,
    "methods": ",".join(WEIGH_METHODS),
    "out": ".",
    "z": 1.959963984540054,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _opt(args: argparse.Namespace, config: dict, name: str) -> Any:
    v = getattr(args, name.replace("-", "_"), None)
    if v is not None:
        return v
    if name in config:
        return config[name]
    return DEFAULTS.get(name)


def _methods(spec: str) -> list[str]:
    out = [m.strip().lower() for m in str(spec).split(",") if m.strip()]
    bad = [m for m in out if m not in WEIGH_METHODS]
    if bad or not out:
        raise UsageError(f"unknown method(s) {bad}; choose from {', '.join(WEIGH_METHODS)}")
    return out


def _header(title: str, settings: dict, deterministic: bool) -> str:
    lines = [f"# balweights {__version__} {title}"]
    if not deterministic:
        lines.append(f"# run at {_dt.datetime.now().isoformat(timespec='seconds')}")
    lines.extend(f"# {k} = {v}" for k, v in settings.items())
    return "\n".join(lines)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("_", "-"): v for k, v in cfg.items()}


def _schema(args: argparse.Namespace, config: dict) -> ColumnSchema:
    treatment = _opt(args, config, "treatment")
    if not treatment:
        raise UsageError("--treatment is required")
    covs = _opt(args, config, "covariates")
    if isinstance(covs, str):
        covs = [c.strip() for c in covs.split(",") if c.strip()]
    return ColumnSchema(treatment, _opt(args, config, "outcome"), tuple(covs) if covs else None)


def _compute_weights(d: Dataset, methods: list[str], lam: float, clip: float, tol: float,
                     max_iter: int, logit_tol: float, trace: bool) -> dict[str, WeightVector | BalweightsError]:
    out: dict[str, WeightVector | BalweightsError] = {}
    model = e = None
    model_error: BalweightsError | None = None
    if {"ipw-att", "overlap"} & set(methods):
        try:
            model = fit_logistic(d, FitOptions(tol=logit_tol))
            e = predict_propensity(model, d, clip)
            if not model.converged:
                log.warning("logistic fit did not converge (gradient norm %.3g)", model.final_gradient_norm)
        except BalweightsError as exc:
            model_error = exc
    for m in methods:
        try:
            if m == "balancing-att":
                out[m] = att_balancing_weights(d, lam, tol, max_iter, trace=trace)
            elif model_error is not None:
                out[m] = model_error
            else:
                w = model_weights(e, d.treatment, "ATT" if m == "ipw-att" else "ATO")
                out[m] = WeightVector(w.weights, w.estimand, w.method, model.converged,
                                      {"logit_iterations": model.iterations,
                                       "gradient_norm": model.final_gradient_norm})
        except BalweightsError as exc:
            out[m] = exc
    return out


def cmd_weigh(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    data = _opt(args, config, "data")
    if not data:
        raise UsageError("--data is required")
    methods = _methods(_opt(args, config, "methods"))
    lam, clip = float(_opt(args, config, "lambda")), float(_opt(args, config, "clip"))
    tol, max_iter = float(_opt(args, config, "tol")), int(_opt(args, config, "max-iter"))
    logit_tol, zcrit = float(_opt(args, config, "logit-tol")), float(_opt(args, config, "z"))
    out = Path(_opt(args, config, "out"))
    out.mkdir(parents=True, exist_ok=True)

    d = load_dataset_csv(data, _schema(args, config))
    settings = {"data": data, "n": d.n, "k": d.k, "methods": ",".join(methods), "lambda": lam,
                "clip": clip, "tol": tol, "max_iter": max_iter, "logit_tol": logit_tol}
    print(_header("weigh", settings, args.deterministic))

    weights = _compute_weights(d, methods, lam, clip, tol, max_iter, logit_tol, args.trace)
    ok = {m: w for m, w in weights.items() if isinstance(w, WeightVector)}
    for m, w in weights.items():
        if isinstance(w, BalweightsError):
            print(f"{m}: FAILED ({w.code}: {w})", file=sys.stderr)
    if not ok:
        return EXIT_ESTIMATION

    for m, w in ok.items():
        write_weights_csv(out / f"weights_{m}.csv", d.treatment, w)
        if args.trace and "trace" in w.solver_report:
            rows = [{"iteration": i, "objective": f, "kkt_residual": r} for i, f, r in w.solver_report["trace"]]
            write_rows_csv(out / f"trace_{m}.csv", rows, ["iteration", "objective", "kkt_residual"])

    report = balance_report(d, list(ok.values()))
    balance = []
    for m, t in zip(ok, report.tables):
        for r in t.records:
            balance.append({"method": m, "covariate": r.name, "smd_unweighted": r.smd_unweighted,
                            "smd_weighted": r.smd_weighted})
    write_rows_csv(out / "balance.csv", balance, ["method", "covariate", "smd_unweighted", "smd_weighted"])

    summary: dict[str, dict] = {}
    for m, t in zip(ok, report.tables):
        w = ok[m]
        entry = {"estimand": w.estimand.value, "method": w.method.value, "converged": w.converged,
                 "pbr_percent": t.pbr_percent, "mean_abs_smd_unweighted": t.mean_abs_unweighted,
                 "mean_abs_smd_weighted": t.mean_abs_weighted, "ess_treated": t.ess_treated,
                 "ess_control": t.ess_control}
        if d.outcome is not None:
            try:
                est = weighted_effect(d, w)
                entry.update(point=est.point, stderr=est.stderr,
                             ci_low=est.point - zcrit * est.stderr, ci_high=est.point + zcrit * est.stderr)
            except BalweightsError as exc:
                entry["error"] = exc.code
        summary[m] = entry

    labels = [COLUMN_LABELS[m] for m in ok]
    rows: list[list[object]] = []
    if d.outcome is not None:
        rows.append(["Point Estimate"] + [summary[m].get("point", float("nan")) for m in ok])
        rows.append(["Standard Error"] + [summary[m].get("stderr", float("nan")) for m in ok])
    rows.append(["Bias Reduction (%)"] + [summary[m]["pbr_percent"] for m in ok])
    rows.append(["ESS treated"] + [summary[m]["ess_treated"] for m in ok])
    rows.append(["ESS control"] + [summary[m]["ess_control"] for m in ok])
    print(format_table(rows, [""] + labels, digits=3))
    write_rows_csv(out / "summary.csv", [dict(zip(["row"] + labels, r)) for r in rows], ["row"] + labels)
    meta = {"settings": settings, "methods": summary,
            "failed": {m: w.code for m, w in weights.items() if isinstance(w, BalweightsError)}}
    if not args.deterministic:
        meta["generated_at"] = _dt.datetime.now().isoformat(timespec="seconds")
    write_json(out / "summary.json", meta)
    return EXIT_OK


def cmd_balance_report(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    data = _opt(args, config, "data")
    if not data:
        raise UsageError("--data is required")
    d = load_dataset_csv(data, _schema(args, config))
    weight_files = args.weights or config.get("weights") or []
    if weight_files:
        sets = []
        for f in weight_files:
            z, w = read_weights_csv(f)
            if len(w) != d.n or (z != d.treatment).any():
                raise DataError(f"{f} does not match the dataset's units", code="LENGTH_MISMATCH")
            sets.append(w)
        labels = [Path(f).stem for f in weight_files]
    else:
        methods = _methods(_opt(args, config, "methods"))
        ws = _compute_weights(d, methods, float(_opt(args, config, "lambda")), float(_opt(args, config, "clip")),
                              float(_opt(args, config, "tol")), int(_opt(args, config, "max-iter")),
                              float(_opt(args, config, "logit-tol")), False)
        for m, w in ws.items():
            if isinstance(w, BalweightsError):
                print(f"{m}: FAILED ({w.code}: {w})", file=sys.stderr)
        labels = [m for m, w in ws.items() if isinstance(w, WeightVector)]
        sets = [ws[m] for m in labels]
        if not sets:
            return EXIT_ESTIMATION
    print(_header("balance-report", {"data": data, "n": d.n, "k": d.k}, args.deterministic))
    report = balance_report(d, sets)
    header = ["covariate", "unweighted"] + labels
    rows = [[r.name, r.smd_unweighted] + [t.records[j].smd_weighted for t in report.tables]
            for j, r in enumerate(report.baseline.records)]
    rows.append(["mean |SMD|", report.baseline.mean_abs_unweighted] + [t.mean_abs_weighted for t in report.tables])
    rows.append(["PBR (%)", 0.0] + [t.pbr_percent for t in report.tables])
    print(format_table(rows, header, digits=3))
    out = _opt(args, config, "out")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        long = [{"weights": lab, "covariate": r.name, "smd_unweighted": r.smd_unweighted,
                 "smd_weighted": r.smd_weighted} for lab, t in zip(labels, report.tables) for r in t.records]
        write_rows_csv(Path(out) / "balance.csv", long, ["weights", "covariate", "smd_unweighted", "smd_weighted"])
        summ = [dict(s, weights=lab) for lab, s in zip(labels, report.summary())]
        write_rows_csv(Path(out) / "balance_summary.csv", summ,
                       ["weights", "mean_abs_smd_unweighted", "mean_abs_smd_weighted", "pbr_percent",
                        "ess_treated", "ess_control"])
    return EXIT_OK


REP_COLUMNS = ("rep", "method", "estimate", "true_att", "true_ato", "converged")


def _overlap_values(spec: str, dgp: DGP) -> tuple[list[float], bool]:
    if str(spec).lower() in ("grid", "paper-grid"):
        return list(DESIGN_GRIDS[dgp]), False
    try:
        vals = [float(v) for v in str(spec).split(",")]
    except ValueError:
        raise UsageError(f"--overlap must be a number, a comma list or 'grid', got {spec!r}") from None
    return vals, any(v not in DESIGN_GRIDS[dgp] for v in vals)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    dgp_s = _opt(args, config, "dgp")
    overlap = _opt(args, config, "overlap")
    if dgp_s is None or overlap is None:
        raise UsageError("--dgp and --overlap are required")
    try:
        dgp = DGP.parse(str(dgp_s))
    except ValueError:
        raise UsageError(f"unknown DGP {dgp_s!r}; choose from 1, 2, 3a, 3b") from None
    values, custom = _overlap_values(overlap, dgp)
    methods = [SIM_METHODS[m] for m in _methods(_opt(args, config, "methods"))]
    n, reps = int(_opt(args, config, "n")), int(_opt(args, config, "reps"))
    seed, lam = int(_opt(args, config, "seed")), float(_opt(args, config, "lambda"))
    clip, workers = float(_opt(args, config, "clip")), int(_opt(args, config, "workers"))
    out = Path(_opt(args, config, "out"))
    out.mkdir(parents=True, exist_ok=True)

    settings = {"dgp": dgp.value, "overlap": ",".join(f"{v:g}" for v in values), "n": n, "reps": reps,
                "seed": seed, "lambda": lam, "clip": clip, "balancing_tol": DEFAULT_TOL,
                "logit_tol": FitOptions().tol, "methods": ",".join(m.value for m in methods)}
    print(_header("simulate", settings, args.deterministic))

    results = []
    for v in values:
        cfg = ScenarioConfig(dgp, v, n=n, reps=reps, seed=seed, methods=tuple(methods), lam=lam,
                             epsilon_clip=clip, custom_grid=custom)
        res = run_scenario(cfg, workers=workers)
        results.append(res)
        rows = [{"rep": r.rep, "method": r.method.value, "estimate": r.estimate, "true_att": r.true_att,
                 "true_ato": r.true_ato, "converged": r.converged} for r in res.records]
        write_rows_csv(out / f"reps_{dgp.value}_{v:g}.csv", rows, REP_COLUMNS)
        for w in res.warnings:
            print(f"warning: {w}", file=sys.stderr)

    grid = grid_rows(results)
    columns = list(GRID_COLUMNS)
    if dgp not in (DGP.DGP3A, DGP.DGP3B):
        columns = [c for c in columns if c not in ("bias_vs_ato", "rmse_vs_ato")]
    write_rows_csv(out / "grid_summary.csv", grid, columns)
    meta: dict[str, Any] = {"settings": settings, "grid": [{c: r[c] for c in columns} for r in grid],
                            "truth": [{"overlap_param": r.config.overlap_param, "mean_true_att": r.mean_true_att,
                                       "mean_true_ato": r.mean_true_ato, "truth_gap_mean": r.truth_gap_mean,
                                       "truth_gap_mc_error": r.truth_gap_mc_error} for r in results]}
    if not args.deterministic:
        meta["generated_at"] = _dt.datetime.now().isoformat(timespec="seconds")
    write_json(out / "grid_summary.json", meta)
    print(format_table([[r[c] for c in columns] for r in grid], columns))
    if all(s.n_ok == 0 for r in results for s in r.summaries.values()):
        return EXIT_ESTIMATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="balweights", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", help="JSON file of option defaults; flags override it")
        sp.add_argument("--methods", help=f"comma list from {','.join(WEIGH_METHODS)} (default: all)")
        sp.add_argument("--lambda", dest="lambda", type=float, help=f"balancing penalty (default {DEFAULT_LAMBDA:g})")
        sp.add_argument("--clip", type=float, help=f"propensity clipping (default {DEFAULT_CLIP:g})")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--deterministic", action="store_true", help="omit timestamps from all output")

    def data_args(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--data", help="input CSV with a header row")
        sp.add_argument("--treatment", help="treatment column (0/1)")
        sp.add_argument("--outcome", help="outcome column (optional)")
        sp.add_argument("--covariates", help="comma list of covariate columns (default: all other numeric)")
        sp.add_argument("--tol", type=float, help="balancing KKT tolerance")
        sp.add_argument("--max-iter", type=int, help="balancing iteration cap")
        sp.add_argument("--logit-tol", type=float, help="logistic gradient tolerance")

    s = sub.add_parser("simulate", help="Monte Carlo comparison on a simulation design")
    common(s)
    s.add_argument("--dgp", help="1, 2, 3a or 3b")
    s.add_argument("--overlap", help="overlap parameter, comma list, or 'grid' for the design's standard grid")
    s.add_argument("--n", type=int, help="sample size per replication (default 1000)")
    s.add_argument("--reps", type=int, help="replications (default 1000)")
    s.add_argument("--seed", type=int, help="master seed (default 0)")
    s.add_argument("--workers", type=int, help="worker processes (default 1)")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("weigh", help="weights, effect estimates and balance for a CSV dataset")
    common(w)
    data_args(w)
    w.add_argument("--z", type=float, help="normal critical value for intervals (default 1.96)")
    w.add_argument("--trace", action="store_true", help="write the balancing solver trace CSV")
    w.set_defaults(func=cmd_weigh)

    b = sub.add_parser("balance-report", help="standardized differences before/after weighting")
    common(b)
    data_args(b)
    b.add_argument("--weights", nargs="+", help="weight CSVs written by 'weigh' (instead of --methods)")
    b.set_defaults(func=cmd_balance_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"balweights: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"balweights: data error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"balweights: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BalweightsError as exc:
        if exc.code == "INVALID_PARAMETER":
            print(f"balweights: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"balweights: estimation error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
