"""Command-line interface.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure (including a rerun whose outputs differ from its manifest).
"""
from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (
    METRICS, WORKERS_ENV, BenchmarkConfig, default_workers, run_benchmark, summarize,
)
from .core import DomainError, GompertzBaseline
from .icm import IcmConfig
from .io import (
    FORMAT_VERSION, SchemaError, load_model, read_covariates, read_dataset, read_json,
    save_model, sha256_file, write_csv, write_dataset, write_json, write_metrics_csv,
    write_path_csv,
)
from .metrics import (
    BrierConfig, brier_curve, ibs, ibs_limits, km_censoring, l2_hazard_error, r2_risk,
    selection_tp_tn,
)
from .risknet import NetConfig
from .simgen import MODELS, InspectionScheme, SimConfig, simulate_study
from .trainer import (
    FitConfig, NumericalError, PathConfig, fit, fit_path, predict_survival, relative_risk,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
logger = logging.getLogger("icnet")


class UsageError(Exception):
    pass


def _config(factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return vals


def _name_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_fit_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, default=50, help="gradient epochs per outer iteration (B)")
    g.add_argument("--outer", type=int, default=20, help="outer iterations (K)")
    g.add_argument("--alpha", type=float, default=1e-2, help="learning rate")
    g.add_argument("--M", type=float, default=10.0, help="hierarchy multiplier")
    g.add_argument("--hidden", type=_int_list, default=[10], help="hidden widths, e.g. 10 or 16,8")
    g.add_argument("--init-scale", type=float, default=1.0)
    g.add_argument("--icm-tol", type=float, default=1e-7)
    g.add_argument("--seed", type=int, default=0)


def _add_path_flags(p):
    g = p.add_argument_group("path")
    g.add_argument("--start-factor", type=float, default=1e-2,
                   help="first lambda as a fraction of the smallest all-zero lambda")
    g.add_argument("--multiplier", type=float, default=1.05)
    g.add_argument("--val-fraction", type=float, default=0.2)
    g.add_argument("--max-path-length", type=int, default=400)
    g.add_argument("--weighting", choices=("time", "uniform"), default="time")
    g.add_argument("--path-epochs", type=int, default=None,
                   help="epochs per outer iteration for warm-started path points")
    g.add_argument("--path-outer", type=int, default=None,
                   help="outer iterations for warm-started path points")


def _fit_config(args, lam=0.0) -> FitConfig:
    net = _config(NetConfig, hidden_widths=tuple(args.hidden), init_seed=args.seed,
                  init_scale=args.init_scale)
    icm = _config(IcmConfig, tol=args.icm_tol)
    return _config(FitConfig, epochs_B=args.epochs, outer_iters_K=args.outer,
                   learning_rate_alpha=args.alpha, hierarchy_M=args.M, penalty_lambda=lam,
                   net=net, icm=icm, seed=args.seed)


def _path_config(args, cfg: FitConfig, default_step: FitConfig | None = None) -> PathConfig:
    step = default_step
    if args.path_epochs is not None or args.path_outer is not None:
        base = default_step or cfg
        step = _config(replace, base,
                       epochs_B=base.epochs_B if args.path_epochs is None else args.path_epochs,
                       outer_iters_K=base.outer_iters_K if args.path_outer is None else args.path_outer)
    return _config(PathConfig, lambda_start_factor=args.start_factor, multiplier=args.multiplier,
                   val_fraction=args.val_fraction, max_path_length=args.max_path_length,
                   weighting=args.weighting, path_cfg=step)


def _sidecar(path, suffix):
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


# commands: each returns (inputs, outputs, config snapshot)

def cmd_simulate(args):
    scheme = _config(InspectionScheme, count=args.inspections, tau=args.tau)
    baseline = _config(GompertzBaseline, gamma=args.gompertz_gamma, lam=args.gompertz_lambda)
    cfg = _config(SimConfig, n=args.n, d=args.d, model=args.model, baseline=baseline,
                  inspections=scheme, seed=args.seed)
    data, truth = simulate_study(cfg)
    truth_path = args.truth or _sidecar(args.out, ".truth.json")
    write_dataset(args.out, data)
    doc = {"kind": "truth", "format_version": FORMAT_VERSION, "config": cfg.to_dict()}
    doc.update(truth.to_dict(data.feature_names))
    write_json(truth_path, doc)
    return [], {"data": args.out, "truth": truth_path}, cfg.to_dict()


def cmd_fit(args):
    data = read_dataset(args.data, args.allow_columns)
    cfg = _fit_config(args, args.penalty)
    model = fit(data, cfg)
    save_model(args.out, model, cfg.to_dict())
    logger.info("fitted %d of %d features, loglik %.6g", model.n_active, data.d, model.final_loglik)
    return [args.data], {"model": args.out}, cfg.to_dict()


def cmd_path(args):
    data = read_dataset(args.data, args.allow_columns)
    cfg = _fit_config(args)
    pcfg = _path_config(args, cfg)
    result = fit_path(data, cfg, pcfg)
    best = result.best
    path_csv = args.path_csv or _sidecar(args.out, ".path.csv")
    save_model(args.out, best, replace(cfg, penalty_lambda=best.penalty_lambda).to_dict())
    write_path_csv(path_csv, result)
    logger.info("best lambda %.6g with %d active features (val IBS %.6g)",
                result.lambdas[result.best_index], best.n_active, result.val_ibs[result.best_index])
    snapshot = {"fit": cfg.to_dict(), "path": _path_snapshot(pcfg)}
    return [args.data], {"model": args.out, "path": path_csv}, snapshot


def _path_snapshot(p: PathConfig) -> dict:
    return {"lambda_start_factor": p.lambda_start_factor, "multiplier": p.multiplier,
            "val_fraction": p.val_fraction, "max_path_length": p.max_path_length,
            "weighting": p.weighting, "ibs_grid_n": p.ibs_grid_n,
            "path_cfg": p.path_cfg.to_dict() if p.path_cfg else None}


def _time_grid(args) -> np.ndarray:
    if args.times is not None:
        try:
            t = np.array([float(x) for x in args.times.split(",") if x.strip()])
        except ValueError:
            raise UsageError(f"--times must be comma-separated numbers, got {args.times!r}") from None
    elif args.grid is not None:
        start, stop, num = args.grid
        if num != int(num) or num < 0:
            raise UsageError("--grid NUM must be a nonnegative integer")
        t = np.linspace(start, stop, int(num))
    else:
        raise UsageError("give --times or --grid")
    if t.size == 0:
        raise UsageError("time grid is empty")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise UsageError("times must be finite and nonnegative")
    return t


def cmd_predict(args):
    times = _time_grid(args)
    model = load_model(args.model)
    ids, Z = read_covariates(args.covariates, model.feature_names)
    S = predict_survival(model, Z, times)
    rows = ((ids[i], times[k], S[i, k]) for i in range(len(ids)) for k in range(times.size))
    write_csv(args.out, ("id", "t", "S"), rows)
    return [args.model, args.covariates], {"curves": args.out}, {"times": times.tolist()}


def cmd_evaluate(args):
    model = load_model(args.model)
    data = read_dataset(args.data, args.allow_columns)
    if sorted(data.feature_names) != sorted(model.feature_names):
        raise SchemaError("data covariates do not match the model's features", row=1)
    order = [data.feature_names.index(name) for name in model.feature_names]
    data = data.with_covariates(data.Z[:, order])
    data.feature_names = list(model.feature_names)
    inputs = [args.model, args.data]
    cens = data
    if args.censoring_data:
        cens = read_dataset(args.censoring_data, args.allow_columns)
        inputs.append(args.censoring_data)
    t1, t2 = ibs_limits(data)
    G = km_censoring(cens)
    metrics = {}
    for weighting in ("time", "uniform"):
        bcfg = BrierConfig(t1, t2, weighting)
        grid = bcfg.grid()
        S = predict_survival(model, data.Z, grid)
        metrics[f"ibs_{weighting}"] = ibs(grid, brier_curve(data, S, G, grid), bcfg)
    metrics["n_active"] = model.n_active
    if args.truth:
        truth = read_json(args.truth, "truth")
        inputs.append(args.truth)
        risks = np.asarray(truth["risks"], dtype=float)
        if risks.size != data.n:
            raise SchemaError("truth file does not match the data rows")
        base = GompertzBaseline(**truth["baseline"])
        t_hi = float(base.inverse_cumhaz(-np.log(args.l2_survival_floor)))
        metrics["l2"] = l2_hazard_error(model.baseline, base, 0.0, t_hi)
        metrics["r2"] = r2_risk(relative_risk(model, data.Z), risks)
        index = {name: j for j, name in enumerate(model.feature_names)}
        unknown = [s for s in truth["support"] if s not in index]
        if unknown:
            raise SchemaError(f"truth support names unknown features: {', '.join(unknown)}")
        support = [index[s] for s in truth["support"]]
        metrics["tp"], metrics["tn"] = selection_tp_tn(model.selected_features, support, data.d)
    run_id = args.run_id or Path(args.model).stem
    write_metrics_csv(args.out, run_id, model.penalty_lambda, metrics)
    return inputs, {"metrics": args.out}, {"run_id": run_id, "ibs_limits": [t1, t2]}


BENCH_COLUMNS = ("row_type", "model", "n", "replicate", "seed", "lambda", "n_active",
                 "path_length", *METRICS)


def cmd_benchmark(args):
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    workers = args.workers or default_workers()
    fit_cfg = _fit_config(args)
    base = BenchmarkConfig()
    pcfg = _path_config(args, fit_cfg, default_step=base.path.path_cfg)
    inspections = _config(InspectionScheme, count=args.inspections)
    rows_out, snapshot = [], []
    for n in args.n:
        cfg = _config(BenchmarkConfig, model=args.model, n=n, d=args.d,
                      replicates=args.replicates, seed=args.seed, inspections=inspections,
                      fit=fit_cfg, path=pcfg)
        _config(SimConfig, n=n, d=args.d, model=args.model)
        rows = run_benchmark(cfg, workers)
        for r in rows:
            rows_out.append(["replicate", r["model"], r["n"], r["replicate"], r["seed"], r["lambda"],
                             r["n_active"], r["path_length"], *(r[m] for m in METRICS)])
        summ = summarize(rows)
        for stat in ("mean", "sd"):
            rows_out.append([stat, args.model, n, "", "", "", "", "", *(summ[m][stat] for m in METRICS)])
        snapshot.append({"n": n, "fit": fit_cfg.to_dict(), "path": _path_snapshot(pcfg)})
    write_csv(args.out, BENCH_COLUMNS, rows_out)
    return [], {"results": args.out}, {"runs": snapshot, "workers_env": WORKERS_ENV}


def cmd_rerun(args):
    doc = read_json(args.manifest, "manifest")
    for path, digest in doc["inputs"].items():
        if not Path(path).exists() or sha256_file(path) != digest:
            raise SchemaError(f"input {path} is missing or changed since the recorded run")
    parser = build_parser()
    rec = parser.parse_args(doc["argv"])
    outputs = doc["outputs"]
    if args.output_dir:
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for role, entry in outputs.items():
            setattr(rec, _OUTPUT_ARGS[rec.command][role], str(out_dir / Path(entry["path"]).name))
    _, new_outputs, _ = COMMANDS[rec.command](rec)
    differ = [role for role, entry in outputs.items()
              if sha256_file(new_outputs[role]) != entry["sha256"]]
    for role in sorted(new_outputs):
        status = "differs" if role in differ else "identical"
        print(f"{role}: {new_outputs[role]} {status}")
    if differ:
        raise NumericalError(f"rerun outputs differ from the manifest: {', '.join(differ)}")
    return [], {}, None


COMMANDS = {
    "simulate": cmd_simulate, "fit": cmd_fit, "path": cmd_path, "predict": cmd_predict,
    "evaluate": cmd_evaluate, "benchmark": cmd_benchmark, "rerun": cmd_rerun,
}
# which argparse destination holds each output role
_OUTPUT_ARGS = {
    "simulate": {"data": "out", "truth": "truth"}, "fit": {"model": "out"},
    "path": {"model": "out", "path": "path_csv"}, "predict": {"curves": "out"},
    "evaluate": {"metrics": "out"}, "benchmark": {"results": "out"},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icnet",
        description="Sparse residual Cox networks for interval-censored survival data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def manifest_flag(p):
        p.add_argument("--manifest", help="where to write the run manifest "
                                          "(default: next to the main output)")

    p = sub.add_parser("simulate", help="draw a synthetic study")
    p.add_argument("--model", choices=MODELS, default="m1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inspections", type=int, default=10)
    p.add_argument("--tau", type=float, default=None, help="inspection horizon (default: pilot 0.95 quantile)")
    p.add_argument("--gompertz-gamma", type=float, default=5.0)
    p.add_argument("--gompertz-lambda", type=float, default=1.0)
    p.add_argument("--out", required=True, help="data CSV")
    p.add_argument("--truth", help="truth JSON (default: <out stem>.truth.json)")
    manifest_flag(p)

    for name, help_text in (("fit", "fit one model at a fixed lambda"),
                            ("path", "run the lambda path and keep the best model")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", required=True)
        p.add_argument("--allow-columns", type=_name_list, default=[],
                       help="extra covariate column names to accept")
        _add_fit_flags(p)
        if name == "fit":
            p.add_argument("--lambda", dest="penalty", type=float, default=0.0)
        else:
            _add_path_flags(p)
            p.add_argument("--path-csv", help="per-lambda diagnostics (default: <out stem>.path.csv)")
        p.add_argument("--out", required=True, help="model JSON")
        manifest_flag(p)

    p = sub.add_parser("predict", help="survival curves for covariate rows")
    p.add_argument("--model", required=True)
    p.add_argument("--covariates", required=True, help="CSV with the model's covariate columns")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--times", help="comma-separated time points")
    g.add_argument("--grid", nargs=3, type=float, metavar=("START", "STOP", "NUM"))
    p.add_argument("--out", required=True)
    manifest_flag(p)

    p = sub.add_parser("evaluate", help="metrics of a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--allow-columns", type=_name_list, default=[])
    p.add_argument("--censoring-data", help="data used for the censoring weights (default: --data)")
    p.add_argument("--truth", help="truth JSON written by simulate, for L2/R2/TP/TN")
    p.add_argument("--l2-survival-floor", type=float, default=0.05)
    p.add_argument("--run-id")
    p.add_argument("--out", required=True)
    manifest_flag(p)

    p = sub.add_parser("benchmark", help="replicated simulation study")
    p.add_argument("--model", choices=MODELS, default="m1")
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--replicates", type=int, default=30)
    p.add_argument("--inspections", type=int, default=10)
    p.add_argument("--workers", type=int, default=None,
                   help=f"parallel replicates (default: ${WORKERS_ENV} or 1)")
    _add_fit_flags(p)
    _add_path_flags(p)
    p.add_argument("--out", required=True)
    manifest_flag(p)

    p = sub.add_parser("rerun", help="repeat a recorded run and compare output hashes")
    p.add_argument("manifest")
    p.add_argument("--output-dir", help="write outputs here instead of the recorded paths")
    return parser


def _write_manifest(args, argv, inputs, outputs, snapshot, elapsed):
    primary = next(iter(outputs.values()))
    path = args.manifest or _sidecar(primary, ".manifest.json")
    doc = {
        "kind": "manifest",
        "format_version": FORMAT_VERSION,
        "command": args.command,
        "argv": list(argv),
        "config": snapshot,
        "seed": getattr(args, "seed", None),
        "inputs": {str(Path(p).resolve()): sha256_file(p) for p in inputs},
        "outputs": {role: {"path": str(Path(p).resolve()), "sha256": sha256_file(p)}
                    for role, p in outputs.items()},
        "wall_clock_seconds": elapsed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    write_json(path, doc)


_FILE_FLAGS = {
    "simulate": {"--out", "--truth", "--manifest"},
    "fit": {"--data", "--out", "--manifest"},
    "path": {"--data", "--out", "--path-csv", "--manifest"},
    "predict": {"--model", "--covariates", "--out", "--manifest"},
    "evaluate": {"--model", "--data", "--censoring-data", "--truth", "--out", "--manifest"},
    "benchmark": {"--out", "--manifest"},
}


def _absolutize(argv, command):
    """Recorded argv with file arguments made absolute, so reruns work from any directory."""
    out = list(argv)
    flags = _FILE_FLAGS[command]
    for i, tok in enumerate(out):
        flag, eq, value = tok.partition("=")
        if eq and flag in flags:
            out[i] = f"{flag}={Path(value).resolve()}"
        elif tok in flags and i + 1 < len(out):
            out[i + 1] = str(Path(out[i + 1]).resolve())
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    start = time.perf_counter()
    try:
        inputs, outputs, snapshot = COMMANDS[args.command](args)
        if args.command != "rerun":
            _write_manifest(args, _absolutize(argv, args.command), inputs, outputs, snapshot,
                            time.perf_counter() - start)
    except UsageError as exc:
        print(f"icnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"icnet {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, OSError) as exc:
        print(f"icnet {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
