"""Command-line entry point: ``vsxc <subcommand> ...``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .ga import ga_optimize
from .kalman import KalmanConfig, kalman_smooth
from .periodic import build_lag_matrix, gbt_fit
from .residual.clusterlstm import fit_residual
from .series import TimeSeries, evaluate, load_csv, write_csv
from .synthetic import SyntheticSpec, generate_synthetic
from .trend import fit_trend, forecast_trend
from .vmd import VmdParams, from_components, vmd_decompose

log = logging.getLogger("vsxc")

# residual scales for the ablation's default data: AR(1) with regime-switching variance
ABLATION_REGIMES = (0.1, 0.3, 0.9)


def _dump(obj, path: str | None) -> None:
    text = json.dumps(pl._plain(obj), indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _config(args) -> pl.PipelineConfig:
    cfg = pl.PipelineConfig.load(args.config) if args.config else pl.PipelineConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _series(args, column: str = "value") -> TimeSeries:
    return load_csv(args.input, getattr(args, "column", column) or column)


def _read_components(prefix: str) -> list[TimeSeries]:
    return [load_csv(f"{prefix}_{c}.csv") for c in ("T", "S", "R")]


def cmd_filter(args) -> None:
    cfg = _config(args)
    kc = cfg.kalman
    if args.q is not None or args.r is not None:
        kc = KalmanConfig(args.q if args.q is not None else kc.process_var,
                          args.r if args.r is not None else kc.measure_var)
    s = _series(args)
    out = kalman_smooth(s, kc)
    write_csv(args.out, {"value": out.values, "raw": s.values}, s.timestamps)


def _vmd_params(args, cfg: pl.PipelineConfig) -> VmdParams:
    p = cfg.vmd
    over = {k: v for k, v in (("alpha", args.alpha), ("tau", args.tau), ("k_modes", args.k),
                              ("tol", args.tol), ("max_iter", args.max_iter)) if v is not None}
    return dataclasses.replace(p, **over)


def cmd_decompose(args) -> None:
    cfg = _config(args)
    s = _series(args)
    d = vmd_decompose(s, _vmd_params(args, cfg))
    for name, comp in zip("TSR", d.components()):
        write_csv(f"{args.out_prefix}_{name}.csv", {"value": comp}, s.timestamps)
    _dump(d.summary(), f"{args.out_prefix}_summary.json")


def cmd_tune(args) -> None:
    cfg = _config(args)
    ga = cfg.ga
    over = {"seed": cfg.seed}
    if args.pop is not None:
        over["pop_size"] = args.pop
    if args.gens is not None:
        over["generations"] = args.gens
    if args.alpha_min is not None or args.alpha_max is not None:
        over["alpha_bounds"] = (args.alpha_min if args.alpha_min is not None else ga.alpha_bounds[0],
                                args.alpha_max if args.alpha_max is not None else ga.alpha_bounds[1])
    if args.tau_min is not None or args.tau_max is not None:
        over["tau_bounds"] = (args.tau_min if args.tau_min is not None else ga.tau_bounds[0],
                              args.tau_max if args.tau_max is not None else ga.tau_bounds[1])
    ga = dataclasses.replace(ga, **over)
    res = ga_optimize(_series(args), ga, cfg.vmd)
    _dump(res.to_dict(), args.out)


def cmd_diagnose(args) -> None:
    cfg = _config(args)
    s = _series(args)
    if args.prefix:
        T, S, R = _read_components(args.prefix)
        d = from_components(s, T.values, S.values, R.values, np.full(3, np.nan))
    else:
        d = vmd_decompose(s, _vmd_params(args, cfg))
    report, warnings = pl.run_diagnostics(d, s, args.lag)
    report["warnings"] = warnings
    _dump(report, args.out)


def cmd_fit_trend(args) -> None:
    cfg = _config(args)
    tc = cfg.trend
    over = {k: v for k, v in (("capacity", args.capacity), ("laplace_scale", args.laplace_scale),
                              ("cp_range", args.cp_range), ("alpha", args.alpha),
                              ("beta", args.beta), ("degree", args.degree)) if v is not None}
    tc = dataclasses.replace(tc, **over)
    rep = fit_trend(_series(args), tc)
    rep.model.save(args.out)
    summary = {"changepoints": rep.n_changepoints, "train_rmse": rep.train_rmse,
               "train_mape": rep.train_mape, "epochs": rep.epochs, "converged": rep.converged}
    if args.horizon:
        summary["forecast"] = forecast_trend(rep.model, args.horizon).tolist()
    _dump(summary, None)


def cmd_fit_periodic(args) -> None:
    cfg = _config(args)
    gc = cfg.gbt
    over = {k: v for k, v in (("n_rounds", args.rounds), ("learning_rate", args.eta),
                              ("max_depth", args.depth), ("reg_lambda", args.reg_lambda),
                              ("gamma", args.gamma)) if v is not None}
    gc = dataclasses.replace(gc, **over)
    y = _series(args)
    T, S, R = _read_components(args.prefix)
    d = from_components(y, T.values, S.values, R.values, np.full(3, np.nan))
    model = gbt_fit(build_lag_matrix(d, y, args.lag), gc)
    model.save(args.out)
    _dump({"trees": model.n_rounds, "train_loss": model.train_loss[-1]}, None)


def cmd_fit_residual(args) -> None:
    cfg = _config(args)
    rc = cfg.residual
    over = {k: v for k, v in (("k", args.k), ("window", args.window),
                              ("epochs", args.epochs)) if v is not None}
    rc = dataclasses.replace(rc, **over)
    model, gate = fit_residual(_series(args), rc, cfg.seed, force=args.force)
    model.save(args.out)
    _dump({"ljung_box": gate.to_dict(), "clusters": model.K,
           "final_losses": [l[-1] for l in model.losses]}, None)


def _pipeline_cfg(args) -> pl.PipelineConfig:
    cfg = _config(args)
    over = {}
    for flag, key in (("skip_ga", "skip_ga"), ("skip_kalman", "skip_kalman"),
                      ("unit_variance", "unit_variance")):
        if getattr(args, flag, False):
            over[key] = True
    for attr in ("split_ratio", "split_index"):
        if getattr(args, attr, None) is not None:
            over[attr] = getattr(args, attr)
    if getattr(args, "periodic", None):
        over["periodic_model"] = args.periodic
    if getattr(args, "residual", None):
        over["residual_model"] = args.residual
    return dataclasses.replace(cfg, **over)


def cmd_predict(args) -> None:
    cfg = _pipeline_cfg(args)
    s = _series(args)
    if args.rolling_folds:
        _dump({"rolling_origin": pl.rolling_origin(s, cfg, args.rolling_folds)},
              f"{args.out_prefix}_rolling.json")
        return
    rep = pl.run_pipeline(s, cfg)
    rep.write_predictions(f"{args.out_prefix}_predictions.csv")
    _dump(rep.to_dict(), f"{args.out_prefix}_report.json")
    print(f"total RMSE {rep.total.rmse:.6g}  MAPE {rep.total.mape:.6g}  "
          f"persistence RMSE {rep.baseline.rmse:.6g}", file=sys.stderr)


def cmd_evaluate(args) -> None:
    pred = load_csv(args.input, args.pred_column).values
    target = load_csv(args.target or args.input, args.target_column).values
    _dump(evaluate(pred, target).to_dict(), args.out)


def _spec_from_args(args, regimes=None) -> SyntheticSpec:
    cfg_seed = args.seed if args.seed is not None else 0
    spec = SyntheticSpec(length=args.length, seed=cfg_seed,
                         regime_sigmas=regimes, noise_sigma=args.noise)
    return spec


def cmd_synth(args) -> None:
    regimes = tuple(args.regime_sigmas) if args.regime_sigmas else None
    data = generate_synthetic(_spec_from_args(args, regimes))
    write_csv(args.out, {"value": data.series.values, "trend": data.trend,
                         "periodic": data.periodic, "residual": data.residual,
                         "noise": data.noise}, data.series.timestamps)


def cmd_ablate(args) -> None:
    cfg = _pipeline_cfg(args)
    if not args.tune:
        cfg = dataclasses.replace(cfg, skip_ga=True)
    if args.input:
        series = _series(args)
        source = {"input": str(args.input)}
    else:
        spec = _spec_from_args(args, ABLATION_REGIMES)
        series = generate_synthetic(spec).series
        cfg = dataclasses.replace(cfg, unit_variance=True)
        source = {"synthetic": spec.to_dict()}
    result = pl.run_ablation(series, cfg)
    report = pl.ablation_report(result, cfg)
    report["data"] = source
    _dump(report, args.out)
    print(pl.format_table(result["table"]), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vsxc", description="Decomposition-based forecasting toolkit")
    p.add_argument("--config", help="JSON pipeline config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    # the same globals are accepted after the subcommand too
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    def inp(sp, required=True):
        sp.add_argument("--input", required=required)
        sp.add_argument("--column", default="value")

    def vmd_flags(sp):
        for f, t in (("--alpha", float), ("--tau", float), ("--k", int), ("--tol", float),
                     ("--max-iter", int)):
            sp.add_argument(f, type=t)

    sp = add("filter", cmd_filter, "Kalman-smooth a series")
    inp(sp)
    sp.add_argument("--q", type=float)
    sp.add_argument("--r", type=float)
    sp.add_argument("--out", required=True)

    sp = add("decompose", cmd_decompose, "VMD into trend / periodic / residual")
    inp(sp)
    vmd_flags(sp)
    sp.add_argument("--out-prefix", required=True)

    sp = add("tune", cmd_tune, "GA search over VMD (alpha, tau)")
    inp(sp)
    sp.add_argument("--pop", type=int)
    sp.add_argument("--gens", type=int)
    for f in ("--alpha-min", "--alpha-max", "--tau-min", "--tau-max"):
        sp.add_argument(f, type=float)
    sp.add_argument("--out")

    sp = add("diagnose", cmd_diagnose, "statistical checks on the components")
    inp(sp)
    vmd_flags(sp)
    sp.add_argument("--prefix", help="read <prefix>_T/_S/_R.csv instead of decomposing")
    sp.add_argument("--lag", type=int, default=48)
    sp.add_argument("--out")

    sp = add("fit-trend", cmd_fit_trend, "fit the SegSigmoid trend model")
    inp(sp)
    for f in ("--capacity", "--laplace-scale", "--cp-range", "--alpha", "--beta"):
        sp.add_argument(f, type=float)
    sp.add_argument("--degree", type=int)
    sp.add_argument("--horizon", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("fit-periodic", cmd_fit_periodic, "fit the boosted-tree periodic model")
    inp(sp)
    sp.add_argument("--prefix", required=True, help="component CSVs <prefix>_T/_S/_R.csv")
    sp.add_argument("--lag", type=int, default=48)
    sp.add_argument("--rounds", type=int)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--lambda", dest="reg_lambda", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--out", required=True)

    sp = add("fit-residual", cmd_fit_residual, "fit the clustered LSTM residual model")
    inp(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--window", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--force", action="store_true", help="train even if Ljung-Box finds white noise")
    sp.add_argument("--out", required=True)

    def pipe_flags(sp):
        sp.add_argument("--skip-ga", action="store_true")
        sp.add_argument("--skip-kalman", action="store_true")
        sp.add_argument("--unit-variance", action="store_true")
        sp.add_argument("--split-ratio", type=float)
        sp.add_argument("--split-index", type=int)
        sp.add_argument("--periodic", choices=pl.PERIODIC_MODELS)
        sp.add_argument("--residual", choices=pl.RESIDUAL_MODELS)

    sp = add("predict", cmd_predict, "run the full pipeline and forecast the test span")
    inp(sp)
    pipe_flags(sp)
    sp.add_argument("--rolling-folds", type=int, default=0)
    sp.add_argument("--out-prefix", required=True)

    sp = add("evaluate", cmd_evaluate, "RMSE / MAPE between two columns")
    sp.add_argument("--input", required=True)
    sp.add_argument("--target", help="CSV holding the target column (default: --input)")
    sp.add_argument("--pred-column", default="total")
    sp.add_argument("--target-column", default="target")
    sp.add_argument("--out")

    sp = add("synth", cmd_synth, "write a seeded synthetic series")
    sp.add_argument("--length", type=int, default=2426)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--regime-sigmas", type=float, nargs="+")
    sp.add_argument("--out", required=True)

    sp = add("ablate", cmd_ablate, "2x2 grid: {gbt, persistence} x {clusterlstm, single-lstm}")
    inp(sp, required=False)
    pipe_flags(sp)
    sp.add_argument("--tune", action="store_true", help="run the GA instead of fixed VMD params")
    sp.add_argument("--length", type=int, default=2426)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except pl.PipelineError as exc:
        print(f"vsxc {args.command}: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"vsxc {args.command}: stage {args.command} failed: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
