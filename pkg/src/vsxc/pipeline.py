"""End-to-end flow: filter, split, decompose, diagnose, fit one model per component, recompose."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .ga import GaConfig, GaResult, ga_optimize
from .kalman import KalmanConfig, kalman_smooth
from .periodic import GbtConfig, PersistenceModel, build_lag_matrix, forecast_periodic, gbt_fit
from .residual.clusterlstm import ResidualConfig, clusterlstm_predict, clusterlstm_train, make_windows
from .series import MetricsReport, TimeSeries, evaluate, split, write_csv
from .stattests import acf, acf_cutoff, granger_test, ljung_box, mann_kendall
from .stattests.ols import RankDeficientError
from .trend import TrendConfig, fit_trend, forecast_trend
from .vmd import Decomposition, VmdParams, vmd_decompose

log = logging.getLogger(__name__)

PERIODIC_MODELS = ("gbt", "persistence")
RESIDUAL_MODELS = ("clusterlstm", "single-lstm", "zero")


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it and the message carries the cause."""

    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@dataclass(frozen=True)
class PipelineConfig:
    kalman: KalmanConfig = KalmanConfig()
    vmd: VmdParams = VmdParams()
    ga: GaConfig = GaConfig()
    trend: TrendConfig = TrendConfig()
    gbt: GbtConfig = GbtConfig()
    residual: ResidualConfig = ResidualConfig()
    split_ratio: float = 0.9
    split_index: int | None = None
    seed: int = 0
    skip_ga: bool = False
    skip_kalman: bool = False
    unit_variance: bool = False
    lag: int = 48
    trend_model: str = "segsigmoid"
    periodic_model: str = "gbt"
    residual_model: str = "clusterlstm"

    def __post_init__(self):
        if self.trend_model != "segsigmoid":
            raise ValueError(f"unknown trend model {self.trend_model!r}")
        if self.periodic_model not in PERIODIC_MODELS:
            raise ValueError(f"periodic model must be one of {PERIODIC_MODELS}")
        if self.residual_model not in RESIDUAL_MODELS:
            raise ValueError(f"residual model must be one of {RESIDUAL_MODELS}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie in (0, 1)")

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        nested = {"kalman": KalmanConfig, "vmd": VmdParams, "ga": GaConfig,
                  "trend": TrendConfig, "gbt": GbtConfig, "residual": ResidualConfig}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            if k in nested and isinstance(v, dict):
                sub = nested[k]
                sub_known = {f.name for f in dataclasses.fields(sub)}
                bad = set(v) - sub_known
                if bad:
                    raise ValueError(f"unknown keys in {k}: {sorted(bad)}")
                kw[k] = sub(**{kk: tuple(vv) if isinstance(vv, list) else vv
                               for kk, vv in v.items()})
            else:
                kw[k] = v
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _plain(obj):
    """Make dataclass dumps JSON-friendly (tuples to lists, numpy scalars to floats)."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


@dataclass(eq=False)
class Prepared:
    """Everything upstream of the component models, shared by every ablation cell."""

    scale: float
    filtered: TimeSeries
    train: TimeSeries
    test: TimeSeries
    vmd_params: VmdParams
    decomp: Decomposition
    reference: Decomposition
    ga: GaResult | None
    diagnostics: dict
    warnings: list
    runtime: dict


@dataclass(eq=False)
class ForecastReport:
    components: dict
    total: MetricsReport
    baseline: MetricsReport
    predictions: dict
    config: dict
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    runtime: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def improvement(self) -> float:
        """Relative RMSE reduction against the persistence baseline."""
        if self.baseline.rmse == 0:
            return 0.0
        return 1.0 - self.total.rmse / self.baseline.rmse

    def to_dict(self, runtime: bool = True) -> dict:
        d = {
            "components": {k: v.to_dict() for k, v in self.components.items()},
            "total": self.total.to_dict(),
            "baseline_persistence": self.baseline.to_dict(),
            "improvement_vs_baseline": self.improvement,
            "diagnostics": self.diagnostics,
            "warnings": list(self.warnings),
            "config": self.config,
            **self.extras,
        }
        if runtime:
            d["runtime_s"] = self.runtime
        return _plain(d)

    def write_predictions(self, path) -> None:
        write_csv(path, self.predictions)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage tag
        raise PipelineError(name, f"{type(exc).__name__}: {exc}") from exc


def _warn(warnings: list, msg: str) -> None:
    log.warning(msg)
    warnings.append(msg)


def run_diagnostics(decomp: Decomposition, y, lag: int = 48) -> tuple[dict, list]:
    """Mann-Kendall on T, ACF and Granger (T, R, y -> S) on S, Ljung-Box on R."""
    T, S, R = decomp.components()
    yv = np.asarray(getattr(y, "values", y), dtype=np.float64)
    warnings: list = []
    out: dict = {}
    mk = mann_kendall(T)
    out["mann_kendall_T"] = mk.to_dict()
    if not mk.reject_at_05:
        _warn(warnings, f"Mann-Kendall finds no monotone trend in T (p={mk.p_value:.3g})")
    max_lag = min(lag, S.size - 1)
    rho = acf(S, max_lag)
    out["acf_S"] = {"lags": max_lag, "values": rho.tolist(), "cutoff": acf_cutoff(rho, S.size)}
    granger = {}
    for name, cause in (("y", yv), ("T", T), ("R", R)):
        key = f"{name}->S"
        try:
            res = granger_test(S, cause, lag)
        except (RankDeficientError, ValueError) as exc:
            granger[key] = {"error": str(exc)}
            _warn(warnings, f"Granger {key} at lag {lag} not computed: {exc}")
            continue
        granger[key] = res.to_dict()
        if not res.reject_at_05:
            _warn(warnings, f"Granger: {name} does not help predict S at lag {lag} "
                            f"(p={res.p_value:.3g})")
    out["granger_S"] = granger
    lb = ljung_box(R, lag=1)
    out["ljung_box_R"] = lb.to_dict()
    if not lb.reject_at_05:
        _warn(warnings, f"Ljung-Box: R looks like white noise (p={lb.p_value:.3g}); "
                        "the residual model has nothing to learn")
    return out, warnings


def prepare(series: TimeSeries, cfg: PipelineConfig) -> Prepared:
    runtime: dict = {}
    t0 = time.perf_counter()
    n_train = cfg.split_index if cfg.split_index is not None else int(
        np.floor(cfg.split_ratio * len(series)))
    scale = 1.0
    if cfg.unit_variance:
        sd = float(np.std(series.values[:n_train]))
        scale = sd if sd > 0 else 1.0
    scaled = series.with_values(series.values / scale) if scale != 1.0 else series
    filtered = scaled if cfg.skip_kalman else _stage("filter", kalman_smooth, scaled, cfg.kalman)
    runtime["filter"] = time.perf_counter() - t0

    parts = _stage("split", split, filtered, cfg.split_ratio, cfg.split_index)
    train, test = parts.train, parts.test
    if len(test) < 1:
        raise PipelineError("split", "empty test set")

    t0 = time.perf_counter()
    ga_res = None
    params = cfg.vmd
    if not cfg.skip_ga:
        ga_cfg = dataclasses.replace(cfg.ga, seed=cfg.seed)
        ga_res = _stage("tune", ga_optimize, train, ga_cfg, cfg.vmd)
        params = dataclasses.replace(cfg.vmd, alpha=ga_res.best_alpha, tau=ga_res.best_tau)
    runtime["tune"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    decomp = _stage("decompose", vmd_decompose, train, params)
    # evaluation targets for the component forecasts: the same decomposition of
    # the whole filtered series (used only for scoring, never as model input)
    reference = _stage("decompose", vmd_decompose, filtered, params)
    runtime["decompose"] = time.perf_counter() - t0

    warnings: list = []
    if not decomp.converged:
        _warn(warnings, f"VMD hit max_iter={params.max_iter} without converging")
    t0 = time.perf_counter()
    diagnostics, w = _stage("diagnose", run_diagnostics, decomp, train, cfg.lag)
    warnings += w
    runtime["diagnose"] = time.perf_counter() - t0
    return Prepared(scale, filtered, train, test, params, decomp, reference, ga_res,
                    diagnostics, warnings, runtime)


def _fit_trend(prep: Prepared, cfg: PipelineConfig):
    rep = _stage("fit-trend", fit_trend, prep.decomp.trend, cfg.trend)
    if not rep.converged:
        _warn(prep.warnings, f"SegSigmoid fit stopped at max_epochs={cfg.trend.max_epochs}")
    return rep, forecast_trend(rep.model, len(prep.test))


def _fit_residual(prep: Prepared, cfg: PipelineConfig, kind: str):
    h = len(prep.test)
    if kind == "zero":
        return None, np.zeros(h)
    K = cfg.residual.k if kind == "clusterlstm" else 1
    R = prep.decomp.residual.values
    windows = _stage("fit-residual", make_windows, R, cfg.residual.window)
    model = _stage("fit-residual", clusterlstm_train, windows, K, cfg.residual, cfg.seed)
    return model, _stage("fit-residual", clusterlstm_predict, model, R, h)


def _fit_periodic(prep: Prepared, cfg: PipelineConfig, kind: str):
    if kind == "persistence":
        return PersistenceModel(cfg.lag)
    lags = _stage("fit-periodic", build_lag_matrix, prep.decomp, prep.train, cfg.lag)
    return _stage("fit-periodic", gbt_fit, lags, cfg.gbt)


def _forecast_periodic(prep: Prepared, model, trend_hat, resid_hat, lag: int):
    T, S, R = prep.decomp.components()
    return _stage("predict", forecast_periodic, model, T, S, R, prep.train.values,
                  len(prep.test), trend_hat, resid_hat, lag)


def _report(prep: Prepared, cfg: PipelineConfig, trend_hat, periodic_hat, resid_hat,
            runtime: dict, extras: dict | None = None) -> ForecastReport:
    n_tr = len(prep.train)
    target = prep.test.values
    total = trend_hat + periodic_hat + resid_hat
    refT, refS, refR = (c[n_tr:] for c in prep.reference.components())
    comps = {
        "trend": evaluate(trend_hat, refT),
        "periodic": evaluate(periodic_hat, refS),
        "residual": evaluate(resid_hat, refR),
    }
    baseline = evaluate(np.full(target.size, prep.train.values[-1]), target)
    preds = {
        "target": target, "trend": trend_hat, "periodic": periodic_hat, "residual": resid_hat,
        "total": total, "trend_ref": refT, "periodic_ref": refS, "residual_ref": refR,
    }
    ex = {"scale": prep.scale,
          "vmd": {"alpha": prep.vmd_params.alpha, "tau": prep.vmd_params.tau,
                  **prep.decomp.summary()}}
    if prep.ga is not None:
        ex["ga"] = prep.ga.to_dict()
    ex.update(extras or {})
    return ForecastReport(comps, evaluate(total, target), baseline, preds, cfg.to_dict(),
                          prep.diagnostics, list(prep.warnings), runtime, ex)


def run_pipeline(series: TimeSeries, cfg: PipelineConfig = PipelineConfig()) -> ForecastReport:
    prep = prepare(series, cfg)
    runtime = dict(prep.runtime)
    t0 = time.perf_counter()
    trend_rep, trend_hat = _fit_trend(prep, cfg)
    runtime["fit-trend"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    _, resid_hat = _fit_residual(prep, cfg, cfg.residual_model)
    runtime["fit-residual"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    pmodel = _fit_periodic(prep, cfg, cfg.periodic_model)
    runtime["fit-periodic"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    periodic_hat = _forecast_periodic(prep, pmodel, trend_hat, resid_hat, cfg.lag)
    runtime["predict"] = time.perf_counter() - t0
    extras = {"trend_fit": {"changepoints": trend_rep.n_changepoints,
                            "train_rmse": trend_rep.train_rmse, "converged": trend_rep.converged}}
    return _report(prep, cfg, trend_hat, periodic_hat, resid_hat, runtime, extras)


def run_ablation(series: TimeSeries, cfg: PipelineConfig = PipelineConfig()) -> dict:
    """{gbt, persistence} x {clusterlstm, single-lstm} on shared upstream stages.

    Returns ``{"cells": {periodic: {residual: ForecastReport}}, "table": ...}``.
    """
    prep = prepare(series, cfg)
    _, trend_hat = _fit_trend(prep, cfg)
    resid = {kind: _fit_residual(prep, cfg, kind)[1] for kind in ("clusterlstm", "single-lstm")}
    cells: dict = {}
    for pk in PERIODIC_MODELS:
        pmodel = _fit_periodic(prep, cfg, pk)
        cells[pk] = {}
        for rk, r_hat in resid.items():
            p_hat = _forecast_periodic(prep, pmodel, trend_hat, r_hat, cfg.lag)
            cells[pk][rk] = _report(prep, cfg, trend_hat, p_hat, r_hat, {})
    table = {pk: {rk: {"rmse": rep.total.rmse, "mape": rep.total.mape,
                       "residual_rmse": rep.components["residual"].rmse,
                       "periodic_rmse": rep.components["periodic"].rmse}
                  for rk, rep in row.items()} for pk, row in cells.items()}
    return {"cells": cells, "table": table}


def ablation_report(result: dict, cfg: PipelineConfig) -> dict:
    """Runtime-free, JSON-ready ablation summary (byte-stable for a fixed seed)."""
    any_rep = next(iter(next(iter(result["cells"].values())).values()))
    return _plain({
        "table": result["table"],
        "baseline_persistence": any_rep.baseline.to_dict(),
        "warnings": any_rep.warnings,
        "config": cfg.to_dict(),
    })


def format_table(table: dict) -> str:
    cols = ("clusterlstm", "single-lstm")
    lines = ["periodic \\ residual | " + " | ".join(f"{c} RMSE / MAPE" for c in cols)]
    for pk, row in table.items():
        cells = [f"{row[c]['rmse']:.4f} / {row[c]['mape']:.4f}" for c in cols]
        lines.append(f"{pk} | " + " | ".join(cells))
    return "\n".join(lines)


def rolling_origin(series: TimeSeries, cfg: PipelineConfig, folds: int = 3,
                   horizon: int | None = None) -> list[dict]:
    """Refit at ``folds`` successive origins, each scored on the next ``horizon`` samples.

    The last fold ends at the series end; earlier folds step back by ``horizon``.
    """
    n = len(series)
    base = int(np.floor(cfg.split_ratio * n))
    h = horizon if horizon is not None else n - base
    out = []
    for i in range(folds):
        origin = n - h * (folds - i)
        if origin < 2 * cfg.lag:
            raise PipelineError("split", f"fold {i} origin {origin} leaves too little history")
        sub = series.slice(0, origin + h)
        rep = run_pipeline(sub, dataclasses.replace(cfg, split_index=origin))
        out.append({"fold": i, "origin": origin, "total": rep.total.to_dict(),
                    "baseline": rep.baseline.to_dict()})
    return out
