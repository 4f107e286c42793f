import dataclasses
import json

import numpy as np
import pytest

from vsxc.periodic import GbtConfig
from vsxc.pipeline import (PipelineConfig, PipelineError, ablation_report, run_ablation,
                           run_pipeline)
from vsxc.residual.clusterlstm import ResidualConfig
from vsxc.series import TimeSeries
from vsxc.synthetic import SyntheticSpec, generate_synthetic
from vsxc.vmd import VmdParams

FAST = PipelineConfig(skip_ga=True, unit_variance=True, vmd=VmdParams(max_iter=200),
                      gbt=GbtConfig(n_rounds=15), residual=ResidualConfig(k=2, epochs=3))


@pytest.fixture(scope="module")
def series():
    return generate_synthetic(SyntheticSpec(length=400)).series


@pytest.fixture(scope="module")
def report(series):
    return run_pipeline(series, FAST)


def test_recomposition_identity(report):
    p = report.predictions
    assert np.max(np.abs(p["total"] - (p["trend"] + p["periodic"] + p["residual"]))) <= 1e-12
    assert len(p["total"]) == 40


def test_triangle_inequality(report):
    p = report.predictions
    comp = sum(np.linalg.norm(p[c] - p[c + "_ref"]) for c in ("trend", "periodic", "residual"))
    recon = p["trend_ref"] + p["periodic_ref"] + p["residual_ref"]
    # the component references sum to the filtered target, so add that gap to the bound
    gap = np.linalg.norm(recon - p["target"])
    assert np.linalg.norm(p["total"] - p["target"]) <= comp + gap + 1e-9


def test_zero_residual_wiring(series):
    rep = run_pipeline(series, dataclasses.replace(FAST, residual_model="zero"))
    p = rep.predictions
    assert np.all(p["residual"] == 0)
    assert np.array_equal(p["total"], p["trend"] + p["periodic"])


def test_determinism(series, report):
    again = run_pipeline(series, FAST)
    assert again.to_dict(runtime=False) == report.to_dict(runtime=False)


def test_report_fields(report):
    d = report.to_dict()
    assert set(d["components"]) == {"trend", "periodic", "residual"}
    assert {"mann_kendall_T", "acf_S", "granger_S", "ljung_box_R"} <= set(d["diagnostics"])
    assert "runtime_s" in d and "runtime_s" not in report.to_dict(runtime=False)
    json.dumps(d)


def test_stage_errors_are_tagged():
    with pytest.raises(PipelineError) as exc:
        run_pipeline(TimeSeries.from_values(np.arange(20.0)), FAST)
    assert exc.value.stage and str(exc.value).startswith(f"[{exc.value.stage}]")


def test_config_roundtrip(tmp_path):
    cfg = dataclasses.replace(FAST, seed=5, periodic_model="persistence")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert PipelineConfig.load(p) == cfg
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        PipelineConfig(residual_model="svr")


def test_ablation_cells_finite(series):
    res = run_ablation(series, FAST)
    for row in res["table"].values():
        for cell in row.values():
            assert np.isfinite(cell["rmse"]) and np.isfinite(cell["mape"])
    assert set(res["table"]) == {"gbt", "persistence"}
    json.dumps(ablation_report(res, FAST))
