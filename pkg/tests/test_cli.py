import json

import pytest

from decctl.cli import main, resolve_config
from decctl.core_types import ModelParams, load_plans
from decctl.solver import MixTable

SMALL = ["--width", "128", "--height", "64", "--frames", "9"]


def test_params_init_table3(tmp_path):
    assert main(["fit", "--params-init", "table3", "--out", str(tmp_path)]) == 0
    assert ModelParams.load(tmp_path / "params.json") == ModelParams.table3()


def test_table_n1(tmp_path):
    assert main(["table", "--params-init", "table3", "--n", "1", "--out", str(tmp_path)]) == 0
    table = MixTable.load(tmp_path / "mix_table_N1.json")
    assert len(table.entries) == 4


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"width": 256, "height": 128, "qp": 27}))
    c = resolve_config(["gen", "--config", str(cfg), "--width", "64"])
    assert (c.width, c.height, c.qp, c.frames) == (64, 128, [27], 33)
    cfg.write_text(json.dumps({"widht": 1}))
    assert main(["gen", "--config", str(cfg)]) == 2


def test_validation_exit_codes(tmp_path):
    assert main(["plan", "--targets", "1.5", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--params", str(tmp_path / "missing.json")]) == 2
    assert main(["gen", "--clip", "nope"]) == 2


def test_gen_plan_simulate_evaluate(tmp_path):
    assert main(["gen", *SMALL, "--seed", "4", "--out", str(tmp_path)]) == 0
    label = "translating_texture-s4"
    assert {p.name for p in tmp_path.iterdir()} == {f"{label}.yuv", f"{label}_saliency.csv", f"{label}_qp32.sgcc"}
    assert main(["fit", "--params-init", "table3", "--out", str(tmp_path)]) == 0
    sal = str(tmp_path / f"{label}_saliency.csv")
    args = ["plan", *SMALL, "--saliency", sal, "--params", str(tmp_path / "params.json"), "--out", str(tmp_path)]
    assert main([*args, "--targets", "0,0.1,0.2"]) == 0
    zero = load_plans(tmp_path / "plans_0.00.json")
    assert len(zero) == 9 and all(not any(p.f) and not any(p.g) for p in zero.values())
    for t in ("0.10", "0.20"):
        assert (tmp_path / f"plans_{t}_diagnostics.csv").exists()
    assert main([*args, "--targets", "0.95"]) == 3
    sim = ["simulate", *SMALL, "--input", str(tmp_path / f"{label}.yuv"), "--saliency", sal,
           "--sequence", str(tmp_path / f"{label}_qp32.sgcc"), "--out", str(tmp_path / "sim"),
           "--plans", str(tmp_path / "plans_0.10.json"), str(tmp_path / "plans_0.20.json")]
    assert main(sim) == 0
    reports = sorted(str(p) for p in (tmp_path / "sim").glob("*.json"))
    assert len(reports) == 2
    summary = json.loads(open(reports[0]).read())
    assert summary["target"] == 0.1 and 0 < summary["achieved"] < 1
    assert main(["evaluate", "--reports", *reports, "--out", str(tmp_path)]) == 0
    ev = json.loads((tmp_path / "evaluation.json").read_text())
    assert set(ev["per_target"]) == {"0.10", "0.20"}
    assert main(["curves", "--reports", *reports, "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "curves.csv").read_text().splitlines()) == 3


@pytest.mark.slow
def test_fit_static_clip_is_degenerate(tmp_path, capsys):
    assert main(["fit", *SMALL, "--clip", "static", "--out", str(tmp_path)]) == 4
    assert "McMseSample" in capsys.readouterr().err


@pytest.mark.slow
def test_fit_moving_clip(tmp_path):
    args = ["fit", "--width", "256", "--height", "128", "--frames", "9", "--qp", "27,37",
            "--per-bucket-h", "--out", str(tmp_path)]
    assert main(args) == 0
    params = ModelParams.load(tmp_path / "params.json")
    assert sorted(params.buckets) == [27, 37]
    rep = json.loads((tmp_path / "fit_report.json").read_text())
    assert set(rep["cubic_by_bucket"]) == {"27", "37"}
    assert (tmp_path / "samples_df.csv").exists()
