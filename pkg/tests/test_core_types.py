import json

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from decctl.core_types import (DF_ONLY, DF_PLUS_MC, ControlPlan, FrameLayout, ModelParams,
                               QpBucket, SaliencyMap, ValidationError, load_plans,
                               normalize_saliency, qp_bucket, read_saliency_file, save_plans,
                               write_saliency_file)


def test_layout_counts():
    lay = FrameLayout(832, 480, 64)
    assert (lay.ctu_cols, lay.ctu_rows, lay.N) == (13, 8, 104)
    assert FrameLayout(1920, 1080).N == 510
    assert FrameLayout(1, 1).N == 1


@pytest.mark.parametrize("kw", [dict(width=0, height=8), dict(width=8, height=8, ctu_size=48)])
def test_layout_rejects(kw):
    with pytest.raises(ValidationError):
        FrameLayout(**kw)


def test_partial_edge_ctus():
    lay = FrameLayout(100, 70, 64)
    plane = np.arange(70 * 100, dtype=float).reshape(70, 100)
    means = lay.per_ctu_mean(plane)
    rs, cs = lay.ctu_bounds(3)
    assert means[3] == pytest.approx(plane[rs, cs].mean())
    assert lay.broadcast([0, 1, 2, 3])[69, 99] == 3


@pytest.mark.parametrize("raw, expected", [
    ([2.0, 1.0, 0.5, 0.0], [1.0, 0.5, 0.25, 0.0]),
    ([0, 0, 0], [0, 0, 0]),
    ([0.3, 0.3], [1.0, 1.0]),
])
def test_normalize_examples(raw, expected):
    assert normalize_saliency(raw).w == pytest.approx(expected)


def test_normalize_names_negative_index():
    with pytest.raises(ValidationError, match="index 2"):
        normalize_saliency([0.1, 0.2, -0.5])


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=40))
def test_normalize_idempotent(raw):
    once = normalize_saliency(raw)
    assert normalize_saliency(once.w).w == pytest.approx(once.w, rel=1e-12, abs=1e-15)
    if max(raw) > 0:
        assert max(once.w) == 1.0


def test_saliency_range_checked():
    with pytest.raises(ValidationError):
        SaliencyMap.from_weights([0.5, 1.2])
    with pytest.raises(ValidationError):
        SaliencyMap(FrameLayout(128, 64), (0.5,))


@pytest.mark.parametrize("qp, bucket", [(24, 22), (37, 37), (45, 37), (0, 22), (26, 22),
                                        (27, 27), (31, 27), (32, 32), (36, 32), (41, 37)])
def test_qp_bucket(qp, bucket):
    assert qp_bucket(qp) == bucket


@pytest.mark.parametrize("qp", [-1, 52])
def test_qp_bucket_range(qp):
    with pytest.raises(ValidationError):
        qp_bucket(qp)


@given(st.integers(0, 50))
def test_qp_bucket_monotone(qp):
    assert qp_bucket(qp) <= qp_bucket(qp + 1)


def test_table3_values_and_anchor():
    p = ModelParams.table3()
    assert p.h == (0.1040, -0.2737, 0.2184)
    assert p.coeffs(QpBucket.QP32).a == 0.4101
    assert p.coeffs(37).c == 0.0792
    h1, h2, h3 = p.h
    assert abs(27 * h1 + 9 * h2 + 3 * h3 - 1) <= 0.01


def test_params_roundtrip(tmp_path):
    path = tmp_path / "params.json"
    ModelParams.table3().save(path)
    assert ModelParams.load(path) == ModelParams.table3()
    data = json.loads(path.read_text())
    assert set(data) == {"h", "buckets"}
    assert set(data["buckets"]) == {"22", "27", "32", "37"}


def test_params_invariants():
    good = ModelParams.table3()
    with pytest.raises(ValidationError):
        ModelParams((0.1, 0.1, 0.1), good.buckets)
    bad = dict(good.buckets)
    bad[32] = type(bad[32])(0.4, -0.01, 0.06)
    with pytest.raises(ValidationError):
        ModelParams(good.h, bad)
    with pytest.raises(ValidationError, match="bucket 27"):
        ModelParams(good.h, {22: good.buckets[22]}).coeffs(27)


def test_plan_invariants():
    ControlPlan((1, 0), (0, 0), 0.1, DF_ONLY)
    ControlPlan((1, 1), (3, 0), 0.5, DF_PLUS_MC)
    with pytest.raises(ValidationError):
        ControlPlan((1, 0), (1, 0), 0.1, DF_ONLY)
    with pytest.raises(ValidationError):
        ControlPlan((1, 0), (1, 0), 0.1, DF_PLUS_MC)
    with pytest.raises(ValidationError):
        ControlPlan((0,), (0,), 1.5, DF_ONLY)
    with pytest.raises(ValidationError):
        ControlPlan((2,), (0,), 0.0, DF_ONLY)


def test_plan_file_roundtrip(tmp_path):
    plans = {0: ControlPlan.neutral(3), 5: ControlPlan((1, 1, 1), (3, 2, 0), 0.4, DF_PLUS_MC)}
    save_plans(tmp_path / "p.json", plans)
    assert load_plans(tmp_path / "p.json") == plans
    rec = json.loads((tmp_path / "p.json").read_text())[1]
    assert rec == {"frame": 5, "branch": "df+mc", "f": [1, 1, 1], "g": [3, 2, 0], "predicted": 0.4}


def test_saliency_file_roundtrip(tmp_path):
    lay = FrameLayout(192, 64)
    maps = {0: SaliencyMap(lay, (0.0, 0.5, 1.0)), 1: SaliencyMap(lay, (1 / 3, 1.0, 0.25))}
    write_saliency_file(tmp_path / "s.csv", maps)
    assert read_saliency_file(tmp_path / "s.csv", lay) == maps
    (tmp_path / "bad.csv").write_text("0,0.5,0.5\n")
    with pytest.raises(ValidationError, match="3 CTUs"):
        read_saliency_file(tmp_path / "bad.csv", lay)
