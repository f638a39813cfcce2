"""Exit criteria. Each test records a one-line detail shown in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""

import itertools
import subprocess
import sys
import time

import numpy as np
import pytest

from decctl.codec.ledger import DEFAULT_PROFILE
from decctl.codec.proxy import decode_sequence
from decctl.codec.training import uniform_plans
from decctl.core_types import FrameLayout, ModelParams, SaliencyMap
from decctl.evaluation import control_error_report, propagation_profile, sw_mse
from decctl.fitting import McMseSample, fit_cubic_no_constant
from decctl.models import df_capacity, max_achievable_reduction, relative_additivity_error
from decctl.pipeline import plan_sequence, run_planned
from decctl.solver import build_mix_table, plan_frame, solve_df_threshold, solve_mix_bnb, solve_mix_exhaustive

pytestmark = pytest.mark.acceptance

T3 = ModelParams.table3()
TARGETS = (0.10, 0.20)


def test_c01_mix_solver_matches_oracle(record_property):
    t0 = time.perf_counter()
    mismatches = 0
    cases = 0
    for n in range(1, 13):
        for B in range(3 * n + 1):
            cases += 1
            if solve_mix_bnb(n, B, T3)[1] != solve_mix_exhaustive(n, B, T3)[1]:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{cases} cases, {mismatches} mismatches, {elapsed:.2f} s (limit 5 s)")
    assert mismatches == 0
    assert elapsed < 5.0


def _subset_table(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.float64)


def test_c02_greedy_df_matches_enumeration(record_property):
    rng = np.random.default_rng(20240611)
    k = T3.coeffs(32)
    tables = {n: _subset_table(n) for n in range(1, 13)}
    t0 = time.perf_counter()
    worse, worst_gap = 0, 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        w = rng.random(n)
        sal = SaliencyMap.from_weights(w.tolist())
        target = float(rng.uniform(0, df_capacity(sal, 32, T3)))
        f, _ = solve_df_threshold(sal, target, 32, T3)
        subsets = tables[n]
        feasible = subsets @ ((k.a * w + k.b) / n) >= target
        best = float((subsets[feasible] @ w).min())
        gap = float(np.dot(w, f)) - best
        if gap > 1e-12:
            worse += 1
            worst_gap = max(worst_gap, gap)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"greedy above optimum in {worse}/1000 cases (max gap {worst_gap:.3f}), "
                              f"{elapsed:.1f} s")
    assert elapsed < 30.0
    assert worse == 0


def test_c03_cubic_recovers_reference_coefficients(record_property):
    h1, h2, h3 = T3.h
    samples = [McMseSample(g, h1 * g**3 + h2 * g**2 + h3 * g) for g in (0, 1, 2, 3)]
    fit = fit_cubic_no_constant(samples)
    err = max(abs(a - b) for a, b in zip(fit.h, T3.h))
    record_property("detail", f"h=({fit.h1:.6f}, {fit.h2:.6f}, {fit.h3:.6f}), max error {err:.1e}")
    assert err <= 1e-6


@pytest.mark.slow
def test_c04_cubic_fit_on_proxy_data(training, record_property):
    r2 = training.report.cubic.r_square
    record_property("detail", f"r2={r2:.4f} from {len(training.samples.mse)} ratio samples, "
                              f"h={tuple(round(v, 4) for v in training.params.h)}")
    assert r2 >= 0.95


@pytest.fixture(scope="module")
def planned_runs(training, test_clips):
    if not test_clips.runs:
        t0 = time.perf_counter()
        for prep in test_clips.clips:
            table = build_mix_table(prep.seq.layout.N, training.params)
            for t in TARGETS:
                plans, _ = plan_sequence(prep.seq, prep.saliency, t, training.params, table=table)
                test_clips.runs[(prep.spec.seed, t)] = (plans, run_planned(prep, plans, t))
        test_clips.run_seconds = time.perf_counter() - t0
    return test_clips


@pytest.mark.slow
def test_c05_control_accuracy(planned_runs, record_property):
    clips = planned_runs.clips
    parts, ok = [], True
    for t in TARGETS:
        achieved = [planned_runs.runs[(c.spec.seed, t)][1].achieved for c in clips]
        rep = control_error_report([t] * len(achieved), achieved)
        parts.append(f"{t:.0%}: MRE {rep.mre:.1f}% MAE {rep.mae:.2f} pts "
                     f"achieved {', '.join(f'{a:.3f}' for a in achieved)}")
        ok &= rep.mre <= 20.0
    seconds = planned_runs.seconds + planned_runs.run_seconds
    record_property("detail", f"{len(clips)} clips; " + "; ".join(parts) + f"; {seconds:.0f} s (limit 300 s)")
    assert len(clips) >= 3
    assert clips[0].spec.width * clips[0].spec.height >= 832 * 480
    assert ok
    assert seconds < 300


@pytest.mark.slow
def test_c06_additivity(test_clips, record_property):
    profile = DEFAULT_PROFILE
    ce, se = [], []
    for prep in test_clips.clips:
        ref = prep.reference
        frames = range(len(prep.source))

        def dc(dec):
            return sum(ref.ledgers[p].total(profile) - dec.ledgers[p].total(profile) for p in frames)

        def ds(dec):
            return sum(sw_mse(ref.frames[p], dec.frames[p], prep.saliency[p]) for p in frames)

        df = decode_sequence(prep.seq, uniform_plans(prep.seq, 1, 0))
        for g in (1, 2, 3):
            mc = decode_sequence(prep.seq, uniform_plans(prep.seq, 0, g))
            joint = decode_sequence(prep.seq, uniform_plans(prep.seq, 1, g))
            ce.append(relative_additivity_error(dc(joint), dc(df), dc(mc)))
            se.append(relative_additivity_error(ds(joint), ds(df), ds(mc)))
    mc_e, ms_e = float(np.mean(ce)), float(np.mean(se))
    record_property("detail", f"mean dC_e {mc_e:.2%}, mean dS_e {ms_e:.2%} "
                              f"(per g: {', '.join(f'{v:.1%}' for v in se)}; limit 5%)")
    assert mc_e <= 0.05
    assert ms_e <= 0.05


@pytest.mark.slow
def test_c07_salient_regions_protected(planned_runs, record_property):
    parts, ok = [], True
    for t in TARGETS:
        strict = 0
        for c in planned_runs.clips:
            res = planned_runs.runs[(c.spec.seed, t)][1]
            ok &= res.delta_ew_psnr <= res.delta_psnr
            strict += res.delta_ew_psnr < res.delta_psnr
            parts.append(f"s{c.spec.seed}@{t:.0%} {res.delta_ew_psnr:.3f}/{res.delta_psnr:.3f}")
        ok &= strict >= 2
    record_property("detail", "dEW-PSNR/dPSNR dB: " + ", ".join(parts))
    assert ok


@pytest.mark.slow
def test_c08_error_propagation(planned_runs, record_property):
    prep = planned_runs.clips[0]
    plans, _ = planned_runs.runs[(prep.spec.seed, 0.20)]
    drop = propagation_profile(prep.seq, plans, prep.reference)
    intra = prep.seq.intra_pocs()
    b_drops = [drop[p] for p in sorted(drop) if p not in intra]
    before = float(np.mean([drop[p] for p in range(25, 32)]))
    after = float(np.mean([drop[p] for p in range(33, 41)]))
    record_property("detail", f"I-frame drops {[drop[p] for p in intra]}, mean B drop {np.mean(b_drops):.3f} dB, "
                              f"GOP before I32 {before:.3f} dB, after {after:.3f} dB, "
                              f"key frames 8/16/24/40: {drop[8]:.3f}/{drop[16]:.3f}/{drop[24]:.3f}/{drop[40]:.3f}")
    assert intra == [0, 32]
    assert all(drop[p] == 0.0 for p in intra)
    assert after < before
    assert drop[40] < drop[24]


def test_c09_planning_overhead(record_property):
    rng = np.random.default_rng(9)
    layout = FrameLayout(1920, 1080)
    table = build_mix_table(layout.N, T3)
    maps = [SaliencyMap(layout, tuple(rng.random(layout.N).tolist())) for _ in range(50)]
    targets = [float(rng.uniform(0, max_achievable_reduction(m, 32, T3))) for m in maps]
    t0 = time.perf_counter()
    for i in range(1000):
        plan_frame(maps[i % 50], targets[i % 50], 32, T3, table)
    per_plan = (time.perf_counter() - t0) / 1000
    budgets = rng.integers(0, 3 * layout.N + 1, 10000).tolist()
    t0 = time.perf_counter()
    for B in budgets:
        table.lookup(B)
    per_lookup = (time.perf_counter() - t0) / len(budgets)
    record_property("detail", f"N={layout.N}: plan_frame {per_plan * 1e3:.3f} ms mean, "
                              f"lookup {per_lookup * 1e6:.2f} us")
    assert per_plan < 1e-3
    assert per_lookup < 1e-5


def test_c10_simulate_is_deterministic(tmp_path, record_property):
    params = tmp_path / "params.json"
    T3.save(params)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        cmd = [sys.executable, "-m", "decctl.cli", "simulate", "--width", "256", "--height", "128",
               "--frames", "9", "--targets", "0.1,0.2", "--params", str(params), "--seed", "7",
               "--out", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = outs[0] == outs[1]
    record_property("detail", f"{len(outs[0])} files ({', '.join(outs[0])}), identical={same}")
    assert len(outs[0]) == 4
    assert same


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
