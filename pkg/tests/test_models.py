import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from decctl.core_types import ModelParams, SaliencyMap
from decctl.models import (DegenerateWeightsWarning, ReductionTotals, additivity_errors, dc_df, dc_mc,
                           df_capacity, max_achievable_reduction, mc_mse_ratio, norm_quality_df,
                           norm_quality_mc, relative_additivity_error, sw_mse_frame)

T3 = ModelParams.table3()
weights = st.lists(st.floats(0, 1), min_size=1, max_size=30)


def sal(w):
    return SaliencyMap.from_weights(w)


@pytest.mark.parametrize("mse, w, expected", [([4, 4], [0.5, 0.5], 4.0), ([10, 0], [0.2, 0.8], 2.0),
                                              ([0, 0, 0], [0.3, 0.0, 1.0], 0.0)])
def test_sw_mse_examples(mse, w, expected):
    assert sw_mse_frame(mse, sal(w)) == pytest.approx(expected)


def test_sw_mse_zero_weights_fall_back():
    with pytest.warns(DegenerateWeightsWarning):
        assert sw_mse_frame([2, 4], sal([0, 0])) == 3.0


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0.01, 1)), min_size=1, max_size=20),
       st.floats(0.01, 1))
def test_sw_mse_scale_invariant(pairs, lam):
    mse = [m for m, _ in pairs]
    w = [v for _, v in pairs]
    assert sw_mse_frame(mse, sal([lam * v for v in w])) == pytest.approx(sw_mse_frame(mse, sal(w)))


def test_quality_examples():
    assert norm_quality_df(0, 0.7) == 0
    assert norm_quality_df(1, 1) == 1
    assert norm_quality_df(1, 0.35) == 0.35
    assert mc_mse_ratio(0, T3) == 0
    assert abs(mc_mse_ratio(3, T3) - 1) < 1e-3
    assert mc_mse_ratio(1, T3) == pytest.approx(0.0487, abs=5e-5)
    assert mc_mse_ratio(2, T3) == pytest.approx(0.1740, abs=5e-5)
    assert norm_quality_mc(0, 0.8, T3) == 0
    assert norm_quality_mc(3, 1, T3) == pytest.approx(1, abs=1e-3)
    assert norm_quality_mc(2, 0.5, T3) == pytest.approx(0.0870, abs=5e-5)


def test_mc_ratio_nondecreasing():
    vals = [mc_mse_ratio(g, T3) for g in range(4)]
    assert vals == sorted(vals)


def test_complexity_examples():
    assert dc_df(0, 0.9, 32, 10, T3) == 0
    assert dc_df(1, 1, 32, 1, T3) == pytest.approx(0.4560)
    assert dc_df(1, 0.5, 32, 100, T3) == pytest.approx(0.002510, abs=5.01e-7)
    assert dc_mc(0, 7, 32, T3) == 0
    assert dc_mc(2, 100, 32, T3) == pytest.approx(0.00133, abs=5e-6)
    assert dc_mc(3, 1, 37, T3) == pytest.approx(0.2376)


@given(st.floats(0, 1), st.integers(1, 500), st.sampled_from([22, 27, 32, 37]), st.integers(0, 3))
def test_complexity_scales_inverse_n(w, n, q, g):
    assert dc_df(1, w, q, n, T3) == pytest.approx(2 * dc_df(1, w, q, 2 * n, T3))
    assert dc_mc(g, n, q, T3) == pytest.approx(2 * dc_mc(g, 2 * n, q, T3))


def test_capacity_examples():
    assert df_capacity(sal([0.1, 0.2, 0.3, 0.4]), 32, T3) == pytest.approx(0.14843, abs=1e-5)
    assert df_capacity(sal([0.0] * 10), 22, T3) == pytest.approx(0.0255)
    assert df_capacity(sal([1.0]), 22, T3) == pytest.approx(0.3296)


@given(weights, st.sampled_from([22, 27, 32, 37]))
def test_mar_is_capacity_plus_full_mc(w, q):
    s = sal(w)
    n = len(w)
    full = sum(dc_df(1, v, q, n, T3) + dc_mc(3, n, q, T3) for v in w)
    assert max_achievable_reduction(s, q, T3) == pytest.approx(full)


def test_additivity_examples():
    assert relative_additivity_error(10, 4, 6) == 0
    assert relative_additivity_error(10, 4, 6.3) == pytest.approx(0.03)
    assert relative_additivity_error(0, 1, 1) is None
    rep = additivity_errors(ReductionTotals(10, 5), ReductionTotals(4, 2), ReductionTotals(6, 3.5))
    assert rep.delta_c_e == 0
    assert rep.delta_s_e == pytest.approx(0.1)


def test_quality_linear_in_w():
    for g in range(4):
        a, b = norm_quality_mc(g, 0.2, T3), norm_quality_mc(g, 0.6, T3)
        assert b == pytest.approx(3 * a)
    assert np.isclose(norm_quality_df(1, 0.0), 0)
