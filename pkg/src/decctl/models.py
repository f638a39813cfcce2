"""Closed-form quality and complexity models.

Complexity values are dimensionless fractions of one frame's decode cost.
Quality values are either SW-MSE (squared 8-bit levels) or the normalized
losses the solver minimizes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core_types import ModelParams, QpBucket, SaliencyMap, ValidationError


class DegenerateWeightsWarning(RuntimeWarning):
    """All saliency weights are zero while distortion is not."""


@dataclass(frozen=True)
class CtuDistortion:
    mse_df: float
    mse_mc: float
    mse_joint: float

    def __post_init__(self):
        if min(self.mse_df, self.mse_mc, self.mse_joint) < 0:
            raise ValidationError("CTU distortions must be nonnegative")


class ReductionTotals(NamedTuple):
    """Frame- or sequence-level totals measured for one decode configuration."""

    complexity: float
    sw_mse: float


@dataclass(frozen=True)
class AdditivityReport:
    delta_c_e: Optional[float]
    delta_s_e: Optional[float]


def sw_mse_frame(per_ctu_mse: Sequence[float], saliency: SaliencyMap) -> float:
    mse = np.asarray(per_ctu_mse, dtype=np.float64)
    w = saliency.as_array()
    if mse.shape != w.shape:
        raise ValidationError(f"{mse.size} CTU MSEs for {w.size} saliency weights")
    if not mse.any():
        return 0.0
    total = w.sum()
    if total <= 0:
        warnings.warn("all-zero saliency: falling back to the unweighted mean",
                      DegenerateWeightsWarning, stacklevel=2)
        return float(mse.mean())
    return float(np.dot(w / total, mse))


def norm_quality_df(f: int, w: float) -> float:
    return w * f


def mc_mse_ratio(g: int, params: ModelParams) -> float:
    h1, h2, h3 = params.h
    return h1 * g**3 + h2 * g**2 + h3 * g


def norm_quality_mc(g: int, w: float, params: ModelParams) -> float:
    return w * mc_mse_ratio(g, params)


def dc_df(f: int, w: float, bucket: QpBucket | int, N: int, params: ModelParams) -> float:
    k = params.coeffs(bucket)
    return (k.a * w + k.b) * f / N


def dc_mc(g: int, N: int, bucket: QpBucket | int, params: ModelParams) -> float:
    return params.coeffs(bucket).c * g / N


def df_capacity(saliency: SaliencyMap, bucket: QpBucket | int, params: ModelParams) -> float:
    """Largest reduction reachable by disabling deblocking on every CTU."""
    k = params.coeffs(bucket)
    w = saliency.as_array()
    return float((k.a * w + k.b).sum() / w.size)


def max_achievable_reduction(saliency: SaliencyMap, bucket: QpBucket | int,
                             params: ModelParams) -> float:
    """Modelled reduction with every CTU at f=1, g=3."""
    return df_capacity(saliency, bucket, params) + 3 * params.coeffs(bucket).c


def relative_additivity_error(joint: float, df: float, mc: float) -> Optional[float]:
    """|joint - (df + mc)| / joint, or None when the joint total is zero."""
    if joint == 0:
        return None
    return abs((joint - (df + mc)) / joint)


def additivity_errors(joint: ReductionTotals, df_only: ReductionTotals,
                      mc_only: ReductionTotals) -> AdditivityReport:
    return AdditivityReport(
        relative_additivity_error(joint.complexity, df_only.complexity, mc_only.complexity),
        relative_additivity_error(joint.sw_mse, df_only.sw_mse, mc_only.sw_mse),
    )


def plan_quality_loss(plan, saliency: SaliencyMap, params: ModelParams) -> float:
    """Normalized loss of a plan: sum of the DF and MC per-CTU terms."""
    w = saliency.as_array()
    f = np.asarray(plan.f)
    g = np.asarray(plan.g)
    h1, h2, h3 = params.h
    return float(np.dot(w, f) + np.dot(w, h1 * g**3 + h2 * g**2 + h3 * g))


def plan_reduction(plan, saliency: SaliencyMap, bucket: QpBucket | int,
                   params: ModelParams) -> float:
    """Modelled complexity reduction of a plan (sum of dc_df and dc_mc)."""
    k = params.coeffs(bucket)
    w = saliency.as_array()
    f = np.asarray(plan.f)
    g = np.asarray(plan.g)
    return float(((k.a * w + k.b) * f).sum() / w.size + k.c * g.sum() / w.size)
