"""Quality metrics, control-error statistics and complexity-distortion curves."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .codec.ledger import DEFAULT_PROFILE, CostLedger, CostProfile
from .codec.proxy import DecodeResult, ProxySequence, decode_one, decode_sequence
from .codec.training import uniform_plans
from .core_types import ControlPlan, SaliencyMap, ValidationError
from .models import sw_mse_frame

PSNR_CAP = 99.0
PEAK = 255.0


def psnr_from_mse(mse: float) -> float:
    if mse <= 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(PEAK * PEAK / mse))


@dataclass(frozen=True)
class PsnrResult:
    per_frame: tuple[Optional[float], ...]
    mean: Optional[float]


def _as_frames(x) -> list[np.ndarray]:
    if isinstance(x, np.ndarray) and x.ndim == 2:
        return [x]
    return [np.asarray(f) for f in x]


def _summarize(values: list[Optional[float]]) -> PsnrResult:
    valid = [v for v in values if v is not None]
    return PsnrResult(tuple(values), float(np.mean(valid)) if valid else None)


def psnr(reference, test) -> PsnrResult:
    """Per-frame PSNR (capped at 99 dB) and the mean over frames."""
    ref, tst = _as_frames(reference), _as_frames(test)
    if len(ref) != len(tst):
        raise ValidationError(f"{len(ref)} reference frames vs {len(tst)} test frames")
    out = []
    for a, b in zip(ref, tst):
        if a.shape != b.shape:
            raise ValidationError(f"frame shapes differ: {a.shape} vs {b.shape}")
        out.append(psnr_from_mse(float(np.mean((a.astype(np.float64) - b) ** 2))))
    return _summarize(out)


WeightMap = Union[np.ndarray, SaliencyMap]


def _pixel_weights(weight: WeightMap, shape: tuple[int, int]) -> np.ndarray:
    if isinstance(weight, SaliencyMap):
        return weight.layout.broadcast(weight.as_array())[:shape[0], :shape[1]]
    w = np.asarray(weight, dtype=np.float64)
    if w.shape != shape:
        raise ValidationError(f"weight map shape {w.shape} does not match frame {shape}")
    return w


def ew_psnr(reference, test, weights: Sequence[WeightMap] | WeightMap) -> PsnrResult:
    """PSNR of the weighted MSE sum(w*se)/sum(w); frames with all-zero weight give None."""
    ref, tst = _as_frames(reference), _as_frames(test)
    if isinstance(weights, (SaliencyMap, np.ndarray)) and not (
            isinstance(weights, np.ndarray) and weights.ndim == 3):
        weights = [weights]
    if not (len(ref) == len(tst) == len(weights)):
        raise ValidationError("reference, test and weights must have equal frame counts")
    out: list[Optional[float]] = []
    for a, b, wm in zip(ref, tst, weights):
        if a.shape != b.shape:
            raise ValidationError(f"frame shapes differ: {a.shape} vs {b.shape}")
        w = _pixel_weights(wm, a.shape)
        if (w < 0).any():
            raise ValidationError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            out.append(None)
            continue
        se = (a.astype(np.float64) - b) ** 2
        out.append(psnr_from_mse(float((w * se).sum() / total)))
    return _summarize(out)


@dataclass(frozen=True)
class ControlErrorReport:
    targets: tuple[float, ...]      # fractions
    achieved: tuple[float, ...]     # fractions
    errors: tuple[float, ...]       # achieved - target, percentage points
    mae: float                      # percentage points
    mre: float                      # percent of the target

    def to_dict(self) -> dict:
        return asdict(self)


def control_error_report(targets: Sequence[float], achieved: Sequence[float]) -> ControlErrorReport:
    """MAE in percentage points and MRE = mean(|error| / target) in percent.

    With a single common target MRE equals MAE / target.
    """
    t = np.asarray(targets, dtype=np.float64)
    a = np.asarray(achieved, dtype=np.float64)
    if t.shape != a.shape or t.size == 0:
        raise ValidationError("targets and achieved must be nonempty and of equal length")
    if (t <= 0).any():
        raise ValidationError("targets must be positive")
    err = (a - t) * 100.0
    mae = float(np.abs(err).mean())
    mre = float((np.abs(err) / (t * 100.0)).mean() * 100.0)
    return ControlErrorReport(tuple(t.tolist()), tuple(a.tolist()), tuple(err.tolist()), mae, mre)


def achieved_reduction(reference: Sequence[CostLedger], planned: Sequence[CostLedger],
                       profile: CostProfile = DEFAULT_PROFILE, overhead: float = 0.0) -> float:
    """(C_ref - C_planned - overhead) / C_ref summed over frames; overhead in cost units."""
    base = sum(led.total(profile) for led in reference)
    if base <= 0:
        raise ValidationError("reference decode has zero cost")
    return (base - sum(led.total(profile) for led in planned) - overhead) / base


def measure_mar(seq: ProxySequence, profile: CostProfile = DEFAULT_PROFILE, overhead: float = 0.0,
                reference: Optional[DecodeResult] = None) -> float:
    """Measured reduction with every CTU at f=1, g=3."""
    ref = reference if reference is not None else decode_sequence(seq)
    full = decode_sequence(seq, uniform_plans(seq, 1, 3))
    return achieved_reduction(ref.ledgers, full.ledgers, profile, overhead)


def propagation_profile(seq: ProxySequence, plans: Mapping[int, ControlPlan],
                        reference: Optional[DecodeResult] = None) -> dict[int, float]:
    """Per-POC PSNR drop caused by simplification in other frames.

    drop(i) = PSNR(ref, plan on frame i only) - PSNR(ref, plans on all frames),
    both against the reference decode, so the value isolates what arrives
    through the reference chain.
    """
    ref = reference if reference is not None else decode_sequence(seq)
    full = decode_sequence(seq, plans)
    out = {}
    for fr in sorted(seq.frames, key=lambda c: c.poc):
        p = fr.poc
        if fr.is_intra:
            only = full.frames[p]
        else:
            only, _ = decode_one(seq, p, ref.padded, plans.get(p))
        out[p] = psnr(ref.frames[p], only).mean - psnr(ref.frames[p], full.frames[p]).mean
    return out


@dataclass(frozen=True)
class CurvePoint:
    sequence: str
    qp: int
    target: float
    achieved: float
    delta_psnr: float
    delta_ew_psnr: float


CURVE_COLUMNS = ("sequence", "qp", "target", "achieved", "delta_psnr", "delta_ew_psnr")


def emit_curves(points: Iterable[CurvePoint]) -> str:
    """CSV text sorted by sequence, then target, then QP."""
    pts = sorted(points, key=lambda p: (p.sequence, p.target, p.qp))
    if not pts:
        raise ValidationError("no curve points")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for p in pts:
        writer.writerow([p.sequence, p.qp, f"{p.target:.6f}", f"{p.achieved:.6f}",
                         f"{p.delta_psnr:.6f}", f"{p.delta_ew_psnr:.6f}"])
    return buf.getvalue()


def sw_mse(reference: np.ndarray, test: np.ndarray, saliency: SaliencyMap) -> float:
    """Saliency-weighted per-CTU MSE of one frame."""
    mse = saliency.layout.per_ctu_mean((reference.astype(np.float64) - test) ** 2)
    return sw_mse_frame(mse, saliency)
