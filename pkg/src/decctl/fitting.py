"""Least-squares estimation of model coefficients from measured samples."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .core_types import BucketCoeffs, ModelParams, ValidationError
from .io import atomic_write_text


class DegenerateDataError(ValueError):
    """Training data cannot identify the requested regression."""


@dataclass(frozen=True)
class DfComplexitySample:
    w: float
    y: float
    bucket: Optional[int] = None


@dataclass(frozen=True)
class McComplexitySample:
    g: int
    y_bar: float
    bucket: Optional[int] = None


@dataclass(frozen=True)
class McMseSample:
    g: int
    ratio: float
    bucket: Optional[int] = None


@dataclass(frozen=True)
class AffineFit:
    a: float
    b: float
    r_square: float
    count: int


@dataclass(frozen=True)
class LineFit:
    c: float
    r_square: float
    count: int


@dataclass(frozen=True)
class CubicFit:
    h1: float
    h2: float
    h3: float
    r_square: float
    count: int

    @property
    def h(self) -> tuple[float, float, float]:
        return (self.h1, self.h2, self.h3)

    def ratio(self, g: float) -> float:
        return self.h1 * g**3 + self.h2 * g**2 + self.h3 * g


def r_square(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else float("nan")
    return 1.0 - ss_res / ss_tot


def fit_affine(samples: Sequence[DfComplexitySample]) -> AffineFit:
    """Ordinary least squares of y on w with intercept."""
    w = np.array([s.w for s in samples], dtype=np.float64)
    y = np.array([s.y for s in samples], dtype=np.float64)
    if w.size < 2 or np.unique(w).size < 2:
        raise DegenerateDataError("affine fit needs at least two distinct saliency values")
    X = np.column_stack([w, np.ones_like(w)])
    (a, b), *_ = np.linalg.lstsq(X, y, rcond=None)
    return AffineFit(float(a), float(b), r_square(y, X @ np.array([a, b])), int(w.size))


def fit_line_through_origin(samples: Sequence[McComplexitySample]) -> LineFit:
    g = np.array([s.g for s in samples], dtype=np.float64)
    y = np.array([s.y_bar for s in samples], dtype=np.float64)
    if not (g > 0).any():
        raise DegenerateDataError("line fit needs at least one sample with g > 0")
    c = float(np.dot(g, y) / np.dot(g, g))
    return LineFit(c, r_square(y, c * g), int(g.size))


def fit_cubic_no_constant(samples: Sequence[McMseSample]) -> CubicFit:
    """Fit ratio(g) = h1 g^3 + h2 g^2 + h3 g, rejecting non-monotone curves."""
    g = np.array([s.g for s in samples], dtype=np.float64)
    y = np.array([s.ratio for s in samples], dtype=np.float64)
    if not {1.0, 2.0, 3.0} <= set(g.tolist()):
        raise DegenerateDataError("cubic fit needs MSE-ratio samples at g = 1, 2 and 3")
    X = np.column_stack([g**3, g**2, g])
    h, *_ = np.linalg.lstsq(X, y, rcond=None)
    fit = CubicFit(float(h[0]), float(h[1]), float(h[2]), r_square(y, X @ h), int(g.size))
    curve = [fit.ratio(v) for v in range(4)]
    if any(b < a - 1e-9 for a, b in zip(curve, curve[1:])):
        raise DegenerateDataError(f"fitted MSE ratio is not nondecreasing on g=0..3: {curve}")
    if abs(curve[3] - 1.0) > 0.01:
        raise DegenerateDataError(f"fitted MSE ratio at g=3 is {curve[3]:.4f}, expected ~1")
    return fit


def spearman_rcc(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Spearman rank correlation (average ranks for ties); None if either input is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValidationError("spearman_rcc needs two equal-length sequences of length >= 2")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(stats.spearmanr(x, y).statistic)


@dataclass
class FitReport:
    cubic: CubicFit
    affine: dict[int, AffineFit]
    line: dict[int, LineFit]
    cubic_by_bucket: dict[int, CubicFit] = field(default_factory=dict)  # diagnostic only

    def to_dict(self) -> dict:
        out = {
            "cubic": asdict(self.cubic),
            "buckets": {str(q): {"affine": asdict(self.affine[q]), "line": asdict(self.line[q])}
                        for q in sorted(self.affine)},
        }
        if self.cubic_by_bucket:
            out["cubic_by_bucket"] = {str(q): asdict(c) for q, c in sorted(self.cubic_by_bucket.items())}
        return out

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")


def fit_model_params(df_samples: Iterable[DfComplexitySample],
                     mc_samples: Iterable[McComplexitySample],
                     mse_samples: Iterable[McMseSample], *,
                     per_bucket_h: bool = False) -> tuple[ModelParams, FitReport]:
    """Fit a global cubic and per-bucket (a, b, c) from pooled samples.

    With ``per_bucket_h`` the report also carries a cubic fitted on each
    bucket's ratio samples, for checking whether h drifts with QP. The
    returned parameters always use the pooled cubic.
    """
    by_bucket_df: dict[int, list] = defaultdict(list)
    by_bucket_mc: dict[int, list] = defaultdict(list)
    for s in df_samples:
        by_bucket_df[_bucket_of(s)].append(s)
    for s in mc_samples:
        by_bucket_mc[_bucket_of(s)].append(s)
    mse_samples = list(mse_samples)
    if not mse_samples:
        raise DegenerateDataError("no usable McMseSample: MC simplification caused no distortion")
    cubic = fit_cubic_no_constant(mse_samples)
    buckets = sorted(set(by_bucket_df) & set(by_bucket_mc))
    if not buckets:
        raise DegenerateDataError("no QP bucket has both deblocking and MC complexity samples")
    affine = {q: fit_affine(by_bucket_df[q]) for q in buckets}
    line = {q: fit_line_through_origin(by_bucket_mc[q]) for q in buckets}
    for q in buckets:
        if affine[q].a <= 0 or affine[q].b <= 0 or line[q].c <= 0:
            raise DegenerateDataError(
                f"bucket {q}: fitted coefficients must be positive "
                f"(a={affine[q].a:.4g}, b={affine[q].b:.4g}, c={line[q].c:.4g})")
    params = ModelParams(cubic.h, {q: BucketCoeffs(affine[q].a, affine[q].b, line[q].c) for q in buckets})
    per_q = {}
    if per_bucket_h:
        grouped = defaultdict(list)
        for s in mse_samples:
            if s.bucket is not None:
                grouped[s.bucket].append(s)
        per_q = {q: fit_cubic_no_constant(v) for q, v in sorted(grouped.items())
                 if len({x.g for x in v}) >= 3}
    return params, FitReport(cubic, affine, line, per_q)


def _bucket_of(sample) -> int:
    if sample.bucket is None:
        raise ValidationError("sample carries no QP bucket")
    return int(sample.bucket)


# Training-sample CSV files: header row, then one sample per row.

def write_samples_csv(path: str | Path, samples: Sequence) -> None:
    if not samples:
        raise ValidationError("no samples to write")
    first = samples[0]
    if isinstance(first, DfComplexitySample):
        header, rows = ("w", "y"), [(s.w, s.y, s.bucket) for s in samples]
    elif isinstance(first, McComplexitySample):
        header, rows = ("g", "y"), [(s.g, s.y_bar, s.bucket) for s in samples]
    else:
        header, rows = ("g", "ratio"), [(s.g, s.ratio, s.bucket) for s in samples]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header + ("bucket",))
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def read_samples_csv(path: str | Path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = tuple(reader.fieldnames or ())
        out = []
        for row in reader:
            bucket = int(row["bucket"]) if row.get("bucket") not in (None, "", "None") else None
            if fields[:2] == ("w", "y"):
                out.append(DfComplexitySample(float(row["w"]), float(row["y"]), bucket))
            elif fields[:2] == ("g", "y"):
                out.append(McComplexitySample(int(row["g"]), float(row["y"]), bucket))
            elif fields[:2] == ("g", "ratio"):
                out.append(McMseSample(int(row["g"]), float(row["ratio"]), bucket))
            else:
                raise ValidationError(f"{path}: unrecognised sample header {fields}")
    return out
