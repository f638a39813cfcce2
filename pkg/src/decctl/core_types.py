"""Domain types shared across the toolkit.

Everything here is an immutable value. The CTU grid (``FrameLayout``), the
per-CTU saliency weights, QP buckets, fitted model coefficients and the
per-frame control decisions all live in this module so that the solver, the
proxy codec and the evaluation code agree on one vocabulary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .io import atomic_write_text

DF_ONLY = "df"
DF_PLUS_MC = "df+mc"


class ValidationError(ValueError):
    """Input violates a documented precondition."""


@dataclass(frozen=True)
class FrameLayout:
    """Partition of a luma frame into square CTUs.

    Edge CTUs may be partial; they are clipped to the frame bounds.
    """

    width: int
    height: int
    ctu_size: int = 64

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"frame must be non-empty, got {self.width}x{self.height}")
        s = self.ctu_size
        if s < 1 or s & (s - 1):
            raise ValidationError(f"ctu_size must be a power of two, got {s}")

    @property
    def ctu_cols(self) -> int:
        return math.ceil(self.width / self.ctu_size)

    @property
    def ctu_rows(self) -> int:
        return math.ceil(self.height / self.ctu_size)

    @property
    def N(self) -> int:
        return self.ctu_cols * self.ctu_rows

    @classmethod
    def for_count(cls, n: int, ctu_size: int = 64) -> "FrameLayout":
        """A single-row layout holding exactly ``n`` CTUs (handy for solver work)."""
        if n < 1:
            raise ValidationError("need at least one CTU")
        return cls(width=n * ctu_size, height=ctu_size, ctu_size=ctu_size)

    def ctu_bounds(self, n: int) -> tuple[slice, slice]:
        """Row and column slices of CTU ``n`` (raster order), clipped to the frame."""
        r, c = divmod(n, self.ctu_cols)
        s = self.ctu_size
        return (slice(r * s, min((r + 1) * s, self.height)),
                slice(c * s, min((c + 1) * s, self.width)))

    def ctu_index_map(self, height: int | None = None, width: int | None = None) -> np.ndarray:
        """Per-pixel CTU index. Larger (padded) planes extend the edge CTUs."""
        h = self.height if height is None else height
        w = self.width if width is None else width
        rows = np.minimum(np.arange(h) // self.ctu_size, self.ctu_rows - 1)
        cols = np.minimum(np.arange(w) // self.ctu_size, self.ctu_cols - 1)
        return rows[:, None] * self.ctu_cols + cols[None, :]

    def per_ctu_mean(self, plane: np.ndarray) -> np.ndarray:
        """Mean of ``plane`` (cropped to the frame) over each CTU."""
        plane = np.asarray(plane, dtype=np.float64)[: self.height, : self.width]
        idx = self.ctu_index_map().ravel()
        sums = np.bincount(idx, weights=plane.ravel(), minlength=self.N)
        counts = np.bincount(idx, minlength=self.N)
        return sums / counts

    def broadcast(self, per_ctu: Sequence[float]) -> np.ndarray:
        """Expand per-CTU values to a (height, width) plane."""
        values = np.asarray(per_ctu, dtype=np.float64)
        if values.shape != (self.N,):
            raise ValidationError(f"expected {self.N} CTU values, got {values.shape}")
        return values[self.ctu_index_map()]


@dataclass(frozen=True)
class SaliencyMap:
    layout: FrameLayout
    w: tuple[float, ...]

    def __post_init__(self):
        if len(self.w) != self.layout.N:
            raise ValidationError(f"saliency has {len(self.w)} values for {self.layout.N} CTUs")
        for i, v in enumerate(self.w):
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"saliency w[{i}]={v} outside [0, 1]")

    @classmethod
    def from_weights(cls, w: Sequence[float], layout: FrameLayout | None = None) -> "SaliencyMap":
        w = tuple(float(v) for v in w)
        return cls(layout or FrameLayout.for_count(len(w)), w)

    @property
    def N(self) -> int:
        return self.layout.N

    def as_array(self) -> np.ndarray:
        return np.asarray(self.w, dtype=np.float64)


def normalize_saliency(raw: Sequence[float], layout: FrameLayout | None = None) -> SaliencyMap:
    """Scale nonnegative raw saliency by its maximum so the largest weight is 1."""
    values = np.asarray(raw, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValidationError("saliency needs at least one value")
    bad = np.flatnonzero(~(values >= 0))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"negative saliency at index {i}: {values[i]}")
    peak = values.max()
    if peak > 0:
        values = values / peak
    return SaliencyMap.from_weights(values.tolist(), layout)


class QpBucket(IntEnum):
    QP22 = 22
    QP27 = 27
    QP32 = 32
    QP37 = 37


def qp_bucket(qp: int) -> QpBucket:
    """Map a frame QP to the trained coefficient bucket (clamped to 22..41)."""
    if not 0 <= qp <= 51:
        raise ValidationError(f"QP {qp} outside [0, 51]")
    if qp < 27:
        return QpBucket.QP22
    if qp < 32:
        return QpBucket.QP27
    if qp < 37:
        return QpBucket.QP32
    return QpBucket.QP37


@dataclass(frozen=True)
class BucketCoeffs:
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class ModelParams:
    """Cubic MC-distortion coefficients plus per-bucket complexity coefficients."""

    h: tuple[float, float, float]
    buckets: Mapping[int, BucketCoeffs]

    def __post_init__(self):
        h1, h2, h3 = self.h
        if abs(27 * h1 + 9 * h2 + 3 * h3 - 1.0) > 0.01:
            raise ValidationError(f"cubic does not pass near (3, 1): h={self.h}")
        if not self.buckets:
            raise ValidationError("ModelParams needs at least one QP bucket")
        for q, k in self.buckets.items():
            if not (k.a > 0 and k.b > 0 and k.c > 0):
                raise ValidationError(f"bucket {q}: a, b, c must be positive, got {k}")

    @property
    def alpha(self) -> float:
        h1, h2, h3 = self.h
        return 8 * h1 + 4 * h2 + 2 * h3

    @property
    def beta(self) -> float:
        h1, h2, h3 = self.h
        return h1 + h2 + h3

    def coeffs(self, bucket: int) -> BucketCoeffs:
        try:
            return self.buckets[int(bucket)]
        except KeyError:
            raise ValidationError(
                f"no coefficients for QP bucket {int(bucket)}; have {sorted(self.buckets)}"
            ) from None

    @classmethod
    def table3(cls) -> "ModelParams":
        return TABLE3_PARAMS

    def to_dict(self) -> dict:
        return {
            "h": list(self.h),
            "buckets": {str(q): {"a": k.a, "b": k.b, "c": k.c} for q, k in sorted(self.buckets.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelParams":
        try:
            h = tuple(float(v) for v in data["h"])
            buckets = {int(q): BucketCoeffs(float(v["a"]), float(v["b"]), float(v["c"]))
                       for q, v in data["buckets"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed ModelParams: {exc}") from exc
        if len(h) != 3:
            raise ValidationError("ModelParams 'h' needs three coefficients")
        return cls(h, buckets)  # type: ignore[arg-type]

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ModelParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


TABLE3_PARAMS = ModelParams(
    h=(0.1040, -0.2737, 0.2184),
    buckets={
        22: BucketCoeffs(0.3041, 0.0255, 0.0351),
        27: BucketCoeffs(0.3874, 0.0433, 0.0520),
        32: BucketCoeffs(0.4101, 0.0459, 0.0665),
        37: BucketCoeffs(0.4347, 0.0576, 0.0792),
    },
)


@dataclass(frozen=True)
class ControlPlan:
    """Per-CTU decisions for one frame.

    ``f[n] = 1`` disables deblocking for CTU n; ``g[n]`` is the number of
    samples out of each 2x2 group that are NN-copied instead of motion
    compensated.
    """

    f: tuple[int, ...]
    g: tuple[int, ...]
    predicted_reduction: float
    branch: str
    diagnostics: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        validate_plan(self)

    @property
    def N(self) -> int:
        return len(self.f)

    @classmethod
    def neutral(cls, n: int) -> "ControlPlan":
        return cls((0,) * n, (0,) * n, 0.0, DF_ONLY)

    def to_dict(self, frame: int) -> dict:
        return {"frame": frame, "branch": self.branch, "f": list(self.f),
                "g": list(self.g), "predicted": self.predicted_reduction}

    @classmethod
    def from_dict(cls, data: Mapping) -> tuple[int, "ControlPlan"]:
        try:
            plan = cls(tuple(int(v) for v in data["f"]), tuple(int(v) for v in data["g"]),
                       float(data["predicted"]), str(data["branch"]))
            return int(data["frame"]), plan
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed plan record: {exc}") from exc


def validate_plan(plan: ControlPlan) -> None:
    """Raise ValidationError unless ``plan`` satisfies the ControlPlan invariants."""
    f, g = plan.f, plan.g
    if len(f) != len(g) or not f:
        raise ValidationError(f"plan needs equal, non-empty f/g (got {len(f)}, {len(g)})")
    if any(v not in (0, 1) for v in f):
        raise ValidationError("f flags must be 0 or 1")
    if any(v not in (0, 1, 2, 3) for v in g):
        raise ValidationError("g levels must be in {0, 1, 2, 3}")
    if plan.branch == DF_ONLY:
        if any(g):
            raise ValidationError("DF-only plan with nonzero g")
    elif plan.branch == DF_PLUS_MC:
        if not all(f):
            raise ValidationError("DF-plus-MC plan must disable DF on every CTU")
    else:
        raise ValidationError(f"unknown branch {plan.branch!r}")
    if not 0.0 <= plan.predicted_reduction <= 1.0:
        raise ValidationError(f"predicted reduction {plan.predicted_reduction} outside [0, 1]")


def save_plans(path: str | Path, plans: Mapping[int, ControlPlan]) -> None:
    records = [plans[k].to_dict(k) for k in sorted(plans)]
    atomic_write_text(path, json.dumps(records) + "\n")


def load_plans(path: str | Path) -> dict[int, ControlPlan]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return dict(ControlPlan.from_dict(rec) for rec in data)


# Saliency file: one line per frame, "frame_index,w_0,...,w_{N-1}".

def write_saliency_file(path: str | Path, maps: Mapping[int, SaliencyMap]) -> None:
    lines = []
    for k in sorted(maps):
        lines.append(",".join([str(k)] + [repr(float(v)) for v in maps[k].w]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_saliency_file(path: str | Path, layout: FrameLayout | None = None,
                       normalize: bool = False) -> dict[int, SaliencyMap]:
    maps: dict[int, SaliencyMap] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            k = int(parts[0])
            values = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if layout is not None and len(values) != layout.N:
            raise ValidationError(f"{path}:{lineno}: {len(values)} weights, layout has {layout.N} CTUs")
        maps[k] = normalize_saliency(values, layout) if normalize else SaliencyMap.from_weights(values, layout)
    return maps
