"""Deterministic per-CTU operation counts and the weights that turn them into cost."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from ..core_types import ValidationError

COUNTERS = (
    "mc_macs",           # interpolation multiply-accumulates at computed positions
    "mc_samples",        # prediction samples produced by MC (fetch + store)
    "bi_averages",       # bi-prediction averaging ops
    "nn_copies",         # prediction samples filled by NN copy
    "df_decisions",      # 8-sample edge segments whose filter decision is evaluated
    "df_segments",       # 8-sample edge segments actually filtered
    "residual_samples",  # dequantize + add + clip per reconstructed sample
    "coeffs",            # nonzero quantized residual values (parsing stand-in)
    "intra_samples",     # intra reconstruction per sample
)


@dataclass(frozen=True)
class CostProfile:
    """Weight per counted operation.

    The defaults put deblocking at roughly 13-20% and MC at 30-45% of an
    inter-frame decode on the synthetic clips; load a JSON file to match a
    measured platform instead.
    """

    mc_macs: float = 0.35
    mc_samples: float = 2.0
    bi_averages: float = 1.0
    nn_copies: float = 1.0
    df_decisions: float = 120.0
    df_segments: float = 350.0
    residual_samples: float = 14.0
    coeffs: float = 150.0
    intra_samples: float = 16.0

    def __post_init__(self):
        for fd in fields(self):
            if getattr(self, fd.name) < 0:
                raise ValidationError(f"cost weight {fd.name} must be nonnegative")

    @classmethod
    def load(cls, path: str | Path) -> "CostProfile":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - {fd.name for fd in fields(cls)}
        if unknown:
            raise ValidationError(f"unknown cost weights: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_PROFILE = CostProfile()


@dataclass(frozen=True)
class CostLedger:
    """Raw operation counts for one decoded frame, one entry per CTU."""

    counts: Mapping[str, np.ndarray]
    wallclock: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        missing = set(COUNTERS) - set(self.counts)
        if missing:
            raise ValidationError(f"ledger lacks counters {sorted(missing)}")
        for k, v in self.counts.items():
            if (np.asarray(v) < 0).any():
                raise ValidationError(f"negative count in {k}")

    @classmethod
    def zeros(cls, n: int) -> "CostLedger":
        return cls({k: np.zeros(n, dtype=np.int64) for k in COUNTERS})

    @property
    def N(self) -> int:
        return len(self.counts[COUNTERS[0]])

    def per_ctu(self, profile: CostProfile = DEFAULT_PROFILE) -> np.ndarray:
        total = np.zeros(self.N, dtype=np.float64)
        for k in COUNTERS:
            total += getattr(profile, k) * self.counts[k]
        return total

    def total(self, profile: CostProfile = DEFAULT_PROFILE) -> float:
        return float(self.per_ctu(profile).sum())

    def stage_totals(self, profile: CostProfile = DEFAULT_PROFILE) -> dict[str, float]:
        """Weighted cost grouped into mc, df and other."""
        w = {k: getattr(profile, k) * float(np.sum(self.counts[k])) for k in COUNTERS}
        mc = w["mc_macs"] + w["mc_samples"] + w["bi_averages"] + w["nn_copies"]
        df = w["df_decisions"] + w["df_segments"]
        return {"mc": mc, "df": df, "other": sum(w.values()) - mc - df}

    def to_dict(self) -> dict:
        out = {k: [int(x) for x in self.counts[k]] for k in COUNTERS}
        if self.wallclock:
            out["wallclock"] = dict(self.wallclock)
        return out


def sequence_cost(ledgers, profile: CostProfile = DEFAULT_PROFILE) -> float:
    return float(sum(led.total(profile) for led in ledgers))
