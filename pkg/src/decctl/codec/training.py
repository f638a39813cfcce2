"""Training samples for the complexity and quality models, measured on the proxy codec."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..core_types import SaliencyMap, qp_bucket
from ..fitting import DfComplexitySample, McComplexitySample, McMseSample, spearman_rcc
from .ledger import DEFAULT_PROFILE, CostProfile
from .proxy import CtuDecisions, DecodeResult, ProxySequence, decode_sequence


@dataclass
class TrainingSamples:
    df: list[DfComplexitySample] = field(default_factory=list)
    mc: list[McComplexitySample] = field(default_factory=list)
    mse: list[McMseSample] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)
    df_srcc: list[float] = field(default_factory=list)  # per-frame SRCC diagnostic

    def extend(self, other: "TrainingSamples") -> None:
        self.df += other.df
        self.mc += other.mc
        self.mse += other.mse
        self.excluded += other.excluded
        self.df_srcc += other.df_srcc


def uniform_plans(seq: ProxySequence, f: int, g: int) -> dict[int, CtuDecisions]:
    n = seq.layout.N
    return {fr.poc: CtuDecisions((f,) * n, (g,) * n) for fr in seq.frames}


def _ctu_mse(a: np.ndarray, b: np.ndarray, seq: ProxySequence) -> np.ndarray:
    se = (a.astype(np.float64) - b.astype(np.float64)) ** 2
    return seq.layout.per_ctu_mean(se)


def collect_training_samples(seq: ProxySequence, saliency: Mapping[int, SaliencyMap], *,
                             profile: CostProfile = DEFAULT_PROFILE, max_df_samples: Optional[int] = 3000,
                             seed: int = 0, name: str = "sequence",
                             reference: Optional[DecodeResult] = None) -> TrainingSamples:
    """Decode with DF off and with uniform g in 1..3, and turn the deltas into samples.

    Complexity targets are scaled by the CTU count so that sequences of
    different sizes pool into one regression. Only inter frames contribute.
    """
    out = TrainingSamples()
    N = seq.layout.N
    ref = reference if reference is not None else decode_sequence(seq)
    inter = [fr.poc for fr in seq.frames if not fr.is_intra]
    if not inter:
        out.excluded.append(f"{name}: no inter frames")
        return out
    buckets = {p: int(qp_bucket(seq.by_poc(p).qp)) for p in inter}
    ref_ctu = {p: ref.ledgers[p].per_ctu(profile) for p in inter}
    ref_tot = {p: ref_ctu[p].sum() for p in inter}

    dfoff = decode_sequence(seq, uniform_plans(seq, 1, 0))
    df = []
    for p in inter:
        y = N * (ref_ctu[p] - dfoff.ledgers[p].per_ctu(profile)) / ref_tot[p]
        w = saliency[p].as_array()
        df += [DfComplexitySample(float(wi), float(yi), buckets[p]) for wi, yi in zip(w, y)]
        mse = _ctu_mse(ref.frames[p], dfoff.frames[p], seq)
        rho = spearman_rcc(w * mse, w) if np.ptp(w) > 0 else None
        if rho is not None:
            out.df_srcc.append(rho)
    if max_df_samples is not None and len(df) > max_df_samples:
        keep = np.sort(np.random.default_rng(seed).choice(len(df), max_df_samples, replace=False))
        df = [df[i] for i in keep]
    out.df = df

    by_bucket = defaultdict(list)
    for p in inter:
        by_bucket[buckets[p]].append(p)
    mse_g: dict[int, dict[int, float]] = defaultdict(dict)
    for g in (1, 2, 3):
        dec = decode_sequence(seq, uniform_plans(seq, 0, g))
        for q, pocs in by_bucket.items():
            deltas = np.concatenate([(ref_ctu[p] - dec.ledgers[p].per_ctu(profile)) / ref_tot[p]
                                     for p in pocs])
            out.mc.append(McComplexitySample(g, float(N * deltas.mean()), q))
            se = [np.mean((ref.frames[p].astype(np.float64) - dec.frames[p]) ** 2) for p in pocs]
            mse_g[q][g] = float(np.mean(se))
    for q in sorted(mse_g):
        denom = mse_g[q][3]
        if denom == 0:
            out.excluded.append(f"{name}: bucket {q} MC skipping caused no distortion (ratio 0/0)")
            continue
        out.mse += [McMseSample(g, mse_g[q][g] / denom, q) for g in (1, 2, 3)]
    return out
