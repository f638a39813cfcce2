"""Sequence-level planning and planned-decode experiments."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .codec.gop import GopStructure
from .codec.ledger import DEFAULT_PROFILE, CostProfile
from .codec.motion import MotionConfig
from .codec.proxy import DecodeResult, ProxySequence, decode_sequence, encode_sequence
from .codec.synthetic import generate_clip
from .core_types import ControlPlan, ModelParams, SaliencyMap, qp_bucket
from .evaluation import achieved_reduction, ew_psnr, propagation_profile, psnr
from .models import max_achievable_reduction
from .solver import InfeasibleTargetError, MixTable, build_mix_table, plan_frame


@dataclass
class ClipSpec:
    """A synthetic clip and how to code it."""

    name: str = "translating_texture"
    seed: int = 0
    width: int = 832
    height: int = 480
    frames: int = 33
    qp: int = 32
    ctu_size: int = 64
    gop: int = 8
    intra_period: int = 32
    search_range: int = 16

    @property
    def label(self) -> str:
        return f"{self.name}-s{self.seed}"


@dataclass
class PreparedClip:
    spec: ClipSpec
    source: list[np.ndarray]
    saliency: dict[int, SaliencyMap]
    seq: ProxySequence
    reference: DecodeResult


def prepare_clip(spec: ClipSpec) -> PreparedClip:
    clip = generate_clip(spec.name, spec.width, spec.height, spec.frames, spec.seed)
    seq = encode_sequence(clip.frames, GopStructure(spec.gop, spec.intra_period), spec.qp,
                          ctu_size=spec.ctu_size, motion=MotionConfig(search_range=spec.search_range))
    return PreparedClip(spec, clip.frames, clip.ctu_saliency(seq.layout), seq, decode_sequence(seq))


def plan_sequence(seq: ProxySequence, saliency: Mapping[int, SaliencyMap], target: float,
                  params: ModelParams, *, table: Optional[MixTable] = None,
                  cap_infeasible: bool = False) -> tuple[dict[int, ControlPlan], list[dict]]:
    """Plan every frame at one target; infeasible frames raise or are capped at their MAR."""
    if table is None and target > 0:
        table = build_mix_table(seq.layout.N, params)
    plans, diags = {}, []
    for fr in sorted(seq.frames, key=lambda c: c.poc):
        bucket = qp_bucket(fr.qp)
        sal = saliency[fr.poc]
        t0 = time.perf_counter()
        try:
            plan = plan_frame(sal, target, bucket, params, table, intra=fr.is_intra)
        except InfeasibleTargetError:
            if not cap_infeasible:
                raise
            plan = plan_frame(sal, max_achievable_reduction(sal, bucket, params), bucket, params,
                              table, intra=fr.is_intra)
        elapsed = time.perf_counter() - t0
        plans[fr.poc] = plan
        d = plan.diagnostics.to_dict() if plan.diagnostics is not None else {}
        d.update(frame=fr.poc, frame_type=fr.frame_type, qp=fr.qp, plan_seconds=elapsed)
        diags.append(d)
    return plans, diags


@dataclass
class RunResult:
    target: float
    achieved: float
    predicted: float
    delta_psnr: float
    delta_ew_psnr: float
    frame_rows: list[dict] = field(default_factory=list)
    propagation: dict[int, float] = field(default_factory=dict)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("frame_rows")
        d["propagation"] = {str(k): v for k, v in self.propagation.items()}
        return d


def run_planned(prep: PreparedClip, plans: Mapping[int, ControlPlan], target: float,
                profile: CostProfile = DEFAULT_PROFILE, *, with_propagation: bool = False,
                plan_seconds: Optional[Sequence[float]] = None) -> RunResult:
    """Decode with plans and compare cost and quality against the unplanned decode."""
    ref = prep.reference
    out = decode_sequence(prep.seq, plans)
    achieved = achieved_reduction(ref.ledgers, out.ledgers, profile)
    weights = [prep.saliency[p] for p in range(len(prep.source))]
    p_ref = psnr(prep.source, ref.frames)
    p_out = psnr(prep.source, out.frames)
    e_ref = ew_psnr(prep.source, ref.frames, weights)
    e_out = ew_psnr(prep.source, out.frames, weights)
    rows = []
    for p in range(len(prep.source)):
        fr = prep.seq.by_poc(p)
        base = ref.ledgers[p].total(profile)
        row = {
            "frame": p, "type": fr.frame_type, "qp": fr.qp, "target": target,
            "predicted": plans[p].predicted_reduction if p in plans else 0.0,
            "achieved": (base - out.ledgers[p].total(profile)) / base,
            "psnr_ref": p_ref.per_frame[p], "psnr_planned": p_out.per_frame[p],
            "delta_psnr": p_ref.per_frame[p] - p_out.per_frame[p],
            "delta_ew_psnr": e_ref.per_frame[p] - e_out.per_frame[p],
        }
        if plan_seconds is not None:
            row["plan_ms"] = 1000.0 * plan_seconds[p]
        rows.append(row)
    predicted = (sum(ref.ledgers[p].total(profile) * rows[p]["predicted"] for p in range(len(rows)))
                 / sum(led.total(profile) for led in ref.ledgers))
    prop = propagation_profile(prep.seq, plans, ref) if with_propagation else {}
    return RunResult(target, achieved, predicted, p_ref.mean - p_out.mean, e_ref.mean - e_out.mean,
                     rows, prop)
