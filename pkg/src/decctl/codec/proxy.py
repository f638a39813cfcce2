"""Proxy block codec: closed-loop encoder and a decoder that honors control plans."""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from ..core_types import ControlPlan, FrameLayout, ValidationError, validate_plan
from .deblock import GRID, deblock_with_counts
from .gop import FrameInfo, GopStructure
from .interp import macs_per_sample, phase_planes, predict_blocks, skip_pattern
from .ledger import COUNTERS, CostLedger
from .motion import MotionConfig, block_origins, from_blocks, integer_search, refine_quarter_pel, to_blocks

MODE_L0, MODE_L1, MODE_BI = 0, 1, 2
MAX_QP = 51


def qstep(qp: int) -> float:
    return 2.0 ** ((qp - 4) / 6.0)


# Dead-zone rounding offsets, as in common HEVC encoders.
INTRA_ROUNDING = 1 / 3
INTER_ROUNDING = 1 / 6


def quantize(x: np.ndarray, qp: int, rounding: float = 0.5) -> np.ndarray:
    """Uniform scalar quantizer with step 2^((qp-4)/6); rounding 0.5 is plain rounding."""
    x = np.asarray(x, dtype=np.float64)
    q = np.sign(x) * np.floor(np.abs(x) / qstep(qp) + rounding)
    return np.clip(q, -32768, 32767).astype(np.int16)


def dequantize(q: np.ndarray, qp: int) -> np.ndarray:
    return np.rint(q.astype(np.float64) * qstep(qp)).astype(np.int32)


@dataclass
class CodedFrame:
    poc: int
    frame_type: str
    layer: int
    refs: tuple[int, ...]
    qp: int
    modes: np.ndarray      # uint8 per block, empty for intra
    mv0: np.ndarray        # int16 (nb, 2) quarter-pel (dy, dx)
    mv1: np.ndarray
    residual: np.ndarray   # int16 quantized plane, padded size

    @property
    def is_intra(self) -> bool:
        return self.frame_type == "I"

    def same_as(self, other: "CodedFrame") -> bool:
        return (self.poc, self.frame_type, self.layer, tuple(self.refs), self.qp) == \
            (other.poc, other.frame_type, other.layer, tuple(other.refs), other.qp) and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("modes", "mv0", "mv1", "residual"))


@dataclass
class ProxySequence:
    layout: FrameLayout
    gop: GopStructure
    motion: MotionConfig
    frames: list[CodedFrame] = field(default_factory=list)  # decode order

    @property
    def padded_shape(self) -> tuple[int, int]:
        bs = self.motion.block_size
        return (-(-self.layout.height // bs) * bs, -(-self.layout.width // bs) * bs)

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def by_poc(self, poc: int) -> CodedFrame:
        for fr in self.frames:
            if fr.poc == poc:
                return fr
        raise KeyError(poc)

    def qps(self) -> dict[int, int]:
        return {fr.poc: fr.qp for fr in self.frames}

    def intra_pocs(self) -> list[int]:
        return sorted(fr.poc for fr in self.frames if fr.is_intra)


def frame_qp(qp: Union[int, Sequence[int]], info: FrameInfo) -> int:
    """Base QP plus the hierarchy layer for B frames; a sequence gives per-POC QPs."""
    if isinstance(qp, (int, np.integer)):
        value = int(qp) if info.is_intra else min(MAX_QP, int(qp) + info.layer)
    else:
        value = int(qp[info.poc])
    if not 0 <= value <= MAX_QP:
        raise ValidationError(f"QP {value} outside 0..{MAX_QP}")
    return value


def _pad(frame: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = frame.shape
    return np.pad(frame, ((0, shape[0] - h), (0, shape[1] - w)), mode="edge")


def _activity(coded: CodedFrame, shape: tuple[int, int], bsize: int) -> tuple[np.ndarray, np.ndarray]:
    """Edges with a coding discontinuity: nonzero residual on either side, or a
    motion break (different prediction mode, or a vector differing by a full
    sample or more)."""
    h, w = shape
    units = (h // GRID, w // GRID)
    if coded.is_intra:
        full = np.ones(units, dtype=bool)
        return full, full
    nz = coded.residual.reshape(units[0], GRID, units[1], GRID).any(axis=(1, 3))
    key = np.concatenate([coded.modes[:, None].astype(np.int32), coded.mv0, coded.mv1], axis=1)
    rep = bsize // GRID
    kb = key.reshape(h // bsize, w // bsize, -1).repeat(rep, axis=0).repeat(rep, axis=1)
    vert = np.zeros(units, dtype=bool)
    horz = np.zeros(units, dtype=bool)
    vert[:, 1:] = nz[:, 1:] | nz[:, :-1] | _motion_break(kb[:, 1:], kb[:, :-1])
    horz[1:, :] = nz[1:, :] | nz[:-1, :] | _motion_break(kb[1:], kb[:-1])
    return vert, horz


def _motion_break(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[..., 0] != b[..., 0]) | (np.abs(a[..., 1:] - b[..., 1:]) >= 4).any(axis=-1)


class _Geometry:
    """Block and CTU bookkeeping shared by encoder and decoder."""

    def __init__(self, layout: FrameLayout, shape: tuple[int, int], bsize: int):
        self.layout = layout
        self.shape = shape
        self.bsize = bsize
        self.ys, self.xs = block_origins(shape[0], shape[1], bsize)
        cmap = layout.ctu_index_map(*shape)
        self.block_ctu = cmap[self.ys, self.xs]
        self.ctu_pixels = np.bincount(cmap.ravel(), minlength=layout.N).astype(np.int64)
        self.cmap = cmap

    def per_ctu(self, per_block: np.ndarray) -> np.ndarray:
        return np.bincount(self.block_ctu, weights=per_block, minlength=self.layout.N).astype(np.int64)


def _predict(coded: CodedFrame, refs: Mapping[int, np.ndarray], geo: _Geometry,
             g_blocks: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    bs = geo.bsize
    nb = len(geo.ys)
    pred = np.empty((nb, bs, bs), dtype=np.int32)
    ref0 = refs[coded.refs[0]]
    ref1 = refs[coded.refs[1]] if len(coded.refs) > 1 else None
    modes = coded.modes
    for mode in (MODE_L0, MODE_L1, MODE_BI):
        sel = np.flatnonzero(modes == mode)
        if sel.size == 0:
            continue
        ys, xs = geo.ys[sel], geo.xs[sel]
        if mode == MODE_L0:
            pred[sel] = predict_blocks(ref0, ys, xs, coded.mv0[sel], bs)
        elif mode == MODE_L1:
            pred[sel] = predict_blocks(ref1, ys, xs, coded.mv1[sel], bs)
        else:
            p0 = predict_blocks(ref0, ys, xs, coded.mv0[sel], bs)
            p1 = predict_blocks(ref1, ys, xs, coded.mv1[sel], bs)
            pred[sel] = (p0 + p1 + 1) >> 1
    for g in (1, 2, 3):
        sel = np.flatnonzero(g_blocks == g)
        if sel.size:
            pred[sel] = skip_pattern(g).apply(pred[sel])

    area = bs * bs
    computed = area * (4 - g_blocks) // 4
    uses0 = (modes == MODE_L0) | (modes == MODE_BI)
    uses1 = (modes == MODE_L1) | (modes == MODE_BI)
    macs = (uses0 * macs_per_sample(coded.mv0) + uses1 * macs_per_sample(coded.mv1))
    counts = {
        "mc_macs": geo.per_ctu(computed * macs),
        "mc_samples": geo.per_ctu(computed * (uses0.astype(np.int64) + uses1)),
        "bi_averages": geo.per_ctu(computed * (modes == MODE_BI)),
        "nn_copies": geo.per_ctu(area - computed),
    }
    return from_blocks(pred, *geo.shape), counts


def reconstruct(coded: CodedFrame, refs: Mapping[int, np.ndarray], geo: _Geometry,
                f: np.ndarray, g: np.ndarray, timings: Optional[dict] = None
                ) -> tuple[np.ndarray, CostLedger]:
    """Decode one frame from its syntax and already-decoded references."""
    missing = [r for r in coded.refs if r not in refs]
    if missing:
        raise ValidationError(f"POC {coded.poc}: reference frame(s) {missing} not decoded")
    clock = time.perf_counter
    t0 = clock()
    counts = {k: np.zeros(geo.layout.N, dtype=np.int64) for k in COUNTERS}
    deq = dequantize(coded.residual, coded.qp)
    if coded.is_intra:
        recon = 128 + deq
        counts["intra_samples"] = geo.ctu_pixels.copy()
    else:
        pred, mc = _predict(coded, refs, geo, g[geo.block_ctu])
        counts.update(mc)
        recon = pred + deq
        counts["residual_samples"] = geo.ctu_pixels.copy()
    counts["coeffs"] = np.bincount(geo.cmap[coded.residual != 0], minlength=geo.layout.N).astype(np.int64)
    recon = np.clip(recon, 0, 255).astype(np.uint8)
    t1 = clock()
    vert, horz = _activity(coded, geo.shape, geo.bsize)
    recon, counts["df_decisions"], counts["df_segments"] = deblock_with_counts(
        recon, f, geo.layout, vert, horz)
    t2 = clock()
    if timings is not None:
        timings["reconstruct_s"] = t1 - t0
        timings["deblock_s"] = t2 - t1
    return recon, CostLedger(counts, dict(timings) if timings is not None else {})


def encode_sequence(frames: Sequence[np.ndarray], gop: GopStructure = GopStructure(),
                    qp: Union[int, Sequence[int]] = 32, *, ctu_size: int = 64,
                    motion: MotionConfig = MotionConfig()) -> ProxySequence:
    """Encode 8-bit luma frames (display order) into a proxy sequence."""
    if len(frames) < 1:
        raise ValidationError("need at least one frame")
    shape = np.shape(frames[0])
    if len(shape) != 2:
        raise ValidationError(f"frames must be 2-D luma planes, got shape {shape}")
    for i, fr in enumerate(frames):
        if np.shape(fr) != shape:
            raise ValidationError(f"frame {i} has shape {np.shape(fr)}, expected {shape}")
    if not isinstance(qp, (int, np.integer)) and len(qp) != len(frames):
        raise ValidationError(f"{len(qp)} QPs for {len(frames)} frames")
    if motion.block_size % GRID:
        raise ValidationError(f"block size must be a multiple of {GRID}")
    layout = FrameLayout(shape[1], shape[0], ctu_size)
    seq = ProxySequence(layout, gop, motion)
    hp, wp = seq.padded_shape
    geo = _Geometry(layout, (hp, wp), motion.block_size)
    neutral_f = np.zeros(layout.N, dtype=np.int64)
    margin = motion.search_range + 4
    planes: OrderedDict[int, np.ndarray] = OrderedDict()
    recon: dict[int, np.ndarray] = {}

    def planes_of(poc: int) -> np.ndarray:
        if poc not in planes:
            planes[poc] = phase_planes(recon[poc], margin)
            while len(planes) > 6:
                planes.popitem(last=False)
        planes.move_to_end(poc)
        return planes[poc]

    nb = len(geo.ys)
    for info in gop.decode_order(len(frames)):
        src = _pad(np.asarray(frames[info.poc]), (hp, wp)).astype(np.int32)
        fqp = frame_qp(qp, info)
        if info.is_intra:
            empty = np.zeros((0, 2), dtype=np.int16)
            coded = CodedFrame(info.poc, "I", 0, (), fqp, np.zeros(0, np.uint8), empty, empty,
                               quantize(src - 128, fqp, INTRA_ROUNDING))
        else:
            cur_blocks = to_blocks(src, motion.block_size)
            found = []
            for ref in info.refs:
                mv_int, _ = integer_search(src, recon[ref], motion)
                found.append(refine_quarter_pel(cur_blocks, planes_of(ref), margin,
                                                geo.ys, geo.xs, mv_int, motion))
            mv0 = found[0][0]
            mv1 = np.zeros_like(mv0)
            modes = np.full(nb, MODE_L0, dtype=np.uint8)
            if len(found) == 2:
                mv1 = found[1][0]
                bi = (found[0][2] + found[1][2] + 1) >> 1
                lam_q = motion.mv_lambda / 4.0
                cost_bi = (((cur_blocks - bi) ** 2).sum(axis=(1, 2))
                           + lam_q * (np.abs(mv0).sum(axis=1) + np.abs(mv1).sum(axis=1)))
                costs = np.stack([found[0][1], found[1][1], cost_bi], axis=1)
                modes = _choose_modes(costs, (hp // motion.block_size, wp // motion.block_size),
                                      motion.mode_switch_weight * qstep(fqp) ** 2)
                mv0 = np.where((modes == MODE_L1)[:, None], 0, mv0)
                mv1 = np.where((modes == MODE_L0)[:, None], 0, mv1)
            coded = CodedFrame(info.poc, "B", info.layer, info.refs, fqp, modes,
                               mv0.astype(np.int16), mv1.astype(np.int16),
                               np.zeros((hp, wp), dtype=np.int16))
            pred, _ = _predict(coded, recon, geo, np.zeros(nb, dtype=np.int64))
            coded.residual = quantize(src - pred, fqp, INTER_ROUNDING)
        recon[info.poc], _ = reconstruct(coded, recon, geo, neutral_f, neutral_f)
        seq.frames.append(coded)
    return seq


def _choose_modes(costs: np.ndarray, grid: tuple[int, int], penalty: float) -> np.ndarray:
    """Raster-order mode decision that charges ``penalty`` per differing causal neighbor."""
    rows, cols = grid
    modes = np.zeros(rows * cols, dtype=np.uint8)
    for i in range(rows * cols):
        c = costs[i].copy()
        r, k = divmod(i, cols)
        if k:
            c += penalty * (np.arange(3) != modes[i - 1])
        if r:
            c += penalty * (np.arange(3) != modes[i - cols])
        modes[i] = int(np.argmin(c))
    return modes


class CtuDecisions(NamedTuple):
    """Raw per-CTU settings for measurement decodes (e.g. MC skipping with DF on),
    which need not satisfy the planner's branch rules."""

    f: Sequence[int]
    g: Sequence[int]


FramePlan = Union[ControlPlan, CtuDecisions]
PlanSet = Union[None, Mapping[int, FramePlan], Sequence[Optional[FramePlan]]]


def _plan_for(plans: PlanSet, poc: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    plan = None
    if plans is not None:
        if isinstance(plans, Mapping):
            plan = plans.get(poc)
        elif poc < len(plans):
            plan = plans[poc]
    if plan is None:
        z = np.zeros(n, dtype=np.int64)
        return z, z
    if isinstance(plan, ControlPlan):
        validate_plan(plan)
    f = np.asarray(plan.f, dtype=np.int64)
    g = np.asarray(plan.g, dtype=np.int64)
    if f.shape != (n,) or g.shape != (n,):
        raise ValidationError(f"plan for POC {poc} has {f.size}/{g.size} entries, layout has {n} CTUs")
    if not np.isin(f, (0, 1)).all() or not np.isin(g, (0, 1, 2, 3)).all():
        raise ValidationError(f"plan for POC {poc} has f outside {{0,1}} or g outside 0..3")
    return f, g


@dataclass
class DecodeResult:
    frames: list[np.ndarray]     # display order, cropped to the layout
    ledgers: list[CostLedger]    # display order
    padded: dict[int, np.ndarray] = field(repr=False, default_factory=dict)


def decode_sequence(seq: ProxySequence, plans: PlanSet = None, *,
                    wallclock: bool = False) -> DecodeResult:
    """Decode in decode order; a missing plan means f=0, g=0 for that frame."""
    geo = _Geometry(seq.layout, seq.padded_shape, seq.motion.block_size)
    recon: dict[int, np.ndarray] = {}
    ledgers: dict[int, CostLedger] = {}
    for coded in seq.frames:
        f, g = _plan_for(plans, coded.poc, seq.layout.N)
        timings = {} if wallclock else None
        recon[coded.poc], ledgers[coded.poc] = reconstruct(coded, recon, geo, f, g, timings)
    h, w = seq.layout.height, seq.layout.width
    pocs = sorted(recon)
    return DecodeResult([recon[p][:h, :w] for p in pocs], [ledgers[p] for p in pocs], recon)


def decode_one(seq: ProxySequence, poc: int, refs: Mapping[int, np.ndarray],
               plan: Optional[FramePlan]) -> tuple[np.ndarray, CostLedger]:
    """Decode a single frame against given (padded) references."""
    geo = _Geometry(seq.layout, seq.padded_shape, seq.motion.block_size)
    f, g = _plan_for({poc: plan} if plan is not None else None, poc, seq.layout.N)
    recon, led = reconstruct(seq.by_poc(poc), refs, geo, f, g)
    return recon[:seq.layout.height, :seq.layout.width], led
