"""Block motion search: integer full search via FFT correlation, then quarter-pel refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interp import gather_from_planes


@dataclass(frozen=True)
class MotionConfig:
    block_size: int = 16
    search_range: int = 16
    # Rate stand-in: cost per integer-pel of |mv|_1, keeps flat areas at zero motion.
    mv_lambda: float = 4.0
    # Mode-change cost between neighboring blocks, in units of qstep^2.
    mode_switch_weight: float = 2.0


def block_origins(height: int, width: int, bsize: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-left corners of the block grid in raster order."""
    ys, xs = np.meshgrid(np.arange(0, height, bsize), np.arange(0, width, bsize), indexing="ij")
    return ys.ravel(), xs.ravel()


def to_blocks(plane: np.ndarray, bsize: int) -> np.ndarray:
    h, w = plane.shape
    return (plane.reshape(h // bsize, bsize, w // bsize, bsize)
            .transpose(0, 2, 1, 3).reshape(-1, bsize, bsize))


def from_blocks(blocks: np.ndarray, height: int, width: int) -> np.ndarray:
    bsize = blocks.shape[-1]
    return (blocks.reshape(height // bsize, width // bsize, bsize, bsize)
            .transpose(0, 2, 1, 3).reshape(height, width))


def integer_search(cur: np.ndarray, ref: np.ndarray, cfg: MotionConfig) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive integer search over +-R for every block.

    SSD for all displacements comes from one batched FFT cross-correlation plus
    box sums of the squared reference. Returns (mvs in integer pels as (dy, dx),
    cost). Ties resolve to the first displacement in raster order.
    """
    bs, R = cfg.block_size, cfg.search_range
    h, w = cur.shape
    ys, xs = block_origins(h, w, bs)
    span = bs + 2 * R
    refp = np.pad(ref.astype(np.float64), R, mode="edge")
    idx = np.arange(span)
    win = refp[(ys[:, None] + idx)[:, :, None], (xs[:, None] + idx)[:, None, :]]
    blk = to_blocks(cur.astype(np.float64), bs)

    F = np.fft.rfft2(win, s=(span, span))
    G = np.fft.rfft2(blk, s=(span, span))
    corr = np.fft.irfft2(F * np.conj(G), s=(span, span))[:, :2 * R + 1, :2 * R + 1]
    sq = _box_sums(refp**2, ys, xs, bs, 2 * R + 1)
    ssd = np.rint(sq - 2 * corr + (blk**2).sum(axis=(1, 2))[:, None, None])

    d = np.arange(-R, R + 1)
    penalty = cfg.mv_lambda * (np.abs(d)[:, None] + np.abs(d)[None, :])
    cost = (ssd + penalty).reshape(len(ys), -1)
    best = cost.argmin(axis=1)
    mvs = np.stack([best // (2 * R + 1) - R, best % (2 * R + 1) - R], axis=1)
    return mvs.astype(np.int64), cost[np.arange(len(ys)), best]


def _box_sums(plane: np.ndarray, ys: np.ndarray, xs: np.ndarray, bs: int, n: int) -> np.ndarray:
    """Sums of every bs x bs window whose corner lies in an n x n grid at each origin."""
    integral = np.zeros((plane.shape[0] + 1, plane.shape[1] + 1))
    integral[1:, 1:] = plane.cumsum(axis=0).cumsum(axis=1)
    r = (ys[:, None] + np.arange(n))[:, :, None]
    c = (xs[:, None] + np.arange(n))[:, None, :]
    return integral[r + bs, c + bs] - integral[r, c + bs] - integral[r + bs, c] + integral[r, c]


_RING = [(0, 0)] + [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]


def refine_quarter_pel(cur_blocks: np.ndarray, planes: np.ndarray, margin: int,
                       ys: np.ndarray, xs: np.ndarray, mv_int: np.ndarray,
                       cfg: MotionConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pel then quarter-pel 3x3 refinement around the integer vector.

    Returns (mvs in quarter-pel, cost, prediction blocks).
    """
    bs, R = cfg.block_size, cfg.search_range
    lam_q = cfg.mv_lambda / 4.0
    cur = cur_blocks.astype(np.int64)
    best_mv = mv_int * 4
    best_pred = gather_from_planes(planes, margin, ys, xs, best_mv, bs)
    best_cost = _cost(cur, best_pred, best_mv, lam_q)
    for step in (2, 1):
        center = best_mv.copy()
        for dy, dx in _RING[1:]:
            cand = center + np.array([dy * step, dx * step])
            np.clip(cand, -4 * R, 4 * R, out=cand)
            pred = gather_from_planes(planes, margin, ys, xs, cand, bs)
            cost = _cost(cur, pred, cand, lam_q)
            better = cost < best_cost
            best_cost = np.where(better, cost, best_cost)
            best_mv[better] = cand[better]
            best_pred[better] = pred[better]
    return best_mv, best_cost, best_pred


def _cost(cur: np.ndarray, pred: np.ndarray, mvs: np.ndarray, lam_q: float) -> np.ndarray:
    ssd = ((cur - pred) ** 2).sum(axis=(1, 2))
    return ssd + lam_q * np.abs(mvs).sum(axis=1)
