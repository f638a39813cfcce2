"""Whole-frame deblocking on the 8x8 grid with per-CTU disable flags."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..core_types import FrameLayout, ValidationError

GRID = 8


def _filter_pair(p1, p0, q0, q1):
    # Fixed-strength 4-tap low-pass on the two samples adjacent to the edge.
    p0n = (2 * p1 + 3 * p0 + 2 * q0 + q1 + 4) >> 3
    q0n = (p1 + 2 * p0 + 3 * q0 + 2 * q1 + 4) >> 3
    return p0n, q0n


def segment_owners(shape: tuple[int, int], layout: FrameLayout) -> np.ndarray:
    """CTU index owning each 8x8 unit, i.e. the q side of its left and top edges."""
    h, w = shape
    cmap = layout.ctu_index_map(h, w)
    return cmap[::GRID, ::GRID]


def deblock_with_counts(frame: np.ndarray, f: Sequence[int], layout: FrameLayout,
                        vertical_active: Optional[np.ndarray] = None,
                        horizontal_active: Optional[np.ndarray] = None
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deblock ``frame``; also return per-CTU counts of edge decisions and of
    filtered segments.

    The active masks have one entry per 8x8 unit and flag whether its left
    (vertical) or top (horizontal) edge carries a coding discontinuity; column
    or row 0 is ignored. ``None`` treats every edge as active.
    """
    f = np.asarray(f)
    if f.shape != (layout.N,):
        raise ValidationError(f"{f.size} DF flags for {layout.N} CTUs")
    h, w = frame.shape
    if h % GRID or w % GRID:
        raise ValidationError(f"frame {w}x{h} is not a multiple of the {GRID}x{GRID} grid")
    owners = segment_owners(frame.shape, layout)
    enabled = f[owners] == 0
    decided = enabled.copy()
    decided[:, 0] = False
    decided_h = enabled.copy()
    decided_h[0, :] = False
    vert = enabled.copy()
    horz = enabled.copy()
    if vertical_active is not None:
        vert &= vertical_active
    if horizontal_active is not None:
        horz &= horizontal_active
    vert[:, 0] = False
    horz[0, :] = False

    out = frame.astype(np.int32)
    if vert.any():
        cols = np.arange(GRID, w, GRID)
        mask = np.repeat(vert[:, 1:], GRID, axis=0)
        p0n, q0n = _filter_pair(out[:, cols - 2], out[:, cols - 1], out[:, cols], out[:, cols + 1])
        out[:, cols - 1] = np.where(mask, p0n, out[:, cols - 1])
        out[:, cols] = np.where(mask, q0n, out[:, cols])
    if horz.any():
        rows = np.arange(GRID, h, GRID)
        mask = np.repeat(horz[1:, :], GRID, axis=1)
        p0n, q0n = _filter_pair(out[rows - 2], out[rows - 1], out[rows], out[rows + 1])
        out[rows - 1] = np.where(mask, p0n, out[rows - 1])
        out[rows] = np.where(mask, q0n, out[rows])

    decisions = (np.bincount(owners[decided], minlength=layout.N)
                 + np.bincount(owners[decided_h], minlength=layout.N))
    filtered = (np.bincount(owners[vert], minlength=layout.N)
                + np.bincount(owners[horz], minlength=layout.N))
    return out.astype(frame.dtype), decisions.astype(np.int64), filtered.astype(np.int64)


def deblock_frame(frame: np.ndarray, f: Sequence[int], layout: FrameLayout,
                  vertical_active: Optional[np.ndarray] = None,
                  horizontal_active: Optional[np.ndarray] = None) -> np.ndarray:
    return deblock_with_counts(frame, f, layout, vertical_active, horizontal_active)[0]
