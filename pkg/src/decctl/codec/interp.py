"""Quarter-pel luma interpolation and the NN-copy skip patterns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core_types import ValidationError

# 8-tap luma filters per quarter-pel phase (HEVC family), taps sum to 64.
LUMA_FILTERS = np.array([
    [0, 0, 0, 64, 0, 0, 0, 0],
    [-1, 4, -10, 58, 17, -5, 1, 0],
    [-1, 4, -11, 40, 40, -11, 4, -1],
    [0, 1, -5, 17, 58, -10, 4, -1],
], dtype=np.int32)
TAPS = 8
TAP_OFFSET = 3  # taps start this many samples before the target position

# Multiply-accumulates per output sample for a filtered direction.
MACS_PER_DIRECTION = TAPS


def _round_shift(v: np.ndarray) -> np.ndarray:
    return np.clip((v + 2048) >> 12, 0, 255)


def predict_blocks(ref: np.ndarray, ys: np.ndarray, xs: np.ndarray, mvs: np.ndarray,
                   bsize: int) -> np.ndarray:
    """Motion-compensated prediction of square blocks.

    ``mvs`` holds (dy, dx) in quarter-pel units. Reference samples outside the
    plane repeat the nearest edge sample. Returns int32 (nb, bsize, bsize).
    """
    h, w = ref.shape
    mvs = np.asarray(mvs, dtype=np.int64)
    iy, fy = mvs[:, 0] >> 2, mvs[:, 0] & 3
    ix, fx = mvs[:, 1] >> 2, mvs[:, 1] & 3
    span = np.arange(bsize + TAPS - 1)
    rows = np.clip(ys[:, None] + iy[:, None] - TAP_OFFSET + span, 0, h - 1)
    cols = np.clip(xs[:, None] + ix[:, None] - TAP_OFFSET + span, 0, w - 1)
    patches = ref[rows[:, :, None], cols[:, None, :]].astype(np.int32)

    taps_x = LUMA_FILTERS[fx]
    horiz = np.zeros((len(ys), bsize + TAPS - 1, bsize), dtype=np.int32)
    for k in range(TAPS):
        horiz += taps_x[:, k, None, None] * patches[:, :, k:k + bsize]
    taps_y = LUMA_FILTERS[fy]
    vert = np.zeros((len(ys), bsize, bsize), dtype=np.int32)
    for k in range(TAPS):
        vert += taps_y[:, k, None, None] * horiz[:, k:k + bsize, :]
    return _round_shift(vert)


def phase_planes(ref: np.ndarray, margin: int) -> np.ndarray:
    """All 16 quarter-pel phases of a plane, extended by ``margin`` on each side.

    ``planes[fy, fx, y + margin, x + margin]`` equals the prediction sample at
    ``(y + fy/4, x + fx/4)``, bit-identical to :func:`predict_blocks`.
    """
    h, w = ref.shape
    pad = margin + 4
    padded = np.pad(ref.astype(np.int32), pad, mode="edge")
    hp, wp = h + 2 * margin, w + 2 * margin
    out = np.empty((4, 4, hp, wp), dtype=np.int16)
    for fx in range(4):
        horiz = np.zeros((padded.shape[0], wp), dtype=np.int32)
        for k in range(TAPS):
            horiz += LUMA_FILTERS[fx, k] * padded[:, 1 + k:1 + k + wp]
        for fy in range(4):
            vert = np.zeros((hp, wp), dtype=np.int32)
            for k in range(TAPS):
                vert += LUMA_FILTERS[fy, k] * horiz[1 + k:1 + k + hp, :]
            out[fy, fx] = _round_shift(vert)
    return out


def gather_from_planes(planes: np.ndarray, margin: int, ys: np.ndarray, xs: np.ndarray,
                       mvs: np.ndarray, bsize: int) -> np.ndarray:
    mvs = np.asarray(mvs, dtype=np.int64)
    _, _, hp, wp = planes.shape
    span = np.arange(bsize)
    rows = np.clip(ys[:, None] + (mvs[:, 0:1] >> 2) + margin + span, 0, hp - 1)
    cols = np.clip(xs[:, None] + (mvs[:, 1:2] >> 2) + margin + span, 0, wp - 1)
    fy = (mvs[:, 0] & 3)[:, None, None]
    fx = (mvs[:, 1] & 3)[:, None, None]
    return planes[fy, fx, rows[:, :, None], cols[:, None, :]].astype(np.int32)


def macs_per_sample(mvs: np.ndarray) -> np.ndarray:
    """Filter multiply-accumulates per predicted sample for each block's MV."""
    mvs = np.asarray(mvs, dtype=np.int64)
    return MACS_PER_DIRECTION * ((mvs[:, 0] & 3 != 0).astype(np.int64)
                                 + (mvs[:, 1] & 3 != 0).astype(np.int64))


_POS = {"TL": (0, 0), "TR": (0, 1), "BL": (1, 0), "BR": (1, 1)}
_COPIES = {
    0: (),
    1: (("BR", "TL"),),
    2: (("TR", "TL"), ("BR", "BL")),
    3: (("TR", "TL"), ("BL", "TL"), ("BR", "TL")),
}


@dataclass(frozen=True)
class SkipPattern:
    """Which positions of each aligned 2x2 group are NN-copied, and from where."""

    g: int
    copies: tuple[tuple[str, str], ...]

    @property
    def computed(self) -> tuple[str, ...]:
        targets = {t for t, _ in self.copies}
        return tuple(p for p in _POS if p not in targets)

    @property
    def mask(self) -> np.ndarray:
        """2x2 boolean array, True where MC is computed."""
        m = np.ones((2, 2), dtype=bool)
        for t, _ in self.copies:
            m[_POS[t]] = False
        return m

    def apply(self, pred: np.ndarray) -> np.ndarray:
        """Overwrite copied positions of (..., H, W) predictions, H and W even."""
        out = pred.copy()
        for target, source in self.copies:
            ty, tx = _POS[target]
            sy, sx = _POS[source]
            out[..., ty::2, tx::2] = out[..., sy::2, sx::2]
        return out


def skip_pattern(g: int) -> SkipPattern:
    if g not in _COPIES:
        raise ValidationError(f"g must be in 0..3, got {g}")
    return SkipPattern(g, _COPIES[g])
