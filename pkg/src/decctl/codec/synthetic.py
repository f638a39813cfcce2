"""Synthetic luma clips with matching saliency, and raw 8-bit luma I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from ..core_types import FrameLayout, SaliencyMap, ValidationError, normalize_saliency
from ..io import atomic_write_bytes

CLIP_NAMES = ("translating_texture", "moving_gradient", "static")


@dataclass
class SyntheticClip:
    name: str
    seed: int
    frames: list[np.ndarray]           # uint8 (H, W), display order
    pixel_saliency: list[np.ndarray]   # float (H, W), nonnegative

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def ctu_saliency(self, layout: FrameLayout) -> dict[int, SaliencyMap]:
        """Per-CTU mean of the pixel saliency, normalized per frame by its maximum."""
        return {i: normalize_saliency(layout.per_ctu_mean(s), layout)
                for i, s in enumerate(self.pixel_saliency)}


def _texture(rng: np.random.Generator, shape: tuple[int, int], sigmas: Sequence[float],
             amplitude: float) -> np.ndarray:
    out = np.zeros(shape)
    for s in sigmas:
        layer = ndimage.gaussian_filter(rng.standard_normal(shape), s, mode="wrap")
        out += layer / (layer.std() + 1e-12)
    return amplitude * out / len(sigmas)


def _sample(prefiltered: np.ndarray, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    return ndimage.map_coordinates(prefiltered, [yy, xx], order=3, mode="grid-wrap", prefilter=False)


def _center_bias(h: int, w: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return np.exp(-(((yy - h / 2) / (0.35 * h)) ** 2 + ((xx - w / 2) / (0.35 * w)) ** 2) / 2)


def _translating_texture(rng, h, w, n):
    bg = _texture(rng, (h + 64, w + 64), (1.5, 4.0, 12.0), 40.0) + 128
    bg_c = ndimage.spline_filter(bg, order=3, mode="grid-wrap")
    bg_v = rng.uniform(0.4, 2.2, 2) * rng.choice([-1, 1], 2)
    n_obj = int(rng.integers(1, 3))
    objs = []
    for _ in range(n_obj):
        r = rng.uniform(0.10, 0.17) * min(h, w)
        size = int(2 * r) + 16
        mean = rng.uniform(70, 190)
        texs = [ndimage.spline_filter(_texture(rng, (size, size), (1.0, 3.0), amp) + m,
                                      order=3, mode="grid-wrap")
                for amp, m in ((45.0, mean), (30.0, 0.0), (30.0, 0.0))]
        objs.append(dict(
            r=r, size=size, tex=texs, morph=rng.uniform(0.10, 0.20), phase=rng.uniform(0, 2 * np.pi),
            pos=np.array([rng.uniform(r, h - r), rng.uniform(r, w - r)]),
            vel=rng.uniform(1.5, 4.0, 2) * rng.choice([-1, 1], 2),
            spin=rng.uniform(0.02, 0.05) * rng.choice([-1, 1]),
        ))
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    bias = _center_bias(h, w)
    frames, sal = [], []
    for t in range(n):
        img = _sample(bg_c, yy + bg_v[0] * t, xx + bg_v[1] * t)
        s = 0.15 * bias
        for o in objs:
            cy, cx = o["pos"] + o["vel"] * t
            # Bounce inside the frame.
            cy = _reflect(cy, o["r"], h - o["r"])
            cx = _reflect(cx, o["r"], w - o["r"])
            d = np.hypot(yy - cy, xx - cx)
            alpha = np.clip(o["r"] + 1.0 - d, 0.0, 1.0)
            th = o["spin"] * t
            dy, dx = yy - cy, xx - cx
            u = np.cos(th) * dy - np.sin(th) * dx + o["size"] / 2
            v = np.sin(th) * dy + np.cos(th) * dx + o["size"] / 2
            # Appearance changes at a steady rate (non-rigid content).
            ph = o["phase"] + o["morph"] * t
            base, ta, tb = (_sample(tx, u, v) for tx in o["tex"])
            obj = base + np.cos(ph) * ta + np.sin(ph) * tb
            img = alpha * obj + (1 - alpha) * img
            # Attention follows the object with a soft rim.
            s = np.maximum(s, 1.0 / (1.0 + np.exp((d - 1.2 * o["r"]) / (0.3 * o["r"]))))
        frames.append(img)
        sal.append(s)
    return frames, sal


def _reflect(v: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return (lo + hi) / 2
    m = (v - lo) % (2 * span)
    return lo + (m if m <= span else 2 * span - m)


def _moving_gradient(rng, h, w, n):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    k = rng.uniform(0.02, 0.06, 2)
    k2 = rng.uniform(0.005, 0.015, 2)
    v = rng.uniform(0.5, 2.0, 2)
    bias = _center_bias(h, w)
    frames, sal = [], []
    for t in range(n):
        y, x = yy + v[0] * t, xx + v[1] * t
        img = 128 + 50 * np.sin(k[0] * y + k[1] * x) + 40 * np.cos(k2[0] * y - k2[1] * x)
        frames.append(img)
        sal.append(bias)
    return frames, sal


def generate_clip(name: str, width: int, height: int, frames: int, seed: int = 0,
                  noise: float = 1.0) -> SyntheticClip:
    """Deterministic clip by name: translating_texture, moving_gradient or static."""
    if name not in CLIP_NAMES:
        raise ValidationError(f"unknown clip {name!r}; choose from {CLIP_NAMES}")
    if width < 1 or height < 1 or frames < 1:
        raise ValidationError("clip dimensions and frame count must be positive")
    rng = np.random.default_rng(seed)
    if name == "static":
        imgs = [np.full((height, width), 128.0) for _ in range(frames)]
        sal = [_center_bias(height, width)] * frames
        noise = 0.0
    elif name == "moving_gradient":
        imgs, sal = _moving_gradient(rng, height, width, frames)
    else:
        imgs, sal = _translating_texture(rng, height, width, frames)
    out = []
    for img in imgs:
        if noise:
            img = img + rng.normal(0.0, noise, img.shape)
        out.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    return SyntheticClip(name, seed, out, [np.asarray(s, dtype=np.float64) for s in sal])


def read_raw_luma(path: str | Path, width: int, height: int, frames: int | None = None) -> list[np.ndarray]:
    """Frame-major 8-bit luma planes."""
    data = np.fromfile(path, dtype=np.uint8)
    size = width * height
    if data.size % size:
        raise ValidationError(f"{path}: {data.size} bytes is not a whole number of {width}x{height} frames")
    available = data.size // size
    n = available if frames is None else frames
    if n > available:
        raise ValidationError(f"{path}: requested {n} frames, file holds {available}")
    return [data[i * size:(i + 1) * size].reshape(height, width).copy() for i in range(n)]


def write_raw_luma(path: str | Path, frames: Sequence[np.ndarray]) -> None:
    atomic_write_bytes(path, b"".join(np.ascontiguousarray(fr, dtype=np.uint8).tobytes()
                                      for fr in frames))
