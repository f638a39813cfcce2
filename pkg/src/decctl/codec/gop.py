"""Hierarchical-B random-access GOP structure."""

from __future__ import annotations

from dataclasses import dataclass

from ..core_types import ValidationError


@dataclass(frozen=True)
class FrameInfo:
    poc: int
    frame_type: str  # "I" or "B"
    layer: int
    refs: tuple[int, ...]

    @property
    def is_intra(self) -> bool:
        return self.frame_type == "I"


@dataclass(frozen=True)
class GopStructure:
    gop_size: int = 8
    intra_period: int = 32

    def __post_init__(self):
        if self.gop_size < 1 or self.intra_period < 1:
            raise ValidationError("gop_size and intra_period must be positive")
        if self.intra_period % self.gop_size:
            raise ValidationError(
                f"intra_period {self.intra_period} is not a multiple of gop_size {self.gop_size}")

    def decode_order(self, num_frames: int) -> list[FrameInfo]:
        """Frames in decode order.

        POC 0 and every ``intra_period``-th POC are intra. Each GOP decodes its
        last frame first (layer 1, referencing the previous anchor), then the
        interior by recursive bisection: the midpoint of two decoded frames
        references both and sits one layer deeper. A short final GOP ends at the
        last frame.
        """
        if num_frames < 1:
            raise ValidationError("need at least one frame")
        order = [FrameInfo(0, "I", 0, ())]
        base = 0
        while base < num_frames - 1:
            key = min(base + self.gop_size, num_frames - 1)
            if key % self.intra_period == 0:
                order.append(FrameInfo(key, "I", 0, ()))
            else:
                order.append(FrameInfo(key, "B", 1, (base,)))
            self._bisect(base, key, 2, order)
            base = key
        return order

    def _bisect(self, lo: int, hi: int, layer: int, out: list[FrameInfo]) -> None:
        if hi - lo < 2:
            return
        mid = (lo + hi) // 2
        out.append(FrameInfo(mid, "B", layer, (lo, hi)))
        self._bisect(lo, mid, layer + 1, out)
        self._bisect(mid, hi, layer + 1, out)

    def frame_info(self, num_frames: int) -> dict[int, FrameInfo]:
        return {fi.poc: fi for fi in self.decode_order(num_frames)}
