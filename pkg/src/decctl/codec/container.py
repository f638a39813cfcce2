"""Versioned binary container for proxy sequences.

Layout (all little-endian)::

    magic     8 bytes  b"SGCCPSEQ"
    version   u32
    count     u32      number of sections
    table     count x (tag 4 bytes, offset u64, length u64)
    sections  HEAD (JSON), GOP_ (JSON), then one FRAM per frame in decode order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..core_types import FrameLayout, ValidationError
from ..io import atomic_write_bytes
from .gop import GopStructure
from .motion import MotionConfig
from .proxy import CodedFrame, ProxySequence

MAGIC = b"SGCCPSEQ"
VERSION = 1
_PREAMBLE = struct.Struct("<8sII")
_ENTRY = struct.Struct("<4sQQ")
_FRAME_HEAD = struct.Struct("<IBBBB")  # poc, type, layer, qp, nrefs


def _frame_bytes(fr: CodedFrame, shape: tuple[int, int]) -> bytes:
    if fr.residual.shape != shape:
        raise ValidationError(f"POC {fr.poc}: residual shape {fr.residual.shape}, expected {shape}")
    parts = [_FRAME_HEAD.pack(fr.poc, 0 if fr.is_intra else 1, fr.layer, fr.qp, len(fr.refs)),
             struct.pack(f"<{len(fr.refs)}I", *fr.refs),
             struct.pack("<I", len(fr.modes)),
             fr.modes.astype("u1").tobytes(),
             fr.mv0.astype("<i2").tobytes(),
             fr.mv1.astype("<i2").tobytes(),
             fr.residual.astype("<i2").tobytes()]
    return b"".join(parts)


def _parse_frame(buf: bytes, shape: tuple[int, int]) -> CodedFrame:
    poc, ftype, layer, qp, nrefs = _FRAME_HEAD.unpack_from(buf, 0)
    pos = _FRAME_HEAD.size
    refs = struct.unpack_from(f"<{nrefs}I", buf, pos)
    pos += 4 * nrefs
    (nb,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    modes = np.frombuffer(buf, "u1", nb, pos).copy()
    pos += nb
    mv0 = np.frombuffer(buf, "<i2", 2 * nb, pos).reshape(nb, 2).astype(np.int16)
    pos += 4 * nb
    mv1 = np.frombuffer(buf, "<i2", 2 * nb, pos).reshape(nb, 2).astype(np.int16)
    pos += 4 * nb
    npx = shape[0] * shape[1]
    if len(buf) - pos != 2 * npx:
        raise ValidationError(f"POC {poc}: frame section has {len(buf) - pos} residual bytes, expected {2 * npx}")
    residual = np.frombuffer(buf, "<i2", npx, pos).reshape(shape).astype(np.int16)
    return CodedFrame(poc, "I" if ftype == 0 else "B", layer, tuple(refs), qp, modes, mv0, mv1, residual)


def to_bytes(seq: ProxySequence) -> bytes:
    lay, mo = seq.layout, seq.motion
    head = {"width": lay.width, "height": lay.height, "ctu_size": lay.ctu_size,
            "block_size": mo.block_size, "search_range": mo.search_range,
            "mv_lambda": mo.mv_lambda, "mode_switch_weight": mo.mode_switch_weight,
            "num_frames": seq.num_frames}
    gop = {"gop_size": seq.gop.gop_size, "intra_period": seq.gop.intra_period}
    sections = [(b"HEAD", json.dumps(head, sort_keys=True).encode()),
                (b"GOP_", json.dumps(gop, sort_keys=True).encode())]
    sections += [(b"FRAM", _frame_bytes(fr, seq.padded_shape)) for fr in seq.frames]
    offset = _PREAMBLE.size + _ENTRY.size * len(sections)
    table = []
    for tag, body in sections:
        table.append(_ENTRY.pack(tag, offset, len(body)))
        offset += len(body)
    return b"".join([_PREAMBLE.pack(MAGIC, VERSION, len(sections)), *table, *(b for _, b in sections)])


def from_bytes(data: bytes) -> ProxySequence:
    if len(data) < _PREAMBLE.size:
        raise ValidationError("truncated container")
    magic, version, count = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValidationError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValidationError(f"unsupported container version {version}")
    entries = [_ENTRY.unpack_from(data, _PREAMBLE.size + i * _ENTRY.size) for i in range(count)]
    bodies = []
    for tag, off, length in entries:
        if off + length > len(data):
            raise ValidationError(f"section {tag!r} runs past end of file")
        bodies.append((tag, data[off:off + length]))
    if len(bodies) < 2 or bodies[0][0] != b"HEAD" or bodies[1][0] != b"GOP_":
        raise ValidationError("container must start with HEAD and GOP_ sections")
    head = json.loads(bodies[0][1])
    gop = json.loads(bodies[1][1])
    seq = ProxySequence(
        FrameLayout(head["width"], head["height"], head["ctu_size"]),
        GopStructure(gop["gop_size"], gop["intra_period"]),
        MotionConfig(head["block_size"], head["search_range"], head["mv_lambda"],
                     head["mode_switch_weight"]),
    )
    seq.frames = [_parse_frame(body, seq.padded_shape) for tag, body in bodies[2:] if tag == b"FRAM"]
    if len(seq.frames) != head["num_frames"]:
        raise ValidationError(f"header promises {head['num_frames']} frames, found {len(seq.frames)}")
    return seq


def save_sequence(path: str | Path, seq: ProxySequence) -> None:
    atomic_write_bytes(path, to_bytes(seq))


def load_sequence(path: str | Path) -> ProxySequence:
    return from_bytes(Path(path).read_bytes())
