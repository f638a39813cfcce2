"""Proxy block codec used to measure decode cost and quality under control plans."""

from .deblock import deblock_frame
from .gop import FrameInfo, GopStructure
from .interp import SkipPattern, skip_pattern
from .ledger import COUNTERS, DEFAULT_PROFILE, CostLedger, CostProfile
from .motion import MotionConfig
from .proxy import CodedFrame, CtuDecisions, DecodeResult, ProxySequence, decode_one, decode_sequence, encode_sequence
from .synthetic import CLIP_NAMES, SyntheticClip, generate_clip, read_raw_luma, write_raw_luma

__all__ = [
    "deblock_frame", "FrameInfo", "GopStructure", "SkipPattern", "skip_pattern",
    "COUNTERS", "DEFAULT_PROFILE", "CostLedger", "CostProfile", "MotionConfig",
    "CodedFrame", "CtuDecisions", "DecodeResult", "ProxySequence", "decode_one",
    "decode_sequence", "encode_sequence", "CLIP_NAMES", "SyntheticClip", "generate_clip",
    "read_raw_luma", "write_raw_luma",
]
