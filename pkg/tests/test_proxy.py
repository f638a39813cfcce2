import numpy as np
import pytest

from decctl.codec.container import from_bytes, load_sequence, save_sequence, to_bytes
from decctl.codec.gop import GopStructure
from decctl.codec.proxy import CtuDecisions, decode_one, decode_sequence, encode_sequence
from decctl.codec.synthetic import generate_clip, read_raw_luma, write_raw_luma
from decctl.codec.training import collect_training_samples, uniform_plans
from decctl.core_types import ControlPlan, FrameLayout, ValidationError
from decctl.evaluation import achieved_reduction

W, H, F = 128, 64, 9


@pytest.fixture(scope="module")
def moving():
    clip = generate_clip("translating_texture", W, H, F, seed=3)
    seq = encode_sequence(clip.frames, GopStructure(8, 8), 32)
    return clip, seq, decode_sequence(seq)


@pytest.fixture(scope="module")
def still():
    clip = generate_clip("static", W, H, F)
    seq = encode_sequence(clip.frames, GopStructure(8, 8), 32)
    return clip, seq


def test_static_clip_has_no_motion_or_residual(still):
    clip, seq = still
    for fr in seq.frames:
        if not fr.is_intra:
            assert not fr.mv0.any() and not fr.mv1.any()
            assert not fr.residual.any()
    dec = decode_sequence(seq)
    assert all(np.array_equal(a, b) for a, b in zip(dec.frames, clip.frames))


def test_neutral_plans_are_bit_identical(moving):
    _, seq, ref = moving
    n = seq.layout.N
    for plans in ({p: ControlPlan.neutral(n) for p in range(F)}, uniform_plans(seq, 0, 0), [None] * F):
        out = decode_sequence(seq, plans)
        assert all(np.array_equal(a, b) for a, b in zip(out.frames, ref.frames))
        assert all(a.counts.keys() == b.counts.keys() and
                   all(np.array_equal(a.counts[k], b.counts[k]) for k in a.counts)
                   for a, b in zip(out.ledgers, ref.ledgers))


def test_decode_is_deterministic(moving):
    _, seq, _ = moving
    plans = uniform_plans(seq, 1, 2)
    a, b = decode_sequence(seq, plans), decode_sequence(seq, plans)
    assert all(np.array_equal(x, y) for x, y in zip(a.frames, b.frames))


def test_intra_frames_ignore_skipping(moving):
    _, seq, ref = moving
    out = decode_sequence(seq, {0: CtuDecisions((0, 0), (3, 3))})
    assert all(np.array_equal(a, b) for a, b in zip(out.frames, ref.frames))


def test_intra_frame_is_isolated_from_other_plans(moving):
    _, seq, ref = moving
    intra = seq.intra_pocs()
    assert intra == [0, 8]
    out = decode_sequence(seq, {p: CtuDecisions((1, 1), (3, 3)) for p in range(F) if p not in intra})
    for p in intra:
        assert np.array_equal(out.frames[p], ref.frames[p])
    assert not np.array_equal(out.frames[4], ref.frames[4])


def test_full_simplification_costs_quality_and_saves_work(moving):
    _, seq, ref = moving
    full = decode_sequence(seq, uniform_plans(seq, 1, 3))
    mse = np.mean([np.mean((a.astype(float) - b) ** 2) for a, b in zip(ref.frames, full.frames)])
    assert mse > 0
    mar = achieved_reduction(ref.ledgers, full.ledgers)
    rng = np.random.default_rng(0)
    for _ in range(5):
        plans = {p: CtuDecisions(tuple(rng.integers(0, 2, 2)), tuple(rng.integers(0, 4, 2)))
                 for p in range(F)}
        assert achieved_reduction(ref.ledgers, decode_sequence(seq, plans).ledgers) <= mar + 1e-12


def test_plan_shape_mismatch(moving):
    _, seq, _ = moving
    with pytest.raises(ValidationError):
        decode_sequence(seq, {1: CtuDecisions((0, 0, 0), (0, 0, 0))})
    with pytest.raises(ValidationError):
        decode_sequence(seq, {1: CtuDecisions((0, 2), (0, 0))})


def test_decode_one_needs_references(moving):
    _, seq, ref = moving
    out, _ = decode_one(seq, 4, ref.padded, None)
    assert np.array_equal(out, ref.frames[4])
    with pytest.raises(ValidationError):
        decode_one(seq, 4, {0: ref.padded[0]}, None)


def test_container_roundtrip(moving, tmp_path):
    _, seq, ref = moving
    save_sequence(tmp_path / "x.sgcc", seq)
    back = load_sequence(tmp_path / "x.sgcc")
    assert back.layout == seq.layout and back.gop == seq.gop
    assert all(a.same_as(b) for a, b in zip(seq.frames, back.frames))
    assert all(np.array_equal(a, b) for a, b in zip(decode_sequence(back).frames, ref.frames))
    assert to_bytes(back) == to_bytes(seq)


def test_container_rejects_damage(moving):
    _, seq, _ = moving
    data = to_bytes(seq)
    with pytest.raises(ValidationError):
        from_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(ValidationError):
        from_bytes(data[: len(data) - 10])
    with pytest.raises(ValidationError):
        from_bytes(data[:5])


def test_synthetic_is_deterministic_and_raw_roundtrips(tmp_path):
    a = generate_clip("moving_gradient", 96, 64, 4, seed=5)
    b = generate_clip("moving_gradient", 96, 64, 4, seed=5)
    c = generate_clip("moving_gradient", 96, 64, 4, seed=6)
    assert all(np.array_equal(x, y) for x, y in zip(a.frames, b.frames))
    assert not all(np.array_equal(x, y) for x, y in zip(a.frames, c.frames))
    write_raw_luma(tmp_path / "a.yuv", a.frames)
    back = read_raw_luma(tmp_path / "a.yuv", 96, 64)
    assert all(np.array_equal(x, y) for x, y in zip(a.frames, back))
    with pytest.raises(ValidationError):
        read_raw_luma(tmp_path / "a.yuv", 100, 64)
    with pytest.raises(ValidationError):
        generate_clip("nope", 8, 8, 1)


def test_ctu_saliency_is_normalized():
    clip = generate_clip("translating_texture", W, H, 2, seed=1)
    maps = clip.ctu_saliency(FrameLayout(W, H))
    for m in maps.values():
        assert max(m.w) == pytest.approx(1.0) and min(m.w) >= 0


def test_training_samples(moving, still):
    clip, seq, ref = moving
    tr = collect_training_samples(seq, clip.ctu_saliency(seq.layout), reference=ref, name="moving")
    assert len(tr.df) == seq.layout.N * (F - 2)  # POC 0 and 8 are intra
    assert {s.g for s in tr.mc} == {1, 2, 3}
    by_g = {s.g: s.ratio for s in tr.mse}
    assert by_g[3] == 1.0 and by_g[1] <= by_g[2] <= 1.0
    sclip, sseq = still
    st = collect_training_samples(sseq, sclip.ctu_saliency(sseq.layout), name="static")
    assert st.mse == [] and any("static" in e for e in st.excluded)
