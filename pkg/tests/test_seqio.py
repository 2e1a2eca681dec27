import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from facemotion.errors import CropOutOfBounds, DimensionMismatch, SequenceIOError, SequenceTooShort
from facemotion.seqio import GrayFrameSequence, crop_face, load_sequence, read_image, to_gray, write_image


def _save_gray(path, arr):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="L").save(path)


def test_two_identical_pgms(tmp_path):
    a = np.full((4, 4), 77, dtype=np.uint8)
    for i in range(2):
        _save_gray(tmp_path / f"f{i}.pgm", a)
    seq = load_sequence(str(tmp_path / "*.pgm"))
    assert len(seq) == 2
    assert np.all(seq.stack() == seq.frames[0][0, 0])
    assert seq.frames[0][0, 0] == pytest.approx(77 / 255)


def test_rgb_endpoints(tmp_path):
    rgb = np.zeros((2, 2, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 255, 255)
    Image.fromarray(rgb, mode="RGB").save(tmp_path / "a.png")
    img = read_image(tmp_path / "a.png")
    assert img[0, 0] == 1.0
    assert img[1, 1] == 0.0


def test_luma_weights():
    px = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255]]], dtype=np.uint8)
    assert np.allclose(to_gray(px)[0], [0.299, 0.587, 0.114])


def test_gray_conversion_idempotent():
    levels = np.arange(256, dtype=np.uint8)[None, :]
    rgb = np.repeat(levels[..., None], 3, axis=2)
    gray = to_gray(levels)
    assert np.array_equal(to_gray(rgb), gray)
    # re-encoding the gray result and converting again changes nothing
    again = to_gray(np.rint(gray * 255).astype(np.uint8))
    assert np.array_equal(again, gray)


def test_full_size_sequence(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(8):
        _save_gray(tmp_path / f"frame_{i:02d}.png", rng.integers(0, 256, (330, 280)))
    seq = load_sequence(str(tmp_path / "*.png"), label="Surprise")
    assert (len(seq), seq.width, seq.height) == (8, 280, 330)
    assert seq.label == "Surprise"


def test_filename_order(tmp_path):
    for i, v in enumerate([10, 20, 30]):
        _save_gray(tmp_path / f"frame_{i:02d}.pgm", np.full((3, 3), v))
    seq = load_sequence(str(tmp_path / "*.pgm"))
    assert [f[0, 0] * 255 for f in seq.frames] == pytest.approx([10, 20, 30])


def test_too_few_files(tmp_path):
    _save_gray(tmp_path / "a.pgm", np.zeros((3, 3)))
    with pytest.raises(SequenceTooShort):
        load_sequence(str(tmp_path / "*.pgm"))


def test_mixed_dimensions(tmp_path):
    _save_gray(tmp_path / "a.pgm", np.zeros((3, 3)))
    _save_gray(tmp_path / "b.pgm", np.zeros((3, 4)))
    with pytest.raises(DimensionMismatch):
        load_sequence(str(tmp_path / "*.pgm"))


def test_unreadable_file_reports_path(tmp_path):
    _save_gray(tmp_path / "a.pgm", np.zeros((3, 3)))
    bad = tmp_path / "b.pgm"
    bad.write_bytes(b"not an image")
    with pytest.raises(SequenceIOError) as info:
        load_sequence(str(tmp_path / "*.pgm"))
    assert str(bad) in str(info.value)


def test_sequence_invariants():
    f = np.zeros((3, 3))
    with pytest.raises(SequenceTooShort):
        GrayFrameSequence((f,))
    with pytest.raises(DimensionMismatch):
        GrayFrameSequence(tuple([f] * 9))
    with pytest.raises(DimensionMismatch):
        GrayFrameSequence((f, np.zeros((3, 4))))
    with pytest.raises(ValueError):
        GrayFrameSequence((f, f + 1.5))
    with pytest.raises(ValueError):
        GrayFrameSequence((f, f * np.nan))


def _seq(h=10, w=12, n=3, seed=0):
    rng = np.random.default_rng(seed)
    return GrayFrameSequence(tuple(rng.random((h, w)) for _ in range(n)), sequence_id="s")


def test_crop_full_frame_is_identity():
    seq = _seq()
    out = crop_face(seq, (0, 0, seq.width, seq.height))
    assert all(np.array_equal(a, b) for a, b in zip(seq.frames, out.frames))


def test_crop_to_face_size():
    seq = GrayFrameSequence((np.zeros((490, 640)), np.zeros((490, 640))))
    out = crop_face(seq, (180, 80, 280, 330))
    assert (out.width, out.height) == (280, 330)


def test_crop_one_pixel_past_right_edge():
    seq = _seq()
    with pytest.raises(CropOutOfBounds):
        crop_face(seq, (1, 0, seq.width, 5))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 3), st.integers(0, 3))
def test_nested_crops_compose(x0, y0, x1, y1):
    seq = _seq(h=12, w=14)
    outer = (x0, y0, 14 - x0 - 1, 12 - y0 - 1)
    inner = (x1, y1, 5, 4)
    twice = crop_face(crop_face(seq, outer), inner)
    once = crop_face(seq, (x0 + x1, y0 + y1, 5, 4))
    assert all(np.array_equal(a, b) for a, b in zip(twice.frames, once.frames))
    assert twice.metadata["crop_origin"] == (x0 + x1, y0 + y1)


def test_loading_is_deterministic(tmp_path):
    rng = np.random.default_rng(5)
    for i in range(3):
        _save_gray(tmp_path / f"{i}.png", rng.integers(0, 256, (6, 7)))
    a = load_sequence(str(tmp_path / "*.png"))
    b = load_sequence(str(tmp_path / "*.png"))
    assert all(np.array_equal(x, y) for x, y in zip(a.frames, b.frames))


def test_write_read_roundtrip(tmp_path):
    f = np.round(np.random.default_rng(1).random((5, 6)) * 255) / 255
    write_image(os.path.join(tmp_path, "x.pgm"), f)
    assert np.array_equal(read_image(os.path.join(tmp_path, "x.pgm")), f)
