import numpy as np
import pytest

from courtside.errors import BackboneError, EmptyInput, ParseError, ShapeMismatch
from courtside.features import (APPEARANCE, MOTION, BuiltinDescriptor, FeatureMatrix,
                                PrecomputedBackbone, align_paths, builtin_descriptor,
                                extract_appearance, extract_motion, fuse,
                                read_feature_file, robust_scale_columns, write_feature_file,
                                zero_motion_image, zscore_columns)
from courtside.ingest import FrameSequence
from courtside.wavelet import sequence_motion_images

from conftest import moving_block_video


def _cells(vec, g=4):
    return vec.reshape(g, g, 4)


def test_constant_gray_frame():
    v = builtin_descriptor(np.full((32, 32, 3), 127.5))
    c = _cells(v)
    assert v.shape == (64,)
    assert np.all(c[..., 0] == 0.5)
    assert np.all(c[..., 1:] == 0.0)


def test_output_length_follows_grid():
    img = np.zeros((20, 20, 3))
    assert builtin_descriptor(img, 4).size == 64
    assert builtin_descriptor(img, 2).size == 16


def test_vertical_step_edge_mid_cell():
    img = np.zeros((32, 32, 3))
    img[:, 12:] = 255.0  # edge inside the second cell column (x in [8, 16))
    c = _cells(builtin_descriptor(img))
    gx, gy = c[..., 2], c[..., 3]
    assert np.all(gx[:, 1] > 0.1)
    assert np.all(gx[:, [0, 2, 3]] == 0.0)
    assert np.all(gy == 0.0)
    assert np.all(c[:, 0, 0] == 0.0) and np.all(c[:, 3, 0] == 1.0)


def test_channel_order_invariance_for_constant_channels():
    a = np.zeros((16, 16, 3))
    a[..., 0], a[..., 1], a[..., 2] = 10, 100, 200
    assert np.array_equal(builtin_descriptor(a), builtin_descriptor(a[..., ::-1]))


def test_two_identical_frames_give_identical_rows():
    f = np.random.default_rng(0).uniform(0, 255, (16, 16, 3))
    seq = FrameSequence.from_arrays([f, f.copy()])
    fa = extract_appearance(seq, BuiltinDescriptor())
    assert fa.path == APPEARANCE and fa.rows.shape == (2, 64)
    assert np.array_equal(fa.rows[0], fa.rows[1])


def test_zero_motion_image_is_deterministic():
    bb = BuiltinDescriptor()
    z = zero_motion_image((4, 4))
    fm = extract_motion([z, z], bb)
    assert np.array_equal(fm.rows[0], fm.rows[1])


def test_distinct_motion_images_give_distinct_rows():
    seq = moving_block_video()
    images = sequence_motion_images([f.gray for f in seq])
    fm = extract_motion(images, BuiltinDescriptor(), seq.indices[1:])
    assert fm.path == MOTION
    assert len(fm.rows) == len(seq) - 1
    assert any(not np.array_equal(fm.rows[0], r) for r in fm.rows[1:])


def test_empty_motion_list():
    with pytest.raises(EmptyInput):
        extract_motion([], BuiltinDescriptor())


def _fm(rows, path, start=0):
    return FeatureMatrix(np.asarray(rows, dtype=float), tuple(range(start, start + len(rows))), path)


def test_fuse_concatenates_and_splits_back():
    rng = np.random.default_rng(2)
    fa = _fm(rng.normal(size=(5, 8)), APPEARANCE)
    fm = _fm(rng.normal(size=(5, 8)), MOTION)
    F = fuse(fa, fm)
    assert F.rows.shape == (5, 16)
    assert np.array_equal(F.rows[0], np.concatenate([fa.rows[0], fm.rows[0]]))
    a, m = F.split()
    assert np.array_equal(a, fa.rows) and np.array_equal(m, fm.rows)
    assert F.frame_indices == fa.frame_indices


def test_fuse_row_mismatch():
    with pytest.raises(ShapeMismatch):
        fuse(_fm(np.zeros((5, 8)), APPEARANCE), _fm(np.zeros((4, 8)), MOTION))


def test_align_paths_drop_and_pad():
    fa = _fm(np.arange(10.0).reshape(5, 2), APPEARANCE)
    fm = _fm(np.ones((4, 2)), MOTION, start=1)
    a, m = align_paths(fa, fm)
    assert a.frame_indices == (1, 2, 3, 4) and len(m.rows) == 4
    a, m = align_paths(fa, fm, zero_motion_row=[0.0, 0.0])
    assert len(a.rows) == len(m.rows) == 5
    assert np.array_equal(m.rows[0], [0.0, 0.0])
    with pytest.raises(ShapeMismatch):
        align_paths(fa, _fm(np.ones((5, 2)), MOTION))


def test_nan_rows_rejected():
    with pytest.raises(ValueError):
        _fm([[np.nan]], APPEARANCE)


@pytest.mark.parametrize("binary", [False, True])
def test_precomputed_file_round_trip(tmp_path, binary):
    table = np.arange(12, dtype=float).reshape(3, 4) / 8  # exact in float32
    path = tmp_path / "feat.txt"
    write_feature_file(path, table, binary=binary)
    assert np.array_equal(read_feature_file(path), table)
    bb = PrecomputedBackbone.from_file(path)
    # pure lookup: pixel content is ignored
    assert np.array_equal(bb.extract(np.zeros((2, 2, 3)), 1), table[1])
    assert np.array_equal(bb.extract(np.ones((9, 9, 3)), 1), table[1])
    seq = FrameSequence.from_arrays([np.zeros((2, 2, 3))] * 3)
    assert np.array_equal(extract_appearance(seq, bb).rows, table)


def test_precomputed_missing_row():
    bb = PrecomputedBackbone(np.zeros((2, 3)))
    seq = FrameSequence.from_arrays([np.zeros((2, 2, 3))] * 3)
    with pytest.raises(BackboneError):
        extract_appearance(seq, bb)


def test_feature_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_bytes(b"2 2\n1 2 3\n")
    with pytest.raises(ParseError):
        read_feature_file(p)
    p.write_bytes(b"x y\n")
    with pytest.raises(ParseError):
        read_feature_file(p)


def test_scalers():
    x = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [100.0, 5.0]])
    z = zscore_columns(x)
    assert np.allclose(z[:, 0].mean(), 0, atol=1e-12) and np.allclose(z[:, 0].std(), 1)
    assert np.all(z[:, 1] == 0)
    r = robust_scale_columns(x)
    assert np.all(r[:, 1] == 0)
    # median 2.5, IQR = 27.25 - 1.75 = 25.5
    assert r[0, 0] == pytest.approx((1 - 2.5) / 25.5, abs=1e-15)
