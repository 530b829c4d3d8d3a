import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpp.errors import DimensionMismatch
from gpp.imagecore import (PatchSet, as_image, inverse_patch_transform, patch_transform, psnr,
                           psnr_sign_ambiguous, resize_matrix, resize_patch)


def test_256_image_splits_into_64_patches_of_32():
    ps = patch_transform(np.zeros((256, 256)), 32)
    assert ps.num_patches == 64 and ps.n == 1024
    assert (ps.grid_rows, ps.grid_cols) == (8, 8)


def test_single_patch_is_vectorised_image(rng):
    img = rng.random((8, 8))
    ps = patch_transform(img, 8)
    assert ps.num_patches == 1
    assert np.array_equal(ps.patches[0], img.reshape(-1))


def test_indivisible_without_padding_raises():
    with pytest.raises(DimensionMismatch):
        patch_transform(np.zeros((33, 33)), 32)


def test_row_major_ordering():
    img = np.arange(16.0).reshape(4, 4)
    ps = patch_transform(img, 2)
    assert ps.patches.tolist() == [[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]


def test_replicate_padding_copies_edges():
    img = np.arange(9.0).reshape(3, 3)
    ps = patch_transform(img, 2, "replicate")
    full = inverse_patch_transform(ps, 4, 4)
    assert np.array_equal(full[3], full[2])
    assert np.array_equal(full[:, 3], full[:, 2])


def test_zero_patchset_gives_zero_image():
    ps = PatchSet(4, 2, 3, np.zeros((6, 16)))
    assert not inverse_patch_transform(ps).any()


def test_padded_30x30_roundtrip(rng):
    img = rng.random((30, 30))
    ps = patch_transform(img, 8, "replicate")
    assert np.array_equal(inverse_patch_transform(ps, 30, 30), img)


def test_inconsistent_output_size_raises():
    ps = patch_transform(np.zeros((16, 16)), 8)
    with pytest.raises(DimensionMismatch):
        inverse_patch_transform(ps, 8, 16)
    with pytest.raises(DimensionMismatch):
        inverse_patch_transform(ps, 17, 16)


@given(st.integers(1, 6), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_roundtrip_exact(tau, rows, cols, seed):
    img = np.random.default_rng(seed).random((rows * tau, cols * tau))
    assert np.array_equal(inverse_patch_transform(patch_transform(img, tau)), img)


def test_permuting_patches_permutes_blocks(rng):
    img = rng.random((8, 12))
    ps = patch_transform(img, 4)
    perm = [5, 4, 3, 2, 1, 0]
    out = inverse_patch_transform(PatchSet(4, 2, 3, ps.patches[perm]))
    for dst, src in enumerate(perm):
        r, c = divmod(dst, 3)
        sr, sc = divmod(src, 3)
        assert np.array_equal(out[4 * r:4 * r + 4, 4 * c:4 * c + 4],
                              img[4 * sr:4 * sr + 4, 4 * sc:4 * sc + 4])


def test_as_image_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_image([[0.0, np.nan]])


def test_psnr_examples():
    assert psnr(np.ones((4, 4)), np.ones((4, 4))) == np.inf
    a = np.zeros((10, 10))
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-12)
    assert psnr(np.zeros((3, 3)), np.full((3, 3), 0.5)) == pytest.approx(6.020599913, abs=1e-8)


def test_psnr_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((2, 2)), np.zeros((2, 3)))


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 10.0))
def test_psnr_symmetric_and_scale_covariant(seed, s):
    r = np.random.default_rng(seed)
    a, b = r.random((5, 5)), r.random((5, 5))
    assert psnr(a, b) == psnr(b, a)
    assert psnr(s * a, s * b, peak=s) == pytest.approx(psnr(a, b), rel=1e-12)


def test_sign_ambiguous_psnr_takes_better_branch(rng):
    ref = rng.random((6, 6))
    assert psnr_sign_ambiguous(1.0 - ref, ref) == np.inf
    assert psnr_sign_ambiguous(ref, ref) == np.inf
    x = rng.random((6, 6))
    assert psnr_sign_ambiguous(x, ref) == max(psnr(x, ref), psnr(1 - x, ref))


def test_resize_identity_and_constants(rng):
    p = rng.random(16)
    assert np.array_equal(resize_patch(p, 4, 4), p)
    for to in (1, 3, 7):
        assert np.allclose(resize_patch(np.full(16, 0.3), 4, to), 0.3, atol=1e-15)


def test_resize_2x2_to_3x3_middle_column():
    out = resize_patch(np.array([0.0, 1.0, 0.0, 1.0]), 2, 3).reshape(3, 3)
    assert np.allclose(out[:, 1], 0.5)
    assert np.allclose(out[:, 0], 0.0) and np.allclose(out[:, 2], 1.0)


def test_resize_matrix_is_corner_aligned():
    M = resize_matrix(3, 5)
    assert M.shape == (25, 9)
    assert np.allclose(M.sum(axis=1), 1.0)
    # the four corners map to the source corners exactly
    for dst, src in ((0, 0), (4, 2), (20, 6), (24, 8)):
        assert M[dst, src] == 1.0
