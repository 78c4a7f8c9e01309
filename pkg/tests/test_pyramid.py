import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reference
from penet import imageio, pyramid
from penet.pyramid import GAUSSIAN_KERNEL, decompose, gaussian_downsample, reconstruct

DATA = os.path.join(os.path.dirname(__file__), "data")


def test_kernel_sums_to_one():
    assert GAUSSIAN_KERNEL.sum() == 1.0
    assert abs(GAUSSIAN_KERNEL.astype(np.float32).sum(dtype=np.float32) - 1) <= 1e-7


@given(st.floats(0, 1), st.integers(2, 11), st.integers(2, 11))
def test_downsample_keeps_constants(c, h, w):
    out = gaussian_downsample(np.full((3, h, w), c, dtype=np.float32))
    assert out.shape == (3, (h + 1) // 2, (w + 1) // 2)
    assert np.all(out == np.float32(c))


@pytest.mark.parametrize("shape", [(4, 4), (5, 7), (2, 3), (9, 6)])
def test_downsample_matches_brute_force(rng, shape):
    x = rng.standard_normal((2, *shape))
    want = np.array(reference.gaussian_downsample(reference.to_lists(x)))
    np.testing.assert_allclose(gaussian_downsample(x), want, atol=1e-14)


def test_downsample_ramp():
    x = np.repeat(np.arange(4.0)[:, None], 4, axis=1)[None]
    want = np.array(reference.gaussian_downsample(reference.to_lists(x)))
    out = gaussian_downsample(x)
    assert out.shape == (1, 2, 2)
    np.testing.assert_allclose(out, want, atol=1e-15)
    # reflect padding: row 0 sees rows (2, 1, 0, 1, 2) -> (1*2 + 4*1 + 0 + 4*1 + 2) / 16
    np.testing.assert_allclose(out[0, 0], [0.75, 0.75])


def test_downsample_rejects_single_pixel():
    with pytest.raises(ValueError):
        gaussian_downsample(np.zeros((3, 1, 5)))


def test_constant_image():
    pyr = decompose(np.full((3, 16, 16), 0.42, dtype=np.float32))
    for d in pyr.diffs:
        assert not d.any()
    assert pyr.base.shape == (3, 2, 2)
    assert np.all(pyr.base == np.float32(0.42))


def test_608_dims():
    pyr = decompose(np.zeros((3, 608, 608), dtype=np.float32))
    assert [c.shape[1:] for c in pyr.components] == [(608, 608), (304, 304), (152, 152), (76, 76)]
    assert pyr.level_dims == [(608, 608), (304, 304), (152, 152), (76, 76)]


@pytest.mark.parametrize("shape", [(16, 16), (17, 23), (8, 8), (9, 64)])
def test_roundtrip(rng, shape):
    x = rng.random((3, *shape)).astype(np.float32)
    assert np.abs(reconstruct(decompose(x)) - x).max() <= 1e-5


def test_matches_brute_force(rng):
    x = rng.random((3, 11, 9))
    diffs, base = reference.decompose(reference.to_lists(x))
    pyr = decompose(x)
    for got, want in zip(pyr.components, diffs + [base]):
        np.testing.assert_allclose(got, np.array(want), atol=1e-14)


def test_zero_diffs_constant_base():
    pyr = pyramid.LaplacianPyramid(
        [np.zeros((3, 13, 10)), np.zeros((3, 7, 5)), np.zeros((3, 4, 3))],
        np.full((3, 2, 2), 0.25), [(13, 10), (7, 5), (4, 3), (2, 2)],
    )
    assert np.all(reconstruct(pyr) == 0.25)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-4, 4))
def test_linearity(seed, k):
    r = np.random.default_rng(seed)
    a, b = r.random((2, 3, 12, 10))
    pa, pb, pab = decompose(a), decompose(b), decompose(k * a + b)
    for ca, cb, cab in zip(pa.components, pb.components, pab.components):
        np.testing.assert_allclose(cab, k * ca + cb, atol=1e-5)
    scaled = pyramid.LaplacianPyramid([2 * d for d in pa.diffs], 2 * pa.base, pa.level_dims)
    np.testing.assert_allclose(reconstruct(scaled), 2 * reconstruct(pa), atol=1e-5)


@settings(max_examples=60, deadline=None)
@given(st.integers(8, 64), st.integers(8, 64), st.integers(0, 2**32 - 1))
def test_roundtrip_float64(h, w, seed):
    x = np.random.default_rng(seed).random((3, h, w))
    assert np.abs(reconstruct(decompose(x)) - x).max() <= 1e-11


def test_too_small():
    with pytest.raises(ValueError, match="at least 8x8"):
        decompose(np.zeros((3, 7, 20)))


def test_wrong_channels():
    with pytest.raises(ValueError):
        decompose(np.zeros((1, 16, 16)))


def test_reconstruct_names_bad_level():
    pyr = decompose(np.zeros((3, 16, 16)))
    pyr.diffs[1] = np.zeros((3, 9, 8))
    with pytest.raises(ValueError, match="L2"):
        reconstruct(pyr)


def test_finer_levels_carry_more_detail():
    x = imageio.to_tensor(imageio.read_ppm(os.path.join(DATA, "rocket_256.ppm")))
    pyr = decompose(x)
    energy = [float(np.abs(d).mean()) for d in pyr.diffs]
    assert energy[0] > energy[2]
