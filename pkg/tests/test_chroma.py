import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from polarsep.chroma import chromaticity, classify_pixels, mean_channel_min
from polarsep.trs import TRSMaps, raw_components

images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3)),
                elements=st.floats(0, 1))


def test_worked_pixel():
    # second pixel fixes the mean channel minimum at 0.1
    img = np.array([[[0.2, 0.3, 0.5], [0.0, 0.4, 0.4]]])
    c = chromaticity(img)
    assert c.i_min_bar == pytest.approx(0.1)
    assert np.allclose(c.samples[0, 0], [0.2 / 1.1, 0.3 / 1.1, 0.5 / 1.1])


def test_all_zero():
    c = chromaticity(np.zeros((3, 3, 3)))
    assert c.i_min_bar == 0 and np.all(c.samples == 0)


def test_uniform_gray():
    c = chromaticity(np.full((4, 4, 3), 0.2))
    assert c.i_min_bar == pytest.approx(0.2)
    assert np.allclose(c.samples, 0.25)


def _maps(i_c, i_sv, shape=(2, 2, 3)):
    z = np.zeros(shape)
    return TRSMaps(np.full(shape, i_c), np.full(shape, i_sv), z, z)


@pytest.mark.parametrize("i_c, i_sv, pure", [(0.5, 0.0, True), (0.5, 0.2, False),
                                             (0.5, 0.004, True)])
def test_classification(i_c, i_sv, pure):
    m = _maps(i_c, i_sv)
    cls = classify_pixels(m, raw_components(m))
    assert np.all(cls.pure_diffuse == pure)
    assert cls.n_pure + cls.n_combined == 4


def test_classification_shape_check():
    m = _maps(0.5, 0.1)
    with pytest.raises(ValueError):
        classify_pixels(_maps(0.5, 0.1, (3, 3, 3)), raw_components(m))


@given(images, st.sampled_from([0.5, 2.0]))
def test_scale_covariance(img, k):
    a = chromaticity(img).samples
    b = chromaticity(k * img).samples
    assert np.max(np.abs(a - b)) <= 1e-12


@given(images)
def test_mean_min_matches_loop(img):
    total = 0.0
    for row in img:
        for px in row:
            total += min(px)
    assert mean_channel_min(img) == pytest.approx(total / (img.shape[0] * img.shape[1]),
                                                  rel=1e-12, abs=1e-15)


@given(images)
def test_ranges(img):
    c = chromaticity(img)
    assert c.i_min_bar >= 0 and np.all(c.samples >= 0)
    sums = c.samples.sum(axis=-1)
    assert np.all(sums <= 1)
    # strictly below 1 once the stabilizer is resolvable next to the pixel sum
    resolvable = c.i_min_bar > 1e-9 * img.sum(axis=-1)
    if c.i_min_bar > 0:
        assert np.all(sums[resolvable] < 1)


@given(images)
def test_reduction_order_independent(img):
    flat = img.reshape(-1, 3)
    rev = flat[::-1].reshape(img.shape)
    assert mean_channel_min(img) == mean_channel_min(rev)
