import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from polarsep.chroma import ChromaticityImage, PixelClassMap, chromaticity
from polarsep.cluster import build_clusters
from polarsep.synth import render_scene, two_tone

chroma_images = arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 7), st.just(3)),
                       elements=st.floats(0, 0.5))


def ci(samples):
    return ChromaticityImage(np.asarray(samples, dtype=np.float64), 0.0)


def test_uniform_is_one_cluster():
    cl = build_clusters(ci(np.full((5, 5, 3), 0.3)))
    assert cl.n_clusters == 1 and cl.sizes().tolist() == [25]


@pytest.mark.parametrize("delta, expected", [(0.2, 2), (0.01, 1)])
def test_two_tone(delta, expected):
    img = np.full((8, 8, 3), 0.3)
    img[:, 4:, 1] += delta
    cl = build_clusters(ci(img), t=0.03)
    assert cl.n_clusters == expected
    if expected == 2:
        tone = np.zeros((8, 8), int)
        tone[:, 4:] = 1
        assert np.array_equal(cl.labels, tone)


def test_two_tone_scene_end_to_end():
    sc = render_scene(two_tone(32))
    cl = build_clusters(chromaticity(sc.diffuse), t=0.03)
    assert cl.n_clusters == 2
    assert np.array_equal(cl.labels, sc.region_labels)


def test_pure_diffuse_seeds_first():
    img = np.zeros((1, 4, 3))
    img[0, :, 0] = [0.0, 0.02, 0.04, 0.06]
    pure = PixelClassMap(np.array([[False, False, True, False]]))
    cl = build_clusters(ci(img), pure, t=0.03, min_size=1)
    assert cl.seeds[0] == 2
    assert cl.labels[0].tolist() == [1, 0, 0, 0]


def test_small_clusters_merge_to_nearest_seed():
    img = np.full((6, 6, 3), 0.1)
    img[3:, :, 0] = 0.4          # second large tone
    img[0, 0] = (0.2, 0.1, 0.1)  # lone pixel, nearer the first tone
    cl = build_clusters(ci(img), t=0.03, min_size=12)
    assert cl.n_clusters == 2
    assert cl.labels[0, 0] == cl.labels[0, 1]
    assert cl.merged[0, 0] and cl.merged.sum() == 1


def test_rejects_bad_threshold():
    with pytest.raises(ValueError):
        build_clusters(ci(np.zeros((2, 2, 3))), t=0.0)


def test_count_can_grow_with_threshold():
    # greedy seeding is not monotone in t: at the larger threshold the first
    # seed swallows the pixel that would otherwise bridge the other two
    img = np.zeros((1, 4, 3))
    img[0, :, :2] = [[0.25, 0.24], [0.12, 0.13], [0.07, 0.21], [0.14, 0.05]]
    assert build_clusters(ci(img), t=0.10, min_size=1).n_clusters == 2
    assert build_clusters(ci(img), t=0.15, min_size=1).n_clusters == 3


@given(chroma_images, st.floats(0.005, 0.3))
def test_partition(img, t):
    cl = build_clusters(ci(img), t=t, min_size=1)
    groups = cl.clusters
    allidx = np.sort(np.concatenate(groups))
    assert np.array_equal(allidx, np.arange(img.shape[0] * img.shape[1]))
    assert all(g.size > 0 for g in groups)


@given(chroma_images, st.floats(0.005, 0.3), st.integers(1, 12))
def test_seed_distance_bound(img, t, min_size):
    cl = build_clusters(ci(img), t=t, min_size=min_size)
    X = img.reshape(-1, 3)
    for k, g in enumerate(cl.clusters):
        own = g[~cl.merged.ravel()[g]]
        assert np.all(np.max(np.abs(X[own] - cl.seed_chroma[k]), axis=1) < t)


@given(chroma_images)
def test_threshold_extremes(img):
    X = img.reshape(-1, 3)
    spread = np.max(np.abs(X[:, None] - X[None]), axis=-1)
    assert build_clusters(ci(img), t=spread.max() + 1e-9, min_size=1).n_clusters == 1
    off = spread[~np.eye(len(X), dtype=bool)]
    if off.size and off.min() > 0:
        assert build_clusters(ci(img), t=off.min(), min_size=1).n_clusters == len(X)


@given(chroma_images, st.floats(0.01, 0.2))
def test_deterministic(img, t):
    a = build_clusters(ci(img), t=t)
    b = build_clusters(ci(img.copy()), t=t)
    assert np.array_equal(a.labels, b.labels) and np.array_equal(a.seeds, b.seeds)
