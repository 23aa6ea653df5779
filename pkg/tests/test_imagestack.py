import logging

import cv2
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from polarsep.imagestack import (CANONICAL_ANGLES, DEFAULT_MOSAIC, DimensionError, PolarizedStack,
                                 StackError, TagError, angle_tag, find_stack_files, load_mosaic,
                                 load_stack, read_image, save_image, split_mosaic, write_stack)


def _write_raw(path, value, dtype, shape=(3, 4, 3)):
    cv2.imwrite(str(path), np.full(shape, value, dtype=dtype))


def test_eight_bit_peak_is_one(tmp_path):
    paths = []
    for a in CANONICAL_ANGLES:
        p = tmp_path / f"s_{a:03d}.png"
        _write_raw(p, 255, np.uint8)
        paths.append(p)
    st_ = load_stack(paths)
    assert st_.frames.shape == (4, 3, 4, 3)
    assert np.all(st_.frames == 1.0)


def test_files_reordered_to_canonical(tmp_path):
    paths = {}
    for i, a in enumerate((90, 0, 135, 45)):
        p = tmp_path / f"s_{a:03d}.png"
        _write_raw(p, 10 * (i + 1), np.uint8)
        paths[a] = p
    st_ = load_stack([paths[a] for a in (90, 0, 135, 45)])
    assert st_.angles == CANONICAL_ANGLES
    got = [st_.frame(a)[0, 0, 0] * 255 for a in CANONICAL_ANGLES]
    assert np.allclose(got, [20, 40, 10, 30])


def test_sixteen_bit_division(tmp_path):
    paths = []
    for a in CANONICAL_ANGLES:
        p = tmp_path / f"s_{a:03d}.png"
        _write_raw(p, 32768, np.uint16)
        paths.append(p)
    st_ = load_stack(paths)
    assert st_.frames[0, 0, 0, 0] == 32768 / 65535


def test_missing_and_duplicate_tags(tmp_path):
    ps = []
    for a in (0, 45, 90, 90):
        p = tmp_path / f"x{len(ps)}_{a:03d}.png"
        _write_raw(p, 1, np.uint8)
        ps.append(p)
    with pytest.raises(TagError, match="duplicate"):
        load_stack(ps)
    with pytest.raises(TagError, match="_135"):
        load_stack(ps[:3] + [ps[0]], angles=(0, 45, 90, 180))
    with pytest.raises(TagError, match="_135"):
        load_stack({0: ps[0], 45: ps[1], 90: ps[2]})


def test_dimension_mismatch(tmp_path):
    ps = []
    for a in CANONICAL_ANGLES:
        p = tmp_path / f"s_{a:03d}.png"
        _write_raw(p, 1, np.uint8, shape=(3, 4 + (a == 135), 3))
        ps.append(p)
    with pytest.raises(DimensionError):
        load_stack(ps)


def test_unreadable_file(tmp_path):
    bad = tmp_path / "s_000.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(OSError):
        read_image(bad)
    with pytest.raises(FileNotFoundError):
        read_image(tmp_path / "nope.png")


def test_grayscale_replicated(tmp_path):
    p = tmp_path / "g.png"
    cv2.imwrite(str(p), np.full((2, 2), 51, np.uint8))
    img = read_image(p)
    assert img.shape == (2, 2, 3) and np.allclose(img, 0.2)


def test_channel_order_is_rgb(tmp_path):
    img = np.zeros((2, 2, 3))
    img[..., 0] = 1.0
    p = tmp_path / "r.png"
    save_image(img, p)
    assert np.array_equal(read_image(p), img)


def test_stack_validation():
    good = np.full((4, 2, 2, 3), 0.5)
    with pytest.raises(StackError):
        PolarizedStack(good * 3)
    with pytest.raises(TagError):
        PolarizedStack(good, (0, 45, 90, 90))
    with pytest.raises(DimensionError):
        PolarizedStack(good[:3])
    bad = good.copy()
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(StackError):
        PolarizedStack(bad)


def test_angle_tag():
    assert angle_tag("a/b/scene_045.png") == 45
    assert angle_tag("scene.png") is None


def test_mosaic_constant():
    st_ = split_mosaic(np.full((4, 4), 0.3))
    assert st_.frames.shape == (4, 2, 2, 3)
    assert np.all(st_.frames == 0.3)


def test_mosaic_super_pixel():
    a, b, c, d = 0.1, 0.2, 0.3, 0.4
    st_ = split_mosaic(np.array([[a, b], [c, d]]), DEFAULT_MOSAIC)
    assert [st_.frame(ang)[0, 0, 0] for ang in CANONICAL_ANGLES] == [a, b, c, d]


def test_mosaic_checkerboard():
    yy, xx = np.mgrid[0:8, 0:6]
    phase_val = {(0, 0): 0.1, (0, 1): 0.5, (1, 0): 0.7, (1, 1): 0.9}
    raw = np.vectorize(lambda y, x: phase_val[(y % 2, x % 2)])(yy, xx)
    st_ = split_mosaic(raw)
    for (dy, dx), ang in DEFAULT_MOSAIC.items():
        assert np.all(st_.frame(ang) == phase_val[(dy, dx)])


def test_mosaic_odd_dimensions():
    with pytest.raises(DimensionError):
        split_mosaic(np.zeros((3, 4)))


def test_load_mosaic_from_file(tmp_path):
    p = tmp_path / "m.png"
    cv2.imwrite(str(p), np.array([[0, 255], [51, 102]], np.uint8))
    st_ = load_mosaic(p)
    assert np.allclose([st_.frame(a)[0, 0, 0] for a in CANONICAL_ANGLES], [0, 1, 0.2, 0.4])


def test_save_clamps_and_counts(tmp_path, caplog):
    img = np.full((2, 2, 3), 0.5)
    img[0, 0, 0] = 1.3
    with caplog.at_level(logging.WARNING):
        n = save_image(img, tmp_path / "c.png")
    assert n == 1
    assert read_image(tmp_path / "c.png")[0, 0, 0] == 1.0


def test_save_eight_bit_half(tmp_path):
    save_image(np.full((2, 2, 3), 0.5), tmp_path / "h.png", 8)
    assert np.max(np.abs(read_image(tmp_path / "h.png") - 0.5)) <= 1 / 255


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        save_image(np.zeros((2, 2, 3)), tmp_path / "missing_dir" / "x.png")


def test_sixteen_bit_round_trip(tmp_path, rng):
    img = rng.uniform(0, 1, (9, 7, 3))
    save_image(img, tmp_path / "r.png", 16)
    assert np.max(np.abs(read_image(tmp_path / "r.png") - img)) <= 1 / 65535


def test_write_and_find_stack(tmp_path, rng):
    st_ = PolarizedStack(rng.uniform(0, 1, (4, 5, 6, 3)))
    write_stack(st_, tmp_path, "abc")
    found = find_stack_files(tmp_path, "abc")
    assert sorted(found) == list(CANONICAL_ANGLES)
    back = load_stack(found)
    assert np.max(np.abs(back.frames - st_.frames)) <= 1 / 65535


@given(st.permutations(range(4)))
def test_canonical_order_any_permutation(perm):
    frames = np.stack([np.full((1, 1, 3), 0.1 * (i + 1)) for i in range(4)])
    angles = np.array(CANONICAL_ANGLES)
    s = PolarizedStack(frames[list(perm)], tuple(angles[list(perm)]))
    assert s.angles == CANONICAL_ANGLES
    assert np.array_equal(s.frames, frames)
    # idempotent
    assert np.array_equal(PolarizedStack(s.frames, s.angles).frames, s.frames)


@given(img=arrays(np.float64, (3, 4, 3), elements=st.floats(0, 1)), depth=st.sampled_from([8, 16]))
def test_quantization_bound(tmp_path_factory, img, depth):
    p = tmp_path_factory.mktemp("q") / "x.png"
    save_image(img, p, depth)
    assert np.max(np.abs(read_image(p) - img)) <= 0.5 / (2 ** depth - 1) + 1e-12
