"""Polarized image stacks: loading, validation, mosaic splitting and image I/O.

All pixel data is held as float64 linear intensity in [0, 1]. An RGB image is a
``(H, W, 3)`` array; a stack holds four of them at polarizer angles
0, 45, 90 and 135 degrees.
"""
from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import cv2
import numpy as np

log = logging.getLogger(__name__)

CANONICAL_ANGLES = (0, 45, 90, 135)

# (row, col) offset inside each 2x2 super-pixel -> polarizer angle
DEFAULT_MOSAIC = {(0, 0): 0, (0, 1): 45, (1, 0): 90, (1, 1): 135}
# layout used by Sony IMX250MZR-style sensors
SONY_MOSAIC = {(0, 0): 90, (0, 1): 45, (1, 0): 135, (1, 1): 0}

_TAG_RE = re.compile(r"_(\d{3})$")


class StackError(ValueError):
    """Base class for invalid image or stack input."""


class DimensionError(StackError):
    pass


class TagError(StackError):
    pass


def as_rgb(img, name: str = "image") -> np.ndarray:
    """Validate and return ``img`` as a float64 ``(H, W, 3)`` array."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = np.repeat(a[:, :, None], 3, axis=2)
    if a.ndim != 3 or a.shape[2] != 3:
        raise DimensionError(f"{name}: expected (H, W, 3), got shape {a.shape}")
    if a.shape[0] * a.shape[1] == 0:
        raise DimensionError(f"{name}: empty image")
    if not np.all(np.isfinite(a)):
        raise StackError(f"{name}: non-finite samples")
    return a


@dataclass(frozen=True)
class PolarizedStack:
    """Four co-registered RGB frames, one per polarizer angle (degrees).

    Frames are kept sorted by angle, so any input order maps to the same
    stack.
    """

    frames: np.ndarray  # (4, H, W, 3)
    angles: tuple = CANONICAL_ANGLES

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        angles = tuple(float(a) % 180.0 for a in self.angles)
        if frames.ndim != 4 or frames.shape[0] != 4 or frames.shape[3] != 3:
            raise DimensionError(f"stack must be (4, H, W, 3), got {frames.shape}")
        if frames.shape[1] * frames.shape[2] == 0:
            raise DimensionError("stack frames are empty")
        if len(angles) != 4 or len(set(angles)) != 4:
            raise TagError(f"need four distinct angles, got {self.angles}")
        if not np.all(np.isfinite(frames)):
            raise StackError("stack contains non-finite samples")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise StackError("stack samples must lie in [0, 1]")
        order = np.argsort(angles, kind="stable")
        frames = frames[order]
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "angles", tuple(_int_if_whole(angles[i]) for i in order))

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def is_canonical(self) -> bool:
        return self.angles == CANONICAL_ANGLES

    def frame(self, angle) -> np.ndarray:
        return self.frames[self.angles.index(_int_if_whole(float(angle) % 180.0))]

    @classmethod
    def from_frames(cls, frames: Mapping) -> "PolarizedStack":
        """Build a stack from an ``{angle: image}`` mapping."""
        if len(frames) != 4:
            raise TagError(f"need four angle frames, got {sorted(frames)}")
        imgs = [as_rgb(v, f"frame {k}") for k, v in frames.items()]
        shapes = {im.shape for im in imgs}
        if len(shapes) != 1:
            raise DimensionError(f"frame dimensions differ: {sorted(shapes)}")
        return cls(np.stack(imgs), tuple(frames))


def _int_if_whole(x: float):
    return int(x) if float(x).is_integer() else x


def read_image(path, gamma: float | None = None) -> np.ndarray:
    """Read an 8- or 16-bit raster as linear RGB floats in [0, 1]."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such image: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise OSError(f"unreadable image: {path}")
    if raw.dtype == np.uint8:
        img = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        img = raw.astype(np.float64) / 65535.0
    else:
        raise StackError(f"{path}: unsupported sample type {raw.dtype}")
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        elif img.shape[2] == 1:
            img = img[:, :, 0]
        if img.ndim == 3:
            img = img[:, :, ::-1]  # BGR -> RGB
    img = as_rgb(img, path)
    if gamma is not None:
        img = img ** gamma
    return np.ascontiguousarray(img)


def save_image(img, path, bit_depth: int = 8) -> int:
    """Write ``img`` losslessly; returns the number of clamped samples."""
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    a = as_rgb(img)
    clamped = int(np.count_nonzero((a < 0.0) | (a > 1.0)))
    if clamped:
        log.warning("%s: clamped %d samples to [0, 1]", path, clamped)
    a = np.clip(a, 0.0, 1.0)
    peak = 2 ** bit_depth - 1
    q = np.rint(a * peak).astype(np.uint8 if bit_depth == 8 else np.uint16)
    path = os.fspath(path)
    try:
        ok = cv2.imwrite(path, np.ascontiguousarray(q[:, :, ::-1]))
    except cv2.error as exc:
        raise OSError(f"cannot write {path}: {exc}") from None
    if not ok:
        raise OSError(f"cannot write {path}")
    return clamped


def angle_tag(path) -> int | None:
    m = _TAG_RE.search(Path(path).stem)
    return int(m.group(1)) if m else None


def load_stack(paths, angles: Sequence[int] | None = None,
               gamma: float | None = None) -> PolarizedStack:
    """Load four angle images.

    ``paths`` is either a sequence of four files whose stems end in
    ``_000``/``_045``/``_090``/``_135``, or an ``{angle: path}`` mapping.
    An explicit ``angles`` sequence overrides the filename tags.
    """
    if isinstance(paths, Mapping):
        tagged = {int(k): v for k, v in paths.items()}
    else:
        paths = list(paths)
        if angles is not None:
            if len(angles) != len(paths):
                raise TagError("angle override must match the number of files")
            tags = [int(a) for a in angles]
        else:
            tags = [angle_tag(p) for p in paths]
            for p, t in zip(paths, tags):
                if t is None:
                    raise TagError(f"no angle tag in file name: {p}")
        tagged = {}
        for p, t in zip(paths, tags):
            if t in tagged:
                raise TagError(f"duplicate angle tag _{t:03d}")
            tagged[t] = p
    missing = [a for a in CANONICAL_ANGLES if a not in tagged]
    if missing:
        raise TagError("missing angle tag " + ", ".join(f"_{a:03d}" for a in missing))
    extra = sorted(set(tagged) - set(CANONICAL_ANGLES))
    if extra:
        raise TagError(f"unexpected angle tag(s) {extra}")
    return PolarizedStack.from_frames({a: read_image(tagged[a], gamma) for a in CANONICAL_ANGLES})


def find_stack_files(directory, scene: str | None = None) -> dict:
    """Locate ``<scene>_<angle>.<ext>`` files in a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    found: dict = {}
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() not in (".png", ".tif", ".tiff", ".bmp", ".ppm", ".pgm"):
            continue
        t = angle_tag(p)
        if t is None:
            continue
        if scene is not None and p.stem[: -4] != scene:
            continue
        if t in found:
            raise TagError(f"duplicate angle tag _{t:03d} in {directory}")
        found[t] = p
    missing = [a for a in CANONICAL_ANGLES if a not in found]
    if missing:
        raise TagError("missing angle tag " + ", ".join(f"_{a:03d}" for a in missing)
                       + f" in {directory}")
    return found


def write_stack(stack: PolarizedStack, directory, scene: str = "scene",
                bit_depth: int = 16, ext: str = "png") -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for angle, frame in zip(stack.angles, stack.frames):
        p = directory / f"{scene}_{int(angle):03d}.{ext}"
        save_image(frame, p, bit_depth)
        out.append(p)
    return out


def split_mosaic(raw, pattern: Mapping | None = None) -> PolarizedStack:
    """Split a 2x2 polarization mosaic by subsampling each phase.

    No interpolation is done: each output frame has half the raw resolution.
    A single-channel raw frame is replicated to three channels.
    """
    pattern = DEFAULT_MOSAIC if pattern is None else pattern
    a = np.asarray(raw, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim not in (2, 3):
        raise DimensionError(f"mosaic must be 2-D, got shape {a.shape}")
    h, w = a.shape[:2]
    if h == 0 or w == 0 or h % 2 or w % 2:
        raise DimensionError(f"mosaic dimensions must be even, got {h}x{w}")
    if sorted(pattern) != [(0, 0), (0, 1), (1, 0), (1, 1)]:
        raise TagError("mosaic pattern must cover the four 2x2 offsets")
    frames = {}
    for (dy, dx), angle in pattern.items():
        if angle in frames:
            raise TagError(f"duplicate angle {angle} in mosaic pattern")
        frames[angle] = a[dy::2, dx::2]
    return PolarizedStack.from_frames(frames)


def load_mosaic(path, pattern: Mapping | None = None, gamma: float | None = None) -> PolarizedStack:
    img = read_image(path, gamma)
    return split_mosaic(img.mean(axis=2) if np.ptp(img, axis=2).max() > 0 else img[:, :, 0], pattern)
