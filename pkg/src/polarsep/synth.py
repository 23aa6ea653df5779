"""Synthetic polarized scenes with exact ground truth.

Every pixel is rendered as::

    I(phi) = I_d + I_sc + I_sv * (2 + cos 2(phi - alpha))

``I_d`` is the diffuse color, ``I_sc`` the unpolarized specular part and the
last term the polarized specular lobe. The lobe's constant floor of
``2 * I_sv`` is what makes the polarization-only raw diffuse estimate
``I_c - 2 I_sv`` equal ``I_d + I_sc`` exactly, so any residual specular
content seen after the sinusoid fit is precisely ``I_sc``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .imagestack import CANONICAL_ANGLES, PolarizedStack
from .trs import PHASE_FLOOR, TRSMaps


class SpecError(ValueError):
    pass


def _rgb(v, name):
    a = np.broadcast_to(np.asarray(v, dtype=np.float64), (3,)).copy()
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise SpecError(f"{name}: values must be finite and nonnegative, got {v}")
    return a


@dataclass
class Region:
    """A diffuse area. ``mask`` is one of
    ``{"kind": "full"}``, ``{"kind": "rect", "x0", "y0", "x1", "y1"}`` (half-open)
    or ``{"kind": "disk", "cx", "cy", "r"}``.
    """

    diffuse: tuple
    mask: dict = field(default_factory=lambda: {"kind": "full"})
    specular_constant: tuple = (0.0, 0.0, 0.0)
    polarized_amplitude: tuple = (0.0, 0.0, 0.0)
    phase: float = 0.0
    shading: tuple = (1.0, 1.0)  # diffuse multiplier, left edge -> right edge
    name: str = ""


@dataclass
class Highlight:
    """An additive specular blob of radius ``radius`` pixels.

    ``profile`` is ``"flat"`` or ``"cosine"`` (raised-cosine falloff to zero at
    the rim).
    """

    cx: float
    cy: float
    radius: float
    specular_constant: tuple = (0.0, 0.0, 0.0)
    polarized_amplitude: tuple = (0.0, 0.0, 0.0)
    phase: float = 0.0
    profile: str = "cosine"
    name: str = ""


@dataclass
class SynthSpec:
    width: int
    height: int
    regions: list
    highlights: list = field(default_factory=list)
    noise_sigma: float = 0.0
    rng_seed: int = 0
    name: str = "scene"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        d["regions"] = [Region(**r) for r in d.get("regions", [])]
        d["highlights"] = [Highlight(**h) for h in d.get("highlights", [])]
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SynthSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass
class RenderedScene:
    stack: PolarizedStack
    diffuse: np.ndarray         # ground truth I_d
    specular_constant: np.ndarray
    truth: TRSMaps              # exact sinusoid parameters (noise-free)
    region_labels: np.ndarray   # (H, W) index of the region painted last at each pixel
    highlight_mask: np.ndarray  # (H, W) bool


def _mask(kind: dict, yy, xx, name) -> np.ndarray:
    k = kind.get("kind", "full")
    if k == "full":
        return np.ones(yy.shape, dtype=bool)
    if k == "rect":
        return (xx >= kind["x0"]) & (xx < kind["x1"]) & (yy >= kind["y0"]) & (yy < kind["y1"])
    if k == "disk":
        return (xx - kind["cx"]) ** 2 + (yy - kind["cy"]) ** 2 < kind["r"] ** 2
    raise SpecError(f"{name}: unknown mask kind {k!r}")


def _profile(h: Highlight, yy, xx) -> np.ndarray:
    r = np.sqrt((xx - h.cx) ** 2 + (yy - h.cy) ** 2) / h.radius
    if h.profile == "flat":
        return (r < 1.0).astype(np.float64)
    if h.profile == "cosine":
        return np.where(r < 1.0, 0.5 * (1.0 + np.cos(np.pi * r)), 0.0)
    raise SpecError(f"highlight {h.name or (h.cx, h.cy)}: unknown profile {h.profile!r}")


def render_scene(spec: SynthSpec) -> RenderedScene:
    h, w = spec.height, spec.width
    if h < 1 or w < 1:
        raise SpecError("canvas must be non-empty")
    if spec.noise_sigma < 0:
        raise SpecError("noise_sigma must be nonnegative")
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    ramp = xx / max(w - 1, 1)

    i_d = np.zeros((h, w, 3))
    i_sc = np.zeros((h, w, 3))
    pc = np.zeros((h, w, 3))  # polarized lobe as (I_sv cos 2a, I_sv sin 2a)
    ps = np.zeros((h, w, 3))
    labels = np.full((h, w), -1, dtype=np.int64)
    owner = np.full((h, w), "", dtype=object)

    for idx, reg in enumerate(spec.regions):
        name = reg.name or f"region {idx}"
        m = _mask(reg.mask, yy, xx, name)
        lo, hi = reg.shading
        shade = (lo + (hi - lo) * ramp)[..., None]
        amp = _rgb(reg.polarized_amplitude, name)
        i_d[m] = (_rgb(reg.diffuse, name) * shade)[m]
        i_sc[m] = _rgb(reg.specular_constant, name)
        pc[m] = amp * np.cos(2 * reg.phase)
        ps[m] = amp * np.sin(2 * reg.phase)
        labels[m] = idx
        owner[m] = name
    if np.any(labels < 0):
        raise SpecError("regions do not cover the canvas")

    hl_mask = np.zeros((h, w), dtype=bool)
    for j, hl in enumerate(spec.highlights):
        name = hl.name or f"highlight {j}"
        wgt = _profile(hl, yy, xx)[..., None]
        amp = _rgb(hl.polarized_amplitude, name)
        i_sc += wgt * _rgb(hl.specular_constant, name)
        pc += wgt * amp * np.cos(2 * hl.phase)
        ps += wgt * amp * np.sin(2 * hl.phase)
        sel = wgt[..., 0] > 0
        hl_mask |= sel
        owner[sel] = name

    i_sv = np.hypot(pc, ps)
    alpha = np.mod(0.5 * np.arctan2(ps, pc), np.pi)
    alpha = np.where((i_sv < PHASE_FLOOR) | (alpha >= np.pi), 0.0, alpha)
    i_c = i_d + i_sc + 2.0 * i_sv

    bad = (i_c + i_sv > 1.0).any(axis=-1)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise SpecError(f"{owner[y, x]}: radiance exceeds 1 at pixel (x={x}, y={y})")

    phis = np.deg2rad(np.asarray(CANONICAL_ANGLES, dtype=np.float64))
    frames = np.stack([i_c + i_sv * np.cos(2 * (p - alpha)) for p in phis])
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.rng_seed)
        frames = frames + rng.normal(0.0, spec.noise_sigma, frames.shape)
    frames = np.clip(frames, 0.0, 1.0)

    truth = TRSMaps(i_c=i_c, i_sv=i_sv, alpha=alpha, residual=np.zeros_like(i_c))
    return RenderedScene(stack=PolarizedStack(frames, CANONICAL_ANGLES), diffuse=i_d,
                         specular_constant=i_sc, truth=truth, region_labels=labels,
                         highlight_mask=hl_mask)


# ---------------------------------------------------------------------------
# fixtures

def _blobs(rng, n, width, height, rmin, rmax, margin=4):
    if min(width, height) <= 2 * (margin + rmax):
        raise SpecError(f"canvas {width}x{height} too small for highlights of radius {rmax:g}")
    out = []
    for _ in range(n):
        r = rng.uniform(rmin, rmax)
        out.append((rng.uniform(margin + r, width - margin - r),
                    rng.uniform(margin + r, height - margin - r), r))
    return out


def _base_regions(size):
    s = size
    return [
        Region(diffuse=(0.55, 0.10, 0.06), shading=(0.9, 1.0), name="red"),
        Region(diffuse=(0.08, 0.45, 0.10), mask={"kind": "rect", "x0": s // 2, "y0": 0,
                                                  "x1": s, "y1": s // 2},
               shading=(0.9, 1.0), name="green"),
        Region(diffuse=(0.07, 0.12, 0.50), mask={"kind": "disk", "cx": s * 0.3, "cy": s * 0.72,
                                                  "r": s * 0.2},
               shading=(0.9, 1.0), name="blue"),
    ]


def _highlights(size, sc, sv, seed, count=None, width=None):
    rng = np.random.default_rng(seed)
    count = count if count is not None else max(4, size * size // 2600)
    rmin, rmax = max(2.0, size / 64), max(3.0, size / 32)
    out = []
    for j, (cx, cy, r) in enumerate(_blobs(rng, count, width or size, size, rmin, rmax)):
        out.append(Highlight(cx=cx, cy=cy, radius=r, specular_constant=tuple(sc),
                             polarized_amplitude=tuple(sv), phase=float(rng.uniform(0, np.pi)),
                             name=f"highlight {j}"))
    return out


FIXTURES = ("flat", "polarized_only", "partial", "near_duplicate", "noisy", "two_tone")


def standard_scenes(size: int = 256) -> dict:
    """Named fixtures used by tests and the acceptance suite."""
    white = np.ones(3)
    # the partial scenes are lit by a white key light plus a blue spot; the
    # spot's specular sits in one channel, which a rank-1 cluster model can
    # identify and remove
    spot = np.array([0.0, 0.0, 1.0])
    scenes = {}
    scenes["flat"] = SynthSpec(size, size, _base_regions(size), name="flat")
    scenes["polarized_only"] = SynthSpec(
        size, size, _base_regions(size), _highlights(size, 0.0 * white, 0.08 * white, 1),
        name="polarized_only")
    scenes["partial"] = SynthSpec(
        size, size, _base_regions(size), _highlights(size, 0.02 * spot, 0.08 * spot, 2),
        name="partial")
    scenes["near_duplicate"] = near_duplicate(size)
    noisy = SynthSpec(size, size, _base_regions(size),
                      _highlights(size, 0.02 * spot, 0.08 * spot, 2),
                      noise_sigma=0.01, rng_seed=7, name="noisy")
    scenes["noisy"] = noisy
    scenes["two_tone"] = two_tone(size)
    return scenes


def near_duplicate(size: int = 256) -> SynthSpec:
    # illumination is orange; the left surface is within 5% of it in chromaticity
    light = np.array([1.0, 0.42, 0.12])
    s = size
    regions = [
        Region(diffuse=tuple(0.5 * light * (1.0, 1.04, 0.97)), shading=(0.92, 1.0), name="orange"),
        Region(diffuse=(0.08, 0.20, 0.48), mask={"kind": "rect", "x0": s // 2, "y0": 0,
                                                 "x1": s, "y1": s},
               shading=(0.92, 1.0), name="blue"),
    ]
    # highlights stay on the orange half so cluster masks can equal the regions
    hls = _highlights(s, 0.25 * light, 0.05 * light, 3, count=max(4, s * s // 5200), width=s // 2)
    return SynthSpec(s, s, regions, hls, name="near_duplicate")


def two_tone(size: int = 64, delta: float = 0.2) -> SynthSpec:
    s = size
    return SynthSpec(s, s, [
        Region(diffuse=(0.5, 0.2, 0.2), name="left"),
        Region(diffuse=(0.5, 0.2 + delta, 0.2), mask={"kind": "rect", "x0": s // 2, "y0": 0,
                                                       "x1": s, "y1": s}, name="right"),
    ], name="two_tone")


def write_scene(scene: RenderedScene, directory, name: str = "scene", bit_depth: int = 16) -> dict:
    from .imagestack import save_image, write_stack
    directory = Path(directory)
    paths = write_stack(scene.stack, directory, name, bit_depth)
    gt = directory / f"{name}_gt.png"
    save_image(scene.diffuse, gt, bit_depth)
    return {"frames": [str(p) for p in paths], "groundtruth": str(gt)}
