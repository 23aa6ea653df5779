"""Evaluation metrics for separated diffuse images.

PSNR and SSIM are the usual definitions on [0, 1] images. Color accuracy is
the PSNR between chromaticity images, and hue spread is the circular standard
deviation of HSV hue over non-dark pixels.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from skimage.color import rgb2hsv
from skimage.metrics import structural_similarity

from .chroma import chromaticity

PSNR_CAP = 99.0
SSIM_WIN = 11
DARK_LEVEL = 0.02


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse <= 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def ssim(a, b) -> float:
    """Gaussian-window SSIM (sigma 1.5, 11x11), averaged over channels."""
    a, b = _pair(a, b)
    if min(a.shape[:2]) < SSIM_WIN:
        raise ValueError(f"image {a.shape[:2]} is smaller than the {SSIM_WIN}x{SSIM_WIN} window")
    kw = dict(data_range=1.0, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
              K1=0.01, K2=0.03)
    if a.ndim == 2:
        return float(structural_similarity(a, b, **kw))
    return float(np.mean([structural_similarity(a[..., c], b[..., c], **kw)
                          for c in range(a.shape[-1])]))


def color_accuracy(a, b) -> float:
    a, b = _pair(a, b)
    return psnr(chromaticity(a).samples, chromaticity(b).samples)


def hue_sd(img, mask=None) -> float:
    img = np.asarray(img, dtype=np.float64)
    if mask is None:
        mask = img.max(axis=-1) > DARK_LEVEL
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != img.shape[:2]:
        raise ValueError("mask does not match the image")
    if not mask.any():
        raise ValueError("hue mask selects no pixels")
    hue = rgb2hsv(np.clip(img, 0.0, 1.0))[..., 0][mask]
    return circular_sd(hue)


def circular_sd(x) -> float:
    """Circular SD of values on the unit circle [0, 1), in the same units."""
    ang = 2.0 * np.pi * np.asarray(x, dtype=np.float64).ravel()
    if ang.size == 0:
        raise ValueError("no samples")
    # angles relative to the first sample so a constant input is exactly 0
    z = np.exp(1j * (ang - ang[0]))
    # 1 - R^2 as the mean squared distance to the mean resultant (no cancellation)
    spread = float(np.mean(np.abs(z - z.mean()) ** 2))
    if spread >= 1.0:
        return math.inf
    return math.sqrt(-math.log1p(-spread)) / (2.0 * np.pi)


@dataclass
class MetricsReport:
    scene: str
    psnr_db: float
    ssim: float
    ca_db: float
    hue_sd: float
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def evaluate(pred, gt, scene: str = "scene", params: dict | None = None) -> MetricsReport:
    """All four metrics of ``pred`` (an image or anything with ``.diffuse``) against ``gt``."""
    if hasattr(pred, "diffuse"):
        params = params if params is not None else dict(getattr(pred, "params", {}) or {})
        pred = pred.diffuse
    pred, gt = _pair(pred, gt)
    return MetricsReport(scene=scene, psnr_db=psnr(pred, gt), ssim=ssim(pred, gt),
                         ca_db=color_accuracy(pred, gt), hue_sd=hue_sd(pred),
                         params=params or {})


METRIC_KEYS = ("psnr_db", "ssim", "ca_db", "hue_sd")


def aggregate(reports) -> dict:
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    return {k: float(np.mean([getattr(r, k) for r in reports])) for k in METRIC_KEYS}


def write_csv(reports, path, mean: dict | None = None) -> None:
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(("scene",) + METRIC_KEYS)
        for r in reports:
            wr.writerow([r.scene] + [getattr(r, k) for k in METRIC_KEYS])
        if mean is not None:
            wr.writerow(["mean"] + [mean[k] for k in METRIC_KEYS])
