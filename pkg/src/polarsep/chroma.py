"""Polarization chromaticity image and pure-diffuse pixel classification."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trs import EPS_DIV, RawComponents, TRSMaps


@dataclass(frozen=True)
class ChromaticityImage:
    samples: np.ndarray  # (H, W, 3)
    i_min_bar: float


@dataclass(frozen=True)
class PixelClassMap:
    pure_diffuse: np.ndarray  # (H, W) bool; False means combined reflection

    @property
    def n_pure(self) -> int:
        return int(np.count_nonzero(self.pure_diffuse))

    @property
    def n_combined(self) -> int:
        return self.pure_diffuse.size - self.n_pure


def mean_channel_min(img: np.ndarray) -> float:
    mins = np.min(img, axis=-1).ravel()
    # fsum: order-independent, so the reduction is reproducible bit for bit
    return math.fsum(mins.tolist()) / mins.size


def chromaticity(raw_d: np.ndarray) -> ChromaticityImage:
    """``raw_d / (sum_c raw_d + mean channel minimum)``, zero where undefined."""
    raw_d = np.asarray(raw_d, dtype=np.float64)
    i_min_bar = mean_channel_min(raw_d)
    denom = raw_d.sum(axis=-1, keepdims=True) + i_min_bar
    out = np.divide(raw_d, denom, out=np.zeros_like(raw_d), where=denom > 0)
    return ChromaticityImage(samples=out, i_min_bar=i_min_bar)


def classify_pixels(maps: TRSMaps, raw: RawComponents, tau_s: float = 0.02) -> PixelClassMap:
    """Pure diffuse where the polarized energy 2*I_sv is small relative to I_c."""
    if raw.raw_s.shape != maps.i_c.shape:
        raise ValueError("TRS maps and raw components differ in shape")
    polarized = raw.raw_s.mean(axis=-1)
    constant = maps.i_c.mean(axis=-1)
    return PixelClassMap(pure_diffuse=polarized < tau_s * np.maximum(constant, EPS_DIV))
