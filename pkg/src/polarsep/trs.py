"""Transmitted radiance sinusoid fit.

Each pixel/channel follows ``I(phi) = I_c + I_sv * cos(2 (phi - alpha))`` as the
polarizer angle ``phi`` varies. The fit is linear in
``(I_c, I_sv cos 2a, I_sv sin 2a)`` and is solved per channel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagestack import PolarizedStack

EPS_DIV = 1e-6
# below this amplitude the phase is undefined and reported as 0
PHASE_FLOOR = 1e-9


@dataclass(frozen=True)
class TRSMaps:
    i_c: np.ndarray       # (H, W, 3) constant radiance
    i_sv: np.ndarray      # (H, W, 3) polarized amplitude
    alpha: np.ndarray     # (H, W, 3) phase in [0, pi)
    residual: np.ndarray  # (H, W, 3) sum of squared fit errors
    clamp_count: int = 0  # samples where a negative i_c was clamped

    @property
    def shape(self):
        return self.i_c.shape

    def evaluate(self, phi_deg) -> np.ndarray:
        phi = np.deg2rad(phi_deg)
        return self.i_c + self.i_sv * np.cos(2.0 * (phi - self.alpha))


@dataclass(frozen=True)
class RawComponents:
    raw_d: np.ndarray
    raw_s: np.ndarray
    clamp_count: int = 0  # pixels where raw_d hit zero in any channel


def design_matrix(angles_deg) -> np.ndarray:
    phi = np.deg2rad(np.asarray(angles_deg, dtype=np.float64))
    return np.stack([np.ones_like(phi), np.cos(2 * phi), np.sin(2 * phi)], axis=1)


def fit_trs(stack: PolarizedStack) -> TRSMaps:
    f = stack.frames
    if stack.is_canonical:
        i0, i45, i90, i135 = f
        i_c = (i0 + i45 + i90 + i135) / 4.0
        c = (i0 - i90) / 2.0
        s = (i45 - i135) / 2.0
    else:
        P = design_matrix(stack.angles)
        solve = np.linalg.solve(P.T @ P, P.T)  # (3, 4) normal-equation operator
        i_c, c, s = np.tensordot(solve, f, axes=(1, 0))
    return _finish(stack, i_c, c, s)


def _finish(stack, i_c, c, s) -> TRSMaps:
    i_sv = np.hypot(c, s)
    alpha = np.mod(0.5 * np.arctan2(s, c), np.pi)
    alpha = np.where(i_sv < PHASE_FLOOR, 0.0, alpha)
    # pi itself can appear after mod for tiny negative angles
    alpha = np.where(alpha >= np.pi, 0.0, alpha)

    model = i_c[None] + np.tensordot(np.cos(2 * np.deg2rad(stack.angles)), c, axes=0) \
        + np.tensordot(np.sin(2 * np.deg2rad(stack.angles)), s, axes=0)
    residual = np.sum((model - stack.frames) ** 2, axis=0)

    neg = i_c < 0.0
    n_neg = int(np.count_nonzero(neg))
    if n_neg:
        i_c = np.where(neg, 0.0, i_c)
    return TRSMaps(i_c=i_c, i_sv=i_sv, alpha=alpha, residual=residual, clamp_count=n_neg)


def raw_components(maps: TRSMaps) -> RawComponents:
    """Polarization-only split: the varying part 2*I_sv is specular."""
    raw_s = 2.0 * maps.i_sv
    diff = maps.i_c - raw_s
    clamped = np.any(diff < 0.0, axis=-1)
    return RawComponents(raw_d=np.maximum(diff, 0.0), raw_s=raw_s,
                         clamp_count=int(np.count_nonzero(clamped)))


def degree_of_polarization(maps: TRSMaps) -> np.ndarray:
    """Channel-mean of I_sv / I_c, clipped to [0, 1]."""
    ratio = maps.i_sv / np.maximum(maps.i_c, EPS_DIV)
    return np.clip(ratio.mean(axis=-1), 0.0, 1.0)
