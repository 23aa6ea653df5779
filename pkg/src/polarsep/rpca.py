"""Low-rank + sparse decomposition of pixel clusters.

Each cluster is an ``X x 3`` matrix of pixel colors. Its diffuse part is
modelled as low rank and its specular part as sparse, solved by the inexact
augmented Lagrange multiplier method with a nonnegativity projection on the
low-rank iterate.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterSet

log = logging.getLogger(__name__)


class NumericError(ArithmeticError):
    pass


@dataclass
class RpcaOptions:
    max_iter: int = 100
    tol: float = 1e-6
    mu0: float | None = None   # default 1.25 / sigma_max(C)
    mu_growth: float = 1.2
    mu_cap: float = 1e7        # mu never exceeds mu0 * mu_cap


@dataclass
class RpcaResult:
    d: np.ndarray
    s: np.ndarray
    iterations: int
    converged: bool
    residual: float  # ||C - D - S||_F / ||C||_F


def soft_threshold(m, kappa: float) -> np.ndarray:
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    return np.sign(m) * np.maximum(np.abs(m) - kappa, 0.0)


def _right_vectors(m: np.ndarray):
    """Singular values and right singular vectors from the small Gram matrix."""
    evals, V = np.linalg.eigh(m.T @ m)
    return np.sqrt(np.maximum(evals, 0.0)), V


def singular_values(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return np.sort(_right_vectors(m if m.shape[0] >= m.shape[1] else m.T)[0])[::-1]


def svt(m, tau: float) -> np.ndarray:
    """Singular value thresholding ``U shrink_tau(Sigma) V^T``.

    Computed as ``M V diag(max(1 - tau/sigma, 0)) V^T`` so only the Gram matrix
    of the short side is decomposed.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise NumericError("svt: non-finite input")
    if m.shape[0] < m.shape[1]:
        return svt(m.T, tau).T
    if tau == 0:
        return m.copy()
    sig, V = _right_vectors(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(sig > tau, 1.0 - tau / sig, 0.0)
    return m @ ((V * scale) @ V.T)


def rpca_separate(c, lam: float | None = None, opts: RpcaOptions | None = None) -> RpcaResult:
    """Split ``c`` into nonnegative low-rank ``d`` and sparse ``s``.

    ``lam`` defaults to ``1/sqrt(X)`` for an ``X x 3`` matrix.
    """
    opts = opts or RpcaOptions()
    C = np.asarray(c, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] < 1:
        raise ValueError(f"cluster matrix must be 2-D and non-empty, got {C.shape}")
    if not np.all(np.isfinite(C)):
        raise NumericError("rpca: non-finite entries")
    if lam is None:
        lam = 1.0 / np.sqrt(max(C.shape))
    if lam <= 0:
        raise ValueError("lambda must be positive")

    norm_c = np.linalg.norm(C)
    sigma_max = singular_values(C)[0] if norm_c > 0 else 0.0
    mu = opts.mu0 if opts.mu0 is not None else (1.25 / sigma_max if sigma_max > 0 else 1.25)
    mu_max = mu * opts.mu_cap
    # usual inexact-ALM dual start: Y = C / max(||C||_2, ||C||_inf / lambda)
    J = max(sigma_max, np.abs(C).max() / lam) if norm_c > 0 else 1.0
    Y = C / J
    S = np.zeros_like(C)
    D = np.zeros_like(C)
    denom = norm_c if norm_c > 0 else 1.0

    best = (np.inf, D, S)
    k = 0
    converged = False
    while k < opts.max_iter:
        k += 1
        D = np.maximum(svt(C - S + Y / mu, 1.0 / mu), 0.0)
        S = soft_threshold(C - D + Y / mu, lam / mu)
        R = C - D - S
        res = np.linalg.norm(R) / denom
        if res < best[0]:
            best = (res, D, S)
        if res <= opts.tol:
            converged = True
            break
        Y = Y + mu * R
        mu = min(mu * opts.mu_growth, mu_max)
    res, D, S = best
    return RpcaResult(d=D, s=S, iterations=k, converged=converged, residual=float(res))


@dataclass
class PgmOutput:
    image: np.ndarray
    n_failed: int = 0
    n_unconverged: int = 0


def pgm_apply(image, clusters: ClusterSet, opts: RpcaOptions | None = None,
              threads: int | None = None) -> PgmOutput:
    """Replace each cluster's pixels by the low-rank part of its color matrix.

    Single-pixel clusters are already rank one and pass through unchanged.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    if clusters.labels.shape != (h, w):
        raise ValueError("cluster labels do not match the image size")
    rows = img.reshape(-1, 3)
    out = rows.copy()
    groups = clusters.clusters

    def work(idx):
        if idx.size == 1:
            return RpcaResult(d=rows[idx], s=np.zeros((1, rows.shape[1])), iterations=0,
                              converged=True, residual=0.0)
        try:
            return rpca_separate(rows[idx], None, opts)
        except (NumericError, np.linalg.LinAlgError) as exc:
            log.warning("cluster of %d pixels failed: %s", idx.size, exc)
            return None

    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, groups))
    else:
        results = [work(g) for g in groups]

    n_failed = n_unconv = 0
    for idx, r in zip(groups, results):
        if r is None:
            n_failed += 1
            continue
        n_unconv += not r.converged
        out[idx] = r.d
    return PgmOutput(image=out.reshape(h, w, 3), n_failed=n_failed, n_unconverged=n_unconv)
