"""Greedy chromaticity clustering of pixels with similar intrinsic diffuse color."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chroma import ChromaticityImage, PixelClassMap

DEFAULT_T = 0.03
MIN_CLUSTER_SIZE = 12


@dataclass(frozen=True)
class ClusterSet:
    labels: np.ndarray       # (H, W) int, cluster index per pixel
    seeds: np.ndarray        # (K,) flat pixel index of each cluster's seed
    seed_chroma: np.ndarray  # (K, 3)
    t: float
    merged: np.ndarray = field(default=None)  # (H, W) bool, pixels moved by small-cluster merging

    @property
    def n_clusters(self) -> int:
        return len(self.seeds)

    @property
    def clusters(self) -> list:
        """Flat pixel indices of each cluster, ascending within a cluster."""
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(self.n_clusters + 1))
        return [order[bounds[k]:bounds[k + 1]] for k in range(self.n_clusters)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_clusters)


def build_clusters(chroma: ChromaticityImage, classmap: PixelClassMap | None = None,
                   t: float = DEFAULT_T, min_size: int = MIN_CLUSTER_SIZE) -> ClusterSet:
    """Seeded clustering under an L-infinity chromaticity bound.

    Seeds are taken in raster order, pure-diffuse pixels first. Each seed
    absorbs every unassigned pixel whose chromaticity is within ``t`` of its
    own. Clusters smaller than ``min_size`` are then folded into the large
    cluster whose seed chromaticity is nearest.
    """
    if t <= 0:
        raise ValueError("chromatic threshold must be positive")
    X = chroma.samples.reshape(-1, 3)
    h, w = chroma.samples.shape[:2]
    n = X.shape[0]
    if classmap is None:
        order = np.arange(n)
    else:
        pure = classmap.pure_diffuse.ravel()
        if pure.size != n:
            raise ValueError("class map and chromaticity image differ in size")
        order = np.concatenate([np.flatnonzero(pure), np.flatnonzero(~pure)])

    labels = np.full(n, -1, dtype=np.int64)
    rest = np.arange(n)
    seeds = []
    for idx in order:
        if labels[idx] >= 0:
            continue
        d = np.max(np.abs(X[rest] - X[idx]), axis=1)
        members = rest[d < t]
        labels[members] = len(seeds)
        seeds.append(idx)
        rest = rest[labels[rest] < 0]
        if rest.size == 0:
            break
    seeds = np.asarray(seeds, dtype=np.int64)
    labels, seeds, merged = _merge_small(labels, seeds, X, min_size)
    return ClusterSet(labels=labels.reshape(h, w), seeds=seeds, seed_chroma=X[seeds].copy(),
                      t=float(t), merged=merged.reshape(h, w))


def _merge_small(labels, seeds, X, min_size):
    sizes = np.bincount(labels, minlength=len(seeds))
    big = np.flatnonzero(sizes >= min_size)
    merged = np.zeros(labels.shape, dtype=bool)
    if big.size == 0 or big.size == len(seeds):
        return labels, seeds, merged
    target = np.arange(len(seeds))
    big_chroma = X[seeds[big]]
    for k in np.flatnonzero(sizes < min_size):
        d = np.max(np.abs(big_chroma - X[seeds[k]]), axis=1)
        target[k] = big[np.argmin(d)]
    merged = target[labels] != labels
    # renumber surviving clusters in seed order
    remap = np.full(len(seeds), -1, dtype=np.int64)
    remap[big] = np.arange(big.size)
    return remap[target[labels]], seeds[big], merged

