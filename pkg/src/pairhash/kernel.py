"""Gaussian kernel features computed against a fixed set of anchor points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

BANDWIDTH_PAIRS = 1000


@dataclass(frozen=True)
class KernelMap:
    anchors: np.ndarray
    bandwidth: float
    mean: np.ndarray

    @property
    def p(self) -> int:
        return self.anchors.shape[0]

    @property
    def d(self) -> int:
        return self.anchors.shape[1]


def sq_distances(x, a) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``x`` and ``a``."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    d2 = (np.sum(x * x, axis=1)[:, None] + np.sum(a * a, axis=1)[None, :]
          - 2.0 * linalg.matmul(x, a.T))
    return np.maximum(d2, 0.0)


def responses(x, anchors, bandwidth: float) -> np.ndarray:
    return np.exp(-sq_distances(x, anchors) / (2.0 * bandwidth))


def estimate_bandwidth(x, seed: int = 0, pairs: int = BANDWIDTH_PAIRS) -> float:
    """Mean squared distance over ``pairs`` seeded random row pairs."""
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, x.shape[0], size=pairs)
    j = rng.integers(0, x.shape[0], size=pairs)
    diff = x[i] - x[j]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def fit(x, anchor_idx, bandwidth: float | None = None, seed: int = 0) -> KernelMap:
    x = linalg.as_matrix(x)
    anchor_idx = np.asarray(anchor_idx, dtype=np.int64)
    if anchor_idx.size == 0:
        raise ValueError("kernel map needs at least one anchor")
    if bandwidth is None:
        bandwidth = estimate_bandwidth(x, seed)
        if bandwidth <= 0.0:
            raise ValueError("zero-variance data: cannot pick a bandwidth, pass one explicitly")
    elif bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    anchors = x[anchor_idx].copy()
    mean = responses(x, anchors, bandwidth).mean(axis=0)
    return KernelMap(anchors, float(bandwidth), mean)


def apply(kmap: KernelMap, x) -> np.ndarray:
    x = linalg.as_matrix(x)
    if x.shape[1] != kmap.d:
        raise ValueError(f"expected {kmap.d} feature columns, got {x.shape[1]}")
    return responses(x, kmap.anchors, kmap.bandwidth) - kmap.mean
