"""Anchor-based pairwise supervision blocks built from labels."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class LabelData:
    """Per-item label sets. Single-label data holds one label per item."""

    sets: tuple[frozenset, ...]

    def __post_init__(self):
        for i, s in enumerate(self.sets):
            if len(s) == 0:
                raise ValueError(f"item {i} has an empty label set")

    @classmethod
    def from_single(cls, labels: Sequence[int]) -> "LabelData":
        return cls(tuple(frozenset([int(l)]) for l in labels))

    @classmethod
    def from_sets(cls, sets) -> "LabelData":
        return cls(tuple(frozenset(int(l) for l in s) for s in sets))

    @property
    def n(self) -> int:
        return len(self.sets)

    @property
    def is_single(self) -> bool:
        return all(len(s) == 1 for s in self.sets)

    def single(self) -> np.ndarray:
        if not self.is_single:
            raise ValueError("label data is multi-label")
        return np.array([next(iter(s)) for s in self.sets], dtype=np.int64)

    def indicator(self, vocab: Sequence[int] | None = None) -> np.ndarray:
        """n x C 0/1 matrix over ``vocab`` (sorted union of labels by default)."""
        if vocab is None:
            vocab = sorted(set().union(*self.sets)) if self.sets else []
        col = {l: k for k, l in enumerate(vocab)}
        out = np.zeros((self.n, len(vocab)), dtype=np.int64)
        for i, s in enumerate(self.sets):
            for l in s:
                if l in col:
                    out[i, col[l]] = 1
        return out

    def subset(self, idx) -> "LabelData":
        return LabelData(tuple(self.sets[i] for i in np.asarray(idx, dtype=np.int64)))


@dataclass(frozen=True)
class PairwiseBlock:
    """The p x n anchor-vs-training matrix S_A plus its scaling constants.

    ``lambda_`` stays ``None`` until :func:`set_lambda` fixes the bit count.
    """

    block: np.ndarray
    anchor_idx: np.ndarray
    r_max: float
    alpha: float
    lambda_: float | None = None
    multi_label: bool = False

    @property
    def p(self) -> int:
        return self.block.shape[0]

    @property
    def n(self) -> int:
        return self.block.shape[1]

    def columns(self, idx) -> np.ndarray:
        return self.block[:, idx]


def sample_anchors(n: int, p: int, seed: int) -> np.ndarray:
    """Draw ``p`` distinct training indices uniformly without replacement."""
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got p={p}, n={n}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=p, replace=False)).astype(np.int64)


def _common_counts(labels: LabelData, anchors) -> np.ndarray:
    ind = labels.indicator()
    anchors = np.asarray(anchors, dtype=np.int64)
    return ind[anchors] @ ind.T


def build_single_label(labels: LabelData, anchors) -> PairwiseBlock:
    """+1 where anchor and item share their label, -1 otherwise."""
    if labels.n == 0:
        raise ValueError("empty label set")
    y = labels.single()
    anchors = np.asarray(anchors, dtype=np.int64)
    block = np.where(y[anchors][:, None] == y[None, :], 1.0, -1.0)
    return PairwiseBlock(block, anchors, r_max=1.0, alpha=-1.0, multi_label=False)


def build_multi_label(labels: LabelData, anchors) -> PairwiseBlock:
    """Common-label counts for neighbor pairs, ``alpha = -r_max / 2`` elsewhere.

    ``r_max`` is taken over every positive entry of the block, self pairs
    included, so ``lambda * s`` never exceeds the bit count.
    """
    if labels.n == 0:
        raise ValueError("empty label set")
    counts = _common_counts(labels, anchors)
    r_max = float(counts.max())
    if r_max <= 0:
        raise ValueError("no neighbor pairs in the anchor block")
    alpha = -r_max / 2.0
    block = np.where(counts > 0, counts.astype(np.float64), alpha)
    return PairwiseBlock(block, np.asarray(anchors, dtype=np.int64), r_max=r_max,
                         alpha=alpha, multi_label=True)


def build(labels: LabelData, anchors, multi_label: bool | None = None) -> PairwiseBlock:
    if multi_label is None:
        multi_label = not labels.is_single
    return build_multi_label(labels, anchors) if multi_label else build_single_label(labels, anchors)


def set_lambda(block: PairwiseBlock, m: int) -> PairwiseBlock:
    """Return a copy with ``lambda = m / r_max``."""
    if m < 1:
        raise ValueError("bit count must be >= 1")
    return replace(block, lambda_=m / block.r_max)
