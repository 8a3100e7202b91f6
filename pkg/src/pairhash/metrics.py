"""Hamming-ranking retrieval metrics: MAP, NDCG, ACG, precision/recall."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .codes import CodeMatrix, hamming_matrix
from .pairwise import LabelData


@dataclass
class RetrievalMetrics:
    map: float
    ndcg: float
    acg: float
    precision: float
    recall: float
    R: int
    radius: int
    curves: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def rank(dist: np.ndarray) -> np.ndarray:
    """Database order by ascending distance, ties broken by ascending index."""
    return np.argsort(dist, kind="stable")


def average_precision(flags, R: int) -> float:
    """AP over the top ``R`` of a ranked list of 0/1 relevance flags.

    Zero when nothing relevant appears in the top ``R``.
    """
    if R < 1:
        raise ValueError("cutoff must be >= 1")
    top = np.asarray(flags, dtype=np.float64)[:R] > 0
    hits = top.sum()
    if hits == 0:
        return 0.0
    prec = np.cumsum(top) / np.arange(1, top.size + 1)
    return float(np.sum(prec[top]) / hits)


def dcg(rels, R: int) -> float:
    """``rel_1 + sum_{k=2..R} rel_k / log2(k)``."""
    rels = np.asarray(rels, dtype=np.float64)[:R]
    if rels.size == 0:
        return 0.0
    k = np.arange(2, rels.size + 1)
    return float(rels[0] + np.sum(rels[1:] / np.log2(k)))


def ndcg(rels, R: int, ideal=None) -> float:
    """DCG of the ranked relevances over the DCG of the ideal ordering.

    ``ideal`` is the full pool of ground-truth relevances (defaults to
    ``rels`` itself); zero when the ideal DCG is zero.
    """
    if R < 1:
        raise ValueError("cutoff must be >= 1")
    pool = np.asarray(rels if ideal is None else ideal, dtype=np.float64)
    best = dcg(np.sort(pool)[::-1], R)
    if best == 0.0:
        return 0.0
    return dcg(rels, R) / best


def acg(dist, rels, radius: int) -> float:
    """Mean relevance of the items within Hamming ``radius``; zero for an empty ball."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    ball = np.asarray(dist) <= radius
    if not ball.any():
        return 0.0
    return float(np.mean(np.asarray(rels, dtype=np.float64)[ball]))


def precision_recall_at_radius(dist, flags, radius: int) -> tuple[float, float]:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    ball = np.asarray(dist) <= radius
    flags = np.asarray(flags) > 0
    hit = int(np.count_nonzero(ball & flags))
    size = int(np.count_nonzero(ball))
    total = int(np.count_nonzero(flags))
    return (hit / size if size else 0.0, hit / total if total else 0.0)


def map_within_radius(dist, flags, radius: int) -> float:
    """AP over the ranked items inside the Hamming ball (``MAP @ H <= r`` protocol)."""
    dist = np.asarray(dist)
    order = rank(dist)
    inside = order[dist[order] <= radius]
    if inside.size == 0:
        return 0.0
    return average_precision(np.asarray(flags)[inside], inside.size)


def relevance(query_labels: LabelData, db_labels: LabelData, multi_label: bool) -> np.ndarray:
    """q x n relevance: common-label counts (multi-label) or 0/1 share-a-label flags."""
    vocab = sorted(set().union(*query_labels.sets, *db_labels.sets))
    common = query_labels.indicator(vocab) @ db_labels.indicator(vocab).T
    return common.astype(np.float64) if multi_label else (common > 0).astype(np.float64)


def evaluate(queries: CodeMatrix, db: CodeMatrix, query_labels: LabelData, db_labels: LabelData,
             R: int, radius: int, multi_label: bool | None = None,
             cutoffs=None) -> RetrievalMetrics:
    """Average the per-query metrics over all queries.

    ``curves`` holds precision/recall per Hamming radius ``0..m`` and mean
    precision at each rank cutoff in ``cutoffs``.
    """
    if queries.n != query_labels.n:
        raise ValueError(f"{queries.n} query codes vs {query_labels.n} query labels")
    if db.n != db_labels.n:
        raise ValueError(f"{db.n} database codes vs {db_labels.n} database labels")
    if multi_label is None:
        multi_label = not (query_labels.is_single and db_labels.is_single)
    m = db.m
    if cutoffs is None:
        cutoffs = [k for k in (1, 10, 50, 100, 200, 500, 1000) if k <= db.n]
    dist_all = hamming_matrix(queries, db)
    rel_all = relevance(query_labels, db_labels, multi_label)
    q = queries.n
    aps = np.zeros(q)
    ndcgs = np.zeros(q)
    acgs = np.zeros(q)
    precs = np.zeros(q)
    recs = np.zeros(q)
    pr_curve = np.zeros((q, m + 1, 2))
    p_at = np.zeros((q, len(cutoffs)))
    for i in range(q):
        dist = dist_all[i]
        rel = rel_all[i]
        flags = rel > 0
        order = rank(dist)
        aps[i] = average_precision(flags[order], R)
        ndcgs[i] = ndcg(rel[order], R, ideal=rel)
        acgs[i] = acg(dist, rel, radius)
        precs[i], recs[i] = precision_recall_at_radius(dist, flags, radius)
        for r in range(m + 1):
            pr_curve[i, r] = precision_recall_at_radius(dist, flags, r)
        ranked = flags[order]
        for c, k in enumerate(cutoffs):
            p_at[i, c] = ranked[:k].mean()
    curves = {
        "radius": list(range(m + 1)),
        "precision_at_radius": pr_curve[:, :, 0].mean(axis=0).tolist(),
        "recall_at_radius": pr_curve[:, :, 1].mean(axis=0).tolist(),
        "cutoffs": list(cutoffs),
        "precision_at_k": p_at.mean(axis=0).tolist(),
    }
    return RetrievalMetrics(
        map=float(aps.mean()) if q else 0.0,
        ndcg=float(ndcgs.mean()) if q else 0.0,
        acg=float(acgs.mean()) if q else 0.0,
        precision=float(precs.mean()) if q else 0.0,
        recall=float(recs.mean()) if q else 0.0,
        R=int(R),
        radius=int(radius),
        curves=curves,
    )
