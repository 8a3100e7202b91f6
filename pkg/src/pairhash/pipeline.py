"""End-to-end training: anchors, kernel map, supervision, solver."""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from . import gsdh, kernel, linalg, pairwise, sdh
from .codes import CodeMatrix
from .encode import HashModel, fit_ls_encoder
from .sdh import TrainConfig

ALGOS = ("sdh_p", "gsdh_p", "gsdh_p_bre", "gsdh_p_hinge")


def train_model(x, labels: pairwise.LabelData, cfg: TrainConfig, algo: str = "gsdh_p",
                multi_label: bool | None = None, bandwidth: float | None = None,
                encoder: str = "linear", record_codes: bool = False):
    """Train a hash model on raw features ``x``.

    Anchors are sampled once (seeded by ``cfg.seed``) and shared by the
    kernel map and the pairwise block.

    Returns:
        ``(model, H, diagnostics)`` where ``model`` carries its kernel map.
    """
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    x = linalg.as_matrix(x)
    n = x.shape[0]
    if labels.n != n:
        raise ValueError(f"{labels.n} labels for {n} feature rows")
    anchors = pairwise.sample_anchors(n, cfg.p, cfg.seed)
    kmap = kernel.fit(x, anchors, bandwidth=bandwidth, seed=cfg.seed)
    xk = kernel.apply(kmap, x)
    s = pairwise.set_lambda(pairwise.build(labels, anchors, multi_label), cfg.m)
    if algo == "sdh_p":
        model, h, diag = sdh.train(xk, s, cfg, record_codes=record_codes)
    elif algo == "gsdh_p":
        model, h, diag = gsdh.train(xk, s, cfg, record_codes=record_codes)
    else:
        kind = gsdh.LossKind(algo.rsplit("_", 1)[1])
        model, h, diag = gsdh.train_with_loss(xk, s, cfg, kind, record_codes=record_codes)
    if encoder == "least-squares":
        ridge = cfg.ridge if cfg.ridge is not None else linalg.default_ridge(xk)
        ls = fit_ls_encoder(h, xk, ridge)
        model = HashModel(A=ls.A, lambda_=model.lambda_, beta=model.beta, mode="least-squares",
                          algo=model.algo)
    elif encoder != "linear":
        raise ValueError(f"unknown encoder {encoder!r}")
    model.kernel = kmap
    model.config = dict(asdict(cfg), algo=algo, multi_label=bool(s.multi_label),
                        r_max=s.r_max, alpha=s.alpha)
    return model, h, diag


def lsh_codes(x_train, x_query, m: int, seed: int) -> tuple[CodeMatrix, CodeMatrix]:
    """Random signed projections of mean-centered raw features (baseline)."""
    x_train = linalg.as_matrix(x_train)
    x_query = linalg.as_matrix(x_query)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((x_train.shape[1], m))
    mu = x_train.mean(axis=0)
    return (CodeMatrix(np.where((x_train - mu) @ w >= 0, 1, -1)),
            CodeMatrix(np.where((x_query - mu) @ w >= 0, 1, -1)))
