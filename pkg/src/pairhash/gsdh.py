"""Greedy per-bit symmetric discrete hashing (GSDH_P) and its loss extension."""

from __future__ import annotations

import enum
import logging
from dataclasses import replace

import numpy as np

from . import linalg
from .codes import CodeMatrix, sgn
from .pairwise import PairwiseBlock
from .sdh import (Diagnostics, TrainConfig, _ensure_lambda, anchor_objective, batches,
                  code_change, fit_projection, initialize)

log = logging.getLogger(__name__)


class LossKind(enum.Enum):
    PAIRWISE = "pairwise"
    BRE = "bre"
    HINGE = "hinge"


def residual_target(s: PairwiseBlock, h_a: CodeMatrix, h: CodeMatrix, idx, j: int) -> np.ndarray:
    """Residual of bit ``j``, in units of ``S``.

    Returns ``S_A(:, idx) - (1/lambda) sum_{k != j} h_A^k (h_b^k)^T`` so that
    ``lambda * S~`` is the target ``lambda S_Ab - sum_{k != j} h_A^k (h_b^k)^T``
    left for bit ``j``. ``lambda`` is 1 until :func:`set_lambda` has run.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if not 0 <= j < h.m:
        raise IndexError(f"bit {j} out of range for m={h.m}")
    lam = s.lambda_ if s.lambda_ is not None else 1.0
    ha = h_a.as_float()
    hb = h.codes[idx].astype(np.float64)
    others = ha @ hb.T - np.outer(ha[:, j], hb[:, j])
    return s.block[:, idx] - others / lam


def bit_objective(hb_j: np.ndarray, drive: np.ndarray, beta: float) -> float:
    """``beta * h^T h + 2 h^T drive``: the per-bit quadratic the inner loop ascends."""
    return float(beta * hb_j.size + 2.0 * np.dot(hb_j, drive))


def _ascend_bit(h0: np.ndarray, drive: np.ndarray, beta: float, L2: int):
    h = np.asarray(h0, dtype=np.float64)
    trace = [bit_objective(h, drive, beta)]
    for _ in range(L2):
        new = sgn(drive + beta * h).astype(np.float64)
        same = np.array_equal(new, h)
        h = new
        trace.append(bit_objective(h, drive, beta))
        if same:
            break
    return h, trace


def update_bit_batch(h: CodeMatrix, ha_j, s_tilde, idx, j: int, lambda_: float, beta: float,
                     L2: int):
    """Sign updates of bit ``j`` over a batch.

    Repeats ``h_b^j <- sgn(lambda * S~^T h_A^j + beta * h_b^j)`` until the
    column is unchanged or ``L2`` steps have run; ``h`` is not modified.

    Returns:
        ``(column, trace)``: the int8 column and the per-bit objective at
        the start and after every step.
    """
    idx = np.asarray(idx, dtype=np.int64)
    s_tilde = np.asarray(s_tilde, dtype=np.float64)
    if s_tilde.shape[1] != idx.size:
        raise ValueError(f"target has {s_tilde.shape[1]} columns for a batch of {idx.size}")
    ha_j = np.asarray(ha_j, dtype=np.float64).reshape(-1)
    drive = lambda_ * (s_tilde.T @ ha_j)
    col, trace = _ascend_bit(h.codes[idx, j], drive, beta, L2)
    return col.astype(np.int8), trace


def pair_loss(kind: LossKind, s_vals, dist, m: int) -> np.ndarray:
    """Pair losses for supervision values ``s_vals`` at Hamming distances ``dist``.

    BRE: ``(m * [s < 0] - d)^2``. Hinge: ``d^2`` for similar pairs,
    ``max(m/2 - d, 0)^2`` for dissimilar ones. Pairs with ``s == 0`` carry no loss.
    """
    s_vals = np.asarray(s_vals, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    if kind is LossKind.BRE:
        loss = (m * (s_vals < 0) - dist) ** 2
    elif kind is LossKind.HINGE:
        loss = np.where(s_vals > 0, dist ** 2, np.maximum(0.5 * m - dist, 0.0) ** 2)
    else:
        raise ValueError(f"no pair loss for {kind}")
    return np.where(s_vals == 0, 0.0, loss)


def _flip_target(kind: LossKind, s_vals, d_rest, m: int) -> np.ndarray:
    # ell(sigma) = c + sigma * (ell(+1) - ell(-1)) / 2 on sigma in {-1, +1}
    agree = pair_loss(kind, s_vals, d_rest, m)
    differ = pair_loss(kind, s_vals, d_rest + 1.0, m)
    return -(agree - differ) / 2.0


def loss_block(kind: LossKind, s: PairwiseBlock, h_a: CodeMatrix, h: CodeMatrix, idx, j: int):
    """Target ``-L_Ab`` for bit ``j`` with every other bit fixed.

    Entry (a, b) is ``-(l_ab(+1) - l_ab(-1)) / 2`` where ``l_ab(sigma)`` is
    the pair loss at ``d_H = d_rest + (1 - sigma) / 2`` and ``d_rest`` is the
    Hamming distance over the other ``m - 1`` bits.
    """
    kind = LossKind(kind)
    if kind is LossKind.PAIRWISE:
        raise ValueError("loss_block needs a BRE or hinge loss")
    idx = np.asarray(idx, dtype=np.int64)
    ha = h_a.as_float()
    hb = h.codes[idx].astype(np.float64)
    others = ha @ hb.T - np.outer(ha[:, j], hb[:, j])
    d_rest = (h.m - 1 - others) / 2.0
    return _flip_target(kind, s.block[:, idx], d_rest, h.m)


def summed_loss(kind: LossKind, s: PairwiseBlock, h: CodeMatrix) -> float:
    """Total pair loss over all anchor-vs-training pairs."""
    hf = h.as_float()
    dist = (h.m - hf[s.anchor_idx] @ hf.T) / 2.0
    return float(np.sum(pair_loss(LossKind(kind), s.block, dist, h.m)))


def _run(x, s: PairwiseBlock, cfg: TrainConfig, kind: LossKind, init, record_codes: bool):
    """Shared outer/batch/bit loop for the pairwise target and the pair losses."""
    n = x.shape[0]
    if cfg.n_b > n:
        raise ValueError(f"batch size {cfg.n_b} exceeds n={n}")
    lam = s.lambda_
    a_idx = s.anchor_idx
    anchor_pos = np.full(n, -1, dtype=np.int64)
    anchor_pos[a_idx] = np.arange(a_idx.size)
    if init is None:
        _, h = initialize(x, s, cfg.m)
    else:
        h = init.copy()
        if h.shape != (n, cfg.m):
            raise ValueError(f"initial codes have shape {h.shape}, expected {(n, cfg.m)}")

    def record(it, prev, steps):
        rec = {"iteration": it,
               "code_change": None if prev is None else code_change(h, prev),
               "anchor_objective": anchor_objective(h, s)}
        if kind is not LossKind.PAIRWISE:
            rec["loss"] = summed_loss(kind, s, h)
        if steps is not None:
            rec["inner_steps"] = steps
        return rec

    diag = Diagnostics(history=[h.copy()] if record_codes else None)
    diag.records.append(record(0, None, None))
    rng = np.random.default_rng(cfg.seed)
    for it in range(1, cfg.L1 + 1):
        prev = h.copy()
        perm = rng.permutation(n)
        steps = 0
        ha = h.codes[a_idx].astype(np.float64)
        for idx in batches(perm, cfg.n_b):
            hb = h.codes[idx].astype(np.float64)
            sb = s.block[:, idx]
            in_batch = anchor_pos[idx] >= 0
            rows_a = anchor_pos[idx[in_batch]]
            prod = ha @ hb.T
            for j in range(cfg.m):
                haj = ha[:, j]
                others = prod - np.outer(haj, hb[:, j])
                if kind is LossKind.PAIRWISE:
                    drive = lam * (sb.T @ haj) - others.T @ haj
                else:
                    target = _flip_target(kind, sb, (cfg.m - 1 - others) / 2.0, cfg.m)
                    drive = target.T @ haj
                col, trace = _ascend_bit(hb[:, j], drive, cfg.beta, cfg.L2)
                diag.inner_traces.append(trace)
                steps += len(trace) - 1
                hb[:, j] = col
                ha[rows_a, j] = col[in_batch]
                prod = others + np.outer(ha[:, j], col)
            h.set_rows(idx, hb.astype(np.int8))
        rec = record(it, prev, steps)
        diag.records.append(rec)
        if record_codes:
            diag.history.append(h.copy())
        log.info("gsdh_p[%s] iter %d: code change %.3f, anchor objective %.3f",
                 kind.value, it, rec["code_change"], rec["anchor_objective"])
        if rec["code_change"] == 0.0:
            break
    return h, diag


def train(xk, s: PairwiseBlock, cfg: TrainConfig, record_codes: bool = False,
          init: CodeMatrix | None = None):
    """Greedy per-bit training on the pairwise target ``lambda * S_A``.

    Returns:
        ``(model, H, diagnostics)``; ``model.kernel`` is left unset.
    """
    from .encode import HashModel

    x = linalg.as_matrix(xk)
    s = _ensure_lambda(s, cfg.m)
    h, diag = _run(x, s, cfg, LossKind.PAIRWISE, init, record_codes)
    a = fit_projection(x, h, s, cfg.beta, cfg.ridge)
    model = HashModel(A=a, kernel=None, lambda_=s.lambda_, beta=cfg.beta,
                      mode="linear", algo="gsdh_p")
    return model, h, diag


def fit_loss_projection(xk, h: CodeMatrix, s: PairwiseBlock, kind: LossKind, beta: float,
                        ridge: float | None) -> np.ndarray:
    """Row ``j`` of ``A`` is ``(beta h^j - L_A^T h_A^j)^T X (X^T X + ridge I)^-1``."""
    x = linalg.as_matrix(xk)
    hf = h.as_float()
    ha = hf[s.anchor_idx]
    prod = ha @ hf.T
    rows = []
    for j in range(h.m):
        others = prod - np.outer(ha[:, j], hf[:, j])
        target = _flip_target(kind, s.block, (h.m - 1 - others) / 2.0, h.m)
        rows.append(beta * hf[:, j] + target.T @ ha[:, j])
    if ridge is None:
        ridge = linalg.default_ridge(x)
    return linalg.ridge_solve(x, np.array(rows), ridge)


def train_with_loss(xk, s: PairwiseBlock, cfg: TrainConfig, kind: LossKind,
                    record_codes: bool = False, init: CodeMatrix | None = None):
    """Per-bit training on a BRE or hinge pair loss (``lambda = 1``).

    ``kind = PAIRWISE`` delegates to :func:`train`.
    """
    from .encode import HashModel

    kind = LossKind(kind)
    if kind is LossKind.PAIRWISE:
        return train(xk, s, cfg, record_codes=record_codes, init=init)
    x = linalg.as_matrix(xk)
    s = replace(s, lambda_=1.0)
    h, diag = _run(x, s, cfg, kind, init, record_codes)
    a = fit_loss_projection(x, h, s, kind, cfg.beta, cfg.ridge)
    model = HashModel(A=a, kernel=None, lambda_=1.0, beta=cfg.beta, mode="linear",
                      algo=f"gsdh_p_{kind.value}")
    return model, h, diag
