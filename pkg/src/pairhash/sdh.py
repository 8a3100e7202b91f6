"""Batch-sequential symmetric discrete hashing (SDH_P).

The solver approximates ``lambda * S_A`` by ``H_A H^T`` with a single shared
code matrix. Each batch of rows is refined by repeated sign updates against
the anchors' codes, which stay fixed for the duration of the batch.

Code products are formed on +/-1 float arrays; every such sum is an integer
(or a half-integer once multi-label ``alpha`` enters), so it is exact in
float64 and independent of summation order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .codes import CodeMatrix, row_select, sgn
from .pairwise import PairwiseBlock, set_lambda

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Solver settings."""

    m: int = 16
    p: int = 1000
    n_b: int = 100
    beta: float = 10.0
    L1: int = 20
    L2: int = 3
    seed: int = 0
    ridge: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.n_b < 1:
            raise ValueError("n_b must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.L1 < 1 or self.L2 < 1:
            raise ValueError("L1 and L2 must be >= 1")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be >= 0")


@dataclass(frozen=True)
class SpectralState:
    gram: np.ndarray
    eigvals: np.ndarray
    gamma: float
    beta: float = 0.0

    @property
    def top(self) -> float:
        return float(self.eigvals[0])


@dataclass(frozen=True)
class SurrogateFactors:
    Z: np.ndarray
    Gamma: np.ndarray
    gamma: float
    U: np.ndarray
    Delta: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """``gamma * (I - Z^T (Z Z^T + Gamma)^-1 Z)``."""
        m = self.Z.shape[0]
        inner = np.linalg.solve(self.Z @ self.Z.T + self.Gamma, self.Z)
        return self.gamma * (np.eye(m) - self.Z.T @ inner)


@dataclass
class Diagnostics:
    """Per-outer-iteration convergence records plus every inner trace.

    ``records[0]`` describes the initialization (iteration 0).
    """

    records: list = field(default_factory=list)
    inner_traces: list = field(default_factory=list)
    history: list | None = None

    @property
    def converged(self) -> bool:
        return len(self.records) > 1 and self.records[-1]["code_change"] == 0.0

    @property
    def code_changes(self) -> list:
        return [r["code_change"] for r in self.records[1:]]

    @property
    def anchor_objectives(self) -> list:
        return [r["anchor_objective"] for r in self.records]


def _ensure_lambda(s: PairwiseBlock, m: int) -> PairwiseBlock:
    return s if s.lambda_ is not None else set_lambda(s, m)


def initialize(xk, s: PairwiseBlock, m: int):
    """Spectral initialization.

    ``A0`` holds the top-``m`` eigenvectors (as rows) of the symmetrized
    ``X^T S_A^T X_A``; ``H0 = sgn(X A0^T)``.
    """
    x = linalg.as_matrix(xk)
    if m > x.shape[1]:
        raise ValueError(f"m={m} exceeds the feature dimension {x.shape[1]}")
    if s.n != x.shape[0]:
        raise ValueError(f"pairwise block has {s.n} columns but X has {x.shape[0]} rows")
    sx = linalg.matmul(s.block, x)
    c = linalg.matmul(sx.T, x[s.anchor_idx])
    _, vecs = linalg.top_eigvecs(c, m)
    a0 = vecs.T.copy()
    h0 = CodeMatrix(sgn(linalg.matmul(x, a0.T)))
    return a0, h0


def code_gram(h_a) -> np.ndarray:
    ha = h_a.as_float() if isinstance(h_a, CodeMatrix) else np.asarray(h_a, np.float64)
    return ha.T @ ha


def spectral_state(h_a, beta: float) -> SpectralState:
    """Gram ``H_A^T H_A``, its spectrum and ``gamma = max eigenvalue + beta``."""
    gram = code_gram(h_a)
    eigvals, _ = linalg.sym_eig(gram)
    return SpectralState(gram, eigvals, float(eigvals[0]) + beta, beta)


def construct_surrogate(h_a, beta: float, Gamma=None, gamma: float | None = None) -> SurrogateFactors:
    """Build ``Z = V Delta U^T`` (``V = I``) with
    ``gamma * (I - Z^T (Z Z^T + Gamma)^-1 Z) = H_A^T H_A``.

    Only used for verification; the solvers never need ``Z``.

    Raises:
        np.linalg.LinAlgError: if ``H_A^T H_A`` is rank deficient.
        ValueError: if ``gamma`` is below the largest eigenvalue.
    """
    gram = code_gram(h_a)
    m = gram.shape[0]
    lam2, U = linalg.sym_eig(gram)
    if lam2[-1] <= 1e-9 * max(lam2[0], 1.0):
        raise np.linalg.LinAlgError("H_A^T H_A is rank deficient")
    if gamma is None:
        gamma = float(lam2[0]) + beta
    if gamma < lam2[0] * (1 - 1e-12):
        raise ValueError(f"gamma={gamma} is below the largest eigenvalue {lam2[0]}")
    g = np.ones(m) if Gamma is None else np.asarray(Gamma, dtype=np.float64)
    g = np.diag(g).copy() if g.ndim == 2 else g
    if np.any(g <= 0):
        raise ValueError("Gamma must be positive")
    delta = np.sqrt(np.maximum(gamma * g / lam2 - g, 0.0))
    Z = np.diag(delta) @ U.T
    return SurrogateFactors(Z, np.diag(g), float(gamma), U, np.diag(delta))


def regression_identity(h, Z, Gamma) -> tuple[float, float]:
    """Both sides of the ridge-regression identity behind the linearization.

    Returns ``(trace_form, regression_value)`` where
    ``trace_form = Tr{H (I - Z^T (Z Z^T + Gamma)^-1 Z) H^T}`` and
    ``regression_value = ||H - P Z||^2 + ||P Gamma^(1/2)||^2`` at the
    minimizer ``P = H Z^T (Z Z^T + Gamma)^-1``.
    """
    h = np.asarray(h, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    g = np.asarray(Gamma, dtype=np.float64)
    g = np.diag(g) if g.ndim == 2 else g
    m = Z.shape[0]
    K = Z @ Z.T + np.diag(g)
    trace_form = float(np.trace(h @ (np.eye(m) - Z.T @ np.linalg.solve(K, Z)) @ h.T))
    P = np.linalg.solve(K, Z @ h.T).T
    regression_value = float(np.sum((h - P @ Z) ** 2) + np.sum(P * P * g[None, :]))
    return trace_form, regression_value


def batch_objective(hb: np.ndarray, ha: np.ndarray, sb: np.ndarray, state: SpectralState,
                    lam: float) -> float:
    """Quadratic objective maximized by the inner loop.

    ``Tr{H_b (gamma I - G) H_b^T} + 2 lambda Tr{H_b H_A^T S_Ab}``, which equals
    ``const - ||H_A H_b^T - lambda S_Ab||_F^2`` for fixed anchors.
    """
    quad = float(np.sum((hb @ state.gram) * hb))
    lin = float(np.sum(hb * (sb.T @ ha)))
    return state.gamma * hb.size - quad + 2.0 * lam * lin


def linear_objective(h_new: np.ndarray, h_prev: np.ndarray, ha: np.ndarray, sb: np.ndarray,
                     state: SpectralState, lam: float) -> float:
    """One-step objective ``Tr{H_new ((gamma I - G) H_prev^T + lambda H_A^T S_Ab)}``.

    Summed with correct rounding, so comparing candidates is exact.
    """
    h_new = np.asarray(h_new, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    drift = (state.top * h_prev - h_prev @ state.gram) + state.beta * h_prev
    return math.fsum((h_new * (lam * (sb.T @ ha) + drift)).ravel())


def sign_step(hb: np.ndarray, c: np.ndarray, state: SpectralState) -> np.ndarray:
    """``sgn(lambda S_Ab^T H_A + H_b (gamma I - G))`` given ``c = lambda S_Ab^T H_A``."""
    drift = (state.top * hb - hb @ state.gram) + state.beta * hb
    return sgn(c + drift).astype(np.float64)


def update_batch(h: CodeMatrix, h_a: CodeMatrix, s: PairwiseBlock, idx, state: SpectralState,
                 L2: int):
    """Refine the rows ``idx`` with the anchors' codes held fixed.

    Rows are updated simultaneously from the previous iterate until they stop
    changing or ``L2`` sign steps have run.

    Returns:
        ``(rows, trace)``: the new int8 rows and the inner objective
        (:func:`batch_objective`) at the start and after every step.
    """
    lam = s.lambda_ if s.lambda_ is not None else 1.0
    idx = np.asarray(idx, dtype=np.int64)
    ha = h_a.as_float()
    sb = s.block[:, idx]
    c = lam * (sb.T @ ha)
    hb = h.codes[idx].astype(np.float64)
    trace = [batch_objective(hb, ha, sb, state, lam)]
    for _ in range(L2):
        new = sign_step(hb, c, state)
        same = np.array_equal(new, hb)
        hb = new
        trace.append(batch_objective(hb, ha, sb, state, lam))
        if same:
            break
    return hb.astype(np.int8), trace


def anchor_objective(h: CodeMatrix, s: PairwiseBlock, a_idx=None) -> float:
    """``||H_A H^T - lambda S_A||_F``."""
    a_idx = s.anchor_idx if a_idx is None else a_idx
    hf = h.as_float()
    lam = s.lambda_ if s.lambda_ is not None else 1.0
    return float(np.linalg.norm(hf[a_idx] @ hf.T - lam * s.block))


def code_change(h: CodeMatrix, prev: CodeMatrix) -> float:
    """``||H - H_prev||_F`` for +/-1 matrices: ``2 * sqrt(#differing entries)``."""
    return 2.0 * float(np.sqrt(np.count_nonzero(h.codes != prev.codes)))


def batches(perm: np.ndarray, n_b: int):
    for start in range(0, perm.size, n_b):
        yield perm[start:start + n_b]


def fit_projection(xk, h: CodeMatrix, s: PairwiseBlock, beta: float, ridge: float | None) -> np.ndarray:
    """``A = (lambda H_A^T S_A + (gamma I - G) H^T) X (X^T X + ridge I)^-1``."""
    x = linalg.as_matrix(xk)
    h_a = row_select(h, s.anchor_idx)
    state = spectral_state(h_a, beta)
    ha = h_a.as_float()
    hf = h.as_float()
    lam = s.lambda_ if s.lambda_ is not None else 1.0
    target = lam * (ha.T @ s.block) + (state.gamma * hf.T - state.gram @ hf.T)
    if ridge is None:
        ridge = linalg.default_ridge(x)
    return linalg.ridge_solve(x, target, ridge)


class _StateCache:
    """Reuse the spectral state while the anchor gram matrix is unchanged."""

    def __init__(self, beta: float):
        self.beta = beta
        self._key = None
        self._state = None

    def get(self, h_a: CodeMatrix) -> SpectralState:
        gram = code_gram(h_a)
        key = gram.tobytes()
        if key != self._key:
            eigvals, _ = linalg.sym_eig(gram)
            self._state = SpectralState(gram, eigvals, float(eigvals[0]) + self.beta, self.beta)
            self._key = key
        return self._state


def train(xk, s: PairwiseBlock, cfg: TrainConfig, record_codes: bool = False,
          init: CodeMatrix | None = None):
    """Learn codes for the training rows of ``xk`` and fit the projection.

    Returns:
        ``(model, H, diagnostics)``; ``model.kernel`` is left unset.
    """
    from .encode import HashModel

    x = linalg.as_matrix(xk)
    s = _ensure_lambda(s, cfg.m)
    n = x.shape[0]
    if cfg.n_b > n:
        raise ValueError(f"batch size {cfg.n_b} exceeds n={n}")
    a_idx = s.anchor_idx
    if init is None:
        _, h = initialize(x, s, cfg.m)
    else:
        h = init.copy()
        if h.shape != (n, cfg.m):
            raise ValueError(f"initial codes have shape {h.shape}, expected {(n, cfg.m)}")
    diag = Diagnostics(history=[h.copy()] if record_codes else None)
    diag.records.append({"iteration": 0, "code_change": None,
                         "anchor_objective": anchor_objective(h, s)})
    rng = np.random.default_rng(cfg.seed)
    cache = _StateCache(cfg.beta)
    for it in range(1, cfg.L1 + 1):
        prev = h.copy()
        perm = rng.permutation(n)
        steps = 0
        for idx in batches(perm, cfg.n_b):
            h_a = row_select(h, a_idx)
            state = cache.get(h_a)
            rows, trace = update_batch(h, h_a, s, idx, state, cfg.L2)
            h.set_rows(idx, rows)
            diag.inner_traces.append(trace)
            steps += len(trace) - 1
        change = code_change(h, prev)
        rec = {"iteration": it, "code_change": change,
               "anchor_objective": anchor_objective(h, s), "inner_steps": steps}
        diag.records.append(rec)
        if record_codes:
            diag.history.append(h.copy())
        log.info("sdh_p iter %d: code change %.3f, anchor objective %.3f",
                 it, change, rec["anchor_objective"])
        if change == 0.0:
            break
    a = fit_projection(x, h, s, cfg.beta, cfg.ridge)
    model = HashModel(A=a, kernel=None, lambda_=s.lambda_, beta=cfg.beta,
                      mode="linear", algo="sdh_p")
    return model, h, diag
