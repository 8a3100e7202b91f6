"""Small dense linear algebra used by the solvers.

Products that feed the learned model (kernel features, initialization,
final projection fit) go through :func:`matmul`, which splits the output
into fixed row blocks and evaluates each block with single-threaded BLAS.
The block layout never depends on the worker count, so results are
bitwise identical for any ``threads`` setting.
"""

from __future__ import annotations

import contextlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

ROW_BLOCK = 256

_threads = 1


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when an unregularized normal-equation system is singular."""


def set_threads(n: int) -> None:
    """Set the worker count used by :func:`matmul` (results do not change)."""
    global _threads
    if n < 1:
        raise ValueError("threads must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


@contextlib.contextmanager
def blas_single_thread():
    with threadpool_limits(limits=1):
        yield


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf")
    return a


def matmul(a, b) -> np.ndarray:
    """Deterministic matrix product ``a @ b``.

    Raises:
        ValueError: on inner-dimension mismatch.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    out = np.empty((a.shape[0], b.shape[1]), dtype=np.float64)
    starts = range(0, a.shape[0], ROW_BLOCK)

    def block(i):
        np.matmul(a[i:i + ROW_BLOCK], b, out=out[i:i + ROW_BLOCK])

    with blas_single_thread():
        if _threads == 1 or a.shape[0] <= ROW_BLOCK:
            for i in starts:
                block(i)
        else:
            with ThreadPoolExecutor(max_workers=_threads) as pool:
                list(pool.map(block, starts))
    return out


def _symmetrize(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 rounds of n/2 disjoint index pairs (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def sym_eig(m, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi.

    The input is symmetrized as ``(M + M^T) / 2`` first. Each sweep visits
    every off-diagonal pair once, in round-robin order so that the ``n/2``
    rotations of a round act on disjoint rows and are applied together.

    Returns:
        ``(eigenvalues, eigenvectors)`` with eigenvalues in descending order
        and eigenvectors as orthonormal columns.
    """
    a = _symmetrize(m)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.eye(0)
    size = n + (n % 2)
    work = np.zeros((size, size))
    work[:n, :n] = a
    v = np.eye(size)
    scale = np.linalg.norm(a)
    if n > 1 and scale > 0.0:
        rounds = _round_robin(size)
        for _ in range(max_sweeps):
            off = np.linalg.norm(work - np.diag(np.diag(work)))
            if off <= tol * scale:
                break
            for p, q in rounds:
                apq = work[p, q]
                live = np.abs(apq) > 0.0
                if not live.any():
                    continue
                app = work[p, p]
                aqq = work[q, q]
                theta = np.where(live, (aqq - app) / np.where(live, 2.0 * apq, 1.0), 0.0)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(live, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(size)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                work = rot.T @ work @ rot
                work[p, q] = 0.0
                work[q, p] = 0.0
                v = v @ rot
    w = np.diag(work)[:n].copy()
    vecs = v[:n, :n].copy()
    order = np.argsort(-w, kind="stable")
    return w[order], vecs[:, order]


def top_eigvecs(m, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of a (possibly large) symmetric matrix via LAPACK.

    Each eigenvector's sign is fixed so that its largest-magnitude entry is
    positive, which makes the output reproducible.
    """
    a = _symmetrize(m)
    if not 1 <= k <= a.shape[0]:
        raise ValueError(f"k={k} out of range for a {a.shape[0]}x{a.shape[0]} matrix")
    with blas_single_thread():
        w, v = np.linalg.eigh(a)
    order = np.argsort(-w, kind="stable")[:k]
    w, v = w[order], v[:, order]
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[pivot, np.arange(k)] < 0, -1.0, 1.0)
    return w, v * signs


def default_ridge(x) -> float:
    """``1e-6 * trace(X^T X) / d``: guards near-singular Gram matrices."""
    x = np.asarray(x, dtype=np.float64)
    return 1e-6 * float(np.sum(x * x)) / x.shape[1]


def ridge_solve(gram_source, rhs, ridge: float = 0.0) -> np.ndarray:
    """Return ``rhs @ X @ inv(X^T X + ridge * I)``.

    Args:
        gram_source: the n x d matrix X.
        rhs: a k x n matrix B.
        ridge: non-negative Tikhonov term.

    Raises:
        SingularMatrixError: when ``ridge == 0`` and ``X^T X`` is singular.
    """
    x = as_matrix(gram_source)
    b = as_matrix(rhs)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if b.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: rhs {b.shape} vs X {x.shape}")
    gram = matmul(x.T, x)
    d = gram.shape[0]
    if ridge > 0:
        gram[np.diag_indices(d)] += ridge
    bx = matmul(b, x)
    with blas_single_thread():
        if ridge == 0:
            cond = np.linalg.cond(gram) if d else 1.0
            if not np.isfinite(cond) or cond > 1e14:
                raise SingularMatrixError("X^T X is singular; pass ridge > 0")
        try:
            # gram is symmetric: solve gram @ W^T = (B X)^T
            sol = np.linalg.solve(gram, bx.T)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc
    return sol.T
