"""Out-of-sample encoding of query points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernel as kernel_mod
from . import linalg
from .codes import CodeMatrix, sgn

MODES = ("linear", "least-squares")


@dataclass
class HashModel:
    """Everything needed to encode a query.

    ``A`` is m x p and acts on kernel features; when ``kernel`` is ``None``
    the model expects already-mapped features.
    """

    A: np.ndarray
    kernel: kernel_mod.KernelMap | None = None
    lambda_: float | None = None
    beta: float = 0.0
    mode: str = "linear"
    algo: str = ""
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        if self.A.ndim != 2:
            raise ValueError("A must be a 2-D matrix")
        if not np.all(np.isfinite(self.A)):
            raise ValueError("A contains NaN or Inf")
        if self.mode not in MODES:
            raise ValueError(f"unknown encoder mode {self.mode!r}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def features(self, q) -> np.ndarray:
        q = linalg.as_matrix(q)
        return kernel_mod.apply(self.kernel, q) if self.kernel is not None else q


def encode_linear(model: HashModel, q) -> CodeMatrix:
    """``sgn(phi(q) A^T)`` with sgn(0) = +1."""
    phi = model.features(q)
    if phi.shape[1] != model.A.shape[1]:
        raise ValueError(f"query has {phi.shape[1]} mapped features, model expects {model.A.shape[1]}")
    return CodeMatrix(sgn(linalg.matmul(phi, model.A.T)))


encode = encode_linear


def fit_ls_encoder(h: CodeMatrix, xk, ridge: float, kernel=None) -> HashModel:
    """Least-squares encoder using the learned codes as regression targets.

    ``W = H^T X (X^T X + ridge I)^-1``; queries encode as ``sgn(phi(q) W^T)``.
    """
    x = linalg.as_matrix(xk)
    if h.n != x.shape[0]:
        raise ValueError(f"{h.n} code rows vs {x.shape[0]} feature rows")
    w = linalg.ridge_solve(x, h.as_float().T, ridge)
    return HashModel(A=w, kernel=kernel, mode="least-squares", algo="ls")
