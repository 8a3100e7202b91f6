"""Binary code matrices with a +/-1 view and a bit-packed view.

Bit ``j`` of a row lives in word ``j // 64`` at bit position ``j % 64``
(least significant first); a set bit means code +1.
"""

from __future__ import annotations

import numpy as np


def pack(codes: np.ndarray) -> np.ndarray:
    """Pack an n x m +/-1 array into n x ceil(m/64) uint64 words."""
    codes = np.asarray(codes)
    n, m = codes.shape
    words = -(-m // 64)
    bits = np.zeros((n, words * 64), dtype=np.uint8)
    bits[:, :m] = codes > 0
    packed = np.packbits(bits, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").reshape(n, words).astype(np.uint64)


def unpack(packed: np.ndarray, m: int) -> np.ndarray:
    packed = np.ascontiguousarray(np.asarray(packed, dtype="<u8"))
    n, words = packed.shape
    bits = np.unpackbits(packed.view(np.uint8).reshape(n, 8 * words), axis=1, bitorder="little")
    return np.where(bits[:, :m] > 0, 1, -1).astype(np.int8)


class CodeMatrix:
    """n x m matrix over {-1, +1}.

    ``codes`` is the int8 view used by the solvers; ``packed`` is rebuilt
    lazily after any write through :meth:`set_rows` / :meth:`set_column`.
    """

    def __init__(self, codes):
        codes = np.asarray(codes)
        if codes.ndim != 2:
            raise ValueError(f"codes must be 2-D, got shape {codes.shape}")
        if codes.size and not np.all((codes == 1) | (codes == -1)):
            raise ValueError("codes must contain only -1 and +1")
        self._codes = codes.astype(np.int8, copy=True)
        self._packed = None

    @classmethod
    def from_packed(cls, packed, m: int) -> "CodeMatrix":
        out = cls(unpack(packed, m))
        out._packed = np.asarray(packed, dtype=np.uint64).copy()
        return out

    @property
    def codes(self) -> np.ndarray:
        view = self._codes.view()
        view.flags.writeable = False
        return view

    @property
    def packed(self) -> np.ndarray:
        if self._packed is None:
            self._packed = pack(self._codes)
        return self._packed

    @property
    def n(self) -> int:
        return self._codes.shape[0]

    @property
    def m(self) -> int:
        return self._codes.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._codes.shape

    def as_float(self) -> np.ndarray:
        return self._codes.astype(np.float64)

    def copy(self) -> "CodeMatrix":
        return CodeMatrix(self._codes)

    def set_rows(self, idx, rows) -> None:
        self._codes[idx] = rows
        self._packed = None

    def set_column(self, idx, j: int, values) -> None:
        self._codes[idx, j] = values
        self._packed = None

    def __eq__(self, other):
        return isinstance(other, CodeMatrix) and np.array_equal(self._codes, other._codes)

    def __repr__(self):
        return f"CodeMatrix(n={self.n}, m={self.m})"


def sgn(x) -> np.ndarray:
    """Elementwise sign with sgn(0) = +1, as int8."""
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("sign of NaN is undefined")
    return np.where(x >= 0, 1, -1).astype(np.int8)


def sgn_matrix(x) -> CodeMatrix:
    return CodeMatrix(sgn(x))


def hamming(a: np.ndarray, b: np.ndarray, m: int | None = None) -> int:
    """Hamming distance between two packed rows (padding bits are zero)."""
    return int(np.bitwise_count(np.bitwise_xor(np.asarray(a, np.uint64),
                                               np.asarray(b, np.uint64))).sum())


def hamming_matrix(queries: CodeMatrix, db: CodeMatrix) -> np.ndarray:
    """All-pairs Hamming distances via XOR + popcount on the packed words."""
    if queries.m != db.m:
        raise ValueError(f"bit counts differ: {queries.m} vs {db.m}")
    q = queries.packed
    d = db.packed
    out = np.zeros((q.shape[0], d.shape[0]), dtype=np.int64)
    for w in range(q.shape[1]):
        out += np.bitwise_count(q[:, w][:, None] ^ d[:, w][None, :])
    return out


def row_select(h: CodeMatrix, idx) -> CodeMatrix:
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= h.n):
        raise IndexError(f"row index out of range for {h.n} rows")
    return CodeMatrix(h.codes[idx].reshape(idx.size, h.m))
