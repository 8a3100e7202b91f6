import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairhash.codes import (CodeMatrix, hamming, hamming_matrix, pack, row_select, sgn,
                            sgn_matrix, unpack)


def random_codes(r, n, m):
    return np.where(r.random((n, m)) < 0.5, -1, 1).astype(np.int8)


def test_sgn_zero_convention():
    out = sgn_matrix(np.array([[0.5, -0.5], [0.0, -0.0]]))
    assert np.array_equal(out.codes, [[1, -1], [1, 1]])


def test_sgn_all_positive(rng):
    assert np.all(sgn(rng.random((4, 5)) + 0.1) == 1)


def test_sgn_antisymmetry(rng):
    m = rng.standard_normal((6, 7))
    assert np.array_equal(sgn(-m), -sgn(m))


def test_sgn_rejects_nan():
    with pytest.raises(ValueError):
        sgn([1.0, np.nan])


def test_code_matrix_validates():
    with pytest.raises(ValueError):
        CodeMatrix([[1, 0]])
    with pytest.raises(ValueError):
        CodeMatrix([1, -1])


def test_codes_view_is_read_only():
    h = CodeMatrix([[1, -1]])
    with pytest.raises(ValueError):
        h.codes[0, 0] = -1


def test_hamming_identical_and_complement(rng):
    row = random_codes(rng, 1, 16)
    h = CodeMatrix(np.vstack([row, -row]))
    assert hamming(h.packed[0], h.packed[0]) == 0
    assert hamming(h.packed[0], h.packed[1], 16) == 16


def test_hamming_dot_identity(rng):
    for m in (1, 7, 64, 65, 130):
        a = CodeMatrix(random_codes(rng, 20, m))
        b = CodeMatrix(random_codes(rng, 15, m))
        dot = a.as_float() @ b.as_float().T
        assert np.array_equal(2 * hamming_matrix(a, b), m - dot)
        assert hamming(a.packed[3], b.packed[4]) == (m - dot[3, 4]) / 2


def test_hamming_matrix_bit_mismatch():
    with pytest.raises(ValueError):
        hamming_matrix(CodeMatrix(np.ones((1, 3))), CodeMatrix(np.ones((1, 4))))


def test_row_select_cases(rng):
    h = CodeMatrix(random_codes(rng, 5, 9))
    assert row_select(h, np.arange(5)) == h
    empty = row_select(h, [])
    assert empty.shape == (0, 9)
    rep = row_select(h, [2, 2, 0])
    assert np.array_equal(rep.codes, h.codes[[2, 2, 0]])
    assert np.array_equal(rep.packed, h.packed[[2, 2, 0]])
    for bad in ([5], [-1]):
        with pytest.raises(IndexError):
            row_select(h, bad)


def test_mutation_keeps_views_consistent(rng):
    h = CodeMatrix(random_codes(rng, 4, 70))
    _ = h.packed
    h.set_rows([1], -h.codes[[1]])
    h.set_column([0, 2], 69, [-1, 1])
    assert np.array_equal(unpack(h.packed, 70), h.codes)


def test_packed_layout():
    row = -np.ones((1, 66), dtype=np.int8)
    row[0, [0, 3, 65]] = 1
    packed = CodeMatrix(row).packed
    assert packed.shape == (1, 2)
    assert int(packed[0, 0]) == 0b1001
    assert int(packed[0, 1]) == 0b10


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 12), st.integers(1, 200), st.integers(0, 2**32 - 1))
def test_pack_round_trip(n, m, seed):
    codes = random_codes(np.random.default_rng(seed), n, m)
    packed = pack(codes)
    assert packed.shape == (n, -(-m // 64))
    assert np.array_equal(unpack(packed, m), codes)
    assert CodeMatrix.from_packed(packed, m) == CodeMatrix(codes)
