import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_sign_matrices
from pairhash import kernel, linalg, pairwise, sdh
from pairhash.codes import CodeMatrix
from pairhash.data import synth_clusters
from pairhash.pairwise import LabelData, PairwiseBlock
from pairhash.sdh import TrainConfig


def random_codes(r, n, m):
    return np.where(r.random((n, m)) < 0.5, -1.0, 1.0)


def toy_problem(seed, n=300, d=6, classes=4, p=40, m=8, spread=0.3):
    x, labels = synth_clusters(n, d, classes, spread, seed)
    anchors = pairwise.sample_anchors(n, p, seed)
    xk = kernel.apply(kernel.fit(x, anchors, seed=seed), x)
    s = pairwise.set_lambda(pairwise.build(labels, anchors), m)
    return xk, s


@pytest.mark.parametrize("kw", [dict(m=0), dict(p=0), dict(n_b=0), dict(beta=-1.0),
                                dict(L1=0), dict(L2=0), dict(ridge=-1.0)])
def test_train_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_train_config_defaults():
    cfg = TrainConfig()
    assert (cfg.p, cfg.n_b, cfg.beta, cfg.L1, cfg.L2) == (1000, 100, 10.0, 20, 3)


# -- initialization -----------------------------------------------------------

def test_initialize_square_orthonormal():
    xk, s = toy_problem(0, n=60, p=6, m=6)
    a0, h0 = sdh.initialize(xk, s, 6)
    assert np.allclose(a0 @ a0.T, np.eye(6), atol=1e-12)
    assert h0.shape == (60, 6)


def test_initialize_duplicate_rows():
    xk, s = toy_problem(1, n=50, p=8, m=4)
    xk[10] = xk[3]
    _, h0 = sdh.initialize(xk, s, 4)
    assert np.array_equal(h0.codes[10], h0.codes[3])


def test_initialize_matches_eigen_oracle():
    xk, s = toy_problem(2, n=30, p=10, m=4)
    a0, h0 = sdh.initialize(xk, s, 4)
    c = xk.T @ s.block.T @ xk[s.anchor_idx]
    c = (c + c.T) / 2
    w, v = linalg.sym_eig(c)
    scale = np.linalg.norm(c)
    for k in range(4):
        assert np.allclose(c @ a0[k], w[k] * a0[k], atol=1e-8 * scale)
        gap = min(abs(w[k] - w[i]) for i in range(len(w)) if i != k)
        if gap > 1e-6 * scale:
            # isolated eigenvalue: the eigenvector is unique up to sign
            assert abs(abs(a0[k] @ v[:, k]) - 1.0) < 1e-8
    assert np.array_equal(h0.codes, np.where(xk @ a0.T >= 0, 1, -1))


def test_initialize_too_many_bits():
    xk, s = toy_problem(0, n=40, p=5, m=4)
    with pytest.raises(ValueError):
        sdh.initialize(xk, s, 6)


# -- spectral state and surrogate ---------------------------------------------

def test_spectral_state_direct():
    ha = CodeMatrix([[1, 1], [1, 1], [1, -1], [1, -1]])
    st_ = sdh.spectral_state(ha, 10.0)
    assert np.array_equal(st_.gram, np.diag([4.0, 4.0]))
    assert st_.gamma == 14.0


def test_spectral_state_one_bit(rng):
    ha = CodeMatrix(random_codes(rng, 9, 1))
    st_ = sdh.spectral_state(ha, 2.5)
    assert st_.gram[0, 0] == 9 and st_.gamma == 11.5


def test_spectral_state_gamma_dominates(rng):
    for _ in range(20):
        st_ = sdh.spectral_state(random_codes(rng, 12, 5), 0.0)
        assert np.all(st_.gamma >= np.linalg.eigvalsh(st_.gram) - 1e-12)


def test_surrogate_orthogonal_columns():
    ha = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    f = sdh.construct_surrogate(ha, 0.0, Gamma=np.ones(2))
    assert f.gamma == 4.0
    assert np.allclose(f.Delta, 0) and np.allclose(f.Z, 0)
    assert np.allclose(f.reconstruct(), 4 * np.eye(2))


def full_rank(r, p, m):
    while True:
        h = random_codes(r, p, m)
        if np.linalg.matrix_rank(h) == m:
            return h


def test_surrogate_reconstruction_and_gamma_scaling(rng):
    for _ in range(10):
        ha = full_rank(rng, 64, 8)
        gram = ha.T @ ha
        for g in (np.ones(8), 2 * np.ones(8), rng.uniform(0.1, 5, 8)):
            f = sdh.construct_surrogate(ha, 10.0, Gamma=g)
            assert np.linalg.norm(f.reconstruct() - gram) <= 1e-8 * np.linalg.norm(gram)
            lam2 = np.linalg.eigvalsh(gram)[::-1]
            assert np.allclose(np.diag(f.Delta) ** 2, f.gamma * g / lam2 - g)


def test_surrogate_rejects_rank_deficient():
    ha = np.ones((6, 3))
    with pytest.raises(np.linalg.LinAlgError):
        sdh.construct_surrogate(ha, 1.0)


def test_surrogate_rejects_small_gamma(rng):
    ha = full_rank(rng, 20, 4)
    with pytest.raises(ValueError):
        sdh.construct_surrogate(ha, 1.0, gamma=1.0)


def test_regression_identity(rng):
    for _ in range(20):
        h = random_codes(rng, 50, 8)
        Z = rng.standard_normal((8, 8))
        g = rng.uniform(0.01, 10, 8)
        lhs, rhs = sdh.regression_identity(h, Z, np.diag(g))
        assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


# -- batch update -------------------------------------------------------------

def test_update_batch_scalar_example():
    s = PairwiseBlock(np.ones((2, 3)), np.array([0, 1]), r_max=1.0, alpha=-1.0, lambda_=1.0)
    h = CodeMatrix([[1], [1], [-1]])
    ha = CodeMatrix([[1], [1]])
    st_ = sdh.spectral_state(ha, 1.0)
    assert st_.gamma == 3.0
    rows, trace = sdh.update_batch(h, ha, s, [2], st_, L2=1)
    assert rows.tolist() == [[1]]


def test_update_batch_zero_column_is_fixed_point(rng):
    # orthogonal anchor columns make gamma I - G = beta I
    h = CodeMatrix(random_codes(rng, 6, 3))
    idx = np.array([3, 4, 5])
    ha = CodeMatrix([[1, 1, 1], [1, -1, 1], [1, 1, -1], [1, -1, -1]])
    s = PairwiseBlock(np.zeros((4, 6)), np.arange(4), r_max=1.0, alpha=-1.0, lambda_=3.0)
    st_ = sdh.spectral_state(ha, 2.0)
    rows, trace = sdh.update_batch(h, ha, s, idx, st_, L2=3)
    assert np.array_equal(rows, h.codes[idx])
    assert len(trace) == 2


def _brute_force_linear(hb, ha, sb, state, lam):
    values = [(sdh.linear_objective(c, hb, ha, sb, state, lam), c)
              for c in all_sign_matrices(*hb.shape)]
    best = max(v for v, _ in values)
    return best, [c for v, c in values if v == best]


def test_update_batch_one_step_is_exhaustive_argmax(rng):
    for trial in range(30):
        n, p, m = 8, 4, 2
        labels = LabelData.from_single(rng.integers(0, 2, n))
        s = pairwise.set_lambda(pairwise.build(labels, [0, 1, 2, 3]), m)
        h = CodeMatrix(random_codes(rng, n, m))
        ha = CodeMatrix(h.codes[:p])
        idx = np.array([4, 5, 6])
        state = sdh.spectral_state(ha, float(rng.choice([0.0, 1.0, 10.0])))
        rows, _ = sdh.update_batch(h, ha, s, idx, state, L2=1)
        best, arg = _brute_force_linear(h.as_float()[idx], ha.as_float(), s.block[:, idx],
                                        state, s.lambda_)
        got = sdh.linear_objective(rows, h.as_float()[idx], ha.as_float(), s.block[:, idx],
                                   state, s.lambda_)
        assert got == best
        if len(arg) == 1:
            assert np.array_equal(rows, arg[0])


def test_batch_objective_is_shifted_residual(rng):
    ha = random_codes(rng, 5, 3)
    hb = random_codes(rng, 4, 3)
    sb = rng.choice([-1.0, 1.0], size=(5, 4))
    state = sdh.spectral_state(ha, 1.5)
    lam = 3.0
    const = state.gamma * hb.size + lam ** 2 * np.sum(sb ** 2)
    resid = np.linalg.norm(ha @ hb.T - lam * sb) ** 2
    assert sdh.batch_objective(hb, ha, sb, state, lam) == pytest.approx(const - resid)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 8), st.floats(0, 20),
       st.integers(0, 2**32 - 1))
def test_update_batch_trace_monotone(m, p, n_b, beta, seed):
    r = np.random.default_rng(seed)
    n = p + n_b
    labels = LabelData.from_sets([r.choice(4, size=r.integers(1, 3), replace=False) for _ in range(n)])
    s = pairwise.set_lambda(pairwise.build(labels, np.arange(p)), m)
    h = CodeMatrix(random_codes(r, n, m))
    ha = CodeMatrix(h.codes[:p])
    rows, trace = sdh.update_batch(h, ha, s, np.arange(p, n), sdh.spectral_state(ha, beta), L2=5)
    assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))


# -- training -----------------------------------------------------------------

def test_train_converges_with_small_batches():
    xk, s = toy_problem(3, n=800, p=80, m=8)
    cfg = TrainConfig(m=8, p=80, n_b=50, beta=10.0, L1=20, L2=3, seed=3)
    model, h, diag = sdh.train(xk, s, cfg)
    assert diag.converged
    assert diag.code_changes[-1] == 0.0
    assert diag.anchor_objectives[-1] <= diag.anchor_objectives[0]
    assert model.A.shape == (8, xk.shape[1]) and model.algo == "sdh_p"
    for tr in diag.inner_traces:
        assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(tr, tr[1:]))


def test_train_deterministic():
    xk, s = toy_problem(4)
    cfg = TrainConfig(m=8, p=40, n_b=30, L1=5, seed=4)
    m1, h1, d1 = sdh.train(xk, s, cfg)
    m2, h2, d2 = sdh.train(xk, s, cfg)
    assert h1 == h2 and m1.A.tobytes() == m2.A.tobytes()
    assert d1.records == d2.records


def test_fixed_point_is_stable():
    xk, s = toy_problem(5)
    cfg = TrainConfig(m=8, p=40, n_b=30, L1=20, seed=5)
    _, h, diag = sdh.train(xk, s, cfg)
    assert diag.converged
    for seed in (0, 1, 2):
        again = TrainConfig(m=8, p=40, n_b=30, L1=1, seed=seed)
        _, h2, d2 = sdh.train(xk, s, again, init=h)
        assert h2 == h and d2.code_changes == [0.0]


def test_single_sweep_rarely_increases_objective():
    ok = 0
    for seed in range(20):
        xk, s = toy_problem(seed, n=200, p=30, m=6)
        cfg = TrainConfig(m=6, p=30, n_b=20, L1=1, L2=1, seed=seed)
        _, h, diag = sdh.train(xk, s, cfg)
        ok += diag.anchor_objectives[1] <= diag.anchor_objectives[0]
    assert ok >= 18


def test_full_batch_runs_and_records():
    xk, s = toy_problem(6, n=200, p=30, m=6)
    cfg = TrainConfig(m=6, p=30, n_b=200, L1=5, seed=6)
    _, _, diag = sdh.train(xk, s, cfg, record_codes=True)
    assert diag.records[0]["iteration"] == 0 and diag.records[0]["code_change"] is None
    assert len(diag.history) == len(diag.records)
    assert all(c >= 0 for c in diag.code_changes)


def test_fit_projection_closed_form():
    xk, s = toy_problem(7, n=120, p=20, m=4)
    h = CodeMatrix(np.where(np.random.default_rng(0).random((120, 4)) < 0.5, -1, 1))
    a = sdh.fit_projection(xk, h, s, beta=2.0, ridge=0.1)
    hf = h.as_float()
    ha = hf[s.anchor_idx]
    gram = ha.T @ ha
    gamma = np.linalg.eigvalsh(gram).max() + 2.0
    target = s.lambda_ * ha.T @ s.block + (gamma * np.eye(4) - gram) @ hf.T
    oracle = target @ xk @ np.linalg.inv(xk.T @ xk + 0.1 * np.eye(xk.shape[1]))
    assert np.allclose(a, oracle, rtol=1e-8, atol=1e-8 * np.abs(oracle).max())


def test_train_rejects_oversized_batch():
    xk, s = toy_problem(8, n=50, p=10, m=4)
    with pytest.raises(ValueError):
        sdh.train(xk, s, TrainConfig(m=4, p=10, n_b=51))
