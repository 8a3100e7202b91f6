import numpy as np
import pytest

from pairhash import ALGOS, encode_linear, evaluate, lsh_codes, synth_clusters, train_model
from pairhash.pairwise import LabelData
from pairhash.sdh import TrainConfig


@pytest.fixture(scope="module")
def clusters():
    x, labels = synth_clusters(500, 6, 4, 0.2, 0)
    return x, labels


@pytest.mark.parametrize("algo", ALGOS)
def test_every_algorithm_trains_and_encodes(clusters, algo):
    x, labels = clusters
    cfg = TrainConfig(m=8, p=50, n_b=50, L1=5, seed=0)
    model, h, diag = train_model(x, labels, cfg, algo=algo)
    assert model.algo == algo and model.kernel is not None
    assert model.config["algo"] == algo and model.config["m"] == 8
    assert encode_linear(model, x).shape == (500, 8)
    assert len(diag.records) >= 2


def test_least_squares_encoder(clusters):
    x, labels = clusters
    cfg = TrainConfig(m=8, p=50, n_b=50, L1=5, seed=0)
    model, h, _ = train_model(x, labels, cfg, encoder="least-squares")
    assert model.mode == "least-squares"
    assert np.mean(encode_linear(model, x).codes == h.codes) > 0.9


def test_retrieval_beats_lsh(clusters):
    x, labels = clusters
    q, ql = synth_clusters(560, 6, 4, 0.2, 0)
    q, ql = q[500:], ql.subset(range(500, 560))
    cfg = TrainConfig(m=8, p=50, n_b=50, seed=0)
    model, h, _ = train_model(x, labels, cfg)
    learned = evaluate(encode_linear(model, q), h, ql, labels, R=50, radius=1).map
    db, qc = lsh_codes(x, q, 8, seed=0)
    baseline = evaluate(qc, db, ql, labels, R=50, radius=1).map
    assert learned > baseline


def test_multi_label_pipeline():
    r = np.random.default_rng(0)
    x = r.standard_normal((200, 5))
    labels = LabelData.from_sets([r.choice(6, size=r.integers(1, 3), replace=False) for _ in range(200)])
    model, h, _ = train_model(x, labels, TrainConfig(m=4, p=30, n_b=40, L1=3, seed=0))
    assert model.config["multi_label"] is True
    assert model.config["alpha"] == -model.config["r_max"] / 2


def test_errors(clusters):
    x, labels = clusters
    cfg = TrainConfig(m=4, p=20, n_b=20, L1=1)
    with pytest.raises(ValueError):
        train_model(x, labels, cfg, algo="ksh")
    with pytest.raises(ValueError):
        train_model(x[:10], labels, cfg)
    with pytest.raises(ValueError):
        train_model(x, labels, cfg, encoder="tree")


def test_lsh_codes_deterministic(clusters):
    x, _ = clusters
    a = lsh_codes(x, x[:5], 16, 3)
    b = lsh_codes(x, x[:5], 16, 3)
    assert a[0] == b[0] and a[1] == b[1]
    assert a[1] == type(a[1])(a[0].codes[:5])
