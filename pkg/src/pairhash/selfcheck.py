"""Numerical self-checks of the identities and optimality claims the solvers rely on.

Every check returns a :class:`Check` with the worst residual it saw, so the
CLI can print them and fail loudly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import gsdh, kernel, pairwise, sdh
from .codes import CodeMatrix
from .data import synth_clusters
from .sdh import TrainConfig

RTOL = 1e-8
MONO_SLACK = 1e-9


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst residual {self.residual:.3e} {self.detail}".rstrip()


def random_codes(rng, n: int, m: int) -> np.ndarray:
    return np.where(rng.random((n, m)) < 0.5, -1.0, 1.0)


def full_rank_codes(rng, n: int, m: int) -> np.ndarray:
    while True:
        h = random_codes(rng, n, m)
        if np.linalg.matrix_rank(h.T @ h) == m:
            return h


def check_regression_identity(seed: int = 0, trials: int = 100, n: int = 50, m: int = 8) -> Check:
    """Trace form equals the minimized ridge-regression value."""
    worst = 0.0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        h = random_codes(rng, n, m)
        Z = rng.standard_normal((m, m))
        g = rng.uniform(0.0, 10.0, size=m)
        g = np.where(g == 0.0, 10.0, g)
        lhs, rhs = sdh.regression_identity(h, Z, g)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return Check("regression identity", worst <= RTOL, worst, f"({trials} trials)")


def check_surrogate(seed: int = 0, trials: int = 100, p: int = 64, m: int = 8,
                    beta: float = 10.0, corrupt_gamma: bool = False) -> Check:
    """``gamma (I - Z^T (Z Z^T + Gamma)^-1 Z)`` rebuilds ``H_A^T H_A``.

    With ``corrupt_gamma`` the check deliberately uses half the largest
    eigenvalue as gamma, which must be reported as a failure.
    """
    worst = 0.0
    errors = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, 1000 + t])
        ha = full_rank_codes(rng, p, m)
        gram = ha.T @ ha
        gamma = None
        if corrupt_gamma:
            gamma = 0.5 * float(np.linalg.eigvalsh(gram).max())
        try:
            f = sdh.construct_surrogate(ha, beta, Gamma=np.ones(m), gamma=gamma)
        except (ValueError, np.linalg.LinAlgError):
            errors += 1
            worst = np.inf
            continue
        res = np.linalg.norm(f.reconstruct() - gram) / np.linalg.norm(gram)
        worst = max(worst, res)
    detail = f"({trials} trials" + (f", {errors} rejected)" if errors else ")")
    return Check("surrogate reconstruction", worst <= RTOL, worst, detail)


def _toy_problem(rng, n: int, p: int, m: int, multi: bool):
    if multi:
        sets = [rng.choice(5, size=rng.integers(1, 3), replace=False) for _ in range(n)]
        labels = pairwise.LabelData.from_sets(sets)
    else:
        labels = pairwise.LabelData.from_single(rng.integers(0, 3, size=n))
    anchors = np.sort(rng.choice(n, size=p, replace=False))
    s = pairwise.set_lambda(pairwise.build(labels, anchors, multi), m)
    return s


def _sdh_step_gap(rng, s, h, idx, n_b, m, beta) -> float:
    ha = h[s.anchor_idx]
    sb = s.block[:, idx]
    hb = h[idx]
    lam = s.lambda_
    state = sdh.spectral_state(ha, beta)
    step = sdh.sign_step(hb, lam * (sb.T @ ha), state)
    got = sdh.linear_objective(step, hb, ha, sb, state, lam)
    best = max(sdh.linear_objective(np.array(cand).reshape(n_b, m), hb, ha, sb, state, lam)
               for cand in itertools.product((-1.0, 1.0), repeat=n_b * m))
    return best - got


def _bit_step_gap(rng, s, h, idx, m, beta) -> float:
    ha = h[s.anchor_idx]
    j = int(rng.integers(0, m))
    st = gsdh.residual_target(s, CodeMatrix(ha), CodeMatrix(h), idx, j)
    col, _ = gsdh.update_bit_batch(CodeMatrix(h), ha[:, j], st, idx, j, s.lambda_, beta, 1)
    coeff = beta * h[idx, j] + s.lambda_ * (st.T @ ha[:, j])
    got = math.fsum(col * coeff)
    best = max(math.fsum(np.array(cand) * coeff)
               for cand in itertools.product((-1.0, 1.0), repeat=idx.size))
    return best - got


def check_sign_optimality(seed: int = 0, trials: int = 200) -> Check:
    """One sign step attains the exhaustive maximum of its linear objective.

    Each trial draws one batch-update instance and one per-bit instance.
    """
    worst = 0.0
    for t in range(trials):
        rng = np.random.default_rng([seed, 2000 + t])
        m = int(rng.integers(1, 4))
        p = int(rng.integers(1, 5))
        n_b = int(rng.integers(1, 4))
        n = p + n_b + 1
        s = _toy_problem(rng, n, p, m, multi=bool(t % 2))
        h = random_codes(rng, n, m)
        idx = np.sort(rng.choice(n, size=n_b, replace=False))
        beta = float(rng.choice([0.0, 1.0, 10.0]))
        worst = max(worst, _sdh_step_gap(rng, s, h, idx, n_b, m, beta),
                    _bit_step_gap(rng, s, h, idx, m, beta))
    return Check("sign-step optimality", worst <= 0.0, worst,
                 f"({trials} batch + {trials} per-bit instances, exact)")


def check_loss_decomposition(seed: int = 0, trials: int = 50) -> Check:
    """The summed pair loss is affine in bit ``j`` of the non-anchor side.

    For every assignment ``c`` of that column, ``loss(c) + h_A^j . T . c``
    must be the same constant, where ``T`` is the flip target.
    """
    worst = 0.0
    for t in range(trials):
        rng = np.random.default_rng([seed, 3000 + t])
        kind = (gsdh.LossKind.BRE, gsdh.LossKind.HINGE)[t % 2]
        n = int(rng.integers(3, 9))
        m = int(rng.integers(2, 5))
        s = _toy_problem(rng, n, n, m, multi=bool((t // 2) % 2))
        h = random_codes(rng, n, m)
        j = int(rng.integers(0, m))
        idx = np.arange(n)
        ha = h[s.anchor_idx]
        target = gsdh.loss_block(kind, s, CodeMatrix(ha), CodeMatrix(h), idx, j)
        d_rest = (m - 1 - (ha @ h.T - np.outer(ha[:, j], h[:, j]))) / 2.0
        vals = []
        for cand in itertools.product((-1.0, 1.0), repeat=n):
            c = np.array(cand)
            d = d_rest + (1.0 - np.outer(ha[:, j], c)) / 2.0
            loss = float(np.sum(gsdh.pair_loss(kind, s.block, d, m)))
            vals.append(loss + float(ha[:, j] @ target @ c))
        vals = np.array(vals)
        worst = max(worst, float(np.ptp(vals)) / max(1.0, float(np.abs(vals).max())))
    return Check("loss affine decomposition", worst <= 1e-12, worst, f"({trials} instances)")


def check_monotone_inner(seed: int = 0) -> Check:
    """Inner-loop objectives never decrease during real training runs."""
    worst = 0.0
    count = 0
    x, labels = synth_clusters(600, 8, 4, 0.3, seed)
    anchors = pairwise.sample_anchors(600, 60, seed)
    xk = kernel.apply(kernel.fit(x, anchors, seed=seed), x)
    s = pairwise.build(labels, anchors)
    cfg = TrainConfig(m=8, p=60, n_b=30, beta=2.0, L1=5, L2=3, seed=seed)
    for train in (sdh.train, gsdh.train):
        _, _, diag = train(xk, s, cfg)
        for trace in diag.inner_traces:
            tr = np.asarray(trace)
            scale = np.maximum(1.0, np.abs(tr[:-1]))
            drops = (tr[:-1] - tr[1:]) / scale
            count += tr.size - 1
            if drops.size:
                worst = max(worst, float(drops.max()))
    return Check("inner-loop monotonicity", worst <= MONO_SLACK, max(worst, 0.0),
                 f"({count} inner steps)")


def run_all(seed: int = 0, trials: int = 100, corrupt_gamma: bool = False) -> list[Check]:
    """Every check; ``trials`` scales the randomized ones (sign checks get twice as many)."""
    return [
        check_regression_identity(seed, trials),
        check_surrogate(seed, trials, corrupt_gamma=corrupt_gamma),
        check_sign_optimality(seed, 2 * trials),
        check_loss_decomposition(seed, max(1, trials // 2)),
        check_monotone_inner(seed),
    ]
