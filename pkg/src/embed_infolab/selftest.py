"""Fast user-facing sanity suite behind the ``selftest`` subcommand.

Each check exercises one module invariant on small seeded inputs; the
whole run takes well under a second.  This is a smoke gate, not the test
suite -- pytest holds the real coverage.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import covdist, infogain, scaling_sim, tensor_io, token_select
from .entropy import (
    EmbeddingMatrix,
    EntropyParams,
    closed_form_subspace,
    equal_subspace_matrix,
    fit_power_law,
    logdet_entropy,
    normalized_entropy,
)


def _random_world(rng, ny=4, nx=6) -> scaling_sim.DiscreteWorld:
    p = rng.random((ny, nx)) + 0.05
    p /= p.sum(axis=1, keepdims=True)
    q = rng.random(ny) + 0.05
    q /= q.sum()
    return scaling_sim.DiscreteWorld(px_given_y=p, py=q)


def _check_tensor_roundtrip(rng):
    with tempfile.TemporaryDirectory() as tmp:
        arr = rng.standard_normal((3, 4, 2))
        path = Path(tmp) / "t.emb1"
        tensor_io.write_tensor(path, tensor_io.TensorFile(arr))
        back = tensor_io.read_tensor(path)
        assert np.array_equal(back.data, arr), "round trip not bit-exact"


def _check_entropy_closed_form(rng):
    params = EntropyParams(0.1)
    for r in (1, 4, 16):
        z = equal_subspace_matrix(r, 16, 16)
        got = normalized_entropy(z, params)
        want = closed_form_subspace(r, 16, params)
        assert abs(got - want) < 1e-9, f"r={r}: {got} vs {want}"


def _check_entropy_rotation(rng):
    z = rng.standard_normal((8, 5))
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    a = logdet_entropy(EmbeddingMatrix(z))
    b = logdet_entropy(EmbeddingMatrix(z @ q))
    assert abs(a - b) < 1e-8, f"rotation changed entropy: {a} vs {b}"


def _check_skill_distribution(rng):
    w = scaling_sim.SkillWorld(m=10_000, alpha=0.7)
    p = scaling_sim.skill_distribution(w)
    assert abs(p.sum() - 1.0) < 1e-12, "distribution does not sum to 1"
    assert np.all(np.diff(p) < 0), "distribution not strictly decreasing"
    assert scaling_sim.conditional_entropy_after(w, 0) == w.b
    assert scaling_sim.conditional_entropy_after(w, w.m) == w.c


def _check_kl_decomposition(rng):
    for _ in range(5):
        dw = _random_world(rng)
        lhs, rhs = scaling_sim.verify_kl_decomposition(dw)
        assert abs(lhs - rhs) <= 1e-12, f"KL gap {abs(lhs - rhs)}"


def _check_chain_rule(rng):
    for _ in range(10):
        t, d = rng.integers(2, 10), rng.integers(3, 8)
        rows = rng.standard_normal((t, d))
        state = infogain.KernelState(sigma2=1e-4)
        for i in range(t):
            z = rows[i] / np.linalg.norm(rows[i])
            before = infogain.information_gain(state)
            inc = infogain.info_gain_increment(state, z)
            state.append(z)
            after = infogain.information_gain(state)
            assert abs(after - before - inc.value) < 1e-8, "chain rule violated"


def _check_ridge_identity(rng):
    for _ in range(10):
        t, d = rng.integers(1, 12), rng.integers(3, 16)
        rows = rng.standard_normal((t, d))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        target = rng.standard_normal(d)
        target /= np.linalg.norm(target)
        lhs, rhs = infogain.verify_ridge_variance_identity(rows, target, 1e-4)
        assert abs(lhs - rhs) <= 1e-8, f"ridge identity gap {abs(lhs - rhs)}"


def _check_lasso_kkt(rng):
    for _ in range(10):
        t, d = rng.integers(2, 10), rng.integers(4, 20)
        rows = rng.standard_normal((t, d))
        target = rng.standard_normal(d)
        beta = token_select.lasso_fit(rows, target, 1e-3)
        res = token_select.kkt_residual(rows, target, beta, 1e-3)
        assert res <= 1e-6, f"KKT residual {res}"


def _check_unroll_exact(rng):
    n, d = 6, 5
    w = np.tril(rng.random((n, n)) * 0.1)
    np.fill_diagonal(w, 1.0)
    w /= w.sum(axis=1, keepdims=True)
    v = rng.standard_normal((n, d))
    z = np.tril(w) @ v
    res = token_select.attention_unroll_residual(w, v, z)
    gap = res.check_exact(z[-1])
    assert gap < 1e-10, f"unroll decomposition gap {gap}"


def _check_distances(rng):
    a = covdist.SpdMatrix(_random_spd(rng, 4))
    b = covdist.SpdMatrix(_random_spd(rng, 4))
    for fn in (covdist.dist_logdet, covdist.dist_js, covdist.dist_riemann,
               covdist.dist_loge, covdist.dist_frobenius):
        assert fn(a, a) <= 1e-10, f"{fn.__name__}(A,A) != 0"
        assert abs(fn(a, b) - fn(b, a)) <= 1e-10, f"{fn.__name__} asymmetric"
    ratios = covdist.verify_js_taylor(a, b, [1e-2, 1e-3, 1e-4])
    gaps = [abs(r - 1.0) for _, r in ratios]
    assert gaps[0] >= gaps[1] >= gaps[2], "Taylor ratios not monotone toward 1"


def _check_pca_isometry(rng):
    pts = rng.standard_normal((7, 4))
    proj = covdist.pca_project(pts, 4)
    before = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    after = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
    assert np.max(np.abs(before - after)) < 1e-10, "full-rank PCA is not an isometry"


def _check_power_law_fit(rng):
    xs = np.logspace(0, 3, 12)
    fit = fit_power_law(xs, 2.5 * xs**-0.75)
    assert abs(fit.exponent + 0.75) < 1e-10 and abs(fit.coefficient - 2.5) < 1e-9


def _random_spd(rng, d):
    m = rng.standard_normal((d, d))
    return m @ m.T / d + 0.1 * np.eye(d)


CHECKS = [
    ("tensor_roundtrip", _check_tensor_roundtrip),
    ("entropy_closed_form", _check_entropy_closed_form),
    ("entropy_rotation_invariance", _check_entropy_rotation),
    ("skill_distribution", _check_skill_distribution),
    ("kl_decomposition", _check_kl_decomposition),
    ("infogain_chain_rule", _check_chain_rule),
    ("ridge_variance_identity", _check_ridge_identity),
    ("lasso_kkt", _check_lasso_kkt),
    ("attention_unroll", _check_unroll_exact),
    ("distance_axioms", _check_distances),
    ("pca_isometry", _check_pca_isometry),
    ("power_law_fit", _check_power_law_fit),
]


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    results = []
    for i, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng(seed * len(CHECKS) + i)
        try:
            fn(rng)
            results.append((name, True, ""))
        except Exception as e:  # report, don't abort the suite
            results.append((name, False, str(e)))
    return results
