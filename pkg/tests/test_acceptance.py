"""Acceptance gate: exact identities, closed forms, exponent recovery,
and deterministic CLI behavior, each at its pinned tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.
"""

import json
import time

import numpy as np
import pytest

from conftest import random_discrete_world, random_spd, random_unit_rows
from embed_infolab import cli, covdist as cd, infogain as ig, scaling_sim as ss
from embed_infolab import token_select as ts
from embed_infolab import tensor_io
from embed_infolab.entropy import (
    EmbeddingMatrix,
    EntropyParams,
    closed_form_subspace,
    equal_subspace_matrix,
    fit_power_law,
    normalized_entropy,
)

SIGMA = 0.01
SIGMA2 = SIGMA**2


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")
    assert ok, f"{name}: {detail}"


def test_normalized_entropy_closed_form():
    started = time.perf_counter()
    params = EntropyParams(0.1)
    worst = 0.0
    for r in (1, 8, 32, 64):
        z = equal_subspace_matrix(r, 64, n=64)
        gap = abs(normalized_entropy(z, params) - closed_form_subspace(r, 64, params))
        worst = max(worst, gap)
    elapsed = time.perf_counter() - started
    report(
        "normalized-entropy closed form (d=64, r in {1,8,32,64}, eps=0.1, 1e-9)",
        worst <= 1e-9 and elapsed < 1.0,
        f"worst gap {worst:.2e}, {elapsed:.2f}s",
    )


def test_skill_power_law_exponents():
    started = time.perf_counter()
    ns = np.unique(np.round(np.logspace(np.log10(4), np.log10(400), 25)).astype(int))
    errs = {}
    for alpha in (0.3, 0.5, 1.0):
        w = ss.SkillWorld(m=10**6, alpha=alpha)
        fit = ss.verify_skill_power_law(w, ns)
        errs[alpha] = abs(fit.exponent + alpha) / alpha
    elapsed = time.perf_counter() - started
    report(
        "skill power law (M=1e6, alpha in {0.3,0.5,1.0}, 5%)",
        max(errs.values()) <= 0.05 and elapsed < 10.0,
        ", ".join(f"alpha={a}: {e:.2%}" for a, e in errs.items()) + f", {elapsed:.2f}s",
    )


def test_flop_scaling_exponent():
    started = time.perf_counter()
    w = ss.SkillWorld(m=10**6, alpha=0.5)
    ns = np.unique(np.round(np.logspace(1, 3, 25)).astype(int))
    pairs = ss.flops_sweep(w, ns.tolist())
    fit = fit_power_law([s for s, _ in pairs], [h - w.c for _, h in pairs])
    err = abs(fit.exponent + 0.2) / 0.2
    elapsed = time.perf_counter() - started
    report(
        "flop scaling (alpha=0.5 -> -alpha/(alpha+2) = -0.2, 5%)",
        err <= 0.05 and elapsed < 10.0,
        f"exponent {fit.exponent:.4f}, err {err:.2%}, {elapsed:.2f}s",
    )


def test_dataset_scaling_exponent():
    started = time.perf_counter()
    w = ss.SkillWorld(m=10**18, alpha=0.5, gamma_d=0.3)
    ds = np.logspace(np.log10(250.0), np.log10(250000.0), 25)
    pairs = ss.entropy_vs_dataset(w, ds.tolist())
    fit = fit_power_law([d for d, _ in pairs], [h - w.c for _, h in pairs])
    err = abs(fit.exponent - 0.4) / 0.4
    elapsed = time.perf_counter() - started
    report(
        "dataset scaling (gamma_d=0.3 -> 1-2*gamma = 0.4, 10%)",
        err <= 0.10 and elapsed < 30.0,
        f"exponent {fit.exponent:.4f}, err {err:.2%}, {elapsed:.2f}s",
    )


def test_kl_decomposition_fifty_worlds():
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(50):
        dw = random_discrete_world(rng, ny=int(rng.integers(2, 8)), nx=int(rng.integers(2, 10)))
        lhs, rhs = ss.verify_kl_decomposition(dw)
        worst = max(worst, abs(lhs - rhs))
    report("KL decomposition (50 worlds, 1e-12)", worst <= 1e-12, f"worst gap {worst:.2e}")


def test_context_inequality_hundred_worlds():
    rng = np.random.default_rng(1002)
    decreases = 0
    for _ in range(100):
        ny = int(rng.integers(2, 7))
        dw = random_discrete_world(rng, ny=ny, nx=int(rng.integers(3, 9)))
        rows = dw.px_given_y.copy()
        labels = ["irrelevant"] * ny
        chosen = rng.choice(ny, size=int(rng.integers(1, ny + 1)), replace=False)
        for y in chosen:
            weight = float(rng.uniform(0.2, 0.9))
            sharpened = (1 - weight) * rows[y]
            sharpened[int(np.argmax(rows[y]))] += weight
            rows[y] = sharpened
            labels[y] = "good"
        ctx = ss.DiscreteWorld(px_given_y=rows, py=dw.py)
        before, after = ss.context_effect(dw, ctx, labels)
        decreases += after < before
    report("context inequality (100 good+irrelevant worlds, strict decrease)",
           decreases == 100, f"{decreases}/100 strict")


def _chain_instances():
    rng = np.random.default_rng(1003)
    for _ in range(200):
        t = int(rng.integers(1, 31))
        d = int(rng.integers(2, 65))
        yield random_unit_rows(rng, t + 1, d)


def test_info_gain_chain_rule():
    worst = 0.0
    for rows in _chain_instances():
        state = ig.KernelState(SIGMA2)
        prev_gain = 0.0
        for row in rows[:-1]:
            inc = ig.info_gain_increment(state, row)
            state.append(row)
            gain = ig.information_gain(state)
            worst = max(worst, abs(gain - prev_gain - inc.value))
            prev_gain = gain
    report("info-gain chain rule (200 sequences, T<=30, d<=64, sigma=0.01, 1e-8)",
           worst <= 1e-8, f"worst step gap {worst:.2e}")


def test_ridge_variance_identity():
    worst = 0.0
    for rows in _chain_instances():
        context, target = rows[:-1], rows[-1]
        lhs, rhs = ig.verify_ridge_variance_identity(context, target, SIGMA2)
        worst = max(worst, abs(lhs - rhs))
    report("ridge-variance identity (same 200 instances, 1e-8)",
           worst <= 1e-8, f"worst gap {worst:.2e}")


def test_stable_rank_bound():
    violations = 0
    worst_margin = np.inf
    for rows in _chain_instances():
        context = rows[:-1]
        state = ig.KernelState.from_rows(context, SIGMA2)
        gain = ig.information_gain(state)
        lam1 = float(np.linalg.norm(context, 2)) ** 2
        bound = np.linalg.matrix_rank(context) * np.log1p(lam1 / SIGMA2)
        violations += gain > bound + 1e-9
        worst_margin = min(worst_margin, bound - gain)
    report("stable-rank bound (I <= rank * log(1 + sigma^-2 ||Z||_2^2))",
           violations == 0, f"min slack {worst_margin:.3e}")


def test_lasso_correctness():
    rng = np.random.default_rng(1004)
    # KKT certificates on 100 random instances (token count below dimension)
    worst_kkt = 0.0
    for _ in range(100):
        t = int(rng.integers(2, 16))
        d = int(rng.integers(2 * t, 4 * t + 1))
        rows = rng.standard_normal((t, d))
        target = rng.standard_normal(d)
        lam = float(10 ** rng.uniform(-5, -1))
        beta = ts.lasso_fit(rows, target, lam)
        worst_kkt = max(worst_kkt, ts.kkt_residual(rows, target, beta, lam))
    # orthonormal designs match the soft-threshold closed form
    q, _ = np.linalg.qr(rng.standard_normal((24, 24)))
    rows = q[:9]
    target = rng.standard_normal(24)
    lam = 0.2
    beta = ts.lasso_fit(rows, target, lam)
    closed = np.array([ts.soft_threshold(r @ target, lam / 2) for r in rows])
    ortho_gap = float(np.max(np.abs(beta - closed)))
    # beta = 0 above the critical penalty
    rows2 = rng.standard_normal((7, 12))
    target2 = rng.standard_normal(12)
    lam_max = 2.0 * float(np.max(np.abs(rows2 @ target2)))
    all_zero = bool(np.all(ts.lasso_fit(rows2, target2, lam_max + 1e-9) == 0.0))
    # support recovery on 3-sparse instances at the default penalty
    recoveries = 0
    for _ in range(10):
        t, d = 30, 80
        rows3 = rng.standard_normal((t, d))
        rows3 /= np.linalg.norm(rows3, axis=1, keepdims=True)
        support = tuple(sorted(rng.choice(t, size=3, replace=False).tolist()))
        beta_true = np.zeros(t)
        for j in support:
            beta_true[j] = rng.uniform(0.3, 1.0) * (1 if rng.random() < 0.5 else -1)
        target3 = rows3.T @ beta_true + 1e-5 * rng.standard_normal(d)
        sel = ts.select_by_threshold(ts.lasso_fit(rows3, target3, 1e-4), 0.01)
        recoveries += sel.indices == support
    ok = worst_kkt <= 1e-6 and ortho_gap <= 1e-8 and all_zero and recoveries == 10
    report(
        "lasso correctness (KKT 1e-6 x100, soft-threshold 1e-8, lam_max zero, 3-sparse recovery)",
        ok,
        f"kkt {worst_kkt:.2e}, ortho {ortho_gap:.2e}, zero {all_zero}, recovered {recoveries}/10",
    )


def test_attention_unrolling():
    rng = np.random.default_rng(1005)
    # exact decomposition on constructed sequences
    worst = 0.0
    for _ in range(20):
        n, d = int(rng.integers(2, 10)), int(rng.integers(2, 9))
        w = np.zeros((n, n))
        for i in range(n):
            off = rng.random(i)
            off = off / off.sum() * 0.1 if i else off
            w[i, :i] = off
            w[i, i] = 1.0 - off.sum() if i else 1.0
        v = rng.standard_normal((n, d))
        z = np.tril(w) @ v
        res = ts.attention_unroll_residual(w, v, z)
        worst = max(worst, res.check_exact(z[-1]))
    # residual strictly decreasing over three off-diagonal mass levels
    n, d = 8, 6
    v = rng.standard_normal((n, d))
    residuals = []
    for mass in (0.3, 0.1, 0.03):
        sub = np.random.default_rng(7)
        w = np.zeros((n, n))
        for i in range(n):
            off = sub.random(i)
            off = off / off.sum() * mass if i else off
            w[i, :i] = off
            w[i, i] = 1.0 - off.sum() if i else 1.0
        z = np.tril(w) @ v
        residuals.append(ts.attention_unroll_residual(w, v, z).residual_norm)
    monotone = residuals[0] > residuals[1] > residuals[2]
    report(
        "attention unrolling (exact to 1e-10; residual drops with off-diagonal mass)",
        worst <= 1e-10 and monotone,
        f"worst gap {worst:.2e}, residuals {[f'{r:.2e}' for r in residuals]}",
    )


def test_js_frobenius_taylor():
    rng = np.random.default_rng(1006)
    tolerances = {1e-2: 1e-1, 1e-3: 1e-2, 1e-4: 1e-3}
    ok = True
    details = []
    for trial in range(10):
        d = int(rng.integers(2, 7))
        # spectra confined to [0.1, 1]
        def bounded_spd():
            q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            lam = rng.uniform(0.1, 1.0, size=d)
            return cd.SpdMatrix((q * lam) @ q.T)

        a, b = bounded_spd(), bounded_spd()
        ratios = cd.verify_js_taylor(a, b, [1e-2, 1e-3, 1e-4])
        gaps = {g: abs(r - 1.0) for g, r in ratios}
        within = all(gaps[g] <= tol for g, tol in tolerances.items())
        monotone = gaps[1e-2] > gaps[1e-3] > gaps[1e-4]
        ok = ok and within and monotone
        if trial == 0:
            details = [f"{g:g}: {gap:.2e}" for g, gap in gaps.items()]
    report("JS-Frobenius Taylor (gaps within {1e-1,1e-2,1e-3}, monotone)",
           ok, ", ".join(details))


def test_distance_axioms():
    rng = np.random.default_rng(1007)
    fns = [cd.dist_logdet, cd.dist_js, cd.dist_riemann, cd.dist_loge, cd.dist_frobenius]
    worst_self, worst_sym = 0.0, 0.0
    for _ in range(20):
        a = cd.SpdMatrix(random_spd(rng, 4))
        b = cd.SpdMatrix(random_spd(rng, 4))
        for fn in fns:
            worst_self = max(worst_self, fn(a, a))
            worst_sym = max(worst_sym, abs(fn(a, b) - fn(b, a)))
    triangle_ok = True
    for _ in range(200):
        a, b, c = (cd.SpdMatrix(random_spd(rng, 3)) for _ in range(3))
        for fn in (cd.dist_riemann, cd.dist_loge):
            triangle_ok &= fn(a, b) <= fn(a, c) + fn(c, b) + 1e-9
    worst_affine = 0.0
    for _ in range(20):
        a = cd.SpdMatrix(random_spd(rng, 4))
        b = cd.SpdMatrix(random_spd(rng, 4))
        m = rng.standard_normal((4, 4)) + 0.5 * np.eye(4)
        ta = cd.SpdMatrix(m.T @ a.values @ m)
        tb = cd.SpdMatrix(m.T @ b.values @ m)
        worst_affine = max(worst_affine, abs(cd.dist_riemann(ta, tb) - cd.dist_riemann(a, b)))
    ok = worst_self <= 1e-10 and worst_sym <= 1e-10 and triangle_ok and worst_affine <= 1e-8
    report(
        "distance axioms (identity/symmetry 1e-10, triangles x200, affine invariance 1e-8)",
        ok,
        f"self {worst_self:.2e}, sym {worst_sym:.2e}, affine {worst_affine:.2e}",
    )


def test_cli_determinism(tmp_path):
    rng = np.random.default_rng(1008)
    inputs = tmp_path / "in"
    inputs.mkdir()
    tensor_io.write_tensor(inputs / "z.emb1",
                           tensor_io.TensorFile(rng.standard_normal((9, 5))))
    for i in range(3):
        tensor_io.write_tensor(inputs / f"s{i}.emb1",
                               tensor_io.TensorFile(random_unit_rows(rng, 7, 4)))

    def outputs_for(run_dir):
        run_dir.mkdir()
        specs = [
            (["entropy", "--input", inputs / "z.emb1", "--seed", "3",
              "--output", run_dir / "e.json"], [run_dir / "e.json"]),
            (["scaling", "--sweep", "skills", "--seed", "3",
              "--out-csv", run_dir / "s.csv", "--out-json", run_dir / "s.json"],
             [run_dir / "s.csv", run_dir / "s.json"]),
            (["infogain", "--input", inputs / "z.emb1", "--seed", "3",
              "--out-csv", run_dir / "i.csv"], [run_dir / "i.csv"]),
            (["lasso", "--input", inputs / "z.emb1", "--seed", "3",
              "--out-json", run_dir / "l.json", "--beta-csv", run_dir / "b.csv"],
             [run_dir / "l.json", run_dir / "b.csv"]),
            (["distances", "--input-dir", inputs, "--pattern", "s*.emb1", "--seed", "3",
              "--mode", "cov", "--metric", "js", "--out-csv", run_dir / "d.csv"],
             [run_dir / "d.csv"]),
            (["pca", "--input-dir", inputs, "--pattern", "s*.emb1", "--seed", "3",
              "--out-csv", run_dir / "p.csv"], [run_dir / "p.csv"]),
        ]
        blobs = {}
        for argv, files in specs:
            assert cli.main([str(a) for a in argv]) == 0
            for f in files:
                blobs[f.name] = f.read_bytes()
        return blobs

    first = outputs_for(tmp_path / "run1")
    second = outputs_for(tmp_path / "run2")
    same = {name for name in first if first[name] == second[name]}
    report("CLI determinism (identical config+seed => byte-identical outputs)",
           same == set(first), f"{len(same)}/{len(first)} files identical")
