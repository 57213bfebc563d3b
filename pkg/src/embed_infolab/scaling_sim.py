"""Skill-graph simulator for conditional-entropy scaling laws.

A world has M skills whose occurrence probabilities follow the power law
p_k = k^-(alpha+1) / Z_alpha.  A model comprehends skills in index order;
comprehended skills contribute conditional entropy C, the rest B.  The
simulator evaluates the exact finite sums behind the entropy-vs-skills,
entropy-vs-parameters, entropy-vs-flops and entropy-vs-dataset curves, so
the asymptotic exponents (-alpha, -alpha, -alpha/(alpha+2), 1-2*gamma)
only ever appear as *expected* values in tests, never in the computation.

Tail masses are evaluated as Hurwitz-zeta differences,

    sum_{k=n+1}^{M} k^-s  =  zeta(s, n+1) - zeta(s, M+1),

which equals the literal finite sum to machine precision while staying
O(1) in M; the test suite checks it against direct summation.

Finite discrete worlds (a conditional table p(x|y) plus p(y)) support the
exact identity checks: the KL decomposition of the information gap, skill
relabeling invariance, and the context-prompt inequalities.  Entropies of
discrete worlds are accumulated with math.fsum so they are independent of
summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import zeta

from .entropy import PowerLawFit, fit_power_law
from .errors import DomainError, NumericalError, SolverError

# Largest M for which skill_distribution materializes the full vector.
MATERIALIZE_LIMIT = 50_000_000

ALPHA_BRACKET = (1e-6, 10.0)
ALPHA_TOL = 1e-10


@dataclass(frozen=True)
class SkillWorld:
    """Parameters of the skill graph and of the learning abstraction.

    m: number of skills; alpha: tail exponent of the skill distribution;
    b/c: conditional entropy before/after comprehension (nats); delta:
    entropy removed per flop; neurons_per_skill: parameters needed per
    skill; a_const and gamma_d parameterize the dataset-size sweep.
    """

    m: int
    alpha: float
    b: float = 10.0
    c: float = 1.0
    delta: float = 1.0
    neurons_per_skill: int = 1
    a_const: float = 1.0
    gamma_d: float = 0.3

    def __post_init__(self):
        if self.m < 2:
            raise DomainError(f"need at least 2 skills, got m={self.m}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not 0 <= self.c < self.b:
            raise DomainError(f"need 0 <= c < b, got c={self.c}, b={self.b}")
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.neurons_per_skill < 1:
            raise DomainError("neurons_per_skill must be >= 1")


def _zeta_range_sum(s: float, lo: int, hi: int) -> float:
    """sum_{k=lo}^{hi} k^-s, exact finite sum via Hurwitz-zeta differences."""
    if lo > hi:
        return 0.0
    return float(zeta(s, lo) - zeta(s, hi + 1))


def partition_constant(alpha: float, m: int) -> float:
    """Z_alpha = sum_{k=1}^{M} k^-(alpha+1)."""
    return _zeta_range_sum(alpha + 1.0, 1, m)


def tail_mass(w: SkillWorld, n: int) -> float:
    """P(skill index > n) under the power-law skill distribution."""
    if not 0 <= n <= w.m:
        raise DomainError(f"n must be in [0, {w.m}], got {n}")
    return _zeta_range_sum(w.alpha + 1.0, n + 1, w.m) / partition_constant(w.alpha, w.m)


def skill_distribution(w: SkillWorld) -> np.ndarray:
    """The full probability vector p_k = k^-(alpha+1)/Z_alpha, k = 1..M."""
    if w.m > MATERIALIZE_LIMIT:
        raise DomainError(
            f"m={w.m} too large to materialize; tail_mass and the sweeps stay closed-form"
        )
    k = np.arange(1, w.m + 1, dtype=np.float64)
    weights = k ** -(w.alpha + 1.0)
    return weights / weights.sum()


def conditional_entropy_after(w: SkillWorld, n: int) -> float:
    """H(X|Y) once the n easiest skills are comprehended: C + (B-C) * tail(n)."""
    return w.c + (w.b - w.c) * tail_mass(w, n)


def verify_skill_power_law(w: SkillWorld, ns: Sequence[int]) -> PowerLawFit:
    """Fit H(n) - C against n; the exponent should approach -alpha.

    ns must span at least two decades and stay well below M, otherwise the
    finite-M tail bends the curve away from the limit law.
    """
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size and (ns.min() < 1 or ns.max() > w.m // 100):
        raise DomainError(f"ns must lie in [1, m/100] = [1, {w.m // 100}]")
    gaps = [conditional_entropy_after(w, int(n)) - w.c for n in ns]
    return fit_power_law(ns, gaps)


def entropy_vs_parameters(w: SkillWorld, param_counts: Sequence[int]) -> list[tuple[int, float]]:
    """Conditional entropy for each parameter budget N; n = floor(N/r) skills fit."""
    out = []
    for n_params in param_counts:
        if n_params < w.neurons_per_skill:
            raise DomainError(
                f"parameter count {n_params} below neurons_per_skill={w.neurons_per_skill}"
            )
        n = min(n_params // w.neurons_per_skill, w.m)
        out.append((int(n_params), conditional_entropy_after(w, int(n))))
    return out


def flops_to_comprehend(w: SkillWorld, n: int) -> float:
    """Total flops to comprehend the n easiest skills, sequentially.

    Skill i costs (B-C)/(p_i * delta) flops; the sum is exact.
    """
    if not 1 <= n <= w.m:
        raise DomainError(f"n must be in [1, {w.m}], got {n}")
    if n > MATERIALIZE_LIMIT:
        raise DomainError(f"n={n} too large to enumerate")
    i = np.arange(1, n + 1, dtype=np.float64)
    z_alpha = partition_constant(w.alpha, w.m)
    return (w.b - w.c) / w.delta * z_alpha * float(np.sum(i ** (w.alpha + 1.0)))


def flops_sweep(w: SkillWorld, ns: Sequence[int]) -> list[tuple[float, float]]:
    """(S, H) pairs along the training trajectory, one per skill count in ns."""
    return [(flops_to_comprehend(w, int(n)), conditional_entropy_after(w, int(n))) for n in ns]


def _sum_p_squared(alpha: float, m: int) -> float:
    z1 = partition_constant(alpha, m)
    z2 = _zeta_range_sum(2.0 * alpha + 2.0, 1, m)
    return z2 / (z1 * z1)


def solve_alpha_for_dataset(w: SkillWorld, d_size: float) -> float:
    """Bisection for alpha with Z_alpha = D^gamma_d; Z is decreasing in alpha."""
    target = d_size**w.gamma_d
    lo, hi = ALPHA_BRACKET
    z_lo, z_hi = partition_constant(lo, w.m), partition_constant(hi, w.m)
    if not z_hi <= target <= z_lo:
        raise SolverError(
            f"D={d_size:g}: Z_alpha = D^gamma = {target:g} outside attainable "
            f"range [{z_hi:g}, {z_lo:g}] for alpha in [{lo:g}, {hi:g}]"
        )
    while hi - lo > ALPHA_TOL:
        mid = 0.5 * (lo + hi)
        if partition_constant(mid, w.m) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def entropy_vs_dataset(w: SkillWorld, d_sizes: Sequence[float]) -> list[tuple[float, float]]:
    """Entropy against dataset size D.

    Each D fixes alpha through Z_alpha = D^gamma_d, after which
    H = C + A * D * sum_i p_i^2 with the exact power sums.  Valid in the
    alpha << 1 regime; the expected fitted exponent is 1 - 2*gamma_d.
    """
    out = []
    for d_size in d_sizes:
        if not d_size > 0:
            raise DomainError(f"dataset sizes must be positive, got {d_size}")
        alpha_d = solve_alpha_for_dataset(w, float(d_size))
        h = w.c + w.a_const * float(d_size) * _sum_p_squared(alpha_d, w.m)
        out.append((float(d_size), h))
    return out


# ---------------------------------------------------------------------------
# Finite discrete worlds


@dataclass(frozen=True)
class DiscreteWorld:
    """Row-stochastic conditional table p(x|y) with a distribution over y."""

    px_given_y: np.ndarray
    py: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.px_given_y, dtype=np.float64)
        q = np.asarray(self.py, dtype=np.float64)
        if p.ndim != 2 or q.ndim != 1 or p.shape[0] != q.shape[0]:
            raise DomainError("px_given_y must be |Y| x |X| with py of length |Y|")
        if np.any(p < 0) or np.any(q < 0):
            raise DomainError("probabilities must be non-negative")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise DomainError("rows of px_given_y must sum to 1 within 1e-12")
        if abs(math.fsum(q) - 1.0) > 1e-12:
            raise DomainError("py must sum to 1 within 1e-12")
        object.__setattr__(self, "px_given_y", p)
        object.__setattr__(self, "py", q)

    @property
    def marginal_x(self) -> np.ndarray:
        return self.py @ self.px_given_y


def _plogp(p: float) -> float:
    return 0.0 if p == 0.0 else p * math.log(p)


def _entropy(dist) -> float:
    return -math.fsum(_plogp(float(v)) for v in dist)


def discrete_conditional_entropy(dw: DiscreteWorld) -> float:
    """H(X|Y) = -sum_y p(y) sum_x p(x|y) log p(x|y), with 0 log 0 = 0."""
    return -math.fsum(
        float(dw.py[y]) * _plogp(float(v)) for y in range(dw.py.size) for v in dw.px_given_y[y]
    )


def verify_kl_decomposition(dw: DiscreteWorld) -> tuple[float, float]:
    """Both sides of H(X) - H(X|Y) = sum_y p(y) KL(p(.|y) || p(.)).

    The marginal dominates every conditional by construction, so the KL
    terms are finite; any NaN is an internal error.
    """
    px = dw.marginal_x
    lhs = _entropy(px) - discrete_conditional_entropy(dw)
    terms = []
    for y in range(dw.py.size):
        row = dw.px_given_y[y]
        kl = math.fsum(
            float(r) * math.log(float(r) / float(m)) for r, m in zip(row, px) if r > 0.0
        )
        terms.append(float(dw.py[y]) * kl)
    rhs = math.fsum(terms)
    if math.isnan(lhs) or math.isnan(rhs):
        raise NumericalError("NaN in KL decomposition; inputs violated dominance")
    return lhs, rhs


CONTEXT_LABELS = ("irrelevant", "good", "bad")


def context_effect(
    dw: DiscreteWorld, contexted: DiscreteWorld, labels: Sequence[str]
) -> tuple[float, float]:
    """Conditional entropy before and after conditioning on a context.

    Labels declare, per skill, whether the context leaves the conditional
    untouched (irrelevant), sharpens it (good), or flattens it (bad); the
    rows are validated against the declaration.  With only irrelevant and
    good labels (at least one good), the entropy strictly decreases.
    """
    if len(labels) != dw.py.size:
        raise DomainError(f"{len(labels)} labels for {dw.py.size} skills")
    if dw.px_given_y.shape != contexted.px_given_y.shape:
        raise DomainError("contexted world must have the same support")
    if not np.allclose(dw.py, contexted.py, atol=1e-12):
        raise DomainError("context must not change the skill distribution p(y)")
    for y, label in enumerate(labels):
        if label not in CONTEXT_LABELS:
            raise DomainError(f"unknown label {label!r} for skill {y}")
        h_plain = _entropy(dw.px_given_y[y])
        h_ctx = _entropy(contexted.px_given_y[y])
        if label == "irrelevant" and not np.array_equal(dw.px_given_y[y], contexted.px_given_y[y]):
            raise DomainError(f"skill {y} labeled irrelevant but its row changed")
        if label == "good" and not h_ctx < h_plain:
            raise DomainError(f"skill {y} labeled good but context did not lower its entropy")
        if label == "bad" and not h_ctx > h_plain:
            raise DomainError(f"skill {y} labeled bad but context did not raise its entropy")
    h_before = -math.fsum(
        float(dw.py[y]) * _plogp(float(v)) for y in range(dw.py.size) for v in dw.px_given_y[y]
    )
    h_after = -math.fsum(
        float(dw.py[y]) * _plogp(float(v))
        for y in range(dw.py.size)
        for v in contexted.px_given_y[y]
    )
    return h_before, h_after


def permute_skills(dw: DiscreteWorld, perm: Sequence[int]) -> DiscreteWorld:
    """Relabel skills through an injective map; H(X|Y) is invariant."""
    idx = np.asarray(perm)
    if sorted(idx.tolist()) != list(range(dw.py.size)):
        raise DomainError("perm must be a permutation of the skill indices")
    return DiscreteWorld(px_given_y=dw.px_given_y[idx], py=dw.py[idx])
