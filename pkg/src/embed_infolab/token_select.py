"""Token selection: Lasso on representations vs attention weights.

The last token's representation is regressed on its context tokens,

    min_beta ||z_last - Z beta||^2 + lam * ||beta||_1,

by cyclic coordinate descent in Gram space (the token count T is small,
the hidden dimension large, so Z^T Z and Z^T z_last are precomputed once).
No 1/(2n) factor anywhere.  Converged solutions are certified against the
KKT conditions; the objective is checked to be non-increasing after every
sweep.

Attention weights come in as per-head lower-triangular row-stochastic
matrices; heads are averaged, and both channels are thresholded the same
way (strictly bigger than the cutoff).  attention_unroll_residual expands
the last row of attention one level through the context rows, which is
the sparse z-on-z approximation that motivates the Lasso in the first
place; the dropped second-order term comes back as an explicit correction
vector so the expansion is exactly verifiable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, NumericalError, ShapeError
from .tensor_io import TokenSidecar

DEFAULT_LAMBDA = 1e-4
DEFAULT_THRESHOLD = 0.01
MAX_SWEEPS = 100_000
COORD_TOL = 1e-10
KKT_TOL = 1e-6
ATTENTION_ROW_TOL = 1e-6
UNROLL_IDENTITY_TOL = 1e-5


@dataclass(frozen=True)
class AttentionTensor:
    """H x (T+1) x (T+1) lower-triangular row-stochastic head weights."""

    weights: np.ndarray
    layer_index: int = -1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 3 or w.shape[1] != w.shape[2]:
            raise ShapeError(f"attention tensor must be H x n x n, got {w.shape}")
        if np.any(w < 0):
            raise DomainError("attention weights must be non-negative")
        upper = np.triu(w, k=1)
        if np.max(np.abs(upper)) > 1e-12:
            raise DomainError("strictly upper-triangular attention entries must be zero")
        row_sums = w.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > ATTENTION_ROW_TOL:
            raise DomainError(f"attention rows must sum to 1 within {ATTENTION_ROW_TOL}")
        object.__setattr__(self, "weights", np.tril(w))

    @property
    def heads(self) -> int:
        return self.weights.shape[0]

    @property
    def length(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    scores: tuple[float, ...]
    threshold: float


def soft_threshold(x: float, cut: float) -> float:
    if x > cut:
        return x - cut
    if x < -cut:
        return x + cut
    return 0.0


def _lasso_objective(gram, rhs, target_sq, beta, lam) -> float:
    return float(target_sq - 2.0 * beta @ rhs + beta @ gram @ beta + lam * np.abs(beta).sum())


def kkt_residual(reps, target, beta, lam: float) -> float:
    """Largest violation of the Lasso stationarity conditions at beta."""
    reps = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    target = np.asarray(target, dtype=np.float64).ravel()
    beta = np.asarray(beta, dtype=np.float64).ravel()
    grad = 2.0 * (reps @ (reps.T @ beta - target))
    active = beta != 0.0
    res = 0.0
    if np.any(active):
        res = float(np.max(np.abs(grad[active] + lam * np.sign(beta[active]))))
    if np.any(~active):
        res = max(res, float(np.max(np.maximum(np.abs(grad[~active]) - lam, 0.0))))
    return res


def lasso_fit(reps, target, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Cyclic coordinate descent for the l1-penalized regression of target on reps' rows.

    Stops when the largest coordinate change in a sweep falls below 1e-10;
    raises ConvergenceError with the final KKT residual if the sweep budget
    runs out.
    """
    if lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    reps = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    target = np.asarray(target, dtype=np.float64).ravel()
    if reps.shape[1] != target.size:
        raise ShapeError(f"rows have dim {reps.shape[1]}, target has {target.size}")
    t = reps.shape[0]
    gram = reps @ reps.T
    rhs = reps @ target
    target_sq = float(target @ target)
    diag = np.diag(gram).copy()
    beta = np.zeros(t)
    prev_obj = _lasso_objective(gram, rhs, target_sq, beta, lam)
    for _ in range(MAX_SWEEPS):
        # resync at sweep boundaries so incremental float drift cannot
        # keep the coordinate changes from settling
        resid_corr = rhs - gram @ beta
        max_delta = 0.0
        for j in range(t):
            if diag[j] == 0.0:
                continue
            rho = resid_corr[j] + diag[j] * beta[j]
            new = soft_threshold(rho, 0.5 * lam) / diag[j]
            delta = new - beta[j]
            if delta != 0.0:
                resid_corr -= gram[:, j] * delta
                beta[j] = new
                max_delta = max(max_delta, abs(delta))
        obj = _lasso_objective(gram, rhs, target_sq, beta, lam)
        if obj > prev_obj + 1e-10 * (1.0 + abs(prev_obj)):
            raise NumericalError(f"Lasso objective increased: {prev_obj} -> {obj}")
        prev_obj = obj
        if max_delta < COORD_TOL:
            return beta
    raise ConvergenceError(
        f"coordinate descent did not converge in {MAX_SWEEPS} sweeps; "
        f"final KKT residual {kkt_residual(reps, target, beta, lam):.3e}"
    )


def select_by_threshold(weights, threshold: float = DEFAULT_THRESHOLD) -> SelectionResult:
    """Positions whose |weight| is strictly bigger than the cutoff, ascending."""
    if threshold < 0:
        raise DomainError(f"threshold must be >= 0, got {threshold}")
    w = np.asarray(weights, dtype=np.float64).ravel()
    idx = np.flatnonzero(np.abs(w) > threshold)
    return SelectionResult(
        indices=tuple(int(i) for i in idx),
        scores=tuple(float(w[i]) for i in idx),
        threshold=float(threshold),
    )


def average_attention(att: AttentionTensor) -> np.ndarray:
    """Arithmetic mean over heads; stays lower-triangular row-stochastic."""
    return att.weights.mean(axis=0)


@dataclass(frozen=True)
class UnrollResult:
    approx: np.ndarray
    residual_norm: float
    correction: np.ndarray  # signed: approx + correction == z_last exactly

    def check_exact(self, z_last, tol: float = 1e-10) -> float:
        return float(np.max(np.abs(self.approx + self.correction - np.asarray(z_last))))


def attention_unroll_residual(att_avg, values, reps) -> UnrollResult:
    """One-level unrolling of the last attention row through context representations.

    Requires the attention identity z_i = sum_{j<=i} w_ij v_j to hold for
    the supplied inputs (to 1e-5); the approximation keeps the
    (w_last,j / w_jj) z_j terms and the returned correction is exactly the
    dropped second-order mass, so approx + correction reproduces z_last.
    """
    w = np.asarray(att_avg, dtype=np.float64)
    v = np.atleast_2d(np.asarray(values, dtype=np.float64))
    z = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    n = w.shape[0]
    if w.ndim != 2 or w.shape[1] != n:
        raise ShapeError(f"averaged attention must be square, got {w.shape}")
    if v.shape[0] != n or z.shape[0] != n or v.shape[1] != z.shape[1]:
        raise ShapeError("values and representations must both have one row per token")
    w = np.tril(w)
    recon = w @ v
    gap = float(np.max(np.abs(recon - z)))
    if gap > UNROLL_IDENTITY_TOL:
        raise DomainError(
            f"attention identity violated: max |z - W v| = {gap:.3e} > {UNROLL_IDENTITY_TOL}"
        )
    last = n - 1
    used = [j for j in range(last) if w[last, j] != 0.0]
    for j in used + [last]:
        if w[j, j] == 0.0:
            raise DomainError(f"degenerate zero self-attention at token {j}")
    approx = w[last, last] * v[last]
    correction = np.zeros_like(approx)
    for j in used:
        approx = approx + (w[last, j] / w[j, j]) * z[j]
        correction = correction - w[last, j] * ((w[j, :j] / w[j, j]) @ v[:j])
    residual = float(np.linalg.norm(z[last] - approx))
    return UnrollResult(approx=approx, residual_norm=residual, correction=correction)


@dataclass(frozen=True)
class SelectionReport:
    """Lasso picks vs attention picks, resolved to token strings."""

    lasso: tuple[tuple[int, str, float], ...]
    attention: tuple[tuple[int, str, float], ...]
    overlap: tuple[int, ...]
    jaccard: float
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "lasso": [{"index": i, "token": t, "score": s} for i, t, s in self.lasso],
            "attention": [{"index": i, "token": t, "score": s} for i, t, s in self.attention],
            "overlap": list(self.overlap),
            "jaccard": self.jaccard,
        }
        payload.update(self.extras)
        return json.dumps(payload, indent=1, sort_keys=True)

    def __str__(self) -> str:
        def fmt(picks):
            return ", ".join(f"[{tok}]" for _, tok, _ in picks) if picks else "(none)"

        return (
            f"Lasso picks: {fmt(self.lasso)}\n"
            f"Attention picks: {fmt(self.attention)}\n"
            f"Overlap: {len(self.overlap)} tokens, Jaccard {self.jaccard:.3f}"
        )


def compare_selections(
    lasso_sel: SelectionResult, attn_sel: SelectionResult, tokens: TokenSidecar
) -> SelectionReport:
    def resolve(sel: SelectionResult):
        out = []
        for i, s in zip(sel.indices, sel.scores):
            if not 0 <= i < len(tokens.tokens):
                raise DomainError(f"selected index {i} outside sidecar of {len(tokens.tokens)} tokens")
            out.append((i, tokens.tokens[i], s))
        return tuple(out)

    a, b = set(lasso_sel.indices), set(attn_sel.indices)
    union = a | b
    jaccard = len(a & b) / len(union) if union else 1.0
    return SelectionReport(
        lasso=resolve(lasso_sel),
        attention=resolve(attn_sel),
        overlap=tuple(sorted(a & b)),
        jaccard=jaccard,
    )
