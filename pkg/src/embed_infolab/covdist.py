"""Sentence-level geometry: vector baselines and covariance distances.

A sentence is summarized either by its last-token vector, the mean of its
token vectors, or the (uncentered) second moment (1/n) Z^T Z.  Covariance
summaries are compared with five distances:

    logdet     sqrt(log det((A+B)/2) - (log det A + log det B)/2)
    js         sqrt(log det(I + g(A+B)/2) - (log det(I+gA) + log det(I+gB))/2)
    riemann    ||log(B^-1/2 A B^-1/2)||_F   (affine invariant)
    loge       ||log A - log B||_F
    frobenius  ||A - B||_F

For small g the js distance squared approaches (g^2/8) ||A-B||_F^2;
verify_js_taylor exposes the ratio so the remainder's O(g) decay is
testable.  logdet, riemann and loge need strictly positive definite
inputs and get a relative diagonal jitter first; js and frobenius take
raw PSD.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .entropy import EmbeddingMatrix
from .errors import ConfigurationError, DomainError, NumericalError, ShapeError

DEFAULT_GAMMA = 100.0
SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10
RADICAND_TOL = 1e-12
PD_JITTER_SCALE = 1e-8

VECTOR_MODES = ("last_token", "mean")
MODES = VECTOR_MODES + ("covariance",)
VECTOR_METRICS = ("l2",)
COVARIANCE_METRICS = ("logdet", "js", "riemann", "loge", "frobenius")


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive semi-definite matrix with an optional PD jitter."""

    values: np.ndarray
    regularization: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"expected a square matrix, got shape {a.shape}")
        if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
            raise DomainError("matrix is not symmetric within 1e-10")
        a = 0.5 * (a + a.T)
        if float(np.linalg.eigvalsh(a)[0]) < -PSD_TOL:
            raise DomainError("matrix has an eigenvalue below -1e-10; not PSD")
        object.__setattr__(self, "values", a)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def strict_pd(self) -> np.ndarray:
        """Values, jittered on the diagonal only when not already strictly PD."""
        if self.regularization == 0.0 and float(np.linalg.eigvalsh(self.values)[0]) > 0.0:
            return self.values
        delta = self.regularization
        if delta == 0.0:
            delta = PD_JITTER_SCALE * float(np.trace(self.values)) / self.dim
        a = self.values + delta * np.eye(self.dim)
        if float(np.linalg.eigvalsh(a)[0]) <= 0.0:
            raise DomainError("matrix is not positive definite even after regularization")
        return a


@dataclass(frozen=True)
class SentenceEmbedding:
    mode: str
    payload: object  # d-vector for vector modes, SpdMatrix for covariance

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "covariance":
            if not isinstance(self.payload, SpdMatrix):
                raise ShapeError("covariance mode requires an SpdMatrix payload")
        else:
            v = np.asarray(self.payload, dtype=np.float64)
            if v.ndim != 1:
                raise ShapeError(f"{self.mode} mode requires a vector payload, got {v.ndim}-D")
            object.__setattr__(self, "payload", v)


def summarize(z: EmbeddingMatrix, mode: str, center: bool = False) -> SentenceEmbedding:
    """Collapse a token matrix to one sentence summary.

    covariance is the uncentered second moment (1/n) Z^T Z unless
    ``center`` subtracts the mean row first.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {MODES}")
    v = z.values
    if mode == "last_token":
        return SentenceEmbedding(mode, v[-1].copy())
    if mode == "mean":
        return SentenceEmbedding(mode, v.mean(axis=0))
    rows = v - v.mean(axis=0) if center else v
    return SentenceEmbedding(mode, SpdMatrix(rows.T @ rows / z.n))


def _logdet_pd(a: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(a)
    if sign <= 0:
        raise DomainError("log det of a non-positive-definite matrix")
    return float(val)


def _sqrt_radicand(r: float) -> float:
    if r < -RADICAND_TOL:
        raise NumericalError(f"distance radicand {r:.3e} below -1e-12")
    return float(np.sqrt(max(r, 0.0)))


def dist_logdet(a: SpdMatrix, b: SpdMatrix) -> float:
    """sqrt(log det((A+B)/2) - (log det A + log det B)/2); needs strict PD."""
    av, bv = a.strict_pd(), b.strict_pd()
    r = _logdet_pd(0.5 * (av + bv)) - 0.5 * (_logdet_pd(av) + _logdet_pd(bv))
    return _sqrt_radicand(r)


def dist_js(a: SpdMatrix, b: SpdMatrix, gamma: float = DEFAULT_GAMMA) -> float:
    """Jensen-Shannon-style log-det distance; PSD inputs suffice."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")

    def logdet_shift(m):
        lam = np.linalg.eigvalsh(m)
        return float(np.sum(np.log1p(gamma * np.clip(lam, 0.0, None))))

    r = logdet_shift(0.5 * (a.values + b.values)) - 0.5 * (
        logdet_shift(a.values) + logdet_shift(b.values)
    )
    return _sqrt_radicand(r)


def dist_riemann(a: SpdMatrix, b: SpdMatrix) -> float:
    """Affine-invariant distance sqrt(sum log^2 mu_i), mu the generalized eigenvalues."""
    av, bv = a.strict_pd(), b.strict_pd()
    mu = eigh(av, bv, eigvals_only=True)
    if np.any(mu <= 0):
        raise DomainError("generalized eigenvalues must be positive for PD pairs")
    return float(np.sqrt(np.sum(np.log(mu) ** 2)))


def _logm_spd(a: np.ndarray) -> np.ndarray:
    lam, q = np.linalg.eigh(a)
    if np.any(lam <= 0):
        raise DomainError("matrix logarithm needs strictly positive eigenvalues")
    return (q * np.log(lam)) @ q.T


def dist_loge(a: SpdMatrix, b: SpdMatrix) -> float:
    """Log-Euclidean distance ||log A - log B||_F."""
    return float(np.linalg.norm(_logm_spd(a.strict_pd()) - _logm_spd(b.strict_pd()), ord="fro"))


def dist_frobenius(a: SpdMatrix, b: SpdMatrix) -> float:
    if a.values.shape != b.values.shape:
        raise ShapeError(f"shape mismatch {a.values.shape} vs {b.values.shape}")
    return float(np.linalg.norm(a.values - b.values, ord="fro"))


def verify_js_taylor(a: SpdMatrix, b: SpdMatrix, gammas) -> list[tuple[float, float]]:
    """Ratios d_js^2 / ((g^2/8) ||A-B||_F^2) per gamma, for the Taylor check.

    Each gamma must sit below 1/max(||A||_2, ||B||_2); the ratios approach
    1 linearly in gamma as the cubic remainder dies.
    """
    fro2 = float(np.linalg.norm(a.values - b.values, ord="fro")) ** 2
    if fro2 == 0.0:
        raise DomainError("A and B coincide; the ratio is 0/0")
    top = max(float(np.linalg.norm(a.values, 2)), float(np.linalg.norm(b.values, 2)))
    out = []
    for g in gammas:
        if not 0 < g < 1.0 / top:
            raise DomainError(f"gamma={g:g} outside the admissible range (0, {1.0 / top:g})")
        ratio = dist_js(a, b, g) ** 2 / (g * g / 8.0 * fro2)
        out.append((float(g), float(ratio)))
    return out


def pca_project(points, k: int) -> np.ndarray:
    """Center the points and project onto the top-k principal axes.

    Axis signs follow a fixed convention (the largest-magnitude loading of
    each axis is made positive) so outputs are reproducible.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 2:
        raise DomainError("PCA needs at least 2 points")
    if not 1 <= k <= pts.shape[1]:
        raise DomainError(f"need 1 <= k <= d={pts.shape[1]}, got k={k}")
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axes = vt[:k]
    for i in range(k):
        j = int(np.argmax(np.abs(axes[i])))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    return centered @ axes.T


def _pairwise(metric: str, gamma: float):
    if metric == "l2":
        return lambda x, y: float(np.linalg.norm(x - y))
    if metric == "logdet":
        return dist_logdet
    if metric == "js":
        return lambda x, y: dist_js(x, y, gamma)
    if metric == "riemann":
        return dist_riemann
    if metric == "loge":
        return dist_loge
    if metric == "frobenius":
        return dist_frobenius
    raise ConfigurationError(f"unknown metric {metric!r}")


def distance_matrix(
    sentences, metric: str, gamma: float = DEFAULT_GAMMA, max_workers: int = 1
) -> np.ndarray:
    """Symmetric zero-diagonal matrix of pairwise sentence distances.

    Vector modes pair with l2; covariance mode with the SPD metrics.
    Upper-triangle entries may be evaluated in parallel; assembly order is
    fixed by index, so the result does not depend on scheduling.
    """
    sentences = list(sentences)
    if not sentences:
        raise DomainError("need at least one sentence")
    mode = sentences[0].mode
    if any(s.mode != mode for s in sentences):
        raise ConfigurationError("all sentences must share one summary mode")
    allowed = VECTOR_METRICS if mode in VECTOR_MODES else COVARIANCE_METRICS
    if metric not in allowed:
        raise ConfigurationError(f"metric {metric!r} incompatible with mode {mode!r}")
    fn = _pairwise(metric, gamma)
    m = len(sentences)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    out = np.zeros((m, m))

    def compute(pair):
        i, j = pair
        return fn(sentences[i].payload, sentences[j].payload)

    if max_workers > 1 and pairs:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(compute, pairs))
    else:
        values = [compute(p) for p in pairs]
    for (i, j), v in zip(pairs, values):
        out[i, j] = out[j, i] = v
    return out
