"""Log-det (rate-distortion) entropy of embedding matrices.

For an n x d matrix Z whose rows are token representations, the entropy
surrogate at distortion scale eps is

    L(Z) = (d+n)/2 * log det(I_d + (d/eps^2) * Sigma),   Sigma = (1/n) Z^T Z,

evaluated through the eigenvalues of Sigma so that rank-deficient inputs
are exact (negative round-off eigenvalues are clamped to zero).  Dividing
by the maximum over unit-row matrices gives a dimension-free number in
[0, 1] that can be compared across models of different hidden sizes.
All logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError

ROW_NORM_TOL = 1e-9


@dataclass(frozen=True)
class EntropyParams:
    """Distortion parameter; 0.1 throughout the simulations."""

    epsilon: float = 0.1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """n x d real matrix of row representations.

    ``row_normalized`` records that every row was scaled to unit l2 norm;
    normalized-entropy computations require it.
    """

    values: np.ndarray
    row_normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError(f"embedding matrix must be 2-D and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("embedding matrix contains non-finite entries")
        if self.row_normalized:
            norms = np.linalg.norm(arr, axis=1)
            if np.any(np.abs(norms - 1.0) > ROW_NORM_TOL):
                raise DomainError("row_normalized is set but some row norm differs from 1")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_rows(cls, values, normalize: bool = False) -> "EmbeddingMatrix":
        arr = np.asarray(values, dtype=np.float64)
        if not normalize:
            return cls(arr)
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise DomainError("cannot row-normalize a matrix with zero rows")
        return cls(arr / norms, row_normalized=True)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _covariance_eigenvalues(z: EmbeddingMatrix) -> np.ndarray:
    sigma = z.values.T @ z.values / z.n
    lam = np.linalg.eigvalsh(sigma)
    return np.clip(lam, 0.0, None)


def logdet_entropy(z: EmbeddingMatrix, p: EntropyParams = EntropyParams()) -> float:
    """Rate-distortion entropy estimate in nats; always >= 0."""
    lam = _covariance_eigenvalues(z)
    scale = z.d / p.epsilon**2
    return 0.5 * (z.d + z.n) * float(np.sum(np.log1p(scale * lam)))


def max_entropy(n: int, d: int, p: EntropyParams = EntropyParams()) -> float:
    """Largest value attainable by a unit-row n x d matrix."""
    if n < 1 or d < 1:
        raise DomainError(f"n and d must be >= 1, got n={n}, d={d}")
    return 0.5 * (d + n) * d * np.log1p(1.0 / p.epsilon**2)


def normalized_entropy(z: EmbeddingMatrix, p: EntropyParams = EntropyParams()) -> float:
    """Entropy divided by its unit-row maximum; lies in [0, 1]."""
    if not z.row_normalized:
        raise DomainError("normalized entropy requires unit-norm rows (row_normalized flag)")
    return logdet_entropy(z, p) / max_entropy(z.n, z.d, p)


def closed_form_subspace(r: int, d: int, p: EntropyParams = EntropyParams()) -> float:
    """Normalized entropy of a matrix with r equal-sized singular values.

    With unit rows concentrated uniformly on an r-dimensional subspace the
    covariance spectrum is 1/r repeated r times and the normalized entropy
    collapses to

        (r/d) * log(1 + (1/eps^2)/(r/d)) / log(1 + 1/eps^2).
    """
    if not 1 <= r <= d:
        raise DomainError(f"need 1 <= r <= d, got r={r}, d={d}")
    ratio = r / d
    inv_eps2 = 1.0 / p.epsilon**2
    return ratio * np.log1p(inv_eps2 / ratio) / np.log1p(inv_eps2)


def equal_subspace_matrix(r: int, d: int, n: int) -> EmbeddingMatrix:
    """Unit-row matrix with exactly r equal nonzero singular values sqrt(n/r).

    Built as r orthonormal directions, each repeated n/r times; n must be a
    multiple of r.  This is the construction the closed form assumes.
    """
    if not 1 <= r <= d:
        raise DomainError(f"need 1 <= r <= d, got r={r}, d={d}")
    if n % r != 0:
        raise DomainError(f"n={n} must be a multiple of r={r}")
    rows = np.zeros((n, d))
    for i in range(n):
        rows[i, i % r] = 1.0
    return EmbeddingMatrix(rows, row_normalized=True)


class PowerLawFit(NamedTuple):
    exponent: float
    coefficient: float
    r_squared: float


def fit_power_law(xs: Sequence[float], ys: Sequence[float]) -> PowerLawFit:
    """Least-squares fit of log y = log c + gamma * log x.

    Returns the exponent, the coefficient, and the coefficient of
    determination in log space.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("xs and ys must be 1-D sequences of equal length")
    if x.size < 3:
        raise DomainError(f"need at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("power-law fitting requires strictly positive values")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0.0:
        raise DomainError("xs are all equal; the fit is rank-deficient")
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    residuals = ly - design @ coef
    ss_res = float(residuals @ residuals)
    centered = ly - ly.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return PowerLawFit(exponent=float(coef[0]), coefficient=float(np.exp(coef[1])), r_squared=r2)
