"""Gaussian-process information gain over a representation sequence.

The token representations z_1..z_T (unit l2 norm, linear kernel
k(z, z') = z^T z') define the Gram matrix K_T; observations are
y_t = f(z_t) + noise with variance sigma^2.  The information the first T
observations carry about f is

    I(y_T; f) = 1/2 log det(I_T + sigma^-2 K_T),

and appending one token raises it by 1/2 log(1 + sigma^-2 var_T(z_{T+1}))
where var_T is the GP posterior variance.  Under the linear kernel that
variance is exactly the ridge-regression residual inner product
<z, z - z_hat>, which verify_ridge_variance_identity exposes.

KernelState keeps a Cholesky factor of K_T + sigma^2 I and grows it by a
bordered update per appended token, so a length-T sequence costs O(T^3)
total.  States are single-writer: appends mutate, queries do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, NumericalError, ShapeError

DEFAULT_SIGMA = 0.01
UNIT_QUERY_TOL = 1e-6


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    variance: float
    info_gain: float


@dataclass(frozen=True)
class GainIncrement:
    """Determinant-consistent increment plus the printed-form variant.

    ``value`` is 1/2 log(1 + sigma^-2 var); it telescopes exactly to the
    total information gain.  ``paper_form`` is
    1/2 log((1 + sigma^-2 - sigma^2) + sigma^2 var), reported side by side
    for comparison; the two agree only at sigma = 1.
    """

    value: float
    paper_form: float


class KernelState:
    """Incrementally factored GP state over unit-norm representations."""

    def __init__(self, sigma2: float = DEFAULT_SIGMA**2):
        if not sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {sigma2}")
        self.sigma2 = float(sigma2)
        self._rows: list[np.ndarray] = []
        self._chol = np.zeros((0, 0))
        self._gram = np.zeros((0, 0))

    @classmethod
    def from_rows(cls, rows, sigma2: float = DEFAULT_SIGMA**2) -> "KernelState":
        state = cls(sigma2)
        for row in np.atleast_2d(np.asarray(rows, dtype=np.float64)):
            state.append(row)
        return state

    @property
    def t(self) -> int:
        return len(self._rows)

    @property
    def reps(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, 0))
        return np.array(self._rows)

    @property
    def gram(self) -> np.ndarray:
        return self._gram.copy()

    @property
    def chol(self) -> np.ndarray:
        return self._chol.copy()

    def append(self, z) -> None:
        """Add one representation; the row is l2-normalized on ingestion."""
        z = np.asarray(z, dtype=np.float64).ravel()
        if self._rows and z.size != self._rows[0].size:
            raise ShapeError(f"representation has dim {z.size}, state has {self._rows[0].size}")
        norm = np.linalg.norm(z)
        if norm == 0.0:
            raise DomainError("cannot append a zero representation")
        z = z / norm
        t = self.t
        k = np.array([row @ z for row in self._rows])
        # bordered Cholesky of K + sigma^2 I: new diagonal is
        # sigma^2 + posterior variance, strictly positive
        if t:
            w = solve_triangular(self._chol, k, lower=True)
            diag2 = 1.0 + self.sigma2 - w @ w
        else:
            w = np.zeros(0)
            diag2 = 1.0 + self.sigma2
        if diag2 <= 0.0:
            raise NumericalError("Cholesky border lost positive definiteness")
        chol = np.zeros((t + 1, t + 1))
        chol[:t, :t] = self._chol
        chol[t, :t] = w
        chol[t, t] = np.sqrt(diag2)
        gram = np.ones((t + 1, t + 1))
        gram[:t, :t] = self._gram
        gram[t, :t] = k
        gram[:t, t] = k
        self._chol = chol
        self._gram = gram
        self._rows.append(z)

    def _query_vector(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64).ravel()
        if self._rows and z.size != self._rows[0].size:
            raise ShapeError(f"query has dim {z.size}, state has {self._rows[0].size}")
        if abs(np.linalg.norm(z) - 1.0) > UNIT_QUERY_TOL:
            raise DomainError("query representation must be unit norm")
        return z


def posterior_variance(ks: KernelState, z) -> float:
    """GP posterior variance at z after the state's T observations."""
    z = ks._query_vector(z)
    if ks.t == 0:
        return float(z @ z)
    k = ks.reps @ z
    w = solve_triangular(ks._chol, k, lower=True)
    return max(float(z @ z - w @ w), 0.0)


def posterior(ks: KernelState, y, z) -> PosteriorSummary:
    """Posterior mean and variance at z given observations y, plus the running gain."""
    z = ks._query_vector(z)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != ks.t:
        raise ShapeError(f"got {y.size} observations for {ks.t} representations")
    if ks.t == 0:
        return PosteriorSummary(mean=0.0, variance=float(z @ z), info_gain=0.0)
    k = ks.reps @ z
    w = solve_triangular(ks._chol, k, lower=True)
    u = solve_triangular(ks._chol, y, lower=True)
    mean = float(w @ u)
    variance = max(float(z @ z - w @ w), 0.0)
    return PosteriorSummary(mean=mean, variance=variance, info_gain=information_gain(ks))


def information_gain(ks: KernelState) -> float:
    """1/2 log det(I + sigma^-2 K_T) through the clamped spectrum of K_T."""
    if ks.t == 0:
        return 0.0
    lam = np.clip(np.linalg.eigvalsh(ks._gram), 0.0, None)
    return 0.5 * float(np.sum(np.log1p(lam / ks.sigma2)))


def info_gain_increment(ks: KernelState, z_next) -> GainIncrement:
    """Gain added by observing z_next on top of the current state."""
    var = posterior_variance(ks, z_next)
    inv_s2 = 1.0 / ks.sigma2
    # the printed form's argument can go non-positive for large sigma;
    # report NaN there instead of tripping a log-domain warning
    printed_arg = (1.0 + inv_s2 - ks.sigma2) + ks.sigma2 * var
    return GainIncrement(
        value=0.5 * float(np.log1p(inv_s2 * var)),
        paper_form=0.5 * float(np.log(printed_arg)) if printed_arg > 0.0 else float("nan"),
    )


def ridge_fit(reps, target, sigma2: float) -> np.ndarray:
    """Ridge coefficients of target on the rows of reps.

    Minimizes ||target - reps^T beta||^2 + sigma2 ||beta||^2 through a
    Cholesky solve of the T x T Gram system; sigma2 > 0 keeps it positive
    definite at any rank.
    """
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    reps = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    target = np.asarray(target, dtype=np.float64).ravel()
    if reps.shape[1] != target.size:
        raise ShapeError(f"rows have dim {reps.shape[1]}, target has {target.size}")
    t = reps.shape[0]
    gram = reps @ reps.T + sigma2 * np.eye(t)
    chol = np.linalg.cholesky(gram)
    rhs = reps @ target
    w = solve_triangular(chol, rhs, lower=True)
    return solve_triangular(chol.T, w, lower=False)


def verify_ridge_variance_identity(reps, target, sigma2: float) -> tuple[float, float]:
    """Posterior variance vs the ridge residual inner product <z, z - z_hat>."""
    reps = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    target = np.asarray(target, dtype=np.float64).ravel()
    if reps.shape[0] == 0 or reps.size == 0:
        return float(target @ target), float(target @ target)
    ks = KernelState.from_rows(reps, sigma2)
    lhs = posterior_variance(ks, target)
    beta = ridge_fit(reps, target, sigma2)
    rhs = float(target @ (target - reps.T @ beta))
    return lhs, rhs


def stable_rank(a) -> float:
    """||A||_F^2 / ||A||_2^2; between 1 and rank(A)."""
    a = np.asarray(a, dtype=np.float64)
    fro2 = float(np.sum(a * a))
    if fro2 == 0.0:
        raise DomainError("stable rank of the zero matrix is undefined")
    top = float(np.linalg.norm(a, ord=2))
    return fro2 / top**2


def normalized_info_gain(ks: KernelState, d: int) -> float:
    """Information gain over its dimension-aware bound d log(1 + sigma^-2 T)."""
    if ks.t == 0:
        raise DomainError("normalized gain is undefined for an empty sequence")
    if d < 1:
        raise DomainError(f"hidden dimension must be >= 1, got {d}")
    return information_gain(ks) / (d * float(np.log1p(ks.t / ks.sigma2)))
