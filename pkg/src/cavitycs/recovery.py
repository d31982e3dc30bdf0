"""Sparse recovery of the amplitude increments from compressed readouts.

The increments ``beta`` are assumed sparse in the orthonormal DCT-II basis
``Phi``; the readouts satisfy ``y = A @ beta = (A @ Phi.T) @ (Phi @ beta)``.
Real and imaginary parts are recovered independently by orthogonal matching
pursuit (OMP) against the effective matrix ``A @ Phi.T``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._io import atomic_write_text, fmt, write_csv
from .signal_model import ComplexSeries, TimeGrid, accumulate_alpha
from .validation import check_complex_vector, check_consistent, check_design

__all__ = [
    "ConfigurationError",
    "DctBasis",
    "dct_matrix",
    "RecoveryConfig",
    "OMPSolution",
    "omp",
    "OrthogonalMatchingPursuit",
    "DCTTransformer",
    "RecoveryResult",
    "recover_beta",
    "CompressedSensingRecovery",
    "mse",
    "sparsity_estimate",
    "min_measurements",
]

# a residual this small relative to ||y|| is treated as exactly zero
_RESIDUAL_FLOOR = 1e-13


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DctBasis:
    """Orthonormal DCT-II matrix; ``forward`` maps a signal to coefficients."""

    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def forward(self, v):
        return self.matrix @ v

    def inverse(self, x):
        return self.matrix.T @ x


@functools.lru_cache(maxsize=8)
def dct_matrix(N: int) -> DctBasis:
    """``Phi[i, j] = sqrt((2 - [i == 0]) / N) * cos(pi * i * (2j + 1) / (2N))``
    (0-based ``i, j``)."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    Phi = np.sqrt(2.0 / N) * np.cos(np.pi * i * (2 * j + 1) / (2 * N))
    Phi[0, :] = np.sqrt(1.0 / N)
    Phi.flags.writeable = False
    return DctBasis(Phi)


@dataclass(frozen=True)
class RecoveryConfig:
    """Stopping rule and selection options for OMP.

    Iteration stops once the residual norm drops to ``tol`` or the support
    holds ``max_support`` columns (``None``: as many as there are rows).
    """

    max_support: int | None = None
    tol: float = 0.0
    normalize: bool = True

    def __post_init__(self):
        if self.max_support is not None and (int(self.max_support) != self.max_support
                                             or self.max_support < 1):
            raise ConfigurationError(
                f"max_support must be a positive integer, got {self.max_support}")
        if not self.tol >= 0:
            raise ConfigurationError(f"tol must be non-negative, got {self.tol}")


@dataclass(frozen=True, eq=False)
class OMPSolution:
    coef: np.ndarray
    support: tuple[int, ...]
    residual_norm: float
    residual_history: tuple[float, ...]
    rank_deficient: bool

    @property
    def n_iter(self) -> int:
        return len(self.support)


def omp(A, y, config: RecoveryConfig | None = None) -> OMPSolution:
    """Orthogonal matching pursuit for a real system ``A @ x ~= y``.

    Each iteration adds the column best correlated with the residual (columns
    scaled to unit norm for the comparison when ``config.normalize``; ties go
    to the lowest index), then refits all selected coefficients by least
    squares on the raw columns.
    """
    cfg = config or RecoveryConfig()
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    M, N = A.shape
    if y.shape != (M,):
        raise ValueError(f"y must have shape ({M},), got {y.shape}")

    norms = np.linalg.norm(A, axis=0)
    if cfg.normalize:
        if np.any(norms == 0):
            raise ConfigurationError(
                f"column {int(np.argmin(norms))} is zero; cannot normalize for selection")
        scale = 1.0 / norms
    else:
        scale = np.ones(N)

    limit = min(cfg.max_support or M, M, N)
    stop = max(cfg.tol, _RESIDUAL_FLOOR * np.linalg.norm(y))
    available = np.ones(N, dtype=bool)
    support: list[int] = []
    coef_s = np.zeros(0)
    residual = y.copy()
    rnorm = float(np.linalg.norm(residual))
    history = [rnorm]
    rank_deficient = False

    while len(support) < limit and rnorm > stop:
        score = np.abs(A.T @ residual) * scale
        score[~available] = -1.0
        k = int(np.argmax(score))
        support.append(k)
        available[k] = False
        sub = A[:, support]
        coef_s, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        rank_deficient |= rank < len(support)
        residual = y - sub @ coef_s
        rnorm = float(np.linalg.norm(residual))
        history.append(rnorm)

    coef = np.zeros(N)
    coef[support] = coef_s
    return OMPSolution(coef, tuple(support), rnorm, tuple(history), bool(rank_deficient))


class OrthogonalMatchingPursuit(RegressorMixin, BaseEstimator):
    """OMP as a scikit-learn regressor (no intercept).

    Parameters
    ----------
    max_support : int, default=None
        Maximum number of selected columns; ``None`` allows one per sample.
    tol : float, default=0.0
        Stop once the residual l2 norm is at most ``tol``.
    normalize : bool, default=True
        Compare correlations of unit-norm columns when selecting.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    support_ : ndarray of int, in selection order
    residual_norm_ : float
    n_iter_ : int
    rank_deficient_ : bool
        True when some least-squares refit had a rank-deficient support; the
        minimum-norm solution was used.
    """

    def __init__(self, max_support=None, tol=0.0, normalize=True):
        self.max_support = max_support
        self.tol = tol
        self.normalize = normalize

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        cfg = RecoveryConfig(self.max_support, self.tol, self.normalize)
        sol = omp(X, y, cfg)
        self.coef_ = sol.coef
        self.support_ = np.array(sol.support, dtype=int)
        self.residual_norm_ = sol.residual_norm
        self.n_iter_ = sol.n_iter
        self.rank_deficient_ = sol.rank_deficient
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_


class DCTTransformer(TransformerMixin, BaseEstimator):
    """Row-wise orthonormal DCT-II: each sample (row) is mapped to ``Phi @ row``."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        self.basis_ = dct_matrix(X.shape[1])
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return X @ self.basis_.matrix.T

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return X @ self.basis_.matrix


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    coef_real: np.ndarray
    coef_imag: np.ndarray
    beta: ComplexSeries
    alpha: ComplexSeries
    support_real: tuple[int, ...]
    support_imag: tuple[int, ...]
    residual_real: float
    residual_imag: float
    rank_deficient: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self, path):
        b, a = self.beta.values, self.alpha.values
        rows = ((n, b[n - 1].real, b[n - 1].imag, a[n - 1].real, a[n - 1].imag)
                for n in range(1, b.size + 1))
        return write_csv(path, ["n", "Re_beta", "Im_beta", "Re_alpha", "Im_alpha"], rows)

    def summary(self) -> dict:
        out = {
            "support_size_real": len(self.support_real),
            "support_size_imag": len(self.support_imag),
            "residual_real": self.residual_real,
            "residual_imag": self.residual_imag,
            "rank_deficient": self.rank_deficient,
        }
        out.update(self.diagnostics)
        return out

    def write_diagnostics(self, path):
        """``key = value`` lines, one per diagnostic, sorted by key."""
        lines = [f"{k} = {fmt(v)}" for k, v in sorted(self.summary().items())]
        return atomic_write_text(path, "\n".join(lines) + "\n")


def recover_beta(A, measurements, basis: DctBasis | None = None,
                 config: RecoveryConfig | None = None,
                 grid: TimeGrid | None = None) -> RecoveryResult:
    """Recover beta' from ``measurements = A @ beta``; alpha' is its prefix sum.

    ``config`` may also be a pair ``(config_real, config_imag)`` when the two
    channels need different tolerances.
    """
    A_arr = check_design(A)
    y = check_complex_vector(measurements, "measurements")
    check_consistent(A_arr, y)
    N = A_arr.shape[1]
    basis = basis or dct_matrix(N)
    if basis.n != N:
        raise ValueError(f"basis dimension {basis.n} does not match N={N}")
    grid = grid or TimeGrid(0.0, float(N), N, 1)
    if isinstance(config, tuple):
        cfg_re, cfg_im = config
    else:
        cfg_re = cfg_im = config or RecoveryConfig()

    A_eff = A_arr @ basis.matrix.T
    re = omp(A_eff, y.real, cfg_re)
    im = omp(A_eff, y.imag, cfg_im)
    beta = ComplexSeries(basis.inverse(re.coef) + 1j * basis.inverse(im.coef), "beta", grid)
    return RecoveryResult(
        coef_real=re.coef, coef_imag=im.coef,
        beta=beta, alpha=accumulate_alpha(beta),
        support_real=re.support, support_imag=im.support,
        residual_real=re.residual_norm, residual_imag=im.residual_norm,
        rank_deficient=re.rank_deficient or im.rank_deficient,
    )


class CompressedSensingRecovery(BaseEstimator):
    """Estimator wrapper around :func:`recover_beta`.

    ``fit(A, y)`` takes the M x N sensing matrix and the complex readouts and
    stores the recovered increments ``beta_`` and amplitudes ``alpha_``;
    ``predict(A)`` returns the readouts those increments would produce under
    another sensing matrix.
    """

    def __init__(self, max_support=None, tol=0.0, normalize=True,
                 basis: Literal["dct"] = "dct"):
        self.max_support = max_support
        self.tol = tol
        self.normalize = normalize
        self.basis = basis

    def fit(self, A, y):
        if self.basis != "dct":
            raise ConfigurationError(f"unsupported basis {self.basis!r}")
        A_arr = check_design(A)
        cfg = RecoveryConfig(self.max_support, self.tol, self.normalize)
        self.result_ = recover_beta(A_arr, y, dct_matrix(A_arr.shape[1]), cfg)
        self.beta_ = self.result_.beta.values
        self.alpha_ = self.result_.alpha.values
        self.coef_ = self.result_.coef_real + 1j * self.result_.coef_imag
        self.n_features_in_ = A_arr.shape[1]
        return self

    def predict(self, A):
        check_is_fitted(self)
        A_arr = check_design(A)
        if A_arr.shape[1] != self.n_features_in_:
            raise ValueError(f"A has {A_arr.shape[1]} columns, expected {self.n_features_in_}")
        return A_arr @ self.beta_


def mse(x, x_rec) -> float:
    """Mean squared error (1/N) * sum (x - x_rec)**2."""
    x = np.asarray(x, dtype=float)
    x_rec = np.asarray(x_rec, dtype=float)
    if x.shape != x_rec.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {x_rec.shape}")
    if x.size == 0:
        return 0.0
    return float(np.mean((x - x_rec) ** 2))


def sparsity_estimate(b, basis: DctBasis | None = None,
                      energy_fraction: float = 0.999) -> int:
    """Smallest S whose S largest DCT coefficients hold ``energy_fraction`` of
    the energy; the larger of the real- and imaginary-channel values."""
    if not 0 < energy_fraction < 1:
        raise ValueError("energy_fraction must lie in (0, 1)")
    v = check_complex_vector(b, "series")
    basis = basis or dct_matrix(v.size)
    best = 0
    for ch in (v.real, v.imag):
        energy = np.sort(basis.forward(ch) ** 2)[::-1]
        total = energy.sum()
        if total == 0:
            continue
        frac = np.cumsum(energy) / total
        best = max(best, int(np.searchsorted(frac, energy_fraction, side="left")) + 1)
    return min(best, v.size)


def min_measurements(S: int, N: int, C: float = 1.0) -> int:
    """Measurement budget ``ceil(C * S * log2(N / S))`` for S-sparse signals."""
    if S <= 0:
        raise ValueError(f"S must be positive, got {S}")
    if S >= N:
        raise ValueError(f"S must be smaller than N (S={S}, N={N})")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    return int(math.ceil(C * S * math.log2(N / S)))
