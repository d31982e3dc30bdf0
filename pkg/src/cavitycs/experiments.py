"""End-to-end reproductions: trajectory recovery and success-rate sweeps.

Every random quantity of a run is drawn from streams keyed by the master
seed: a single experiment uses ``(seed,)``, sweep trial ``t`` of cell
``(M, K)`` uses ``(seed, M, K, t)``.  Identical configs therefore give
bit-identical results, and no two sweep cells share a stream.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .recovery import (RecoveryConfig, RecoveryResult, dct_matrix, mse,
                       recover_beta, sparsity_estimate)
from .sensing import MeasurementVector, SensingMatrix, build_matrix, measure
from .signal_model import (ComplexSeries, DrivingProtocol, NoiseSpec, RandomSmooth,
                           SquarePulse, TimeGrid, accumulate_alpha, discretize_beta)
from ._io import write_csv

log = logging.getLogger(__name__)

__all__ = [
    "RecoverySettings",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentResult",
    "SweepCell",
    "SweepReport",
    "derive_seeds",
    "run_recovery_experiment",
    "success_sweep",
    "nyquist_baseline",
    "compression_ratio",
    "wilson_interval",
]

DEFAULT_SWEEP_M = (100, 140, 180, 220, 260)
DEFAULT_SWEEP_K = (2, 5, 10, 20, 50, 100)


class ExperimentError(RuntimeError):
    """A pipeline stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RecoverySettings:
    """Recovery options at experiment level.

    ``None`` for ``max_support`` means (estimated sparsity of the noiseless
    increments) + ``margin``; ``None`` for ``tol`` means the expected norm of
    the noise in the readouts, or ``1e-6 * ||y||`` without noise.
    """

    max_support: int | None = None
    tol: float | None = None
    normalize: bool = True
    margin: int = 10
    energy_fraction: float = 0.999


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: DrivingProtocol = field(default_factory=SquarePulse)
    detuning: float = 0.02
    grid: TimeGrid = field(default_factory=TimeGrid)
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(enabled=True))
    M: int = 220
    K: int = 30
    recovery: RecoverySettings = field(default_factory=RecoverySettings)
    trials: int = 200
    seed: int = 0
    threshold: float = 2e-3
    sweep_M: tuple[int, ...] = DEFAULT_SWEEP_M
    sweep_K: tuple[int, ...] = DEFAULT_SWEEP_K
    n_jobs: int = 1

    def __post_init__(self):
        N = self.grid.n_steps
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if self.K > N - 1:
            raise ValueError(f"K exceeds N-1 (K={self.K}, N={N})")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def derive_seeds(*key: int) -> dict[str, int]:
    """Independent 32-bit seeds for the protocol, noise and sensing streams."""
    state = np.random.SeedSequence([int(k) for k in key]).generate_state(3)
    return {"protocol": int(state[0]), "noise": int(state[1]), "matrix": int(state[2])}


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: ExperimentConfig
    seeds: dict
    protocol: DrivingProtocol
    beta: ComplexSeries          # increments of the (noisy) field that was measured
    beta_clean: ComplexSeries    # same drive without noise
    alpha: ComplexSeries
    alpha_clean: ComplexSeries
    sensing: SensingMatrix
    measurements: MeasurementVector
    recovery: RecoveryResult
    sparsity: int
    max_support: int
    tol: tuple[float, float]
    errors: dict

    @property
    def alpha_recovered(self) -> ComplexSeries:
        return self.recovery.alpha

    def diagnostics(self) -> dict:
        out = {"sparsity_estimate": self.sparsity, "max_support": self.max_support,
               "tol_real": self.tol[0], "tol_imag": self.tol[1],
               "compression_ratio": compression_ratio(self.config)}
        out.update(self.recovery.summary())
        out.update({f"mse_{k}": v for k, v in self.errors.items()})
        return out


def _protocol_for(cfg: ExperimentConfig, protocol_seed: int | None) -> DrivingProtocol:
    p = cfg.protocol
    if protocol_seed is not None and isinstance(p, RandomSmooth):
        return replace(p, seed=protocol_seed)
    return p


def _stopping(cfg, A: SensingMatrix, y: np.ndarray, beta_clean: ComplexSeries):
    rs = cfg.recovery
    S = sparsity_estimate(beta_clean, dct_matrix(cfg.grid.n_steps), rs.energy_fraction)
    max_support = rs.max_support if rs.max_support is not None else S + rs.margin
    if rs.tol is not None:
        tol = (rs.tol, rs.tol)
    elif cfg.noise.enabled:
        # E||A w||^2 = M * N * sigma^2 for white per-step noise w
        eps = math.sqrt(A.M * A.N) * cfg.noise.beta_channel_std(cfg.grid)
        tol = (eps, eps)
    else:
        tol = (1e-6 * float(np.linalg.norm(y.real)), 1e-6 * float(np.linalg.norm(y.imag)))
    return S, max_support, tol


def _errors(beta, beta_rec, alpha, alpha_rec, beta_clean, alpha_clean) -> dict:
    e = {
        "alpha_re": mse(alpha.real, alpha_rec.real),
        "alpha_im": mse(alpha.imag, alpha_rec.imag),
        "beta_re": mse(beta.real, beta_rec.real),
        "beta_im": mse(beta.imag, beta_rec.imag),
        "clean_alpha_re": mse(alpha_clean.real, alpha_rec.real),
        "clean_alpha_im": mse(alpha_clean.imag, alpha_rec.imag),
        "clean_beta_re": mse(beta_clean.real, beta_rec.real),
        "clean_beta_im": mse(beta_clean.imag, beta_rec.imag),
    }
    e["beta_sum"] = e["beta_re"] + e["beta_im"]
    e["clean_beta_sum"] = e["clean_beta_re"] + e["clean_beta_im"]
    peak = float(np.max(np.abs(alpha.values) ** 2)) if alpha.values.size else 0.0
    e["alpha_peak_sq"] = peak
    e["alpha_rel_re"] = e["alpha_re"] / peak if peak > 0 else 0.0
    e["alpha_rel_im"] = e["alpha_im"] / peak if peak > 0 else 0.0
    return e


def _run(cfg: ExperimentConfig, seeds: dict, protocol: DrivingProtocol) -> ExperimentResult:
    stage = "signal"
    try:
        noise = replace(cfg.noise, seed=seeds["noise"])
        beta_clean = discretize_beta(protocol, cfg.detuning, cfg.grid)
        beta = (discretize_beta(protocol, cfg.detuning, cfg.grid, noise)
                if noise.enabled else beta_clean)
        stage = "sensing"
        A = build_matrix(seeds["matrix"], cfg.M, cfg.K, cfg.grid.n_steps)
        stage = "measure"
        y = measure(A, beta)
        stage = "recover"
        S, max_support, tol = _stopping(cfg, A, y.values, beta_clean)
        configs = tuple(RecoveryConfig(max_support, t, cfg.recovery.normalize) for t in tol)
        rec = recover_beta(A, y, dct_matrix(cfg.grid.n_steps), configs, cfg.grid)
        stage = "reconstruct"
        alpha, alpha_clean = accumulate_alpha(beta), accumulate_alpha(beta_clean)
        errors = _errors(beta, rec.beta, alpha, rec.alpha, beta_clean, alpha_clean)
    except Exception as exc:
        raise ExperimentError(stage, exc) from exc
    return ExperimentResult(cfg, seeds, protocol, beta, beta_clean, alpha, alpha_clean,
                            A, y, rec, S, max_support, tol, errors)


def run_recovery_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Simulate the field, measure it compressively and recover the trajectory.

    The reference ``alpha`` is the amplitude of the field that was actually
    measured (noise included); the noiseless trajectory is kept alongside it
    as ``alpha_clean``.
    """
    seeds = derive_seeds(cfg.seed)
    res = _run(cfg, seeds, _protocol_for(cfg, None))
    log.info("recovery: M=%d K=%d mse(alpha)=(%.3g, %.3g)", cfg.M, cfg.K,
             res.errors["alpha_re"], res.errors["alpha_im"])
    return res


def nyquist_baseline(cfg: ExperimentConfig) -> ComplexSeries:
    """alpha_n sampled directly at every grid point (identity sensing, N runs)."""
    seeds = derive_seeds(cfg.seed)
    noise = replace(cfg.noise, seed=seeds["noise"])
    beta = discretize_beta(_protocol_for(cfg, None), cfg.detuning, cfg.grid,
                           noise if noise.enabled else None)
    return accumulate_alpha(beta)


def compression_ratio(cfg: ExperimentConfig) -> float:
    """Nyquist runs per compressed run, N / M."""
    return cfg.grid.n_steps / cfg.M


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class SweepCell:
    M: int
    K: int
    trials: int
    successes: int
    mean_mse: float
    max_mse: float
    seed_key: tuple[int, int, int]

    @property
    def probability(self) -> float:
        return self.successes / self.trials

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)


@dataclass(frozen=True)
class SweepReport:
    cells: tuple[SweepCell, ...]
    threshold: float
    noise: bool
    seed: int

    def cell(self, M: int, K: int) -> SweepCell:
        for c in self.cells:
            if c.M == M and c.K == K:
                return c
        raise KeyError((M, K))

    def probability_grid(self, M_list, K_list) -> np.ndarray:
        """Success probabilities indexed ``[k_index, m_index]``."""
        return np.array([[self.cell(m, k).probability for m in M_list] for k in K_list])

    def to_csv(self, path):
        rows = ((c.M, c.K, c.trials, c.successes, c.probability, c.mean_mse)
                for c in self.cells)
        return write_csv(path, ["M", "K", "trials", "successes", "probability", "mean_mse"],
                         rows)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold, "noise": self.noise, "seed": self.seed,
            "seed_rule": "trial streams keyed by (seed, M, K, trial)",
            "cells": [{"M": c.M, "K": c.K, "trials": c.trials, "successes": c.successes,
                       "probability": c.probability, "mean_mse": c.mean_mse,
                       "max_mse": c.max_mse, "ci95": list(c.interval),
                       "seed_key": list(c.seed_key)} for c in self.cells],
        }


def _sweep_trial(cfg: ExperimentConfig, M: int, K: int, trial: int) -> float:
    seeds = derive_seeds(cfg.seed, M, K, trial)
    cell_cfg = replace(cfg, M=M, K=K)
    res = _run(cell_cfg, seeds, _protocol_for(cfg, seeds["protocol"]))
    return res.errors["beta_sum"]


def success_sweep(cfg: ExperimentConfig, M_list=None, K_list=None,
                  trials: int | None = None) -> SweepReport:
    """Success probability over a grid of (M, K).

    A trial succeeds when mse(Re beta) + mse(Im beta) < ``cfg.threshold``.
    For a random-smooth protocol every trial also draws a fresh drive.
    """
    M_list = tuple(cfg.sweep_M if M_list is None else M_list)
    K_list = tuple(cfg.sweep_K if K_list is None else K_list)
    trials = cfg.trials if trials is None else trials
    if not M_list or not K_list:
        raise ValueError("M and K lists must be non-empty")
    for K in K_list:
        if not 0 <= K <= cfg.grid.n_steps - 1:
            raise ValueError(f"K exceeds N-1 (K={K}, N={cfg.grid.n_steps})")
    jobs = [(M, K, t) for M in M_list for K in K_list for t in range(trials)]
    if cfg.n_jobs == 1:
        errs = [_sweep_trial(cfg, *job) for job in jobs]
    else:
        errs = Parallel(n_jobs=cfg.n_jobs)(delayed(_sweep_trial)(cfg, *job) for job in jobs)

    cells = []
    it = iter(errs)
    for M in M_list:
        for K in K_list:
            e = np.array([next(it) for _ in range(trials)])
            cells.append(SweepCell(M, K, trials, int(np.sum(e < cfg.threshold)),
                                   float(e.mean()), float(e.max()), (cfg.seed, M, K)))
            log.info("sweep M=%d K=%d: %d/%d", M, K, cells[-1].successes, trials)
    return SweepReport(tuple(cells), cfg.threshold, cfg.noise.enabled, cfg.seed)
