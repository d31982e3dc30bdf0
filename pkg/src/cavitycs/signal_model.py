"""Driving protocols and the coherent amplitude of a driven cavity.

A classical drive ``f(t)`` at detuning ``delta`` displaces the cavity field by

    alpha(t2, t1) = integral_{t1}^{t2} f(s) exp(-1j * delta * s) ds

Units are fixed by the cavity frequency (omega_0 = 1): times in 1/omega_0,
frequencies and drive amplitudes in omega_0.

The amplitude is sampled on a uniform grid of ``N`` steps of width ``tau_B``;
``beta_n`` is the increment over step ``n`` and ``alpha_n`` the running sum.
All quadratures share one node lattice (``Q`` substeps per step), so integrals
over adjacent grid-aligned intervals add up to the integral over their union
up to floating point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from ._io import read_csv, write_csv

__all__ = [
    "DomainError",
    "SquarePulse",
    "RandomSmooth",
    "Tabulated",
    "DrivingProtocol",
    "TimeGrid",
    "NoiseSpec",
    "ComplexSeries",
    "eval_drive",
    "integrate_alpha",
    "discretize_beta",
    "accumulate_alpha",
]

# relative slack used when snapping times onto the node lattice / pulse edges
_SNAP = 1e-9


class DomainError(ValueError):
    """A drive was queried outside the interval on which it is defined."""


@dataclass(frozen=True)
class SquarePulse:
    """Periodic on/off drive: ``amplitude`` during the first ``duty*period``
    of every period (shifted by ``offset``), zero otherwise.

    The on-window is half-open, ``[start, start + duty*period)``.
    """

    amplitude: float = 0.1
    period: float = 200.0
    duty: float = 0.2
    offset: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if not 0 < self.duty <= 1:
            raise ValueError(f"duty must lie in (0, 1], got {self.duty}")

    def _phase(self, t):
        ph = np.mod(np.asarray(t, dtype=float) - self.offset, self.period)
        tol = _SNAP * self.period
        # values a hair below a period boundary belong to the next period
        return np.where(self.period - ph <= tol, 0.0, ph), tol

    def __call__(self, t):
        if self.duty == 1:
            return np.full(np.shape(t), float(self.amplitude))
        ph, tol = self._phase(t)
        on = ph < self.duty * self.period - tol
        return np.where(on, float(self.amplitude), 0.0)

    def left_limit(self, t):
        """f(t-), needed by the trapezoid rule at the falling edge."""
        if self.duty == 1:
            return np.full(np.shape(t), float(self.amplitude))
        ph, tol = self._phase(t)
        on = (ph > tol) & (ph <= self.duty * self.period + tol)
        return np.where(on, float(self.amplitude), 0.0)

    def edges(self, t1: float, t2: float) -> np.ndarray:
        """Discontinuities of f strictly inside ``(t1, t2)``."""
        if self.duty == 1:
            return np.empty(0)
        k0 = math.floor((t1 - self.offset) / self.period) - 1
        k1 = math.ceil((t2 - self.offset) / self.period) + 1
        starts = self.offset + self.period * np.arange(k0, k1 + 1)
        e = np.sort(np.concatenate([starts, starts + self.duty * self.period]))
        return e[(e > t1) & (e < t2)]


@dataclass(frozen=True)
class RandomSmooth:
    """Seeded band-limited drive.

    ``f(t) = rms * sqrt(2/H) * sum_h cos(2*pi*m_h*(t - t0)/(tN - t0) + phi_h)``
    with ``H`` distinct harmonic indices ``m_h`` drawn from ``1..max_harmonic``
    and uniform phases, both taken from ``seed``.
    """

    seed: int = 0
    harmonics: int = 5
    max_harmonic: int = 8
    rms: float = 0.1
    t0: float = 0.0
    tN: float = 1000.0
    modes: np.ndarray = field(init=False, repr=False, compare=False)
    phases: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.harmonics <= self.max_harmonic:
            raise ValueError("need 1 <= harmonics <= max_harmonic")
        if not self.tN > self.t0:
            raise ValueError("tN must exceed t0")
        rng = np.random.default_rng(self.seed)
        modes = np.sort(rng.choice(np.arange(1, self.max_harmonic + 1),
                                   size=self.harmonics, replace=False))
        phases = rng.uniform(0.0, 2 * np.pi, size=self.harmonics)
        modes.flags.writeable = False
        phases.flags.writeable = False
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "phases", phases)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        w = 2 * np.pi * self.modes / (self.tN - self.t0)
        arg = np.multiply.outer(t - self.t0, w) + self.phases
        return self.rms * math.sqrt(2.0 / self.harmonics) * np.cos(arg).sum(axis=-1)

    left_limit = __call__


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Drive given by uniformly spaced samples, linearly interpolated."""

    values: np.ndarray
    spacing: float
    start: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a tabulated drive needs at least two samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("tabulated drive values must be finite")
        if not self.spacing > 0:
            raise ValueError("sample spacing must be positive")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def stop(self) -> float:
        return self.start + self.spacing * (self.values.size - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        tol = _SNAP * max(self.spacing, abs(self.stop))
        if np.any((t < self.start - tol) | (t > self.stop + tol)):
            raise DomainError(
                f"tabulated drive is defined on [{self.start}, {self.stop}]")
        x = np.clip((t - self.start) / self.spacing, 0, self.values.size - 1)
        return np.interp(x, np.arange(self.values.size), self.values)

    left_limit = __call__

    def __add__(self, other: "Tabulated") -> "Tabulated":
        if not isinstance(other, Tabulated):
            return NotImplemented
        if (other.values.size != self.values.size or other.spacing != self.spacing
                or other.start != self.start):
            raise ValueError("tabulated drives must share their sample grid")
        return Tabulated(self.values + other.values, self.spacing, self.start)

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        header, rows = read_csv(path)
        if header[:2] != ["t", "f"]:
            raise ValueError(f"{path}: expected columns t,f, got {header}")
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
        if data.shape[0] < 2:
            raise ValueError(f"{path}: need at least two samples")
        dt = np.diff(data[:, 0])
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=0) or dt[0] <= 0:
            raise ValueError(f"{path}: sample times must be uniformly increasing")
        return cls(data[:, 1], float(dt[0]), float(data[0, 0]))

    def to_csv(self, path):
        t = self.start + self.spacing * np.arange(self.values.size)
        return write_csv(path, ["t", "f"], zip(t, self.values))


DrivingProtocol = Union[SquarePulse, RandomSmooth, Tabulated]


@dataclass(frozen=True)
class TimeGrid:
    """``n_steps`` uniform steps over ``[t0, tN]``, each split into ``substeps``
    quadrature intervals."""

    t0: float = 0.0
    tN: float = 1000.0
    n_steps: int = 1000
    substeps: int = 32

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps}")
        if not self.tN > self.t0:
            raise ValueError("tN must exceed t0")

    @property
    def tau_B(self) -> float:
        return (self.tN - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps * self.substeps + 1

    def node_times(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return self.t0 + j * ((self.tN - self.t0) / (self.n_steps * self.substeps))

    def times(self) -> np.ndarray:
        """Grid points t_1 .. t_N (the sample instants of alpha_n)."""
        return self.t0 + self.tau_B * np.arange(1, self.n_steps + 1)

    def node_index(self, t: float) -> int:
        h = (self.tN - self.t0) / (self.n_steps * self.substeps)
        x = (t - self.t0) / h
        j = round(x)
        if abs(x - j) > _SNAP * max(1.0, abs(x)) or not 0 <= j < self.n_nodes:
            raise ValueError(f"t={t} is not a substep boundary of the grid")
        return int(j)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive drive noise ``strength * xi`` with ``xi ~ U[-1, 1]``.

    ``resolution="step"`` redraws xi once per grid step and holds it over the
    step's quadrature nodes; ``"substep"`` draws an independent value at every
    quadrature node.
    """

    enabled: bool = False
    strength: float = 0.05
    seed: int = 0
    resolution: Literal["step", "substep"] = "step"

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("noise strength must be non-negative")
        if self.resolution not in ("step", "substep"):
            raise ValueError(f"unknown noise resolution {self.resolution!r}")

    def draws(self, grid: TimeGrid) -> np.ndarray:
        """The full realization of xi: one value per step or per node."""
        n = grid.n_steps if self.resolution == "step" else grid.n_nodes
        return np.random.default_rng(self.seed).uniform(-1.0, 1.0, size=n)

    def beta_channel_std(self, grid: TimeGrid) -> float:
        """Standard deviation of the noise in one quadrature of beta_n."""
        if not self.enabled:
            return 0.0
        var = self.strength**2 / 3.0 * grid.tau_B**2 / 2.0
        if self.resolution == "substep":
            q = grid.substeps
            var *= (q - 0.5) / q**2
        return math.sqrt(var)


@dataclass(frozen=True, eq=False)
class ComplexSeries:
    """Length-N complex samples tagged ``beta`` (increments) or ``alpha``."""

    values: np.ndarray
    kind: Literal["beta", "alpha"]
    grid: TimeGrid

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if self.kind not in ("beta", "alpha"):
            raise ValueError(f"unknown series kind {self.kind!r}")
        if v.shape != (self.grid.n_steps,):
            raise ValueError(
                f"series length {v.shape} does not match grid N={self.grid.n_steps}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag

    def photon_number(self) -> np.ndarray:
        """Mean photon number |alpha_n|^2 (only meaningful for alpha)."""
        return np.abs(self.values) ** 2

    def to_csv(self, path):
        t = self.grid.times()
        rows = ((n, tn, v.real, v.imag) for n, (tn, v) in
                enumerate(zip(t, self.values), start=1))
        return write_csv(path, ["n", "t", "Re", "Im"], rows)

    @classmethod
    def from_csv(cls, path, kind, grid: TimeGrid) -> "ComplexSeries":
        header, rows = read_csv(path)
        if header[:4] != ["n", "t", "Re", "Im"]:
            raise ValueError(f"{path}: expected columns n,t,Re,Im, got {header}")
        vals = np.array([complex(float(r[2]), float(r[3])) for r in rows])
        return cls(vals, kind, grid)


def _noise_term(noise: NoiseSpec | None, grid: TimeGrid | None, t):
    if noise is None or not noise.enabled:
        return 0.0
    if grid is None:
        raise ValueError("evaluating a noisy drive requires the governing TimeGrid")
    xi = noise.draws(grid)
    t = np.asarray(t, dtype=float)
    if noise.resolution == "step":
        idx = np.floor((t - grid.t0) / grid.tau_B + _SNAP).astype(int)
        idx = np.clip(idx, 0, grid.n_steps - 1)
    else:
        h = grid.tau_B / grid.substeps
        idx = np.clip(np.rint((t - grid.t0) / h).astype(int), 0, grid.n_nodes - 1)
    return noise.strength * xi[idx]


def eval_drive(p: DrivingProtocol, t, noise: NoiseSpec | None = None,
               grid: TimeGrid | None = None):
    """Drive value f(t), or f(t) + strength*xi when ``noise`` is enabled.

    With step-resolution noise the value of xi is the one of the grid step
    containing ``t``; with substep resolution, that of the nearest node.
    """
    val = p(t) + _noise_term(noise, grid, t)
    return float(val) if np.ndim(val) == 0 else val


def _exact_square_segments(p: SquarePulse, delta: float, bounds: np.ndarray):
    """Exact integrals of f*exp(-i*delta*s) between consecutive ``bounds``."""
    pts = np.union1d(bounds, p.edges(bounds[0], bounds[-1]))
    mids = 0.5 * (pts[:-1] + pts[1:])
    L = np.diff(pts)
    seg = p(mids) * L * np.sinc(delta * L / (2 * np.pi)) * np.exp(-1j * delta * mids)
    starts = np.searchsorted(pts, bounds[:-1])
    return np.add.reduceat(seg, starts) if seg.size else np.zeros(0, complex)


def _trapezoid_pieces(p, delta, grid, j1, j2, noise):
    """Per-interval trapezoid contributions for nodes j1..j2."""
    j = np.arange(j1, j2 + 1)
    t = grid.node_times(j)
    phase = np.exp(-1j * delta * t)
    right = p(t[:-1])            # f(t+) at the left end of each interval
    left = p.left_limit(t[1:])   # f(t-) at the right end
    if noise is not None and noise.enabled:
        xi = noise.draws(grid)
        if noise.resolution == "step":
            k = np.minimum(j[:-1] // grid.substeps, grid.n_steps - 1)
            right = right + noise.strength * xi[k]
            left = left + noise.strength * xi[k]
        else:
            right = right + noise.strength * xi[j[:-1]]
            left = left + noise.strength * xi[j[1:]]
    h = (grid.tN - grid.t0) / (grid.n_steps * grid.substeps)
    return 0.5 * h * (right * phase[:-1] + left * phase[1:])


def _use_exact(p, noise, method):
    if method not in ("auto", "trapezoid", "exact"):
        raise ValueError(f"unknown quadrature method {method!r}")
    noisy = noise is not None and noise.enabled
    if method == "exact":
        if not isinstance(p, SquarePulse) or noisy:
            raise ValueError("the closed form applies to noiseless square pulses only")
        return True
    return method == "auto" and isinstance(p, SquarePulse) and not noisy


def integrate_alpha(p: DrivingProtocol, delta: float, t1: float, t2: float,
                    grid: TimeGrid, noise: NoiseSpec | None = None,
                    method: str = "auto") -> complex:
    """Coherent amplitude accumulated between grid-aligned times ``t1 <= t2``.

    ``method="auto"`` takes the closed form for a noiseless square pulse and the
    composite trapezoid rule otherwise.
    """
    if t2 < t1:
        raise ValueError(f"t2 < t1 ({t2} < {t1})")
    j1, j2 = grid.node_index(t1), grid.node_index(t2)
    if j1 == j2:
        return 0j
    if _use_exact(p, noise, method):
        bounds = grid.node_times([j1, j2])
        return complex(_exact_square_segments(p, delta, bounds)[0])
    return complex(_trapezoid_pieces(p, delta, grid, j1, j2, noise).sum())


def discretize_beta(p: DrivingProtocol, delta: float, grid: TimeGrid,
                    noise: NoiseSpec | None = None,
                    method: str = "auto") -> ComplexSeries:
    """beta_n = alpha(t_n, t_{n-1}) for n = 1..N."""
    if _use_exact(p, noise, method):
        bounds = grid.node_times(np.arange(grid.n_steps + 1) * grid.substeps)
        return ComplexSeries(_exact_square_segments(p, delta, bounds), "beta", grid)
    pieces = _trapezoid_pieces(p, delta, grid, 0, grid.n_nodes - 1, noise)
    beta = pieces.reshape(grid.n_steps, grid.substeps).sum(axis=1)
    return ComplexSeries(beta, "beta", grid)


def accumulate_alpha(b: ComplexSeries) -> ComplexSeries:
    """alpha_n = beta_1 + ... + beta_n, summed left to right."""
    if not isinstance(b, ComplexSeries) or b.kind != "beta":
        raise ValueError("accumulate_alpha expects a beta series")
    return ComplexSeries(np.cumsum(b.values), "alpha", b.grid)
