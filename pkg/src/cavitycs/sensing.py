"""Flip-modulated compressed measurements of the cavity amplitude.

Each measurement run drives the cavity from ``t0`` to ``tN`` while ``K``
far-detuned atoms cross it at grid instants ``k_1 < ... < k_K`` (in units of
``tau_B``).  Every crossing negates the coherent amplitude, so the amplitude
read out at ``tN`` is a signed sum of the per-step increments ``beta_n``:

    Lambda_f = sum_n A_n * beta_n,   A_n = (-1) ** #{j : k_j >= n}

Two independent routes produce ``Lambda_f``: :func:`measure` multiplies the
sensing matrix with ``beta``; :func:`simulate_measurement` evolves the scalar
amplitude segment by segment and applies the sign flips.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ._io import read_csv, write_csv
from .signal_model import (ComplexSeries, DrivingProtocol, NoiseSpec, TimeGrid,
                           integrate_alpha)

__all__ = [
    "FlipSchedule",
    "SensingMatrix",
    "MeasurementVector",
    "sample_flip_schedule",
    "build_row",
    "build_matrix",
    "measure",
    "simulate_measurement",
]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class FlipSchedule:
    """Sorted, distinct flip indices in ``1..n_steps-1`` for one run."""

    indices: np.ndarray
    n_steps: int
    label: int = 0

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx[0] < 1 or idx[-1] > self.n_steps - 1):
            raise ValueError(f"flip indices must lie in [1, {self.n_steps - 1}]")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("flip indices must be strictly increasing")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    @property
    def K(self) -> int:
        return int(self.indices.size)

    def flip_times(self, grid: TimeGrid) -> np.ndarray:
        return grid.node_times(self.indices * grid.substeps)

    def __eq__(self, other):
        if not isinstance(other, FlipSchedule):
            return NotImplemented
        return (self.n_steps == other.n_steps and self.label == other.label
                and np.array_equal(self.indices, other.indices))


def sample_flip_schedule(seed, K: int, N: int, label: int = 0) -> FlipSchedule:
    """Draw ``K`` distinct flip indices uniformly from ``1..N-1``.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, or a
    Generator (which is then advanced).
    """
    if K < 0 or K > N - 1:
        raise ValueError(f"K must lie in [0, N-1]; got K={K}, N={N}")
    idx = _rng(seed).choice(np.arange(1, N), size=K, replace=False)
    return FlipSchedule(np.sort(idx), N, label)


def build_row(s: FlipSchedule, N: int | None = None) -> np.ndarray:
    """The +-1 sensing row of a schedule: ``(-1) ** #{flips at index >= n}``."""
    N = s.n_steps if N is None else N
    if N != s.n_steps:
        raise ValueError(f"schedule was drawn for N={s.n_steps}, not {N}")
    n = np.arange(1, N + 1)
    later = s.K - np.searchsorted(s.indices, n, side="left")
    return np.where(later % 2 == 1, -1, 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """M x N matrix of +-1 entries together with its generating schedules."""

    entries: np.ndarray
    schedules: tuple[FlipSchedule, ...]

    def __post_init__(self):
        A = np.array(self.entries, dtype=np.int8)
        if A.ndim != 2 or A.shape[0] < 1:
            raise ValueError("a sensing matrix needs at least one row")
        if not np.all(np.abs(A) == 1):
            raise ValueError("sensing matrix entries must be +1 or -1")
        if len(self.schedules) != A.shape[0]:
            raise ValueError("need exactly one schedule per row")
        A.flags.writeable = False
        object.__setattr__(self, "entries", A)
        object.__setattr__(self, "schedules", tuple(self.schedules))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    def toarray(self) -> np.ndarray:
        return self.entries.astype(float)

    @classmethod
    def from_schedules(cls, schedules: Sequence[FlipSchedule]) -> "SensingMatrix":
        rows = [build_row(s) for s in schedules]
        return cls(np.vstack(rows), tuple(schedules))

    def to_csv(self, path, schedule_path):
        write_csv(path, None, self.entries.tolist())
        K = max((s.K for s in self.schedules), default=0)
        header = ["m"] + [f"k{j}" for j in range(1, K + 1)]
        rows = ([s.label, *s.indices.tolist()] for s in self.schedules)
        write_csv(schedule_path, header, rows)

    @classmethod
    def from_csv(cls, path, schedule_path) -> "SensingMatrix":
        A = np.array([[int(float(v)) for v in row]
                      for row in read_csv(path, header=False)], dtype=np.int8)
        _, rows = read_csv(schedule_path)
        N = A.shape[1]
        schedules = tuple(FlipSchedule([int(v) for v in r[1:] if v != ""], N, int(r[0]))
                          for r in rows)
        mat = cls(A, schedules)
        for s, row in zip(schedules, mat.entries):
            if not np.array_equal(build_row(s), row):
                raise ValueError(f"row {s.label} disagrees with its flip schedule")
        return mat


def build_matrix(seed: int, M: int, K: int, N: int) -> SensingMatrix:
    """``M`` independent rows; row ``m`` draws from the stream ``(seed, m)``."""
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    schedules = [sample_flip_schedule(np.random.default_rng([seed, m]), K, N, label=m)
                 for m in range(M)]
    return SensingMatrix.from_schedules(schedules)


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    """Compressed readouts Lambda_f^m, tagged with the route that made them."""

    values: np.ndarray
    provenance: Literal["matrix", "simulated"] = "matrix"

    def __post_init__(self):
        v = np.array(self.values, dtype=complex).reshape(-1)
        if self.provenance not in ("matrix", "simulated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def to_csv(self, path):
        rows = ((m, v.real, v.imag, self.provenance) for m, v in enumerate(self.values))
        return write_csv(path, ["m", "Re", "Im", "provenance"], rows)

    @classmethod
    def from_csv(cls, path) -> "MeasurementVector":
        header, rows = read_csv(path)
        if header[:3] != ["m", "Re", "Im"]:
            raise ValueError(f"{path}: expected columns m,Re,Im,provenance")
        vals = [complex(float(r[1]), float(r[2])) for r in rows]
        prov = rows[0][3] if rows and len(rows[0]) > 3 else "matrix"
        return cls(vals, prov)


def measure(A: SensingMatrix, b: ComplexSeries | np.ndarray) -> MeasurementVector:
    """Lambda_f = A @ beta."""
    beta = b.values if isinstance(b, ComplexSeries) else np.asarray(b, dtype=complex)
    if isinstance(b, ComplexSeries) and b.kind != "beta":
        raise ValueError("measure expects a beta series")
    if beta.shape != (A.N,):
        raise ValueError(f"sensing matrix has {A.N} columns but beta has shape {beta.shape}")
    return MeasurementVector(A.toarray() @ beta, "matrix")


def simulate_measurement(p: DrivingProtocol, delta: float, grid: TimeGrid,
                         s: FlipSchedule, noise: NoiseSpec | None = None,
                         method: str = "auto", return_trace: bool = False):
    """Readout of one run obtained by evolving the amplitude directly.

    Between flips the amplitude grows by ``alpha(t_{j+1}, t_j)``; each flip
    negates it.  With ``return_trace=True`` also returns the list of
    ``(before, after)`` amplitudes at every flip.
    """
    if s.n_steps != grid.n_steps:
        raise ValueError("schedule and grid disagree on N")
    bounds = [grid.t0, *s.flip_times(grid).tolist()]
    lam = 0j
    trace = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        before = lam + integrate_alpha(p, delta, a, b, grid, noise, method)
        lam = -before
        trace.append((before, lam))
    lam = lam + integrate_alpha(p, delta, bounds[-1], grid.tN, grid, noise, method)
    return (lam, trace) if return_trace else lam
