"""JSON experiment configs.

Every key is optional; omitted keys take the defaults below.  Unknown keys are
rejected so that typos cannot silently fall back to a default.

    {
      "protocol": "square" | "random" | "tabulated" | {"kind": ..., ...},
      "detuning": 0.02, "N": 1000, "tau_B": 1.0, "t0": 0.0, "substeps": 32,
      "noise": true | false | {"enabled": true, "strength": 0.05,
                               "resolution": "step"},
      "M": 220, "K": 30,
      "recovery": {"max_support": null, "tol": null, "normalize": true,
                   "margin": 10, "energy_fraction": 0.999},
      "trials": 200, "seed": 0, "threshold": 0.002,
      "sweep": {"M": [100, 140, 180, 220, 260], "K": [2, 5, 10, 20, 50, 100]},
      "n_jobs": 1
    }

Protocol objects: ``{"kind": "square", "amplitude", "period", "duty",
"offset"}`` (period defaults to a fifth of the window),
``{"kind": "random", "seed", "harmonics", "max_harmonic", "rms"}``,
``{"kind": "tabulated", "path"}`` (CSV with columns t,f; relative paths are
resolved against the config file).
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from .experiments import (DEFAULT_SWEEP_K, DEFAULT_SWEEP_M, ExperimentConfig,
                          RecoverySettings)
from .signal_model import NoiseSpec, RandomSmooth, SquarePulse, Tabulated, TimeGrid

__all__ = ["ConfigError", "parse_config", "config_from_dict", "config_to_dict"]

_TOP = {"protocol", "detuning", "N", "tau_B", "t0", "substeps", "noise", "M", "K",
        "recovery", "trials", "seed", "threshold", "sweep", "n_jobs"}
_PROTOCOL = {
    "square": {"kind", "amplitude", "period", "duty", "offset"},
    "random": {"kind", "seed", "harmonics", "max_harmonic", "rms"},
    "tabulated": {"kind", "path"},
}
_NOISE = {"enabled", "strength", "resolution"}
_RECOVERY = {"max_support", "tol", "normalize", "margin", "energy_fraction"}
_SWEEP = {"M", "K"}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _reject_unknown(d: dict, allowed: set, prefix: str = ""):
    for k in d:
        if k not in allowed:
            raise ConfigError(prefix + k, "unknown key")


def _typed(d, key, kind, default, prefix=""):
    if key not in d or d[key] is None and default is None:
        return default
    v = d[key]
    name = prefix + key
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(name, f"expected an integer, got {v!r}")
    elif kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(name, f"expected a number, got {v!r}")
        v = float(v)
    elif kind is bool:
        if not isinstance(v, bool):
            raise ConfigError(name, f"expected true/false, got {v!r}")
    elif kind is str:
        if not isinstance(v, str):
            raise ConfigError(name, f"expected a string, got {v!r}")
    return v


def _int_list(d, key, default, prefix):
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, list) or not v or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(prefix + key, "expected a non-empty list of integers")
    return tuple(v)


def _protocol(raw, grid: TimeGrid, base: Path | None):
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise ConfigError("protocol", "expected a protocol name or object")
    kind = raw.get("kind")
    if kind not in _PROTOCOL:
        raise ConfigError("protocol.kind", f"expected one of {sorted(_PROTOCOL)}, got {kind!r}")
    _reject_unknown(raw, _PROTOCOL[kind], "protocol.")
    span = grid.tN - grid.t0
    try:
        if kind == "square":
            return SquarePulse(
                amplitude=_typed(raw, "amplitude", float, 0.1, "protocol."),
                period=_typed(raw, "period", float, span / 5, "protocol."),
                duty=_typed(raw, "duty", float, 0.2, "protocol."),
                offset=_typed(raw, "offset", float, grid.t0, "protocol."))
        if kind == "random":
            return RandomSmooth(
                seed=_typed(raw, "seed", int, 0, "protocol."),
                harmonics=_typed(raw, "harmonics", int, 5, "protocol."),
                max_harmonic=_typed(raw, "max_harmonic", int, 8, "protocol."),
                rms=_typed(raw, "rms", float, 0.1, "protocol."),
                t0=grid.t0, tN=grid.tN)
        path = _typed(raw, "path", str, None, "protocol.")
        if path is None:
            raise ConfigError("protocol.path", "a tabulated protocol needs a CSV path")
        full = Path(path) if base is None or Path(path).is_absolute() else base / path
        tab = Tabulated.from_csv(full)
        if tab.start > grid.t0 or tab.stop < grid.tN:
            raise ConfigError("protocol.path",
                              f"samples cover [{tab.start}, {tab.stop}], "
                              f"grid needs [{grid.t0}, {grid.tN}]")
        object.__setattr__(tab, "_source", path)
        return tab
    except ConfigError:
        raise
    except (OSError, ValueError) as exc:
        raise ConfigError("protocol", str(exc)) from exc


def config_from_dict(raw: dict, base: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _reject_unknown(raw, _TOP)
    N = _typed(raw, "N", int, 1000)
    tau = _typed(raw, "tau_B", float, 1.0)
    t0 = _typed(raw, "t0", float, 0.0)
    Q = _typed(raw, "substeps", int, 32)
    if N < 1:
        raise ConfigError("N", "must be at least 1")
    if not tau > 0:
        raise ConfigError("tau_B", "must be positive")
    if Q < 1:
        raise ConfigError("substeps", "must be at least 1")
    grid = TimeGrid(t0, t0 + N * tau, N, Q)

    noise_raw = raw.get("noise", True)
    if isinstance(noise_raw, bool):
        noise = NoiseSpec(enabled=noise_raw)
    elif isinstance(noise_raw, dict):
        _reject_unknown(noise_raw, _NOISE, "noise.")
        strength = _typed(noise_raw, "strength", float, 0.05, "noise.")
        resolution = _typed(noise_raw, "resolution", str, "step", "noise.")
        if strength < 0:
            raise ConfigError("noise.strength", "must be non-negative")
        if resolution not in ("step", "substep"):
            raise ConfigError("noise.resolution", "expected 'step' or 'substep'")
        noise = NoiseSpec(_typed(noise_raw, "enabled", bool, True, "noise."),
                          strength, 0, resolution)
    else:
        raise ConfigError("noise", "expected true/false or an object")

    rec_raw = raw.get("recovery", {})
    if not isinstance(rec_raw, dict):
        raise ConfigError("recovery", "expected an object")
    _reject_unknown(rec_raw, _RECOVERY, "recovery.")
    rec = RecoverySettings(
        max_support=_typed(rec_raw, "max_support", int, None, "recovery."),
        tol=_typed(rec_raw, "tol", float, None, "recovery."),
        normalize=_typed(rec_raw, "normalize", bool, True, "recovery."),
        margin=_typed(rec_raw, "margin", int, 10, "recovery."),
        energy_fraction=_typed(rec_raw, "energy_fraction", float, 0.999, "recovery."))
    if rec.max_support is not None and rec.max_support < 1:
        raise ConfigError("recovery.max_support", "must be at least 1")
    if rec.tol is not None and rec.tol < 0:
        raise ConfigError("recovery.tol", "must be non-negative")
    if rec.margin < 0:
        raise ConfigError("recovery.margin", "must be non-negative")
    if not 0 < rec.energy_fraction < 1:
        raise ConfigError("recovery.energy_fraction", "must lie in (0, 1)")

    sweep_raw = raw.get("sweep", {})
    if not isinstance(sweep_raw, dict):
        raise ConfigError("sweep", "expected an object")
    _reject_unknown(sweep_raw, _SWEEP, "sweep.")
    sweep_M = _int_list(sweep_raw, "M", DEFAULT_SWEEP_M, "sweep.")
    sweep_K = _int_list(sweep_raw, "K", DEFAULT_SWEEP_K, "sweep.")

    M = _typed(raw, "M", int, 220)
    K = _typed(raw, "K", int, 30)
    trials = _typed(raw, "trials", int, 200)
    seed = _typed(raw, "seed", int, 0)
    threshold = _typed(raw, "threshold", float, 2e-3)
    n_jobs = _typed(raw, "n_jobs", int, 1)
    if M < 1:
        raise ConfigError("M", "must be at least 1")
    if K < 0:
        raise ConfigError("K", "must be non-negative")
    if K > N - 1:
        raise ConfigError("K", f"K exceeds N-1 (K={K}, N={N})")
    if any(m < 1 for m in sweep_M):
        raise ConfigError("sweep.M", "entries must be at least 1")
    if "K" in sweep_raw and any(not 0 <= k <= N - 1 for k in sweep_K):
        raise ConfigError("sweep.K", f"entries must lie in [0, N-1] (N={N})")
    if trials < 1:
        raise ConfigError("trials", "must be at least 1")
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")
    if not threshold > 0:
        raise ConfigError("threshold", "must be positive")
    if n_jobs == 0:
        raise ConfigError("n_jobs", "must be non-zero")
    detuning = _typed(raw, "detuning", float, 0.02)
    protocol = _protocol(raw.get("protocol", "square"), grid, base)

    return ExperimentConfig(protocol=protocol, detuning=detuning, grid=grid, noise=noise,
                            M=M, K=K, recovery=rec, trials=trials, seed=seed,
                            threshold=threshold, sweep_M=sweep_M, sweep_K=sweep_K,
                            n_jobs=n_jobs)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"malformed JSON in {path}: {exc}") from None
    return config_from_dict(raw, base=path.parent)


def _protocol_to_dict(p) -> dict:
    if isinstance(p, SquarePulse):
        return {"kind": "square", **asdict(p)}
    if isinstance(p, RandomSmooth):
        return {"kind": "random", "seed": p.seed, "harmonics": p.harmonics,
                "max_harmonic": p.max_harmonic, "rms": p.rms}
    return {"kind": "tabulated", "path": getattr(p, "_source", None),
            "samples": int(p.values.size), "spacing": p.spacing, "start": p.start}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Fully expanded config, suitable for a run manifest."""
    return {
        "protocol": _protocol_to_dict(cfg.protocol),
        "detuning": cfg.detuning,
        "N": cfg.grid.n_steps, "tau_B": cfg.grid.tau_B, "t0": cfg.grid.t0,
        "substeps": cfg.grid.substeps,
        "noise": {"enabled": cfg.noise.enabled, "strength": cfg.noise.strength,
                  "resolution": cfg.noise.resolution},
        "M": cfg.M, "K": cfg.K,
        "recovery": asdict(cfg.recovery),
        "trials": cfg.trials, "seed": cfg.seed, "threshold": cfg.threshold,
        "sweep": {"M": list(cfg.sweep_M), "K": list(cfg.sweep_K)},
        "n_jobs": cfg.n_jobs,
    }
