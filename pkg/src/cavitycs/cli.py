"""Command-line front end: ``cavitycs <command> [--config FILE] [--out DIR] ...``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime
failure, 4 file-system error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text, fmt, write_csv, write_json
from .config import ConfigError, config_to_dict, parse_config
from .experiments import (ExperimentConfig, ExperimentError, _protocol_for, _stopping,
                          compression_ratio, derive_seeds, run_recovery_experiment,
                          success_sweep)
from .recovery import (RecoveryConfig, dct_matrix, min_measurements, mse, recover_beta,
                       sparsity_estimate)
from .sensing import MeasurementVector, SensingMatrix, build_matrix, measure, simulate_measurement
from .signal_model import ComplexSeries, accumulate_alpha, discretize_beta, eval_drive
from .svg import Panel, Series, heatmap, line_plot

log = logging.getLogger("cavitycs")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


def _manifest(out: Path, command: str, cfg: ExperimentConfig, seeds: dict, files: list[str],
              results: dict | None = None):
    doc = {"command": command, "version": __version__, "config": config_to_dict(cfg),
           "seeds": seeds, "outputs": sorted(files + ["manifest.json"])}
    if results is not None:
        doc["results"] = results
    write_json(out / "manifest.json", doc)


def _fields(cfg: ExperimentConfig, seeds: dict):
    protocol = _protocol_for(cfg, None)
    noise = replace(cfg.noise, seed=seeds["noise"])
    clean = discretize_beta(protocol, cfg.detuning, cfg.grid)
    beta = discretize_beta(protocol, cfg.detuning, cfg.grid, noise) if noise.enabled else clean
    return protocol, noise, beta, clean


def _write_drive(path: Path, cfg: ExperimentConfig, protocol, noise):
    t = cfg.grid.node_times(np.arange(cfg.grid.n_steps + 1) * cfg.grid.substeps)
    f = eval_drive(protocol, t)
    if noise.enabled:
        fn = eval_drive(protocol, t, noise, cfg.grid)
        write_csv(path, ["t", "f", "f_noisy"], zip(t, f, fn))
    else:
        write_csv(path, ["t", "f"], zip(t, f))
    return t, f


def _alpha_panels(alpha: ComplexSeries, others: list[tuple[ComplexSeries, str, bool]]):
    t = alpha.grid.times()
    panels = []
    for part, name in (("real", "Re"), ("imag", "Im")):
        series = [Series(t, getattr(alpha, part), f"{name} alpha")]
        series += [Series(t, getattr(s, part), f"{name} {label}", dashed)
                   for s, label, dashed in others]
        panels.append(Panel(f"{name} alpha(t)", "t (1/omega0)", f"{name} alpha", series))
    return panels


def cmd_simulate(cfg, out: Path) -> dict:
    seeds = derive_seeds(cfg.seed)
    protocol, noise, beta, clean = _fields(cfg, seeds)
    alpha = accumulate_alpha(beta)
    t, f = _write_drive(out / "drive.csv", cfg, protocol, noise)
    beta.to_csv(out / "beta.csv")
    alpha.to_csv(out / "alpha.csv")
    panels = [Panel("drive f(t)", "t (1/omega0)", "f (omega0)", [Series(t, f, "f")])]
    panels += _alpha_panels(alpha, [])
    atomic_write_text(out / "simulate.svg", line_plot(panels))
    results = {"sparsity_estimate": sparsity_estimate(
        clean, energy_fraction=cfg.recovery.energy_fraction),
        "peak_photon_number": float(np.max(alpha.photon_number(), initial=0.0))}
    _manifest(out, "simulate", cfg, seeds,
              ["drive.csv", "beta.csv", "alpha.csv", "simulate.svg"], results)
    return results


def cmd_measure(cfg, out: Path) -> dict:
    seeds = derive_seeds(cfg.seed)
    protocol, noise, beta, _ = _fields(cfg, seeds)
    A = build_matrix(seeds["matrix"], cfg.M, cfg.K, cfg.grid.n_steps)
    y = measure(A, beta)
    sim = MeasurementVector(
        [simulate_measurement(protocol, cfg.detuning, cfg.grid, s,
                              noise if noise.enabled else None) for s in A.schedules],
        "simulated")
    A.to_csv(out / "sensing_matrix.csv", out / "schedules.csv")
    y.to_csv(out / "measurements.csv")
    sim.to_csv(out / "measurements_simulated.csv")
    beta.to_csv(out / "beta.csv")
    scale = max(float(np.max(np.abs(y.values), initial=0.0)), 1e-300)
    results = {"M": A.M, "N": A.N,
               "max_route_discrepancy": float(np.max(np.abs(y.values - sim.values))) / scale}
    _manifest(out, "measure", cfg, seeds,
              ["sensing_matrix.csv", "schedules.csv", "measurements.csv",
               "measurements_simulated.csv", "beta.csv"], results)
    return results


def _recovery_svg(alpha, rec_alpha, clean=None) -> str:
    others = [(rec_alpha, "recovered", True)]
    if clean is not None:
        others.append((clean, "noiseless", False))
    return line_plot(_alpha_panels(alpha, others))


def cmd_recover(cfg, out: Path, source: Path | None = None) -> dict:
    if source is None:
        res = run_recovery_experiment(cfg)
        seeds, rec, diag = res.seeds, res.recovery, res.diagnostics()
        svg = _recovery_svg(res.alpha, rec.alpha, res.alpha_clean)
    else:
        seeds = derive_seeds(cfg.seed)
        try:
            A = SensingMatrix.from_csv(source / "sensing_matrix.csv", source / "schedules.csv")
            y = MeasurementVector.from_csv(source / "measurements.csv")
        except (ValueError, IndexError) as exc:
            raise ExperimentError("load", exc) from exc
        if A.N != cfg.grid.n_steps:
            raise ConfigError("N", f"config has N={cfg.grid.n_steps} but the sensing matrix "
                              f"has {A.N} columns")
        _, _, _, clean = _fields(cfg, seeds)
        try:
            S, max_support, tol = _stopping(cfg, A, y.values, clean)
            configs = tuple(RecoveryConfig(max_support, t, cfg.recovery.normalize)
                            for t in tol)
            rec = recover_beta(A, y, dct_matrix(A.N), configs, cfg.grid)
        except ValueError as exc:
            raise ExperimentError("recover", exc) from exc
        diag = {"sparsity_estimate": S, "max_support": max_support,
                "tol_real": tol[0], "tol_imag": tol[1],
                "compression_ratio": A.N / A.M, **rec.summary()}
        reference = None
        if (source / "beta.csv").exists():
            beta = ComplexSeries.from_csv(source / "beta.csv", "beta", cfg.grid)
            reference = accumulate_alpha(beta)
            diag.update({"mse_alpha_re": mse(reference.real, rec.alpha.real),
                         "mse_alpha_im": mse(reference.imag, rec.alpha.imag),
                         "mse_beta_re": mse(beta.real, rec.beta.real),
                         "mse_beta_im": mse(beta.imag, rec.beta.imag)})
        svg = (_recovery_svg(reference, rec.alpha) if reference is not None
               else line_plot(_alpha_panels(rec.alpha, [])))
    rec.to_csv(out / "recovery.csv")
    write_json(out / "diagnostics.json", diag)
    atomic_write_text(out / "diagnostics.txt",
                      "".join(f"{k} = {fmt(v)}\n" for k, v in sorted(diag.items())))
    atomic_write_text(out / "recovery.svg", svg)
    _manifest(out, "recover", cfg, seeds,
              ["recovery.csv", "diagnostics.json", "diagnostics.txt", "recovery.svg"])
    return diag


def cmd_figure2(cfg, out: Path) -> dict:
    res = run_recovery_experiment(cfg)
    noise = replace(cfg.noise, seed=res.seeds["noise"])
    t, f = _write_drive(out / "drive.csv", cfg, res.protocol, noise)
    res.alpha.to_csv(out / "alpha.csv")
    res.alpha_recovered.to_csv(out / "alpha_recovered.csv")
    panels = [Panel("drive f(t)", "t (1/omega0)", "f (omega0)", [Series(t, f, "f")])]
    panels += _alpha_panels(res.alpha, [(res.alpha_recovered, "recovered", True)])
    atomic_write_text(out / "figure2.svg", line_plot(panels))
    diag = res.diagnostics()
    _manifest(out, "figure2", cfg, res.seeds,
              ["drive.csv", "alpha.csv", "alpha_recovered.csv", "figure2.svg"], diag)
    return diag


def cmd_sweep(cfg, out: Path) -> dict:
    report = success_sweep(cfg)
    report.to_csv(out / "sweep.csv")
    grid = report.probability_grid(cfg.sweep_M, cfg.sweep_K)
    noise = "noisy" if cfg.noise.enabled else "noiseless"
    atomic_write_text(out / "sweep.svg", heatmap(
        grid, list(cfg.sweep_M), list(cfg.sweep_K),
        f"success probability ({noise}, {cfg.trials} trials)", "M", "K"))
    doc = report.to_dict()
    _manifest(out, "sweep", cfg, {"rule": doc.pop("seed_rule")}, ["sweep.csv", "sweep.svg"],
              doc)
    return doc


def cmd_info(cfg) -> dict:
    seeds = derive_seeds(cfg.seed)
    _, _, _, clean = _fields(cfg, seeds)
    N = cfg.grid.n_steps
    S = sparsity_estimate(clean, energy_fraction=cfg.recovery.energy_fraction)
    info = {"version": __version__, "config": config_to_dict(cfg), "seeds": seeds,
            "compression_ratio": compression_ratio(cfg), "sparsity_estimate": S,
            "min_measurements": min_measurements(S, N) if 0 < S < N else None}
    print(json.dumps(info, indent=2, sort_keys=True))
    return info


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavitycs",
        description="Compressed-sensing reconstruction of a driven cavity field.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--trials", type=int, help="override the sweep trial count")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "drive, increments and amplitude on the grid"),
                       ("measure", "sensing matrix and compressed readouts"),
                       ("recover", "sparse recovery of the amplitude"),
                       ("figure2", "trajectory recovery figure"),
                       ("sweep", "success probability over (M, K)"),
                       ("info", "print the resolved config and derived quantities")):
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "recover":
            p.add_argument("--from", dest="source", type=Path,
                           help="directory written by 'measure' to recover from")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        cfg = replace(cfg, seed=args.seed)
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials", "must be at least 1")
        cfg = replace(cfg, trials=args.trials)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG

    try:
        if args.command == "info":
            cmd_info(cfg)
            return EXIT_OK
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "measure":
            cmd_measure(cfg, out)
        elif args.command == "recover":
            cmd_recover(cfg, out, args.source)
        elif args.command == "figure2":
            cmd_figure2(cfg, out)
        else:
            cmd_sweep(cfg, out)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except (ExperimentError, ValueError, RuntimeError) as exc:
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME
    log.info("wrote outputs to %s", args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
