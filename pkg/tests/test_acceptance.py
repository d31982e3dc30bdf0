"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Thresholds are the stated ones; nothing here is loosened to make a run pass.
"""

import json

import numpy as np
import pytest

from cavitycs.cli import main
from cavitycs.experiments import ExperimentConfig, run_recovery_experiment, success_sweep
from cavitycs.recovery import RecoveryConfig, dct_matrix, min_measurements, mse, recover_beta
from cavitycs.sensing import build_matrix, build_row, measure, sample_flip_schedule, \
    simulate_measurement
from cavitycs.signal_model import (NoiseSpec, RandomSmooth, SquarePulse, Tabulated, TimeGrid,
                                   discretize_beta, integrate_alpha)


def _random_protocol(rng, grid):
    kind = rng.integers(3)
    if kind == 0:
        return SquarePulse(amplitude=rng.uniform(0.01, 1.0), period=rng.uniform(1, 400),
                           duty=rng.uniform(0.05, 1.0), offset=rng.uniform(-100, 100))
    if kind == 1:
        return RandomSmooth(seed=int(rng.integers(2**32)), rms=rng.uniform(0.01, 1.0),
                            t0=grid.t0, tN=grid.tN)
    return Tabulated(rng.normal(size=grid.n_steps + 1), grid.tau_B, grid.t0)


def _random_grid(rng, n_max=1000):
    N = int(rng.integers(2, n_max + 1))
    Q = int(rng.choice([1, 2, 4, 8, 16, 32]))
    tau = float(rng.choice([0.5, 1.0, 2.0]))
    t0 = float(rng.uniform(-50, 50))
    return TimeGrid(t0, t0 + N * tau, N, Q)


def test_1_oracle_equivalence(report):
    rng = np.random.default_rng(20240601)
    worst, trials = 0.0, 500
    for _ in range(trials):
        grid = _random_grid(rng)
        p = _random_protocol(rng, grid)
        delta = float(rng.uniform(-0.2, 0.2))
        noise = NoiseSpec(enabled=bool(rng.integers(2)), seed=int(rng.integers(2**32)))
        K = int(rng.integers(0, min(100, grid.n_steps - 1) + 1))
        s = sample_flip_schedule(rng, K, grid.n_steps)
        beta = discretize_beta(p, delta, grid, noise)
        lam_matrix = complex(build_row(s) @ beta.values)
        lam_sim = simulate_measurement(p, delta, grid, s, noise)
        worst = max(worst, abs(lam_matrix - lam_sim) / max(abs(lam_matrix), 1e-300))
    ok = report("1 oracle equivalence", worst < 1e-9,
                f"{trials} trials, worst relative gap {worst:.2e} (limit 1e-9)")
    assert ok


def test_2_additivity_and_closed_form(report):
    rng = np.random.default_rng(7)
    worst_add = 0.0
    for _ in range(500):
        grid = _random_grid(rng, 400)
        p = _random_protocol(rng, grid)
        noise = NoiseSpec(enabled=bool(rng.integers(2)), seed=int(rng.integers(2**32)))
        delta = float(rng.uniform(-0.2, 0.2))
        j = np.sort(rng.integers(0, grid.n_nodes, size=3))
        t1, t2, t3 = grid.node_times(j)
        a12 = integrate_alpha(p, delta, t1, t2, grid, noise)
        a23 = integrate_alpha(p, delta, t2, t3, grid, noise)
        a13 = integrate_alpha(p, delta, t1, t3, grid, noise)
        scale = max(abs(a12), abs(a23), abs(a13), 1e-300)
        worst_add = max(worst_add, abs(a13 - (a12 + a23)) / scale)

    # square pulses with edges on the Q=32 node lattice, detuning on the problem's scale
    worst_cf = 0.0
    grid = TimeGrid()
    for _ in range(200):
        period = float(rng.integers(2, 400))
        on = int(rng.integers(1, int(period) * 32 + 1)) / 32
        p = SquarePulse(amplitude=rng.uniform(0.01, 1.0), period=period, duty=on / period,
                        offset=int(rng.integers(0, 32 * 400)) / 32)
        delta = float(rng.uniform(-0.05, 0.05))
        j = np.sort(rng.integers(0, grid.n_nodes, size=2))
        t1, t2 = grid.node_times(j)
        exact = integrate_alpha(p, delta, t1, t2, grid, method="exact")
        trap = integrate_alpha(p, delta, t1, t2, grid, method="trapezoid")
        if exact != 0:
            worst_cf = max(worst_cf, abs(exact - trap) / abs(exact))
    ok_add = report("2 additivity", worst_add < 1e-12,
                    f"500 triples, worst relative defect {worst_add:.2e} (limit 1e-12)")
    ok_cf = report("2 closed form vs trapezoid", worst_cf < 1e-6,
                   f"200 square intervals, Q=32, worst relative gap {worst_cf:.2e} (limit 1e-6)")
    assert ok_add and ok_cf


def test_3_dct_orthonormality(report):
    errs = {}
    for N in (1, 2, 17, 1000):
        Phi = dct_matrix(N).matrix
        errs[N] = float(np.max(np.abs(Phi @ Phi.T - np.eye(N))))
    worst = max(errs.values())
    ok = report("3 DCT orthonormality", worst < 1e-12,
                ", ".join(f"N={n}: {e:.1e}" for n, e in errs.items()) + " (limit 1e-12)")
    assert ok


def test_4_planted_exact_recovery(report):
    N, M, K, S = 1000, 200, 20, 40
    basis = dct_matrix(N)
    good = 0
    for trial in range(100):
        rng = np.random.default_rng([4, trial])
        xs = []
        for _ in range(2):
            x = np.zeros(N)
            x[rng.choice(N, S, replace=False)] = rng.normal(size=S)
            xs.append(x)
        beta = basis.inverse(xs[0]) + 1j * basis.inverse(xs[1])
        A = build_matrix(int(rng.integers(2**32)), M, K, N)
        y = measure(A, beta).values
        cfgs = tuple(RecoveryConfig(S + 10, 1e-6 * float(np.linalg.norm(ch)))
                     for ch in (y.real, y.imag))
        res = recover_beta(A, y, basis, cfgs)
        good += (mse(beta.real, res.beta.real) < 1e-10 and mse(beta.imag, res.beta.imag) < 1e-10)
    ok = report("4 planted exact recovery", good >= 95,
                f"{good}/100 trials with per-channel MSE < 1e-10 (need >= 95)")
    assert ok


@pytest.mark.parametrize("name,protocol,M,K", [
    ("square", SquarePulse(), 220, 30),
    ("random", RandomSmooth(), 200, 20),
])
def test_5_figure2_reproduction(report, name, protocol, M, K):
    res = run_recovery_experiment(ExperimentConfig(protocol=protocol, M=M, K=K))
    e = res.errors
    absolute = e["alpha_re"] < 5e-4 and e["alpha_im"] < 5e-4
    relative = e["alpha_rel_re"] < 1e-3 and e["alpha_rel_im"] < 1e-3
    detail = (f"{name} M={M} K={K}: MSE (Re, Im) = ({e['alpha_re']:.2e}, {e['alpha_im']:.2e}) "
              f"vs 5e-4; relative to max|alpha|^2={e['alpha_peak_sq']:.3g}: "
              f"({e['alpha_rel_re']:.2e}, {e['alpha_rel_im']:.2e}) vs 1e-3")
    ok = report(f"5 figure 2 ({name})", absolute or relative, detail)
    assert ok


@pytest.fixture(scope="module")
def fig3_sweeps():
    cfg = ExperimentConfig(protocol=RandomSmooth(), trials=200)
    return {
        "a": success_sweep(cfg, [220, 260], [10, 20]),
        "b": success_sweep(cfg, [200], [2, 10, 100]),
    }


@pytest.mark.slow
def test_6a_success_converges(report, fig3_sweeps):
    cells = fig3_sweeps["a"].cells
    ok = report("6a success >= 0.99 for M >= 220, K in {10, 20}",
                all(c.probability >= 0.99 for c in cells),
                ", ".join(f"M={c.M} K={c.K}: {c.successes}/{c.trials} "
                          f"(95% CI {c.interval[0]:.3f}-{c.interval[1]:.3f})" for c in cells))
    assert ok


@pytest.mark.slow
def test_6b_interior_maximum_in_K(report, fig3_sweeps):
    sweep = fig3_sweeps["b"]
    p = {K: sweep.cell(200, K).probability for K in (2, 10, 100)}
    ok = report("6b at M=200, P(K=10) > P(K=2) and > P(K=100)",
                p[10] > p[2] and p[10] > p[100],
                ", ".join(f"K={k}: {v:.3f}" for k, v in p.items()))
    assert ok


@pytest.mark.slow
def test_6_noiseless_variant(report):
    # the noise status of the sweeps is unstated; the noiseless run is reported alongside
    cfg = ExperimentConfig(protocol=RandomSmooth(), noise=NoiseSpec(False), trials=200)
    sweep = success_sweep(cfg, [200, 220], [2, 10, 20, 100])
    for c in sweep.cells:
        assert 0 <= c.probability <= 1
    report("6 noiseless sweep (informational)", True,
           ", ".join(f"M={c.M} K={c.K}: {c.probability:.3f}" for c in sweep.cells))


def test_7_bound_calculator(report):
    vals = (min_measurements(50, 1000, 1), min_measurements(40, 1000, 1))
    ok = report("7 bound calculator", vals == (217, 186), f"got {vals}, want (217, 186)")
    assert ok


def test_8_cli_determinism(report, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"protocol": "random", "M": 200, "K": 20}))
    differing = []
    for command in ("simulate", "measure", "recover", "figure2", "sweep"):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{command}{rep}"
            args = [command, "--config", str(cfg), "--out", str(out), "--seed", "11"]
            if command == "sweep":
                args += ["--trials", "2"]
            assert main(args) == 0
            outs.append(out)
        for f in sorted(outs[0].iterdir()):
            if f.suffix in (".csv", ".json") and f.read_bytes() != (outs[1] / f.name).read_bytes():
                differing.append(f"{command}/{f.name}")
    capsys.readouterr()
    printed = []
    for _ in range(2):
        main(["info", "--config", str(cfg), "--seed", "11"])
        printed.append(capsys.readouterr().out)
    if printed[0] != printed[1]:
        differing.append("info/stdout")
    ok = report("8 CLI determinism", not differing,
                "all CSV/JSON outputs byte-identical" if not differing
                else "differs: " + ", ".join(differing))
    assert ok
