import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavitycs.signal_model import (ComplexSeries, DomainError, NoiseSpec, RandomSmooth,
                                   SquarePulse, Tabulated, TimeGrid, accumulate_alpha,
                                   discretize_beta, eval_drive, integrate_alpha)

# midpoint rule with 2e6 nodes on [0, 40] (f = 0.1 throughout), frozen
SQUARE_0_40 = 3.586780454497636 - 1.5164664532641834j
# midpoint rule with 1e7 nodes over the full default window, frozen
SQUARE_FULL = 1.209859749127829 + 1.9910791663710659j

GRID = TimeGrid()


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestDrive:
    def test_square_on_window(self):
        assert eval_drive(SquarePulse(), 10.0) == 0.1

    def test_square_off_window(self):
        assert eval_drive(SquarePulse(), 100.0) == 0.0

    def test_square_half_open(self):
        p = SquarePulse()
        assert p(0.0) == 0.1 and p(40.0) == 0.0 and p(200.0) == 0.1
        assert p.left_limit(40.0) == 0.1 and p.left_limit(200.0) == 0.0

    def test_square_values_and_duty(self):
        p = SquarePulse(amplitude=0.3, period=50.0, duty=0.4, offset=5.0)
        t = np.linspace(0, 500, 200_001)
        f = p(t)
        assert set(np.unique(f)) <= {0.0, 0.3}
        assert np.mean(f > 0) == pytest.approx(0.4, abs=1e-3)

    def test_square_full_duty_is_constant(self):
        assert np.all(SquarePulse(duty=1.0)(np.array([0.0, 13.0, 999.0])) == 0.1)

    @pytest.mark.parametrize("kw", [{"period": 0.0}, {"duty": 0.0}, {"duty": 1.5}])
    def test_square_rejects_bad_parameters(self, kw):
        with pytest.raises(ValueError):
            SquarePulse(**kw)

    def test_noise_is_bounded_and_repeatable(self):
        noise = NoiseSpec(enabled=True, seed=7)
        t = np.linspace(0, 999.5, 4000)
        a = eval_drive(SquarePulse(), t, noise, GRID)
        b = eval_drive(SquarePulse(), t, noise, GRID)
        assert np.array_equal(a, b)
        assert np.all(np.abs(a - SquarePulse()(t)) <= 0.05)

    def test_step_noise_is_held_within_a_step(self):
        noise = NoiseSpec(enabled=True, seed=1)
        f = eval_drive(RandomSmooth(rms=0.0), np.array([3.0, 3.25, 3.9]), noise, GRID)
        assert f[0] == f[1] == f[2]

    def test_noise_draws_are_uniform(self):
        xi = NoiseSpec(enabled=True, seed=3).draws(TimeGrid(0, 1e5, 100_000))
        assert xi.min() >= -1 and xi.max() <= 1
        assert np.mean(xi) == pytest.approx(0, abs=0.01)
        assert np.var(xi) == pytest.approx(1 / 3, rel=0.02)

    def test_noisy_drive_needs_grid(self):
        with pytest.raises(ValueError):
            eval_drive(SquarePulse(), 1.0, NoiseSpec(enabled=True))

    def test_random_smooth_is_seeded(self):
        t = np.linspace(0, 1000, 101)
        assert np.array_equal(RandomSmooth(seed=4)(t), RandomSmooth(seed=4)(t))
        assert not np.array_equal(RandomSmooth(seed=4)(t), RandomSmooth(seed=5)(t))

    def test_random_smooth_rms(self):
        p = RandomSmooth(seed=2, rms=0.2)
        t = np.linspace(0, 1000, 100_001)
        assert np.sqrt(np.mean(p(t) ** 2)) == pytest.approx(0.2, rel=1e-3)
        assert len(set(p.modes.tolist())) == 5 and p.modes.max() <= 8

    def test_tabulated_interpolates(self):
        tab = Tabulated([0.0, 1.0, 0.0], spacing=2.0, start=1.0)
        assert tab(2.0) == pytest.approx(0.5)
        assert tab(3.0) == pytest.approx(1.0)

    def test_tabulated_domain_error(self):
        tab = Tabulated([0.0, 1.0], spacing=1.0)
        with pytest.raises(DomainError):
            eval_drive(tab, 1.5)


class TestIntegrate:
    def test_zero_drive(self):
        assert integrate_alpha(SquarePulse(amplitude=0.0), 0.02, 0, 40, GRID) == 0

    def test_constant_drive_without_detuning(self):
        p = SquarePulse(amplitude=0.7, duty=1.0)
        for method in ("exact", "trapezoid"):
            val = integrate_alpha(p, 0.0, 10, 35.5, GRID, method=method)
            assert val == pytest.approx(0.7 * 25.5, rel=1e-14)

    def test_reversed_bounds(self):
        with pytest.raises(ValueError):
            integrate_alpha(SquarePulse(), 0.02, 5, 4, GRID)

    def test_off_lattice_bounds(self):
        with pytest.raises(ValueError):
            integrate_alpha(SquarePulse(), 0.02, 0, 1.01, GRID)

    @pytest.mark.parametrize("method", ["trapezoid", "exact"])
    def test_square_against_fine_grid_oracle(self, method):
        val = integrate_alpha(SquarePulse(), 0.02, 0, 40, GRID, method=method)
        assert rel(val, SQUARE_0_40) < 1e-6

    def test_full_window_against_fine_grid_oracle(self):
        b = discretize_beta(SquarePulse(), 0.02, GRID)
        assert rel(accumulate_alpha(b).values[-1], SQUARE_FULL) < 1e-9

    def test_exact_requires_clean_square(self):
        with pytest.raises(ValueError):
            integrate_alpha(RandomSmooth(), 0.02, 0, 1, GRID, method="exact")
        with pytest.raises(ValueError):
            integrate_alpha(SquarePulse(), 0.02, 0, 1, GRID, NoiseSpec(True), method="exact")

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            integrate_alpha(SquarePulse(), 0.02, 0, 1, GRID, method="simpson")

    def test_tabulated_linear_drive(self):
        # f(t) = t on [0, 10], delta = 0: integral t^2/2, exact for trapezoid
        grid = TimeGrid(0, 10, 10, 4)
        tab = Tabulated(np.arange(11.0), 1.0)
        assert integrate_alpha(tab, 0.0, 0, 10, grid) == pytest.approx(50.0, rel=1e-14)


class TestSeries:
    def test_zero_beta(self):
        b = discretize_beta(SquarePulse(amplitude=0.0), 0.02, GRID)
        assert np.all(b.values == 0) and np.all(accumulate_alpha(b).values == 0)

    def test_constant_beta(self):
        grid = TimeGrid(0, 20, 10, 4)
        b = discretize_beta(SquarePulse(amplitude=0.3, duty=1.0), 0.0, grid)
        np.testing.assert_allclose(b.values, 0.3 * 2.0, rtol=1e-14)

    def test_prefix_sum_example(self):
        grid = TimeGrid(0, 3, 3, 1)
        a = accumulate_alpha(ComplexSeries([1, 1j, -1], "beta", grid))
        assert a.values.tolist() == [1, 1 + 1j, 1j]
        assert a.kind == "alpha"

    def test_accumulate_rejects_alpha(self):
        grid = TimeGrid(0, 3, 3, 1)
        with pytest.raises(ValueError):
            accumulate_alpha(ComplexSeries([1, 2, 3], "alpha", grid))

    def test_length_must_match_grid(self):
        with pytest.raises(ValueError):
            ComplexSeries([1, 2], "beta", TimeGrid(0, 3, 3, 1))

    @pytest.mark.parametrize("p", [SquarePulse(), RandomSmooth(seed=3)])
    def test_cumulative_sum_matches_direct_quadrature(self, p):
        b = discretize_beta(p, 0.02, GRID)
        alpha = accumulate_alpha(b).values
        for n in (1, 37, 500, 1000):
            direct = integrate_alpha(p, 0.02, 0, float(n), GRID)
            assert rel(alpha[n - 1], direct) < 1e-10

    def test_random_beta_alpha_N(self):
        grid = TimeGrid(0, 1000, 1000, 1)
        rng = np.random.default_rng(0)
        vals = rng.normal(size=1000) + 1j * rng.normal(size=1000)
        alpha = accumulate_alpha(ComplexSeries(vals, "beta", grid))
        assert rel(alpha.values[-1], complex(np.sum(vals))) < 1e-12

    def test_photon_number(self):
        b = discretize_beta(RandomSmooth(seed=1), 0.02, GRID)
        a = accumulate_alpha(b)
        n = a.photon_number()
        assert np.all(n >= 0)
        np.testing.assert_array_equal(n, np.abs(a.values) ** 2)

    def test_noise_shared_across_steps(self):
        noise = NoiseSpec(enabled=True, seed=11)
        p = RandomSmooth(seed=2)
        b = discretize_beta(p, 0.02, GRID, noise)
        direct = integrate_alpha(p, 0.02, 0, 1000, GRID, noise)
        assert rel(accumulate_alpha(b).values[-1], direct) < 1e-10

    def test_substep_noise(self):
        grid = TimeGrid(0, 100, 100, 8)
        noise = NoiseSpec(enabled=True, seed=1, resolution="substep")
        assert noise.draws(grid).size == grid.n_nodes
        b = discretize_beta(SquarePulse(amplitude=0.0), 0.0, grid, noise)
        xi = 0.05 * noise.draws(grid)
        h = 1 / 8
        expect = [h * (xi[8 * n:8 * n + 9].sum() - 0.5 * (xi[8 * n] + xi[8 * n + 8]))
                  for n in range(100)]
        np.testing.assert_allclose(b.values.real, expect, rtol=1e-12, atol=1e-15)

    def test_determinism(self):
        noise = NoiseSpec(enabled=True, seed=5)
        a = discretize_beta(RandomSmooth(seed=9), 0.02, GRID, noise).values
        b = discretize_beta(RandomSmooth(seed=9), 0.02, GRID, noise).values
        assert a.tobytes() == b.tobytes()

    def test_series_csv_round_trip(self, tmp_path):
        grid = TimeGrid(0, 50, 50, 2)
        b = discretize_beta(RandomSmooth(seed=1, t0=0, tN=50), 0.02, grid)
        b.to_csv(tmp_path / "b.csv")
        back = ComplexSeries.from_csv(tmp_path / "b.csv", "beta", grid)
        assert np.array_equal(back.values, b.values)
        assert (tmp_path / "b.csv").read_text().splitlines()[0] == "n,t,Re,Im"

    def test_tabulated_csv_round_trip(self, tmp_path):
        tab = Tabulated(np.sin(np.arange(20) / 3), 0.5, start=-1.0)
        tab.to_csv(tmp_path / "f.csv")
        back = Tabulated.from_csv(tmp_path / "f.csv")
        assert np.array_equal(back.values, tab.values)
        assert (back.spacing, back.start) == (0.5, -1.0)

    def test_tabulated_csv_needs_uniform_times(self, tmp_path):
        (tmp_path / "f.csv").write_text("t,f\n0,1\n1,2\n3,4\n")
        with pytest.raises(ValueError):
            Tabulated.from_csv(tmp_path / "f.csv")


def _grid_triple(draw):
    N = draw(st.integers(3, 400))
    Q = draw(st.integers(1, 16))
    t0 = draw(st.sampled_from([0.0, -7.0, 100.0]))
    tau = draw(st.sampled_from([1.0, 0.5, 2.0]))
    grid = TimeGrid(t0, t0 + N * tau, N, Q)
    j = sorted(draw(st.lists(st.integers(0, N * Q), min_size=3, max_size=3)))
    return grid, grid.node_times(np.array(j))


@st.composite
def triples(draw):
    return _grid_triple(draw)


def _protocol(draw, grid):
    kind = draw(st.sampled_from(["square", "random", "tabulated"]))
    if kind == "square":
        return SquarePulse(amplitude=draw(st.floats(0.01, 1.0)),
                           period=draw(st.floats(1.0, 300.0)),
                           duty=draw(st.floats(0.05, 1.0)),
                           offset=draw(st.floats(-50.0, 50.0)))
    if kind == "random":
        return RandomSmooth(seed=draw(st.integers(0, 2**32 - 1)), t0=grid.t0, tN=grid.tN)
    seed = draw(st.integers(0, 2**32 - 1))
    return Tabulated(np.random.default_rng(seed).normal(size=grid.n_steps + 1),
                     grid.tau_B, grid.t0)


@st.composite
def protocol_and_triple(draw):
    grid, t = _grid_triple(draw)
    return _protocol(draw, grid), grid, t


@settings(max_examples=150, deadline=None)
@given(protocol_and_triple(), st.floats(-0.5, 0.5), st.booleans())
def test_additivity(case, delta, noisy):
    p, grid, (t1, t2, t3) = case
    noise = NoiseSpec(enabled=noisy, seed=3)
    a12 = integrate_alpha(p, delta, t1, t2, grid, noise)
    a23 = integrate_alpha(p, delta, t2, t3, grid, noise)
    a13 = integrate_alpha(p, delta, t1, t3, grid, noise)
    scale = max(abs(a12), abs(a23), abs(a13), 1e-300)
    assert abs(a13 - (a12 + a23)) <= 1e-12 * scale


@settings(max_examples=60, deadline=None)
@given(triples(), st.floats(-0.5, 0.5), st.integers(0, 2**32 - 1))
def test_linearity_in_drive(case, delta, seed):
    grid, (t1, _, t3) = case
    rng = np.random.default_rng(seed)
    f = Tabulated(rng.normal(size=grid.n_steps + 1), grid.tau_B, grid.t0)
    g = Tabulated(rng.normal(size=grid.n_steps + 1), grid.tau_B, grid.t0)
    af = integrate_alpha(f, delta, t1, t3, grid)
    ag = integrate_alpha(g, delta, t1, t3, grid)
    afg = integrate_alpha(f + g, delta, t1, t3, grid)
    scale = max(abs(af), abs(ag), abs(afg), 1e-300)
    assert abs(afg - (af + ag)) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(1, 8), st.integers(1, 40), st.integers(1, 20),
       st.floats(-0.05, 0.05))
def test_closed_form_matches_trapezoid_on_lattice_edges(N, Q, period_steps, on_substeps, delta):
    # edges on the node lattice, so the one-sided trapezoid error is h^2 delta^2 / 12
    grid = TimeGrid(0, N, N, 32)
    on = min(on_substeps, 32 * period_steps) / 32
    p = SquarePulse(amplitude=0.1, period=float(period_steps), duty=on / period_steps,
                    offset=float(Q) / 32)
    exact = discretize_beta(p, delta, grid, method="exact").values
    trap = discretize_beta(p, delta, grid, method="trapezoid").values
    a_e, a_t = np.cumsum(exact)[-1], np.cumsum(trap)[-1]
    scale = max(np.abs(exact).sum(), 1e-300)
    assert abs(a_e - a_t) <= 1e-6 * scale
