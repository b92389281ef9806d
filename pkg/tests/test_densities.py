import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.densities import (
    DensityField,
    SignedMeasurePair,
    apply_operator,
    combine,
    compose,
    decay_moment_check,
    density,
    derivative,
    fractional_generator,
    generator,
    identity_op,
    kernel_difference_statistics,
    scaling_identity_check,
)
from artifact.errors import ConfigError, NumericalError
from artifact.lattice import FrequencyGrid
from artifact.measures import (
    LevyMeasureSpec,
    Ray,
    rescale,
    symmetrize,
    tail_function,
)
from artifact.orv import generalized_inverse
from artifact.persist import load_array
from artifact.symbols import compute_symbol, truncated_symbol

PI = np.pi


def stable(sigma, dim=1, **kw):
    return LevyMeasureSpec.isotropic_stable(sigma, dim, **kw)


def tabulated(slopes, r_grid, sigma, scale=1.0, dirs=None, wts=None):
    dv = [1.0]
    for s, a, b in zip(slopes, r_grid[:-1], r_grid[1:]):
        dv.append(dv[-1] * (b / a) ** (-s))
    return LevyMeasureSpec.tabulated_tail(
        r_grid, np.asarray(dv) * scale, dim=1, sigma=sigma, directions=dirs, weights=wts
    )


def multipiece_symmetric():
    r = np.array([1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6])
    return tabulated([1.3, 1.1, 0.7, 1.6, 1.2, 1.8], r, sigma=1.3, scale=1e3)


def multipiece_low():
    r = np.array([1e-4, 1e-2, 1.0, 1e2, 1e4])
    return tabulated([0.7, 0.5, 0.9, 1.7], r, 0.7, 50.0, [[1.0], [-1.0]], [0.75, 0.25])


@pytest.fixture(scope="module")
def cauchy_symbol():
    return compute_symbol(stable(1.0), FrequencyGrid(1, 2 ** 14, 32.0))


class TestDensity:
    def test_cauchy_closed_form(self, cauchy_symbol):
        p = density(cauchy_symbol, 1.0)
        x = p.grid.space_axis()
        near = np.abs(x) <= 10.0
        want = 1.0 / (PI ** 2 + x[near] ** 2)
        assert np.max(np.abs(p.values[near] - want)) <= 1e-4
        assert p.kind == "density"

    def test_unit_mass(self, cauchy_symbol):
        assert density(cauchy_symbol, 1.0).mass() == pytest.approx(1.0, abs=1e-6)
        grid = FrequencyGrid(1, 4096, 32.0)
        for spec, t in ((stable(0.7), 1.0), (multipiece_low(), 8.0)):
            p = density(compute_symbol(spec, grid), t)
            assert p.mass() == pytest.approx(1.0, abs=1e-6)
            assert np.min(p.values) >= -1e-8

    def test_semigroup_convolution(self, cauchy_symbol):
        grid = cauchy_symbol.grid
        p1 = density(cauchy_symbol, 0.4)
        p2 = density(cauchy_symbol, 0.9)
        p3 = density(cauchy_symbol, 1.3)
        conv = grid.convolve(p1.values, p2.values)
        assert np.max(np.abs(conv.real - p3.values)) <= 1e-8

    def test_under_resolved_grid_names_extent(self):
        sym = compute_symbol(stable(0.5), FrequencyGrid(1, 1024, 32.0))
        with pytest.raises(NumericalError, match="extent"):
            density(sym, 0.01)

    def test_truncated_symbol_rejected(self):
        grid = FrequencyGrid(1, 256, 16.0)
        field = truncated_symbol(rescale(stable(1.0), 1.0), grid)
        with pytest.raises(ConfigError):
            density(field, 1.0)

    def test_time_must_be_positive(self, cauchy_symbol):
        with pytest.raises(ConfigError):
            density(cauchy_symbol, 0.0)

    def test_2d_density(self):
        spec = stable(1.0, dim=2, n_directions=32)
        p = density(compute_symbol(spec, FrequencyGrid(2, 128, 8.0)), 1.0)
        assert p.mass() == pytest.approx(1.0, abs=1e-6)
        assert np.min(p.values) >= -1e-8

    def test_constructor_guards(self):
        grid = FrequencyGrid(1, 8, 1.0)
        flat = np.full(8, 0.25)
        with pytest.raises(ConfigError):
            DensityField(grid, 1.0, flat.astype(complex), "density")
        with pytest.raises(ConfigError):
            DensityField(grid, 1.0, flat, "other")
        with pytest.raises(NumericalError):
            DensityField(grid, 1.0, np.full(8, 0.2), "density")

    def test_ringing_warns_but_constructs(self):
        grid = FrequencyGrid(1, 8, 1.0)
        vals = np.full(8, 0.25)
        vals[3] = -2e-8
        vals[4] += 0.25 + 2e-8
        with pytest.warns(RuntimeWarning, match="ringing"):
            field = DensityField(grid, 1.0, vals, "density")
        assert field.mass() == pytest.approx(1.0, abs=1e-9)

    def test_save_round_trip(self, cauchy_symbol, tmp_path):
        p = density(cauchy_symbol, 2.0)
        p.save(tmp_path / "p")
        arr, meta = load_array(tmp_path / "p")
        assert np.array_equal(arr, p.values)
        assert meta["t"] == 2.0
        assert meta["op"] == "identity"
        assert meta["lattice"]["M"] == 2 ** 14
        p.save(tmp_path / "q")
        assert (tmp_path / "p.bin").read_bytes() == (tmp_path / "q.bin").read_bytes()

    def test_radial_csv(self, cauchy_symbol, tmp_path):
        p = density(cauchy_symbol, 1.0)
        path = tmp_path / "profile.csv"
        p.radial_profile_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "value"]
        assert len(rows) == 1 + p.grid.size
        xs = np.array([float(r[0]) for r in rows[1:]])
        assert np.all(np.diff(xs) > 0)


class TestApplyOperator:
    def test_identity_equals_density(self, cauchy_symbol):
        p = density(cauchy_symbol, 1.0)
        q = apply_operator(cauchy_symbol, 1.0, identity_op())
        assert np.array_equal(p.values, q.values)
        assert q.kind == "density"

    def test_first_derivative_is_odd(self, cauchy_symbol):
        k = apply_operator(cauchy_symbol, 1.0, derivative((1,)))
        assert k.kind == "kernel"
        assert abs(np.sum(k.values)) <= 1e-8
        assert np.max(np.abs(k.values + k.grid.reflect(k.values))) <= 1e-12

    def test_generator_kernel_c_over_t(self, cauchy_symbol):
        fitted = []
        for t in (0.5, 1.0, 2.0, 4.0):
            k = apply_operator(cauchy_symbol, t, generator(stable(1.0)))
            fitted.append(k.abs_integral() * t)
        assert max(fitted) / min(fitted) - 1.0 <= 0.2

    def test_linearity(self, cauchy_symbol):
        op1 = derivative((1,))
        op2 = generator(stable(1.0))
        k1 = apply_operator(cauchy_symbol, 1.0, op1)
        k2 = apply_operator(cauchy_symbol, 1.0, op2)
        mix = apply_operator(cauchy_symbol, 1.0, combine([2.0, -0.5], [op1, op2]))
        want = 2.0 * k1.values - 0.5 * k2.values
        assert np.max(np.abs(mix.values - want)) <= 1e-12 * np.max(np.abs(want))

    def test_compose_matches_higher_derivative(self, cauchy_symbol):
        twice = apply_operator(cauchy_symbol, 1.0, compose(derivative((1,)), derivative((1,))))
        direct = apply_operator(cauchy_symbol, 1.0, derivative((2,)))
        scale = np.max(np.abs(direct.values))
        assert np.max(np.abs(twice.values - direct.values)) <= 1e-12 * scale

    def test_fractional_delta_one_is_symmetrized_generator(self):
        spec = multipiece_low()
        sym = compute_symbol(spec, FrequencyGrid(1, 4096, 32.0))
        frac = apply_operator(sym, 8.0, fractional_generator(spec, 1.0))
        plain = apply_operator(sym, 8.0, generator(symmetrize(spec)))
        assert np.array_equal(frac.values, plain.values)

    def test_signed_pair(self, cauchy_symbol):
        plus = stable(1.0)
        half = LevyMeasureSpec(
            "stable", 1, 1.0, tuple(Ray(r.direction, r.tail.scaled(1.0, 0.5)) for r in plus.rays)
        )
        pair = SignedMeasurePair(plus, half)
        k = apply_operator(cauchy_symbol, 1.0, generator(pair))
        kp = apply_operator(cauchy_symbol, 1.0, generator(plus))
        km = apply_operator(cauchy_symbol, 1.0, generator(half))
        scale = np.max(np.abs(k.values))
        assert np.max(np.abs(k.values - (kp.values - km.values))) <= 1e-12 * scale
        bound = pair.moment_bound(1.5, 0.5, np.geomspace(0.1, 10.0, 5))
        assert np.isfinite(bound) and bound > 0.0

    def test_signed_pair_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            SignedMeasurePair(stable(0.7), stable(1.3))
        with pytest.raises(ConfigError):
            SignedMeasurePair(stable(1.0, dim=1), stable(1.0, dim=2, n_directions=8))

    def test_growth_without_decay_errors(self):
        sym = compute_symbol(stable(0.5), FrequencyGrid(1, 512, 8.0))
        with pytest.raises(NumericalError, match="under-resolved"):
            apply_operator(sym, 0.1, derivative((2,)))


@pytest.fixture(scope="module")
def stable_setup():
    spec = stable(1.0)
    w = tail_function(spec, np.geomspace(1e-6, 1e6, 49))
    return spec, w, generalized_inverse(w)


class TestScalingIdentity:
    def test_inverse_gauge_is_doubling(self, stable_setup):
        _, _, a = stable_setup
        assert a(1.0) == pytest.approx(2.0, rel=1e-8)

    def test_stable_sweep(self, stable_setup):
        spec, w, a = stable_setup
        rep = scaling_identity_check(
            spec, w, a, [0.25, 1.0, 4.0], grid=FrequencyGrid(1, 2 ** 17, 8.0)
        )
        assert rep["max_linf_rel"] <= 1e-3
        assert rep["max_frac_linf_rel"] <= 1e-3

    def test_unit_scale_is_interpolation_exact(self, stable_setup):
        spec, w, a = stable_setup
        t_unit = float(w.w_at(1.0))
        rep = scaling_identity_check(spec, w, a, [t_unit], grid=FrequencyGrid(1, 2 ** 16, 4.0))
        assert rep["max_linf_rel"] <= 1e-10

    def test_stable_refinement_quarters(self, stable_setup):
        spec, w, a = stable_setup
        coarse = scaling_identity_check(spec, w, a, [1.0], grid=FrequencyGrid(1, 2 ** 19, 4.0))
        fine = scaling_identity_check(spec, w, a, [1.0], grid=FrequencyGrid(1, 2 ** 20, 8.0))
        assert coarse["max_linf_rel"] / fine["max_linf_rel"] >= 4.0
        assert coarse["max_frac_linf_rel"] / fine["max_frac_linf_rel"] >= 4.0

    def test_tabulated_within_percent_and_halves(self):
        spec = multipiece_symmetric()
        w = tail_function(spec, np.geomspace(1e-6, 1e6, 49))
        a = generalized_inverse(w)
        w1 = float(w.w_at(1.0))
        coarse = scaling_identity_check(
            spec, w, a, [0.5 * w1, 2.0 * w1], grid=FrequencyGrid(1, 2 ** 15, 32.0)
        )
        assert coarse["max_linf_rel"] <= 1e-2
        assert coarse["max_frac_linf_rel"] <= 1e-2
        fine = scaling_identity_check(
            spec, w, a, [0.5 * w1], grid=FrequencyGrid(1, 2 ** 17, 64.0)
        )
        assert coarse["per_t"][0]["linf_rel"] / fine["per_t"][0]["linf_rel"] >= 2.0

    def test_window_leaving_support_errors(self, stable_setup):
        spec, w, _ = stable_setup
        with pytest.raises(ConfigError, match="window"):
            scaling_identity_check(
                spec, w, lambda t: 1e-5, [1.0], grid=FrequencyGrid(1, 4096, 8.0)
            )


@pytest.fixture(scope="module")
def unit_density(cauchy_symbol):
    return density(cauchy_symbol, 1.0)


class TestDecayMoments:
    def test_statistics_finite_and_R_flat(self, unit_density):
        rep = decay_moment_check(unit_density, 0.5, [0], spec=stable(1.0))
        assert np.isfinite(rep["per_k"][0]["statistic"])
        assert rep["R_sweep_relative_spread"][0] <= 1e-8
        assert not rep["expected_divergence"][0]

    def test_derivative_vanishes_at_origin(self, unit_density):
        rep = decay_moment_check(unit_density, 0.5, [(1,)])
        assert abs(rep["per_k"][0]["value_at_origin"]) <= 1e-8
        assert rep["per_k"][0]["sup"] > 0.0

    def test_supercritical_weight_flags_divergence(self, unit_density):
        rep = decay_moment_check(unit_density, 1.5, [0], spec=stable(1.0))
        assert rep["extent_doubling_growth"][0] >= 1.2
        assert rep["expected_divergence"][0]

    def test_kernel_field_rejected_for_sweep(self, unit_density):
        sym = compute_symbol(stable(1.0), unit_density.grid)
        k = apply_operator(sym, 1.0, derivative((1,)))
        with pytest.raises(ConfigError):
            decay_moment_check(k, 0.5, [0], spec=stable(1.0))

    def test_alpha_must_be_positive(self, unit_density):
        with pytest.raises(ConfigError):
            decay_moment_check(unit_density, -0.5, [0])


class TestKernelDifferences:
    def test_zero_shifts_give_zero(self, cauchy_symbol):
        spec, sym = stable(1.0), cauchy_symbol
        space, time = kernel_difference_statistics(
            sym, fractional_generator(spec, 0.5), 1.0, 0.0, [0.0]
        )
        assert space == 0.0 and time == 0.0

    def test_space_difference_linear_in_y(self, cauchy_symbol, stable_setup):
        spec, sym = stable(1.0), cauchy_symbol
        _, _, a = stable_setup
        op = fractional_generator(spec, 0.5)
        fitted = []
        for y in (0.05, 0.1, 0.2):
            space, _ = kernel_difference_statistics(sym, op, 1.0, 0.0, [y])
            fitted.append(space * (1.0 ** 0.5) * a(1.0) / y)
        assert max(fitted) / min(fitted) - 1.0 <= 0.25

    def test_time_difference_grows_with_shift(self, cauchy_symbol):
        sym = cauchy_symbol
        op = generator(stable(1.0))
        _, t1 = kernel_difference_statistics(sym, op, 1.0, 0.1, [0.0])
        _, t3 = kernel_difference_statistics(sym, op, 1.0, 0.3, [0.0])
        assert 0.0 < t1 < t3

    def test_shift_beyond_time_rejected(self, cauchy_symbol):
        with pytest.raises(ConfigError):
            kernel_difference_statistics(cauchy_symbol, identity_op(), 1.0, 1.5, [0.0])


@st.composite
def heavy_symmetric_tabulated(draw):
    sigma = draw(st.sampled_from([1.3, 1.6]))
    interior = draw(st.lists(st.floats(1.0, 1.8), min_size=2, max_size=2))
    slopes = [sigma] + interior + [1.9]
    knots = np.geomspace(1e-4, 1e4, len(slopes) + 1)
    vals = [1.0]
    for g, a, b in zip(slopes, knots[:-1], knots[1:]):
        vals.append(vals[-1] * (a / b) ** g)
    return LevyMeasureSpec.tabulated_tail(knots, np.asarray(vals) * 10.0, 1, sigma)


class TestDensityProperties:
    @given(heavy_symmetric_tabulated())
    def test_mass_and_floor(self, spec):
        grid = FrequencyGrid(1, 2048, 8.0)
        field = compute_symbol(spec, grid)
        t = 32.0 / -float(field.values.real[grid.size // 2])
        p = density(field, t)
        assert p.mass() == pytest.approx(1.0, abs=1e-9)
        assert np.min(p.values) >= -1e-8
