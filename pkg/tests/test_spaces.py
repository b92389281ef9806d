import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.errors import ConfigError
from artifact.lattice import FrequencyGrid
from artifact.measures import LevyMeasureSpec, tail_function
from artifact.spaces import (
    MarkedFunction,
    NormSpec,
    approximate_input,
    besov_norm,
    besov_norm_via_J,
    bessel_norm,
    bessel_norm_via_J,
    build_dyadic_system,
    j_transform,
    lp_project,
    norm_equivalence_check,
    norm_report,
)
from artifact.symbols import compute_symbol


@pytest.fixture(scope="module")
def gauge():
    spec = LevyMeasureSpec.isotropic_stable(1.0, 1)
    return tail_function(spec, np.geomspace(1e-8, 1e8, 65))


@pytest.fixture(scope="module")
def grid():
    return FrequencyGrid(1, 2 ** 13, 128.0)


@pytest.fixture(scope="module")
def symbol(grid):
    return compute_symbol(LevyMeasureSpec.isotropic_stable(1.0, 1), grid)


@pytest.fixture(scope="module")
def sys2(grid):
    return build_dyadic_system(2, grid)


@pytest.fixture(scope="module")
def gaussians(grid):
    x = grid.space_axis()
    return [np.exp(-((x / c) ** 2)) for c in np.geomspace(0.2, 2.0, 8)]


class TestDyadicSystem:
    def test_lattice_partition_of_unity(self, sys2):
        total = sys2.blocks.sum(axis=0)
        assert np.max(np.abs(total - 1.0)) == 0.0

    def test_raw_profile_dyadic_sum(self, sys2):
        rng = np.random.default_rng(7)
        radii = np.exp(rng.uniform(np.log(1e-3), np.log(30.0), 100))
        acc = np.zeros(100)
        for j in range(-14, 10):
            acc += sys2.profile(radii * 2.0 ** (-j))
        assert np.max(np.abs(acc - 1.0)) <= 1e-12

    def test_fattened_times_block_is_block(self, sys2):
        for j in range(sys2.n_blocks):
            blk = sys2.block(j)
            assert np.max(np.abs(sys2.fattened(j) * blk - blk)) == 0.0

    def test_fattened_support(self, sys2):
        radii = np.array([0.2499, 0.25, 4.0, 4.0001])
        spread = sys2.profile(radii * 2) + sys2.profile(radii) + sys2.profile(radii / 2)
        assert np.array_equal(spread, np.zeros(4))

    def test_origin_belongs_to_low_block(self, sys2):
        origin = (0,) * sys2.grid.dim
        assert sys2.block(0)[origin] == 1.0
        assert all(sys2.block(j)[origin] == 0.0 for j in range(1, sys2.n_blocks))

    def test_other_bases_partition(self, grid):
        for N in (3, 4):
            s = build_dyadic_system(N, grid)
            assert np.max(np.abs(s.blocks.sum(axis=0) - 1.0)) <= 1e-14
            assert s.j_cap >= 4

    def test_coarse_grid_rejected(self):
        with pytest.raises(ConfigError, match="at least 4"):
            build_dyadic_system(2, FrequencyGrid(1, 64, 4.0))

    def test_base_must_be_integer_above_one(self, grid):
        with pytest.raises(ConfigError):
            build_dyadic_system(1, grid)


class TestProjection:
    def test_spectral_line_hits_single_block(self, grid, sys2):
        f = np.cos(2 * np.pi * 4.0 * grid.space_axis())
        assert np.max(np.abs(lp_project(f, sys2, 2) - f)) <= 1e-12
        for j in (0, 4, 5):
            assert np.max(np.abs(lp_project(f, sys2, j))) <= 1e-12

    def test_constant_lives_in_low_block(self, grid, sys2):
        f = np.ones(grid.size)
        assert np.max(np.abs(lp_project(f, sys2, 0) - f)) <= 1e-12
        for j in range(1, sys2.n_blocks):
            assert np.max(np.abs(lp_project(f, sys2, j))) == 0.0

    def test_reconstruction(self, grid, sys2):
        rng = np.random.default_rng(3)
        spectrum = np.fft.fft(rng.standard_normal(grid.size))
        f = np.real(np.fft.ifft(spectrum * (grid.freq_radius < 20)))
        recon = sum(lp_project(f, sys2, j) for j in range(sys2.n_blocks))
        assert np.max(np.abs(recon - f)) <= 1e-10

    def test_index_past_cap_gives_zero(self, grid, sys2):
        f = np.ones(grid.size)
        assert np.array_equal(lp_project(f, sys2, sys2.j_cap + 3), np.zeros(grid.size))

    def test_shape_mismatch_rejected(self, sys2):
        with pytest.raises(ConfigError):
            lp_project(np.ones(16), sys2, 0)


class TestBesovNorm:
    def test_single_block_equals_lp(self, grid, sys2, gauge):
        f = np.cos(2 * np.pi * 4.0 * grid.space_axis())
        spec = NormSpec(0.0, 2.0, gauge)
        assert besov_norm(f, sys2, spec) == pytest.approx(grid.lp_norm(f, 2.0), abs=1e-10)

    def test_zero_function(self, grid, sys2, gauge):
        assert besov_norm(np.zeros(grid.size), sys2, NormSpec(0.5, 2.0, gauge)) == 0.0

    def test_gaussian_refinement_stable(self, gauge):
        values = []
        for M, Xi in ((2 ** 10, 16.0), (2 ** 12, 32.0)):
            g = FrequencyGrid(1, M, Xi)
            s = build_dyadic_system(2, g)
            f = np.exp(-(g.space_axis() ** 2))
            values.append(besov_norm(f, s, NormSpec(0.5, 2.0, gauge)))
        assert np.isfinite(values[0])
        assert abs(values[1] / values[0] - 1.0) < 0.01

    def test_weights_nondecreasing_for_positive_s(self, gauge):
        spec = NormSpec(0.5, 2.0, gauge)
        wts = [spec.weight(j, 2) for j in range(10)]
        assert all(b >= a for a, b in zip(wts, wts[1:]))
        assert all(v > 0 for v in wts)

    def test_truncation_warning(self, grid, sys2, gauge):
        f = np.cos(2 * np.pi * 100.0 * grid.space_axis())
        with pytest.warns(RuntimeWarning, match="truncated"):
            besov_norm(f, sys2, NormSpec(0.5, 2.0, gauge))

    def test_parameter_validation(self, gauge):
        with pytest.raises(ConfigError):
            NormSpec(0.5, 1.0, gauge)
        with pytest.raises(ConfigError):
            NormSpec(0.5, 2.0, gauge, q=0.5)
        with pytest.raises(ConfigError):
            NormSpec(0.5, 2.0, gauge, r=1.7)


class TestBesselNorm:
    def test_order_zero_via_J_is_lp(self, grid, symbol, gauge, gaussians):
        spec = NormSpec(0.0, 2.0, gauge)
        f = gaussians[3]
        assert bessel_norm_via_J(f, symbol, spec) == pytest.approx(
            grid.lp_norm(f, 2.0), rel=1e-12
        )

    def test_plancherel_oracle_at_p2(self, grid, symbol, gauge, gaussians):
        f = gaussians[3]
        val = bessel_norm_via_J(f, symbol, NormSpec(0.5, 2.0, gauge))
        fhat = grid.forward(f.astype(complex))
        direct = np.sqrt(
            np.sum(np.abs((1 - symbol.values) ** 0.5 * fhat) ** 2) * grid.freq_cell_volume
        )
        assert val == pytest.approx(direct, rel=1e-10)

    def test_single_block_ratio_matches_weight_oracle(self, grid, sys2, symbol, gauge):
        f = np.cos(2 * np.pi * 8.0 * grid.space_axis())
        spec = NormSpec(0.5, 2.0, gauge)
        ratio = bessel_norm(f, sys2, spec) / bessel_norm_via_J(f, symbol, spec)
        node = np.argmin(np.abs(grid.freq_axis() - 8.0))
        oracle = spec.weight(3, 2) / abs((1 - symbol.values[node]) ** 0.5)
        assert ratio == pytest.approx(oracle, rel=1e-10)

    def test_isomorphism_composition(self, symbol, gauge, gaussians):
        f = gaussians[3]
        shifted = j_transform(f, symbol, 0.7)
        lhs = bessel_norm_via_J(shifted, symbol, NormSpec(0.5, 2.0, gauge))
        rhs = bessel_norm_via_J(f, symbol, NormSpec(1.2, 2.0, gauge))
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_grid_mismatch_rejected(self, symbol):
        with pytest.raises(ConfigError):
            j_transform(np.ones(32), symbol, 0.5)


class TestMarkedFunctions:
    def test_single_mark_weight_scales_norm(self, grid, sys2, symbol, gauge, gaussians):
        f = gaussians[4]
        marked = MarkedFunction(grid, f[None, :], (4.0,))
        plain_spec = NormSpec(0.5, 2.0, gauge)
        mark_spec = NormSpec(0.5, 2.0, gauge, r=2.0)
        for got, want in (
            (besov_norm(marked, sys2, mark_spec), besov_norm(f, sys2, plain_spec)),
            (bessel_norm(marked, sys2, mark_spec), bessel_norm(f, sys2, plain_spec)),
            (bessel_norm_via_J(marked, symbol, mark_spec), bessel_norm_via_J(f, symbol, plain_spec)),
        ):
            assert got == pytest.approx(2.0 * want, rel=1e-12)

    def test_split_marks_match_unmarked(self, grid, sys2, gauge, gaussians):
        f = gaussians[4]
        marked = MarkedFunction(grid, np.stack([f, f]), (0.5, 0.5))
        got = besov_norm(marked, sys2, NormSpec(0.5, 2.0, gauge, r=2.0))
        want = besov_norm(f, sys2, NormSpec(0.5, 2.0, gauge))
        assert got == pytest.approx(want, rel=1e-12)

    def test_mark_axis_validation(self, grid):
        with pytest.raises(ConfigError):
            MarkedFunction(grid, np.ones(grid.size), (1.0,))
        with pytest.raises(ConfigError):
            MarkedFunction(grid, np.ones((2, grid.size)), (1.0,))
        with pytest.raises(ConfigError):
            MarkedFunction(grid, np.ones((2, grid.size)), (1.0, -1.0))

    def test_r_and_markedness_must_agree(self, grid, sys2, gauge, gaussians):
        marked = MarkedFunction(grid, gaussians[0][None, :], (1.0,))
        with pytest.raises(ConfigError):
            besov_norm(marked, sys2, NormSpec(0.5, 2.0, gauge))
        with pytest.raises(ConfigError):
            besov_norm(gaussians[0], sys2, NormSpec(0.5, 2.0, gauge, r=2.0))


class TestNormEquivalence:
    def test_band_bounded_and_stable_across_bases(self, grid, symbol, gauge, gaussians):
        spec = NormSpec(0.5, 2.0, gauge)
        bands = {}
        for N in (2, 3, 4):
            rep = norm_equivalence_check(gaussians, build_dyadic_system(N, grid), spec, symbol)
            lo, hi = rep["bessel_band"]
            assert 0.0 < lo <= hi
            assert hi / lo <= 10.0
            lo_b, hi_b = rep["besov_band"]
            assert hi_b / lo_b <= 10.0
            bands[N] = rep["bessel_band"]
        for N in (3, 4):
            assert abs(bands[N][0] / bands[2][0] - 1.0) < 0.1
            assert abs(bands[N][1] / bands[2][1] - 1.0) < 0.1

    def test_band_stable_under_refinement(self, grid, symbol, gauge, gaussians, sys2):
        spec = NormSpec(0.5, 2.0, gauge)
        coarse = norm_equivalence_check(gaussians, sys2, spec, symbol)
        fine_grid = FrequencyGrid(1, 2 ** 14, 128.0)
        fine_sym = compute_symbol(LevyMeasureSpec.isotropic_stable(1.0, 1), fine_grid)
        x = fine_grid.space_axis()
        fine_family = [np.exp(-((x / c) ** 2)) for c in np.geomspace(0.2, 2.0, 8)]
        fine = norm_equivalence_check(fine_family, build_dyadic_system(2, fine_grid), spec, fine_sym)
        for key in ("bessel_band", "besov_band"):
            assert abs(fine[key][0] / coarse[key][0] - 1.0) < 0.1
            assert abs(fine[key][1] / coarse[key][1] - 1.0) < 0.1

    def test_zero_smoothness_besov_band_is_unit(self, grid, sys2, symbol, gauge, gaussians):
        rep = norm_equivalence_check(gaussians, sys2, NormSpec(0.0, 2.0, gauge), symbol)
        assert rep["besov_band"][0] == pytest.approx(1.0, abs=1e-10)
        assert rep["besov_band"][1] == pytest.approx(1.0, abs=1e-10)

    def test_embedding_ratio_bounded(self, grid, sys2, gauge, gaussians):
        spec = NormSpec(0.5, 3.0, gauge)
        ratios = [besov_norm(f, sys2, spec) / bessel_norm(f, sys2, spec) for f in gaussians]
        assert max(ratios) <= 3.0
        assert min(ratios) >= 1.0 / 3.0

    def test_empty_family_rejected(self, grid, sys2, symbol, gauge):
        with pytest.raises(ConfigError):
            norm_equivalence_check(
                [np.zeros(grid.size)], sys2, NormSpec(0.5, 2.0, gauge), symbol
            )


@pytest.fixture(scope="module")
def band_limited(grid):
    rng = np.random.default_rng(11)
    spectrum = np.fft.fft(rng.standard_normal(grid.size))
    return np.real(np.fft.ifft(spectrum * (grid.freq_radius < 60)))


class TestApproximateInput:
    def test_full_order_reconstructs(self, sys2, band_limited):
        full = approximate_input(band_limited, sys2.j_cap, sys2)
        assert np.max(np.abs(full - band_limited)) <= 1e-10

    def test_norm_bound_three(self, sys2, gauge, band_limited):
        spec = NormSpec(0.5, 2.0, gauge)
        base = besov_norm(band_limited, sys2, spec)
        for n in range(sys2.j_cap + 1):
            trunc = approximate_input(band_limited, n, sys2)
            assert besov_norm(trunc, sys2, spec) <= 3.0 * base

    def test_convergence(self, sys2, gauge, band_limited):
        spec = NormSpec(0.5, 2.0, gauge)
        early = besov_norm(approximate_input(band_limited, 2, sys2) - band_limited, sys2, spec)
        later = besov_norm(approximate_input(band_limited, 4, sys2) - band_limited, sys2, spec)
        assert later < early
        tail = approximate_input(band_limited, 6, sys2) - band_limited
        assert np.max(np.abs(tail)) <= 1e-10

    def test_single_block_identity(self, grid, sys2):
        f = np.cos(2 * np.pi * 4.0 * grid.space_axis())
        assert np.max(np.abs(approximate_input(f, 3, sys2) - f)) <= 1e-10

    def test_mark_truncation(self, grid, sys2, gaussians):
        f = gaussians[4]
        marked = MarkedFunction(grid, np.stack([f, 2 * f, 3 * f]), (1.0, 1.0, 1.0))
        cut = approximate_input(marked, 2, sys2)
        assert np.max(np.abs(cut.values[2])) == 0.0
        assert np.max(np.abs(cut.values[1])) > 0.0
        full = approximate_input(marked, 20, sys2)
        assert np.max(np.abs(full.values - marked.values)) <= 1e-10

    def test_negative_order_rejected(self, sys2, gaussians):
        with pytest.raises(ConfigError):
            approximate_input(gaussians[0], -1, sys2)


class TestReports:
    def test_report_fields(self, grid, sys2, symbol, gauge, gaussians):
        spec = NormSpec(0.5, 2.0, gauge)
        for kind in ("besov", "bessel", "besov_via_J", "bessel_via_J"):
            rep = norm_report(kind, gaussians[3], sys2, spec, symbol=symbol)
            assert rep["norm_kind"] == kind
            assert rep["N"] == 2
            assert rep["value"] > 0.0
            assert 0.0 <= rep["truncation_fraction"] <= 1.0

    def test_unknown_kind_rejected(self, sys2, gauge, gaussians):
        with pytest.raises(ConfigError):
            norm_report("sobolev", gaussians[0], sys2, NormSpec(0.5, 2.0, gauge))


class TestHomogeneity:
    @given(
        c=st.floats(min_value=0.1, max_value=100.0),
        width=st.floats(min_value=0.3, max_value=3.0),
    )
    def test_norms_scale_linearly(self, c, width, gauge):
        grid = FrequencyGrid(1, 1024, 16.0)
        sys_n = build_dyadic_system(2, grid)
        spec = NormSpec(0.5, 2.0, gauge)
        f = np.exp(-((grid.space_axis() / width) ** 2))
        for norm in (besov_norm, bessel_norm):
            base = norm(f, sys_n, spec)
            assert norm(c * f, sys_n, spec) == pytest.approx(c * base, rel=1e-12)
