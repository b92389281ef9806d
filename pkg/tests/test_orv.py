import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.errors import ConfigError, NumericalError
from artifact.measures import TailProfile
from artifact.orv import (
    ORVIndices,
    check_assumption_A,
    estimate_indices,
    generalized_inverse,
    ratio_functions,
    scaling_bounds,
    verify_karamata_integrals,
)

GRID = np.geomspace(1e-4, 1e4, 65)


def profile(fn):
    return TailProfile.from_w_function(fn, GRID)


def half_r():
    return profile(lambda r: r / 2.0)


def two_slope():
    return profile(lambda r: np.where(r <= 1.0, r ** 0.5, r ** 1.5))


def sin_log():
    return profile(lambda r: r * (2.0 + np.sin(np.log(r))))


class TestRatioFunctions:
    def test_linear_gauge_ratio_is_identity(self):
        r1, r2 = ratio_functions(half_r())
        for x in (0.5, 2.0):
            assert r1(x) == pytest.approx(x, rel=1e-12)
            assert r2(x) == pytest.approx(x, rel=1e-12)

    def test_two_slope_ratios(self):
        r1, r2 = ratio_functions(two_slope())
        assert r1(2.0) == pytest.approx(2.0 ** 0.5, rel=1e-12)
        assert r2(2.0) == pytest.approx(2.0 ** 1.5, rel=1e-12)

    def test_ratio_at_one_is_one(self):
        for prof in (half_r(), two_slope(), sin_log()):
            r1, r2 = ratio_functions(prof)
            assert r1(1.0) == pytest.approx(1.0, rel=1e-13)
            assert r2(1.0) == pytest.approx(1.0, rel=1e-13)

    def test_divergent_ratio_rejected(self):
        bad = profile(lambda r: np.exp(np.log(r) ** 2 / 10.0))
        with pytest.raises(NumericalError, match="diverges"):
            ratio_functions(bad)

    def test_reports_eps_range(self):
        r1, r2 = ratio_functions(half_r())
        lo, hi = r1.eps_range
        assert lo < hi <= 1.0
        lo2, hi2 = r2.eps_range
        assert 1.0 <= lo2 < hi2


class TestIndices:
    def test_power_law_indices(self):
        for sigma in (0.5, 1.0, 1.4):
            idx = estimate_indices(profile(lambda r, s=sigma: r ** s))
            for v in (idx.p1, idx.q1, idx.p2, idx.q2):
                assert v == pytest.approx(sigma, abs=0.02)

    def test_scale_invariance_to_1e12(self):
        vals = []
        for c in (0.1, 1.0, 10.0):
            idx = estimate_indices(profile(lambda r, cc=c: cc * r))
            vals.append((idx.p1, idx.q1, idx.p2, idx.q2))
        for v in vals[1:]:
            assert np.allclose(v, vals[0], atol=1e-12)

    def test_two_slope_indices(self):
        idx = estimate_indices(two_slope())
        assert idx.p1 == pytest.approx(0.5, abs=0.02)
        assert idx.q1 == pytest.approx(0.5, abs=0.02)
        assert idx.p2 == pytest.approx(1.5, abs=0.02)
        assert idx.q2 == pytest.approx(1.5, abs=0.02)

    def test_oscillating_gauge_interval_contains_brute_force(self):
        prof = sin_log()
        idx = estimate_indices(prof)
        assert idx.p1 <= idx.q1
        # brute-force limsup over a dense million-point eps sweep
        eps = np.geomspace(1e-9, 1e-2, 1_000_000)
        w_eps = prof.w_at(eps)
        for x in (1e-3, 1e3):
            r1x = float(np.max(prof.w_at(eps * x) / w_eps))
            bf = math.log(r1x) / math.log(x)
            assert idx.p1 - idx.half_width - 0.05 <= bf <= idx.q1 + idx.half_width + 0.05

    def test_ordering_enforced(self):
        with pytest.raises(ConfigError):
            ORVIndices(1.5, 1.0, 1.0, 1.0)
        with pytest.raises(ConfigError):
            ORVIndices(-0.1, 1.0, 0.5, 1.0)


class TestAssumptionA:
    def test_sigma_one_all_ones_passes(self):
        rep = check_assumption_A(ORVIndices(1.0, 1.0, 1.0, 1.0), 1.0)
        assert rep["pass"]

    def test_strict_inclusion_passes(self):
        rep = check_assumption_A(ORVIndices(0.5, 0.5, 0.5, 0.5), 0.5)
        assert rep["pass"]

    def test_fail_on_p1(self):
        rep = check_assumption_A(ORVIndices(0.9, 1.6, 1.2, 1.8), 1.5)
        assert not rep["pass"]
        assert any("p1" in name for name in rep["failing"])

    @given(
        st.floats(0.05, 1.9),
        st.floats(0.0, 0.4),
        st.floats(0.0, 0.4),
        st.sampled_from([0.5, 1.5]),
    )
    def test_enlarging_interval_never_rescues(self, p, dq, widen, sigma):
        # the window clauses away from order one only shrink under widening;
        # at order one the containment requirement 1 in [p, q] breaks this
        q = p + dq
        base = ORVIndices(p, q, p, q)
        big = ORVIndices(max(p - widen, 1e-3), q + widen, max(p - widen, 1e-3), q + widen)
        if not check_assumption_A(base, sigma)["pass"]:
            assert not check_assumption_A(big, sigma)["pass"]


class TestScalingBounds:
    def test_linear_gauge_brackets_one(self):
        idx = ORVIndices(1.0, 1.0, 1.0, 1.0)
        c1, c2 = scaling_bounds(idx, half_r(), 1.5, 0.5)
        assert c1 <= 1.0 + 1e-12 <= c2 + 1e-12
        assert np.isfinite(c1) and np.isfinite(c2)

    def test_precondition_enforced(self):
        idx = ORVIndices(1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ConfigError, match="alpha1"):
            scaling_bounds(idx, half_r(), 0.9, 0.5)
        with pytest.raises(ConfigError, match="alpha2"):
            scaling_bounds(idx, half_r(), 1.5, 1.2)

    def test_two_slope_refinement_stable(self):
        prof = two_slope()
        idx = estimate_indices(prof)
        c1a, c2a = scaling_bounds(idx, prof, 1.7, 0.3)
        c1b, c2b = scaling_bounds(idx, prof, 1.7, 0.3, n_x=200, n_ratio=201)
        assert abs(c1b - c1a) / c1a < 0.05
        assert abs(c2b - c2a) / c2a < 0.05


class TestGeneralizedInverse:
    def test_linear_inverse(self):
        a = generalized_inverse(half_r())
        assert a(3.0) == pytest.approx(6.0, rel=1e-8)

    def test_power_inverse(self):
        c, sigma = 0.7, 1.3
        a = generalized_inverse(profile(lambda r: c * r ** sigma))
        for t in (0.01, 1.0, 50.0):
            assert a(t) == pytest.approx((t / c) ** (1 / sigma), rel=1e-8)

    def test_inverse_at_w_of_one(self):
        prof = two_slope()
        a = generalized_inverse(prof)
        assert a(float(prof.w_at(1.0))) == pytest.approx(1.0, rel=1e-8)

    def test_indices_of_inverse_reciprocal(self):
        prof = two_slope()
        a = generalized_inverse(prof)
        idx_a = estimate_indices(a.as_profile(GRID))
        # gauge exponent 0.5 at zero inverts to 2, 1.5 at infinity to 2/3
        assert idx_a.p1 == pytest.approx(2.0, abs=0.05)
        assert idx_a.q2 == pytest.approx(2.0 / 3.0, abs=0.05)

    def test_index_bounds_of_inverse(self):
        prof = two_slope()
        idx_w = estimate_indices(prof)
        idx_a = estimate_indices(generalized_inverse(prof).as_profile(GRID))
        assert idx_a.p1 >= 1.0 / idx_w.q1 - 0.05
        assert idx_a.q1 <= 1.0 / idx_w.p1 + 0.05

    def test_plateau_rejected(self):
        # gauge with a genuinely flat stretch: w = r below 1, 1 on [1, 2], r/2 above
        def w_fn(r):
            r = np.asarray(r, dtype=float)
            return np.where(r < 1.0, r, np.where(r < 2.0, 1.0, r / 2.0))
        with pytest.raises(ConfigError, match="plateau|strictly increasing"):
            generalized_inverse(profile(w_fn))

    def test_composition_on_grid(self):
        prof = sin_log()
        a = generalized_inverse(prof)
        t = np.geomspace(1e-3, 1e3, 33)
        back = prof.w_at(a(t))
        assert np.max(np.abs(back / t - 1.0)) < 1e-8


class TestKaramata:
    def test_linear_gauge_case_a_ratio(self):
        rep = verify_karamata_integrals(
            half_r(), [{"lemma": "al1", "case": "a", "beta": 1.0, "tau": 0.5}]
        )
        assert rep["pass"]
        assert rep["cases"][0]["sup_ratio"] == pytest.approx(2.0 / 3.0, rel=1e-6)

    def test_boundary_tau_rejected(self):
        prof = half_r()
        idx = estimate_indices(prof)
        with pytest.raises(ConfigError, match="al1"):
            verify_karamata_integrals(
                prof, [{"lemma": "al1", "case": "a", "beta": 1.0, "tau": -idx.p1}]
            )

    def test_infinity_case_a(self):
        rep = verify_karamata_integrals(
            half_r(), [{"lemma": "al2", "case": "a", "beta": 1.0, "tau": -1.5}]
        )
        assert rep["pass"]
        assert rep["cases"][0]["sup_ratio"] == pytest.approx(2.0, rel=1e-6)

    def test_negative_beta_cases(self):
        cases = [
            {"lemma": "al1", "case": "c", "beta": -1.0, "tau": 1.5},
            {"lemma": "al2", "case": "c", "beta": -1.0, "tau": -1.5},
        ]
        rep = verify_karamata_integrals(half_r(), cases)
        assert rep["pass"]
        assert rep["cases"][0]["sup_ratio"] == pytest.approx(2.0, rel=1e-6)

    def test_corollary_case_refinement_stable(self):
        rep = verify_karamata_integrals(
            half_r(), [{"lemma": "cor", "case": "i", "beta": 1.0, "tau": 0.5}]
        )
        assert rep["pass"]
        entry = rep["cases"][0]
        assert entry["grid_refinement_drift"] < 0.02
        assert entry["sup_ratio"] == pytest.approx(2.0, rel=1e-4)

    def test_ratio_scale_invariance(self):
        cases = [{"lemma": "al1", "case": "a", "beta": 1.0, "tau": 0.5}]
        r_one = verify_karamata_integrals(profile(lambda r: r), cases)
        r_ten = verify_karamata_integrals(profile(lambda r: 10.0 * r), cases)
        assert r_one["cases"][0]["sup_ratio"] == pytest.approx(
            r_ten["cases"][0]["sup_ratio"], abs=1e-12
        )

    def test_two_slope_full_sweep(self):
        prof = two_slope()
        cases = [
            {"lemma": "al1", "case": "a", "beta": 1.0, "tau": 0.2},
            {"lemma": "al1", "case": "b", "beta": 1.0, "tau": -0.8},
            {"lemma": "al2", "case": "a", "beta": 1.0, "tau": -1.8},
            {"lemma": "al2", "case": "b", "beta": 1.0, "tau": -1.2},
            {"lemma": "cor", "case": "i", "beta": 0.5, "tau": 0.2},
            {"lemma": "cor", "case": "ii", "beta": 0.5, "tau": 1.2},
        ]
        rep = verify_karamata_integrals(prof, cases)
        assert rep["pass"], [c for c in rep["cases"] if not c["pass"]]

    def test_report_is_json_serializable(self):
        import json

        rep = verify_karamata_integrals(
            half_r(), [{"lemma": "al1", "case": "a", "beta": 1.0, "tau": 0.5}]
        )
        json.dumps(rep)
