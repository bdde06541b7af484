"""
Tests for the closed-form expressions.
"""

import math

import numpy as np
import pytest

from induced_coherence import closed_form
from induced_coherence.errors import DomainError, RangeError, ZeroGain

T_GRID = [round(0.02 * i, 2) for i in range(51)]
V2_GRID = list(np.logspace(-4, 1, 50))


class TestBogoliubov:
    """Test the single-crystal U and V coefficients."""

    def test_zero_gain_is_phase(self):
        """Zero gain gives U = e^{ikL} and V = 0."""
        u, v = closed_form.bogoliubov_uv(0.0, 3.0, 0.5)
        assert u == pytest.approx(complex(math.cos(1.5), math.sin(1.5)))
        assert v == 0

    def test_unit_gain(self):
        """Phase-free crystal at G = 1."""
        u, v = closed_form.bogoliubov_uv(1.0, 0.0, 0.0)
        assert u.real == pytest.approx(1.5430806348, abs=1e-9)
        assert v.imag == pytest.approx(-1.1752011936, abs=1e-9)
        assert abs(u) ** 2 - abs(v) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_negative_gain(self):
        """Negative gain is rejected."""
        with pytest.raises(RangeError):
            closed_form.bogoliubov_uv(-0.1, 0.0, 0.0)


class TestSinglesAndG2:
    """Test flux rates and second-order correlations."""

    def test_g2_pair(self):
        """The pair carries the full or the low-gain g2 values."""
        full = closed_form.g2_pair(0.5, 0.01)
        assert full.g13 == closed_form.g13_full(0.5, 0.01)
        assert full.g23 == closed_form.g23_full(0.5, 0.01)
        low = closed_form.g2_pair(0.5, 0.01, low_gain=True)
        assert low.g13 == closed_form.g13_low(0.5, 0.01)
        assert low.g23 >= low.g13
        with pytest.raises(ZeroGain):
            closed_form.g2_pair(0.5, 0.0)

    def test_singles_blocked(self):
        """With t = 0 the crystals are decoupled."""
        assert closed_form.singles_rates(0.0, 0.3) == pytest.approx((0.3, 0.3, 0.3))

    def test_singles_open(self):
        """Direct substitution at t = 1, v2 = 0.01."""
        rates = closed_form.singles_rates(1.0, 0.01)
        assert rates.n_s1 == pytest.approx(0.01)
        assert rates.n_s2 == pytest.approx(0.0101)
        assert rates.n_i3 == pytest.approx(0.0201)

    def test_vacuum_singles(self):
        """No gain, no photons."""
        assert closed_form.singles_rates(0.7, 0.0) == (0.0, 0.0, 0.0)

    def test_g13_full_value(self):
        """g13 at t = 1, v2 = 0.01 follows 1 + |U|⁴/((1+|U|²)v2)."""
        assert closed_form.g13_full(1.0, 0.01) == pytest.approx(1.0 + 1.0201 / 0.0201)

    def test_g13_blocked(self):
        """No correlation with the idler when it is blocked."""
        assert closed_form.g13_full(0.0, 0.2) == 1.0

    def test_g23_blocked(self):
        """g23 at t = 0 is 1 + |U|²/|V|²."""
        assert closed_form.g23_full(0.0, 0.2) == pytest.approx(1.0 + 1.2 / 0.2)

    @pytest.mark.parametrize("v2", [1e-4, 0.01, 1.0, 7.5])
    def test_g2_equal_at_full_transmission(self, v2):
        """The crystals are indistinguishable at t = 1."""
        assert closed_form.g23_full(1.0, v2) == pytest.approx(
            closed_form.g13_full(1.0, v2), rel=1e-13
        )

    def test_g23_not_below_g13(self):
        """g23 ≥ g13 everywhere on the grid."""
        for t in T_GRID:
            for v2 in V2_GRID[::5]:
                assert closed_form.g23_full(t, v2) >= closed_form.g13_full(t, v2) - 1e-9

    def test_low_gain_forms(self):
        """Low-gain forms by substitution."""
        assert closed_form.g13_low(1.0, 0.01) == pytest.approx(1.0 + 1.0 / 0.02)
        assert closed_form.g23_low(1.0, 0.01) == pytest.approx(1.0 + 1.0 / 0.02)
        assert closed_form.g13_low(0.0, 0.01) == 1.0
        assert closed_form.g23_low(0.0, 0.01) == pytest.approx(101.0)

    @pytest.mark.parametrize("t", [0.0, 0.3, 0.5, 0.9, 1.0])
    @pytest.mark.parametrize("v2", [1e-5, 1e-4, 1e-3])
    def test_low_gain_accuracy(self, t, v2):
        """Low-gain forms deviate from the full ones by at most 3·v2 relative."""
        full13, full23 = closed_form.g13_full(t, v2), closed_form.g23_full(t, v2)
        if t > 0.0:
            assert abs(closed_form.g13_low(t, v2) - full13) / (full13 - 1.0) <= 3 * v2
        assert abs(closed_form.g23_low(t, v2) - full23) / (full23 - 1.0) <= 3 * v2

    @pytest.mark.parametrize(
        "func",
        [
            closed_form.g13_full,
            closed_form.g23_full,
            closed_form.g13_low,
            closed_form.g23_low,
        ],
    )
    def test_vacuum_is_error(self, func):
        """g2 is undefined on the vacuum."""
        with pytest.raises(ZeroGain):
            func(0.5, 0.0)


class TestDistinguishability:
    """Test the distinguishability and coherence expressions."""

    def test_dist_from_g2_examples(self):
        """Indistinguishable, distinguishable and intermediate cases."""
        assert closed_form.dist_from_g2(2.0, 2.0) == 0.0
        assert closed_form.dist_from_g2(1.0, 2.0) == 1.0
        assert closed_form.dist_from_g2(1.5, 2.0) == pytest.approx(math.sqrt(0.5))

    def test_dist_from_g2_rejects_bad_inputs(self):
        """g23 ≤ 1 or g13 clearly above g23 are inconsistent."""
        with pytest.raises(DomainError):
            closed_form.dist_from_g2(1.0, 1.0)
        with pytest.raises(DomainError):
            closed_form.dist_from_g2(2.5, 2.0)

    def test_radicand_rounding_is_clamped(self):
        """A radicand a hair below zero counts as zero."""
        assert closed_form.dist_from_g2(2.0 + 1e-13, 2.0) == 0.0

    def test_small_positive_radicand_kept(self):
        """Only negative rounding is clamped; a tiny positive D survives."""
        dist = closed_form.dist_from_g2(2.0 - 5e-13, 2.0)
        assert dist == pytest.approx(math.sqrt(5e-13), rel=1e-2)
        assert dist > 0.0

    def test_overlap_reductions(self):
        """γ = 1 reduces to the plain form, γ = 0 gives full distinguishability."""
        assert closed_form.dist_from_g2_overlap(1.5, 2.0, 1.0) == pytest.approx(
            closed_form.dist_from_g2(1.5, 2.0)
        )
        assert closed_form.dist_from_g2_overlap(1.7, 2.0, 0.0) == 1.0

    def test_overlap_measured_value(self):
        """Low gain, t = 1, γ = 0.855."""
        v2 = 1e-4
        dist = closed_form.dist_from_g2_overlap(
            closed_form.g13_low(1.0, v2), closed_form.g23_low(1.0, v2), 0.855
        )
        assert dist == pytest.approx(0.5186, abs=1e-4)

    def test_trace_and_visibility(self):
        """Trace distance and low-gain visibility."""
        assert closed_form.dist_trace(1.0, 1.0) == 0.0
        assert closed_form.dist_trace(0.0, 0.6) == 1.0
        assert closed_form.dist_trace(1.0, 0.855) == pytest.approx(0.5186, abs=1e-4)
        assert closed_form.visibility_low(0.5, 0.855) == pytest.approx(0.4275)

    def test_trace_visibility_complementarity(self):
        """D² + V² = 1 for every t and γ in the low-gain picture."""
        for t in T_GRID:
            for gamma in (0.0, 0.5, 0.855, 1.0):
                total = (
                    closed_form.dist_trace(t, gamma) ** 2
                    + closed_form.visibility_low(t, gamma) ** 2
                )
                assert total == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("v2", [0.0, 1e-3, 1.0, 10.0])
    def test_highgain_endpoints(self, v2):
        """D = 1 at t = 0 and D = 0 at t = 1 for any gain."""
        assert closed_form.dist_highgain(0.0, v2) == 1.0
        assert closed_form.dist_highgain(1.0, v2) == 0.0

    def test_highgain_low_gain_limit(self):
        """At vanishing gain the high-gain D becomes √(1−t²)."""
        assert closed_form.dist_highgain(0.6, 1e-12) == pytest.approx(0.8, abs=1e-9)

    def test_highgain_matches_g2_route(self):
        """D from the full g2 values equals the high-gain expression."""
        for t in T_GRID:
            for v2 in V2_GRID:
                from_g2 = closed_form.dist_from_g2(
                    closed_form.g13_full(t, v2), closed_form.g23_full(t, v2)
                )
                assert from_g2**2 == pytest.approx(
                    closed_form.dist_highgain(t, v2) ** 2, abs=1e-12
                )

    def test_coherence_values(self):
        """First-order coherence at sample points."""
        assert closed_form.g12_coherence(1.0, 3.0) == pytest.approx(1.0)
        assert closed_form.g12_coherence(0.5, 1.0) == pytest.approx(0.5 * math.sqrt(2 / 1.25))
        assert closed_form.g12_coherence(0.3, 0.0) == pytest.approx(0.3)
        assert closed_form.g12_coherence(0.3, 1e9) == pytest.approx(1.0, abs=1e-6)

    def test_coherence_overlap(self):
        """The overlap model scales the effective transmission by γ."""
        assert closed_form.g12_coherence_overlap(0.5, 1.0, 1.0) == pytest.approx(
            closed_form.g12_coherence(0.5, 1.0)
        )
        assert closed_form.g12_coherence_overlap(1.0, 0.0, 0.855) == pytest.approx(0.855)

    def test_complementarity(self):
        """D² + g12² = 1 on the whole grid."""
        worst = max(
            abs(closed_form.complementarity_residual(t, v2)) for t in T_GRID for v2 in V2_GRID
        )
        assert worst <= 1e-12
        assert closed_form.complementarity_residual(0.0, 0.4) == 0.0

    def test_monotonicity(self):
        """D falls and g12 rises with t at fixed gain."""
        for v2 in (1e-3, 0.5, 5.0):
            dists = [closed_form.dist_highgain(t, v2) for t in T_GRID]
            coherences = [closed_form.g12_coherence(t, v2) for t in T_GRID]
            assert all(b <= a + 1e-15 for a, b in zip(dists, dists[1:]))
            assert all(b >= a - 1e-15 for a, b in zip(coherences, coherences[1:]))


class TestRates:
    """Test the coincidence rate model."""

    def test_accidental_floor(self):
        """Γ = 0 leaves only the accidental rate."""
        assert closed_form.coincidence_rate(2000.0, 2000.0, 2.5e-9, 580e-15, 0.0) == pytest.approx(
            0.01
        )

    def test_ratio_r13(self):
        """T_c/(T_R v2) by substitution."""
        assert closed_form.ratio_r13(580e-15, 2.5e-9, 1e-5) == pytest.approx(23.2)
        assert closed_form.ratio_r23() == 1.0

    def test_ratio_exact_close_to_approximation(self):
        """The exact ratio is 2 + T_c/(T_R v2) up to O(v2)."""
        v2 = 1e-5
        exact = closed_form.ratio_r13_exact(580e-15, 2.5e-9, v2)
        assert exact == pytest.approx(2.0 + 23.2, rel=1e-4)

    def test_solve_approximate(self):
        """Inverting T_c/(T_R v2) = 22.5."""
        v2 = closed_form.solve_v2_for_ratio(22.5, 580e-15, 2.5e-9)
        assert v2 == pytest.approx(1.031e-5, rel=1e-3)

    def test_solve_exact(self):
        """The exact inversion reproduces the target ratio."""
        v2 = closed_form.solve_v2_for_ratio(22.5, 580e-15, 2.5e-9, exact=True)
        assert v2 == pytest.approx(1.1317e-5, rel=1e-3)
        assert closed_form.ratio_r13_exact(580e-15, 2.5e-9, v2) == pytest.approx(22.5, rel=1e-10)

    def test_solve_exact_unreachable(self):
        """Ratios at or below the minimum of the exact curve have no solution."""
        with pytest.raises(RangeError):
            closed_form.solve_v2_for_ratio(1.5, 580e-15, 2.5e-9, exact=True)


class TestVisibility:
    """Test visibility helpers and error propagation."""

    def test_visibility_from_g1(self):
        """Balanced, one-sided and unbalanced beams."""
        assert closed_form.visibility_from_g1(2.0, 2.0, 0.7) == pytest.approx(0.7)
        assert closed_form.visibility_from_g1(2.0, 0.0, 0.7) == 0.0
        assert closed_form.visibility_from_g1(1.0, 3.0, 1.0) == pytest.approx(math.sqrt(3) / 2)

    def test_visibility_from_g1_errors(self):
        """Empty beams and out-of-range coherence are rejected."""
        with pytest.raises(DomainError):
            closed_form.visibility_from_g1(0.0, 0.0, 0.5)
        with pytest.raises(RangeError):
            closed_form.visibility_from_g1(1.0, 1.0, 1.5)

    def test_visibility_highgain_below_one(self):
        """At t = 1 the visibility drops below one once the gain is not small."""
        assert closed_form.visibility_highgain(1.0, 0.0) == 1.0
        assert closed_form.visibility_highgain(1.0, 1e-6) == pytest.approx(1.0, abs=1e-6)
        assert closed_form.visibility_highgain(1.0, 1.0) < 0.95

    def test_dist_uncertainty(self):
        """First-order propagation against a finite-difference estimate."""
        g13, g23, gamma = 1.4, 2.0, 0.9
        sigma13, sigma23 = 1e-3, 2e-3
        step = 1e-7
        d13 = (
            closed_form.dist_from_g2_overlap(g13 + step, g23, gamma)
            - closed_form.dist_from_g2_overlap(g13 - step, g23, gamma)
        ) / (2 * step)
        d23 = (
            closed_form.dist_from_g2_overlap(g13, g23 + step, gamma)
            - closed_form.dist_from_g2_overlap(g13, g23 - step, gamma)
        ) / (2 * step)
        expected = math.hypot(d13 * sigma13, d23 * sigma23)
        assert closed_form.dist_uncertainty(g13, sigma13, g23, sigma23, gamma) == pytest.approx(
            expected, rel=1e-5
        )

    def test_dist_uncertainty_near_zero(self):
        """Noise around D = 0 still gets a finite error bar."""
        sigma = closed_form.dist_uncertainty(2.001, 0.01, 2.0, 0.01, 1.0)
        assert math.isfinite(sigma) and sigma > 0.0


if __name__ == "__main__":
    pytest.main([__file__])
