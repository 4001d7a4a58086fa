"""Tests for the exact MSE engine."""

import dataclasses
import math

import pytest

from strataquad.asymptotics import a_const, b_tilde
from strataquad.design.densities import PowerDensity, UniformDensity
from strataquad.design.grids import allocate_uniform, build_design
from strataquad.errors import BudgetExceededError, InvalidArgumentError
from strataquad.fields import Decomposition, SmoothnessSpec, make_exp_field, make_fbf
from strataquad.quadrature.mse import default_order, exact_mse, projected_cost


class TestStationaryModels:
    """exact_mse on models with stationary increments."""

    @pytest.mark.parametrize("N", [1, 4, 10])
    def test_brownian_motion_closed_form(self, fbm_1d, uniform_design_1d, N):
        """d_X = |t - v| with N equal strata gives e2 = 1 / (6 N^2)."""
        report = exact_mse(fbm_1d, uniform_design_1d(N))

        assert report.e2 == pytest.approx(1.0 / (6.0 * N**2), rel=1e-12)
        assert report.method == "stationary"
        assert report.N_actual == N

    @pytest.mark.parametrize("n", [2, 4, 8])
    @pytest.mark.parametrize(
        "l, alpha",
        [
            pytest.param((2, 1), (1.5, 0.5), id="fbf-3d"),
            pytest.param((1, 1), (1.5, 0.5), id="fbf-2d-split"),
            pytest.param((2,), (0.5,), id="fbf-2d-rough"),
            pytest.param((1,), (0.3,), id="fbm-rough"),
        ],
    )
    def test_fractional_field_matches_one_observation_constants(self, l, alpha, n):
        """e2 = sum_j b_{alpha_j,l_j} n^{-alpha_j} / N on a uniform n^d grid."""
        dec = Decomposition(l=l)
        model = make_fbf(dec, SmoothnessSpec.for_decomposition(alpha, dec))
        N = n**dec.d
        design = build_design(dec, [UniformDensity()] * dec.k, allocate_uniform(N, dec))

        report = exact_mse(model, design, order=12)

        expected = sum(b_tilde(a, m) * n**-a for a, m in zip(alpha, l)) / N
        assert report.e2 == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize("N", [2, 8])
    def test_rough_motion_closed_form(self, N):
        """d = 1 gives e2 = a_beta N^{-(1 + beta)}."""
        dec = Decomposition.single(1)
        model = make_fbf(dec, SmoothnessSpec.for_decomposition((0.6,), dec))
        design = build_design(dec, [UniformDensity()], allocate_uniform(N, dec))

        assert exact_mse(model, design, order=12).e2 == pytest.approx(a_const(0.6) * N**-1.6, rel=1e-6)

    def test_general_path_agrees(self, uniform_design_1d):
        """Dropping the stationary kernel gives the same MSE through the pair rule."""
        model = make_exp_field(1.0, 1)
        general = dataclasses.replace(model, increment_kernel=None)
        design = uniform_design_1d(16)

        fast = exact_mse(model, design, order=10)
        slow = exact_mse(general, design, order=10)

        assert slow.method == "general"
        assert fast.e2 == pytest.approx(slow.e2, rel=1e-9)


class TestGeneralModels:
    """exact_mse on non-stationary and singular models."""

    def test_modulated_exponential_constant(self, modulated_exp, uniform_design_1d):
        """N^2 e2 approaches v = 3.0303 for the modulated exponential field."""
        report = exact_mse(modulated_exp, uniform_design_1d(2048))

        assert 2048**2 * report.e2 == pytest.approx(3.0303, rel=1e-2)

    def test_decreasing_in_N(self, modulated_exp, uniform_design_1d):
        """Refining the grid lowers the MSE."""
        values = [exact_mse(modulated_exp, uniform_design_1d(N)).e2 for N in (32, 64, 128, 256)]

        assert all(b < a for a, b in zip(values, values[1:]))

    def test_per_stratum_terms_sum_to_total(self, modulated_exp, uniform_design_1d):
        """Per-stratum contributions are reported and add up to e2."""
        report = exact_mse(modulated_exp, uniform_design_1d(20), per_stratum=True)

        assert len(report.per_stratum) == 20
        assert math.fsum(report.per_stratum) == pytest.approx(report.e2, rel=1e-14)

    def test_origin_stratum_scales_with_holder_exponent(self, warped_fbm, uniform_design_1d):
        """The origin term of the self-similar warped model scales like N^{-(2 + beta lambda)}."""
        coarse = exact_mse(warped_fbm, uniform_design_1d(64), per_stratum=True)
        fine = exact_mse(warped_fbm, uniform_design_1d(128), per_stratum=True)

        ratio = coarse.per_stratum[0] / fine.per_stratum[0]

        assert ratio == pytest.approx(2.0**2.75, rel=1e-9)

    def test_error_estimate_is_small(self, warped_fbm, uniform_design_1d):
        """The order - 2 check run agrees closely with the main run."""
        report = exact_mse(warped_fbm, uniform_design_1d(64))

        assert report.error_estimate < 1e-3 * report.e2

    def test_quasi_regular_design(self, warped_fbm):
        """Power densities with negative exponent build valid designs for singular models."""
        dec = warped_fbm.decomposition
        design = build_design(dec, [PowerDensity(-0.3)], allocate_uniform(32, dec))

        report = exact_mse(warped_fbm, design)

        assert report.e2 > 0


class TestExecution:
    """Budget, validation and determinism."""

    def test_budget_exceeded(self, modulated_exp, uniform_design_1d):
        """A projected cost over the budget is refused before any work."""
        design = uniform_design_1d(100)

        with pytest.raises(BudgetExceededError) as excinfo:
            exact_mse(modulated_exp, design, budget=1000)

        assert excinfo.value.projected == projected_cost(modulated_exp, design)
        assert "STRATAQUAD_BUDGET" in str(excinfo.value)

    def test_dimension_mismatch(self, fbf_3d, uniform_design_1d):
        """A 1-d design cannot serve a 3-d model."""
        with pytest.raises(InvalidArgumentError):
            exact_mse(fbf_3d, uniform_design_1d(8))

    def test_order_too_low(self, fbm_1d, uniform_design_1d):
        """Orders below 3 leave no room for the check run."""
        with pytest.raises(InvalidArgumentError):
            exact_mse(fbm_1d, uniform_design_1d(8), order=2)

    @pytest.mark.parametrize("fixture", ["fbm_1d", "modulated_exp", "warped_fbm"])
    def test_thread_count_does_not_change_result(self, request, monkeypatch, uniform_design_1d, fixture):
        """Results are bitwise identical across worker counts."""
        monkeypatch.setattr("strataquad.quadrature.mse.BLOCK_ELEMENTS", 4096)
        model = request.getfixturevalue(fixture)
        design = uniform_design_1d(300)

        single = exact_mse(model, design, threads=1)
        multi = exact_mse(model, design, threads=4)

        assert single.e2 == multi.e2

    def test_default_orders(self, fbm_1d, fbf_3d, modulated_exp):
        """Rough 1-d models get a higher default order."""
        assert default_order(fbf_3d) == 6
        assert default_order(modulated_exp) == 8
        rough = make_exp_field(0.5, 1)
        assert default_order(rough) == 12
