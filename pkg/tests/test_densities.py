"""Tests for design densities and quantile inversion."""

import numpy as np
import pytest

from strataquad.design.densities import (
    ExplicitDensity,
    PowerDensity,
    QuantileDensity,
    UniformDensity,
    invert_monotone,
    panel_edges,
    parse_density,
)
from strataquad.design.grids import Allocation, build_design, grid_points
from strataquad.errors import DesignError, InvalidArgumentError
from strataquad.fields import Decomposition


def _affine(t):
    """h(t) = (1 + t) / 1.5, regular with minimum 2/3."""
    return (1.0 + np.asarray(t, dtype=float)) / 1.5


class TestUniformDensity:
    """Tests for UniformDensity."""

    def test_identity_maps(self):
        """H and G are the identity on [0, 1]."""
        h = UniformDensity()
        u = np.array([0.0, 0.3, 1.0])

        np.testing.assert_array_equal(h.cdf(u), u)
        np.testing.assert_array_equal(h.quantile(u), u)
        assert h.regular
        assert h.min_density == 1.0
        assert h.spec_string == "uniform"


class TestPowerDensity:
    """Tests for PowerDensity."""

    def test_quantile_closed_form(self):
        """G(u) = u^{1/(theta+1)}; theta = 2 halves mass at 0.5^{1/3}."""
        h = PowerDensity(2.0)

        assert h.quantile(0.5) == pytest.approx(0.5 ** (1 / 3))
        assert h.cdf(h.quantile(0.3)) == pytest.approx(0.3)

    def test_quantile_density(self):
        """g(u) = 1 / h(G(u))."""
        h = PowerDensity(-0.4)
        u = np.array([0.1, 0.5, 0.9])

        np.testing.assert_allclose(h.quantile_density(u), 1.0 / h.pdf(h.quantile(u)))

    def test_regularity(self):
        """Only theta = 0 is regular; negative theta is bounded below at t = 1."""
        assert PowerDensity(0.0).regular
        assert not PowerDensity(-0.5).regular
        assert PowerDensity(-0.5).min_density == pytest.approx(0.5)
        assert PowerDensity(1.0).min_density == 0.0

    def test_rejects_theta_at_minus_one(self):
        """theta must exceed -1 for integrability."""
        with pytest.raises(InvalidArgumentError):
            PowerDensity(-1.0)

    def test_spec_string_round_trip(self):
        """The spec string parses back to the same exponent."""
        h = PowerDensity(-0.38571428571428573)

        assert parse_density(h.spec_string).theta == h.theta


class TestExplicitDensity:
    """Tests for ExplicitDensity."""

    def test_linear_density(self):
        """h(t) = 2t gives H(t) = t^2 and G(u) = sqrt(u)."""
        h = ExplicitDensity(lambda t: 2.0 * t, label="linear")

        assert h.cdf(0.5) == pytest.approx(0.25, abs=1e-14)
        np.testing.assert_allclose(h.quantile(np.array([0.25, 0.64])), [0.5, 0.8], atol=1e-10)

    def test_unnormalized_density_rejected(self):
        """A density integrating to 1/2 is refused."""
        with pytest.raises(DesignError, match="integrates"):
            ExplicitDensity(lambda t: t)

    def test_negative_density_rejected(self):
        """Negative values make H non-monotone."""
        with pytest.raises(DesignError):
            ExplicitDensity(lambda t: 2.0 * (2.0 * t - 0.5))

    def test_regular_density(self):
        """A positive continuous h is regular with its minimum at the left end."""
        h = ExplicitDensity(_affine, label="affine")

        assert h.regular
        assert h.min_density == pytest.approx(1.0 / 1.5, rel=1e-12)

    def test_blow_up_at_origin_is_not_regular(self):
        """h(t) = 0.9 t^{-0.1} is unbounded at 0 although positive at every interior node."""
        h = ExplicitDensity(lambda t: 0.9 * np.asarray(t, dtype=float) ** -0.1, label="blow-up")

        assert not h.regular
        assert h.min_density == pytest.approx(0.9, rel=1e-12)

    def test_zero_at_origin_is_not_regular(self):
        """h(t) = 2t vanishes at the left endpoint."""
        h = ExplicitDensity(lambda t: 2.0 * np.asarray(t, dtype=float), label="linear")

        assert not h.regular
        assert h.min_density == 0.0

    def test_panel_edges_reach_deep_toward_zero(self):
        """Panels refine dyadically down to 2^-40 and cover [0, 1]."""
        edges = panel_edges()

        assert edges[0] == 0.0
        assert edges[1] == 2.0**-40
        assert edges[-1] == 1.0
        assert np.all(np.diff(edges) > 0)


class TestQuantileDensity:
    """Tests for QuantileDensity."""

    def test_square_quantile(self):
        """G(u) = u^2: H(t) = sqrt(t) and h(t) = 1 / (2 sqrt(t))."""
        h = parse_density("quantile:square")

        assert h.cdf(0.25) == pytest.approx(0.5, abs=1e-12)
        assert h.pdf(0.25) == pytest.approx(1.0, rel=1e-9)
        assert not h.regular

    def test_rejects_wrong_endpoint(self):
        """G(1) must equal 1."""
        with pytest.raises(DesignError):
            QuantileDensity(lambda u: 0.5 * u)

    def test_rejects_non_monotone(self):
        """G must be strictly increasing."""
        with pytest.raises(DesignError, match="increasing"):
            QuantileDensity(lambda u: np.where(u < 0.5, u, 0.5 + 0.0 * u) + np.where(u == 1.0, 0.5, 0.0))


class TestParseDensity:
    """Tests for parse_density."""

    @pytest.mark.parametrize(
        "spec,kind",
        [
            ("uniform", "uniform"),
            ("power:2", "power"),
            ("power:-0.5", "power"),
            ("quantile:square", "quantile"),
            ("quantile:pow:3", "quantile"),
        ],
    )
    def test_known_forms(self, spec, kind):
        """Every documented form builds the matching density kind."""
        assert parse_density(spec).kind == kind

    @pytest.mark.parametrize("spec", ["triangular", "power:abc", "quantile:pow:-1", "optimal"])
    def test_invalid_forms(self, spec):
        """Unknown, malformed and model-dependent strings are refused."""
        with pytest.raises(InvalidArgumentError):
            parse_density(spec)


class TestInvertMonotone:
    """Tests for invert_monotone."""

    def test_cubic(self):
        """Vectorized roots of t^3 = target."""
        targets = np.array([0.001, 0.125, 0.729])

        roots = invert_monotone(lambda t: t**3, targets, np.zeros(3), np.ones(3))

        np.testing.assert_allclose(roots, [0.1, 0.5, 0.9], atol=1e-12)

    def test_unreachable_target(self):
        """A target outside the bracket's range fails loudly."""
        with pytest.raises(DesignError):
            invert_monotone(lambda t: t, np.array([2.0]), np.zeros(1), np.ones(1))


class TestGridProperties:
    """Properties every regular design density keeps."""

    @pytest.mark.parametrize(
        "density",
        [UniformDensity(), PowerDensity(0.0), ExplicitDensity(_affine, label="affine")],
        ids=["uniform", "power-0", "affine"],
    )
    def test_quantile_round_trip(self, density):
        """G(H(t)) = t on a 1e-2 lattice."""
        t = np.linspace(0.0, 1.0, 101)

        np.testing.assert_allclose(density.quantile(density.cdf(t)), t, atol=1e-9)

    @pytest.mark.parametrize("n", [3, 10, 57])
    def test_mean_value_diagonal_bound(self, n):
        """Every cell width is at most 1 / (n min h)."""
        density = ExplicitDensity(_affine, label="affine")

        widths = np.diff(grid_points(density, n))

        assert widths.max() <= (1.0 / density.min_density) / n * (1.0 + 1e-9)

    @pytest.mark.parametrize("density", [UniformDensity(), PowerDensity(2.0)], ids=["uniform", "power-2"])
    def test_refinement_consistency(self, density):
        """Doubling every count splits each stratum into 2^d strata of the same total volume."""
        dec = Decomposition(l=(1, 1))
        coarse = build_design(dec, [density, density], Allocation.from_counts([3, 4], dec))
        fine = build_design(dec, [density, density], Allocation.from_counts([6, 8], dec))

        fine_volumes = fine.stratum_arrays().volumes.reshape(3, 2, 4, 2).sum(axis=(1, 3))

        np.testing.assert_allclose(fine_volumes.ravel(), coarse.stratum_arrays().volumes, atol=1e-12)
