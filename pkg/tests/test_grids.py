"""Tests for allocations, grids and cross-regular designs."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from strataquad.design.densities import PowerDensity, UniformDensity
from strataquad.design.grids import (
    Allocation,
    allocate_optimal,
    allocate_uniform,
    build_design,
    grid_points,
    optimal_allocation_reals,
)
from strataquad.errors import InvalidArgumentError
from strataquad.fields import Decomposition, SmoothnessSpec


class TestAllocateUniform:
    """Tests for allocate_uniform."""

    @pytest.mark.parametrize("n", [2, 5, 12])
    def test_cubes_are_exact(self, n):
        """N = n^3 gives n points per coordinate in d = 3."""
        alloc = allocate_uniform(n**3, Decomposition(l=(2, 1)))

        assert alloc.n == (n, n)
        assert alloc.n_star == (n, n, n)
        assert alloc.N_actual == n**3

    def test_rounds_to_nearest(self):
        """Non-perfect powers round N^{1/d} to the nearest integer."""
        assert allocate_uniform(90, Decomposition.single(2)).n == (9,)

    def test_rejects_zero(self):
        """N_target must be positive."""
        with pytest.raises(InvalidArgumentError):
            allocate_uniform(0, Decomposition.single(1))


class TestOptimalAllocation:
    """Tests for the optimal intercomponent allocation."""

    def setup_method(self):
        self.dec = Decomposition(l=(2, 1))
        self.alpha = SmoothnessSpec.for_decomposition((1.5, 0.5), self.dec)
        self.v = (0.2051, 4.0 / 15.0)

    def test_reals_meet_target(self):
        """prod n_j^{l_j} equals N for the real-valued allocation."""
        reals = optimal_allocation_reals(self.v, self.alpha, self.dec, 1e5)

        assert reals[0] ** 2 * reals[1] == pytest.approx(1e5, rel=1e-10)

    def test_reals_equalize_terms(self):
        """v_j / n_j^{alpha_j} is the same for every component."""
        reals = optimal_allocation_reals(self.v, self.alpha, self.dec, 1e5)

        terms = np.asarray(self.v) / reals ** np.asarray(self.alpha.alpha)
        assert terms[0] == pytest.approx(terms[1], rel=1e-10)

    def test_counts_are_ceilings(self):
        """Integer counts are the ceilings of the reals, so N_actual >= N."""
        reals = optimal_allocation_reals(self.v, self.alpha, self.dec, 1e5)
        alloc = allocate_optimal(self.v, self.alpha, self.dec, 100_000)

        assert alloc.n == tuple(math.ceil(x) for x in reals)
        assert alloc.N_actual >= 100_000

    def test_integer_reals_not_bumped(self):
        """A real allocation that is an integer up to rounding stays put."""
        dec = Decomposition.single(1)
        alpha = SmoothnessSpec.for_decomposition((1.0,), dec)

        assert allocate_optimal([2.0], alpha, dec, 64).n == (64,)

    def test_rejects_non_positive_constants(self):
        """v_j must be positive."""
        with pytest.raises(InvalidArgumentError):
            allocate_optimal([0.2, 0.0], self.alpha, self.dec, 1000)


class TestGridPoints:
    """Tests for grid_points."""

    def test_uniform(self):
        """Uniform grids are equispaced."""
        np.testing.assert_allclose(grid_points(UniformDensity(), 4), [0, 0.25, 0.5, 0.75, 1.0])

    def test_power_density_widths(self):
        """theta = 2, n = 2 splits at 0.5^{1/3}."""
        widths = np.diff(grid_points(PowerDensity(2.0), 2))

        np.testing.assert_allclose(widths, [0.5 ** (1 / 3), 1 - 0.5 ** (1 / 3)])

    def test_endpoints_exact(self):
        """First and last points are exactly 0 and 1."""
        points = grid_points(PowerDensity(-0.4), 7)

        assert points[0] == 0.0
        assert points[-1] == 1.0

    def test_rejects_zero_cells(self):
        """At least one cell is required."""
        with pytest.raises(InvalidArgumentError):
            grid_points(UniformDensity(), 0)


class TestCrossRegularDesign:
    """Tests for build_design and stratum enumeration."""

    def test_lexicographic_order(self):
        """The first coordinate varies slowest."""
        dec = Decomposition(l=(1, 1))
        design = build_design(dec, [UniformDensity(), UniformDensity()], Allocation.from_counts((2, 3), dec))

        arrays = design.stratum_arrays()

        assert arrays.indices[:4].tolist() == [[0, 0], [0, 1], [0, 2], [1, 0]]
        assert design.N_actual == 6

    def test_volumes_partition_the_cube(self):
        """Stratum volumes add up to 1."""
        dec = Decomposition(l=(2, 1))
        design = build_design(dec, [PowerDensity(-0.3), UniformDensity()], allocate_uniform(64, dec))

        assert math.fsum(design.stratum_arrays().volumes) == pytest.approx(1.0, abs=1e-13)

    def test_origin_stratum_first(self):
        """The stratum touching the origin is at position 0."""
        dec = Decomposition.single(2)
        design = build_design(dec, [UniformDensity()], allocate_uniform(16, dec))

        arrays = design.stratum_arrays(0, 1)

        assert design.origin_index == 0
        np.testing.assert_array_equal(arrays.vertices[0], [0.0, 0.0])

    def test_chunked_enumeration_matches_full(self):
        """Slicing the enumeration gives the same strata."""
        dec = Decomposition.single(2)
        design = build_design(dec, [UniformDensity()], allocate_uniform(25, dec))

        full = design.stratum_arrays()
        part = design.stratum_arrays(7, 12)

        np.testing.assert_array_equal(part.vertices, full.vertices[7:12])

    def test_strata_records(self):
        """strata() mirrors stratum_arrays()."""
        dec = Decomposition.single(1)
        design = build_design(dec, [UniformDensity()], allocate_uniform(4, dec))

        strata = design.strata()

        assert [s.index for s in strata] == [(0,), (1,), (2,), (3,)]
        assert strata[2].volume == pytest.approx(0.25)

    def test_density_count_mismatch(self):
        """One density per component is required."""
        dec = Decomposition(l=(2, 1))
        with pytest.raises(InvalidArgumentError):
            build_design(dec, [UniformDensity()], allocate_uniform(8, dec))

    def test_allocation_validates_counts(self):
        """Zero grid counts are invalid."""
        with pytest.raises(ValidationError):
            Allocation(n=(0,), n_star=(0,), N_actual=0)
