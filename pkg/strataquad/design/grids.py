"""Cross-regular grid designs and their strata.

A design places n_j grid points per coordinate of component j according to
that component's density, and partitions [0, 1]^d into the resulting
hyperrectangular strata. Strata are always enumerated in lexicographic index
order (first coordinate slowest).
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from strataquad.design.densities import Density, QuantileDensity, ROOT_TOL
from strataquad.errors import DesignError, InvalidArgumentError
from strataquad.fields import Decomposition, SmoothnessSpec
from strataquad.logging import get_logger

logger = get_logger(__name__)

# ceil() of allocations that land on an integer up to rounding noise
_CEIL_SLACK = 1e-10


class Allocation(BaseModel):
    """Intercomponent grid allocation.

    Attributes:
        n: Grid count per component.
        n_star: Grid count per coordinate.
        N_actual: Number of strata, the product of n_star.
    """

    model_config = ConfigDict(frozen=True)

    n: Tuple[int, ...]
    n_star: Tuple[int, ...]
    N_actual: int

    @field_validator("n", "n_star")
    @classmethod
    def validate_counts(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(count < 1 for count in value):
            raise ValueError(f"grid counts must be >= 1, got {value}")
        return value

    @classmethod
    def from_counts(cls, n: Sequence[int], dec: Decomposition) -> "Allocation":
        """Expand per-component counts over ``dec``."""
        n = tuple(int(x) for x in n)
        n_star = tuple(int(x) for x in dec.expand(n))
        return cls(n=n, n_star=n_star, N_actual=math.prod(n_star))


def allocate_uniform(N_target: int, dec: Decomposition) -> Allocation:
    """Same grid count round(N_target^{1/d}) on every coordinate."""
    if N_target < 1:
        raise InvalidArgumentError(f"N_target must be >= 1, got {N_target}")
    per_coordinate = max(1, math.floor(N_target ** (1.0 / dec.d) + 0.5))
    return Allocation.from_counts([per_coordinate] * dec.k, dec)


def optimal_allocation_reals(
    v: Sequence[float], alpha: SmoothnessSpec, dec: Decomposition, N_target: float
) -> np.ndarray:
    """Real-valued optimal counts v_j^{1/a_j} (N / kappa)^{rho / a_j} before rounding.

    They satisfy prod ñ_j^{l_j} = N and equalize v_j / ñ_j^{a_j} across j.
    """
    from strataquad.asymptotics import rho_kappa

    v = np.asarray(v, dtype=float)
    if v.shape != (dec.k,):
        raise InvalidArgumentError(f"expected {dec.k} constants v, got {v.shape}")
    if np.any(~(v > 0)):
        raise InvalidArgumentError(f"constants v must be positive, got {v.tolist()}")
    rho, kappa = rho_kappa(alpha, dec, v)
    a = np.asarray(alpha.alpha)
    return np.exp((np.log(v) + rho * (math.log(N_target) - math.log(kappa))) / a)


def allocate_optimal(
    v: Sequence[float], alpha: SmoothnessSpec, dec: Decomposition, N_target: int
) -> Allocation:
    """Ceiling of the optimal real allocation; N_actual may exceed N_target.

    Raises:
        InvalidArgumentError: If any v_j <= 0.
    """
    if N_target < 1:
        raise InvalidArgumentError(f"N_target must be >= 1, got {N_target}")
    reals = optimal_allocation_reals(v, alpha, dec, N_target)
    counts = [max(1, math.ceil(x * (1.0 - _CEIL_SLACK))) for x in reals]
    allocation = Allocation.from_counts(counts, dec)
    logger.debug(
        "optimal_allocation",
        N_target=N_target,
        reals=[float(x) for x in reals],
        n=list(allocation.n),
        N_actual=allocation.N_actual,
    )
    return allocation


def grid_points(h: Density, n: int) -> np.ndarray:
    """Grid 0 = t_0 < ... < t_n = 1 with H(t_i) = i/n.

    Quantile-specified densities are evaluated directly at i/n; the others are
    inverted by their own root finder.

    Raises:
        InvalidArgumentError: If n < 1.
        DesignError: If the resulting grid is not strictly increasing.
    """
    if n < 1:
        raise InvalidArgumentError(f"grid needs n >= 1, got {n}")
    levels = np.arange(n + 1) / n
    points = np.asarray(h.quantile(levels), dtype=float)
    points[0], points[-1] = 0.0, 1.0
    if np.any(np.diff(points) <= 0):
        raise DesignError(f"grid for {h!r} with n={n} is not strictly increasing")
    if not isinstance(h, QuantileDensity) and n > 1:
        residual = np.abs(h.cdf(points[1:-1]) - levels[1:-1])
        if residual.max() > 10 * ROOT_TOL:
            raise DesignError(f"grid for {h!r} misses H(t)=i/n by {residual.max():.3e}")
    return points


@dataclass(frozen=True)
class Stratum:
    """One hyperrectangle D_i = [t_i, t_i + r_i]."""

    index: Tuple[int, ...]
    vertex: np.ndarray
    diagonal: np.ndarray
    volume: float


@dataclass(frozen=True)
class StrataArrays:
    """All strata as arrays in lexicographic order."""

    indices: np.ndarray
    vertices: np.ndarray
    diagonals: np.ndarray
    volumes: np.ndarray


@dataclass(frozen=True)
class CrossRegularDesign:
    """Per-coordinate grids built from component densities and an allocation."""

    decomposition: Decomposition
    densities: Tuple[Density, ...]
    allocation: Allocation
    grids: Tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.decomposition.d

    @property
    def N_actual(self) -> int:
        return self.allocation.N_actual

    @property
    def widths(self) -> Tuple[np.ndarray, ...]:
        """Per-coordinate cell widths r_{m, i}."""
        return tuple(np.diff(grid) for grid in self.grids)

    @property
    def origin_index(self) -> int:
        """Position of the stratum touching the origin in lexicographic order."""
        return 0

    @property
    def regular(self) -> bool:
        return all(h.regular for h in self.densities)

    def stratum_arrays(self, start: int = 0, stop: Optional[int] = None) -> StrataArrays:
        """Vectorized strata ``start..stop`` in lexicographic order."""
        stop = self.N_actual if stop is None else min(stop, self.N_actual)
        flat = np.arange(start, stop)
        indices = np.stack(np.unravel_index(flat, self.allocation.n_star), axis=-1)
        vertices = np.empty(indices.shape)
        diagonals = np.empty(indices.shape)
        for m, (grid, width) in enumerate(zip(self.grids, self.widths)):
            vertices[:, m] = grid[indices[:, m]]
            diagonals[:, m] = width[indices[:, m]]
        return StrataArrays(
            indices=indices,
            vertices=vertices,
            diagonals=diagonals,
            volumes=np.prod(diagonals, axis=1),
        )

    def strata(self) -> List[Stratum]:
        """All strata as records, in lexicographic order."""
        arrays = self.stratum_arrays()
        return [
            Stratum(
                index=tuple(int(i) for i in arrays.indices[p]),
                vertex=arrays.vertices[p],
                diagonal=arrays.diagonals[p],
                volume=float(arrays.volumes[p]),
            )
            for p in range(self.N_actual)
        ]


def build_design(
    dec: Decomposition, densities: Sequence[Density], alloc: Allocation
) -> CrossRegularDesign:
    """Replicate each component's grid over its coordinates.

    Raises:
        InvalidArgumentError: If densities or allocation do not match ``dec``.
        DesignError: As raised by grid_points.
    """
    densities = tuple(densities)
    if len(densities) != dec.k:
        raise InvalidArgumentError(f"expected {dec.k} densities, got {len(densities)}")
    if len(alloc.n) != dec.k or len(alloc.n_star) != dec.d:
        raise InvalidArgumentError(
            f"allocation {alloc.n} does not match decomposition l={dec.l}"
        )
    component_grids = [grid_points(h, n) for h, n in zip(densities, alloc.n)]
    grids = tuple(
        component_grids[j] for j, width in enumerate(dec.l) for _ in range(width)
    )
    design = CrossRegularDesign(
        decomposition=dec, densities=densities, allocation=alloc, grids=grids
    )
    logger.debug("design_built", n=list(alloc.n), N_actual=alloc.N_actual)
    return design
