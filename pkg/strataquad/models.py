"""Report models produced by strataquad computations.

These pydantic models are the structured results handed from the numerical
modules to the experiment runner and the CLI, which serializes them to CSV
and text summaries.
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class MseReport(BaseModel):
    """Exact mean squared error of sMCQ for one model, design and N.

    Attributes:
        N_actual: Number of strata in the design.
        e2: Total mean squared error, the compensated sum of per-stratum terms.
        error_estimate: |e2(order) - e2(order - 2)|.
        cubature_order: Gauss-Legendre order per dimension.
        method: 'stationary' (reduced difference cubature) or 'general' (pair cubature).
        kernel_evaluations: Number of d_X evaluations spent, including the check run.
        per_stratum: Optional per-stratum contributions e_i^2 in lexicographic order.
    """

    N_actual: int
    e2: float = Field(ge=0)
    error_estimate: float = Field(ge=0)
    cubature_order: int
    method: str
    kernel_evaluations: int = 0
    per_stratum: Optional[List[float]] = None


class BConstant(BaseModel):
    """A b_{beta,m}(u) evaluation with its numerical error metadata.

    Attributes:
        beta: Kernel exponent.
        m: Component width.
        u: Scaling vector.
        value: The constant.
        error_estimate: Difference between two cubature resolutions; 0 for m = 1.
        order: Cubature order per difference coordinate; 0 when closed form.
        warning: Set when the error estimate exceeds the requested tolerance.
    """

    beta: float
    m: int
    u: Tuple[float, ...]
    value: float
    error_estimate: float = 0.0
    order: int = 0
    warning: Optional[str] = None


class AllocationRow(BaseModel):
    """Optimal allocation at one target N."""

    N_target: int
    n: Tuple[int, ...]
    N_actual: int
    n_real: Tuple[float, ...]
    predicted_e2: float


class AsymptoticsReport(BaseModel):
    """Asymptotic constants of a model under a design family.

    Attributes:
        v: Per-component constants v_j.
        rho: (sum_j l_j / alpha_j)^{-1}.
        kappa: prod_j v_j^{l_j / alpha_j}.
        optimal_constant: k * kappa^rho, the constant at the optimal allocation.
        optimal_rate: 1 + rho, the optimal MSE decay exponent in N.
        b_evaluations: b constants used for the v_j.
        allocations: Optimal allocations at requested N targets.
        v_optimal: Per-component constants under optimal 1-d densities, where computed.
        densities: Density spec strings used for the v_j.
        underflow: True when a power of a tiny positive number underflowed.
        warnings: Human-readable caveats collected along the way.
    """

    v: List[float]
    rho: float
    kappa: float
    optimal_constant: float
    optimal_rate: float
    b_evaluations: List[BConstant] = Field(default_factory=list)
    allocations: List[AllocationRow] = Field(default_factory=list)
    v_optimal: Optional[List[Optional[float]]] = None
    densities: List[str] = Field(default_factory=list)
    underflow: bool = False
    warnings: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_positive(self) -> "AsymptoticsReport":
        if any(not value > 0 for value in self.v):
            raise ValueError(f"v constants must be positive, got {self.v}")
        return self


class Trend(str, Enum):
    """Direction of a diagnostic sequence as s decreases toward 0."""

    DECREASING = "decreasing"
    """Ratio tends toward 0; the growth condition holds."""

    FLAT = "flat"
    """Ratio roughly constant; borderline."""

    INCREASING = "increasing"
    """Ratio grows; the condition fails."""


class SingularityReport(BaseModel):
    """Numeric diagnostics for a quasi-regular design near a singularity.

    Attributes:
        exponent: (1 + alpha) / (2 + beta), the growth threshold for G.
        s_values: Evaluation points 1e-1 .. 1e-8.
        ratios: G(s) / s^exponent at s_values.
        slope: Log-log slope of the ratios against s.
        trend: Direction of the ratios as s -> 0.
        condition_holds: True when the ratios decrease toward 0.
        shifting_bounds: (C_L, C_U) used for the shifting check.
        shifting_ratio: sup f(s)/f(v) with |s|/|v| in [C_L, C_U], if a bound function was given.
    """

    exponent: float
    s_values: List[float]
    ratios: List[float]
    slope: float
    trend: Trend
    condition_holds: bool
    shifting_bounds: Tuple[float, float]
    shifting_ratio: Optional[float] = None


class SimulationReport(BaseModel):
    """Monte Carlo estimate of the sMCQ mean squared error.

    Attributes:
        N_actual: Number of strata.
        estimate: Mean of the squared quadrature error over replications.
        std_error: Standard error of that mean.
        replications: Field realizations drawn.
        eta_samples: Stratified samples per field realization.
        refinement: Lattice points per stratum and coordinate.
        lattice_points: Total lattice size the stratified samples are conditioned on.
        seed: Master seed.
    """

    N_actual: int
    estimate: float
    std_error: float
    replications: int
    eta_samples: int
    refinement: int
    lattice_points: int
    seed: int


class FitKind(str, Enum):
    """Family of convergence models fitted to an (N, e2) table."""

    SINGLE = "single"
    TWO_POWER = "two_power"
    SCALED = "scaled"


class FitReport(BaseModel):
    """Fitted convergence rate and constants over a sampled N range.

    The fit describes the sampled range only; it makes no extrapolation claim.

    Attributes:
        kind: Fit family.
        params: Named estimates, e.g. {'rate': 2.0, 'C': 3.03}.
        residual_norm: Euclidean norm of the fit residual (log space for single fits).
        n_range: Smallest and largest N used.
        degenerate: A coefficient was clamped to zero.
        still_trending: The scaled column has not settled.
        notes: Free-form remarks carried into the summary.
    """

    kind: FitKind
    params: Dict[str, float]
    residual_norm: float
    n_range: Tuple[int, int]
    degenerate: bool = False
    still_trending: bool = False
    notes: List[str] = Field(default_factory=list)


class ScheduleRow(BaseModel):
    """One row of a schedule table."""

    N_target: int
    N_actual: int
    e2: float
    err_est: float
    order: int
    seconds: Optional[float] = None
