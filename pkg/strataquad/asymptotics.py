"""Asymptotic constants of stratified Monte Carlo quadrature.

Evaluates the quantities that govern the large-N behavior of the MSE:
the one-observation constants b_{beta,m}(u), the per-component constants
v_j, the optimal rate and allocation (rho, kappa), optimal one-dimensional
densities, Hölder upper bounds and diagnostics for designs that compensate
a singularity at the origin.

Component indices ``j`` are 0-based throughout.
"""

import math
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from strataquad.design.densities import (
    Density,
    ExplicitDensity,
    PowerDensity,
    UniformDensity,
    panel_edges,
)
from strataquad.design.grids import Allocation, allocate_optimal, optimal_allocation_reals
from strataquad.errors import DomainError, InvalidArgumentError, SingularityError
from strataquad.fields import Decomposition, FieldModel, SmoothnessSpec
from strataquad.logging import get_logger
from strataquad.models import (
    AllocationRow,
    AsymptoticsReport,
    BConstant,
    SingularityReport,
    Trend,
)
from strataquad.quadrature.rules import (
    gauss_legendre_unit,
    tensor_difference_rule,
    tensor_gauss_legendre,
)

logger = get_logger(__name__)

DEFAULT_V_ORDER = 16
SHELL_DEPTH = 40
B_TOLERANCE = 1e-6
_POWER_LAW_RESIDUAL = 1e-9


def a_const(beta: float) -> float:
    """a_beta = 1 / ((1 + beta)(2 + beta)), the one-dimensional b constant."""
    if not 0 < beta < 2:
        raise InvalidArgumentError(f"beta must lie in (0, 2), got {beta}")
    return 1.0 / ((1.0 + beta) * (2.0 + beta))


def _default_b_budget(m: int) -> float:
    return 1e6 if m <= 2 else 1e7


def b_const(
    beta: float,
    m: int,
    u: Optional[Sequence[float]] = None,
    budget: Optional[float] = None,
    tol: float = B_TOLERANCE,
) -> BConstant:
    """One-observation constant b_{beta,m}(u) = 1/2 E|u * (T - V)|^beta.

    For m = 1 the closed form u^beta a_beta is exact. For m >= 2 the 2m-fold
    integral is reduced to the m-dimensional law of |T - V| and evaluated by
    the graded difference rule; ``budget`` plays the role of a 2m-dimensional
    lattice size, giving order ceil(budget^{1/(2m)}). The error estimate is the
    change against order - 2.

    Args:
        beta: Exponent in (0, 2).
        m: Dimension of the component.
        u: Positive scaling vector of length m; ones when None.
        budget: Accuracy parameter; 1e6 for m <= 2 and 1e7 above.
        tol: Relative tolerance above which the report carries a warning.

    Raises:
        InvalidArgumentError: On out-of-range beta, m or u.
    """
    if not 0 < beta < 2:
        raise InvalidArgumentError(f"beta must lie in (0, 2), got {beta}")
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    u = (1.0,) * m if u is None else tuple(float(x) for x in u)
    if len(u) != m or any(not x > 0 for x in u):
        raise InvalidArgumentError(f"u must hold {m} positive entries, got {u}")
    if m == 1:
        return BConstant(beta=beta, m=1, u=u, value=u[0] ** beta * a_const(beta))

    budget = _default_b_budget(m) if budget is None else budget
    order = max(4, math.ceil(budget ** (1.0 / (2 * m)) - 1e-9))
    fine = _b_cubature(beta, u, order)
    coarse = _b_cubature(beta, u, order - 2)
    error = abs(fine - coarse)
    warning = None
    if error > tol * fine:
        warning = f"b_const error estimate {error:.2e} exceeds tolerance; raise the budget"
        logger.warning("b_const_inaccurate", beta=beta, m=m, order=order, error=error)
    return BConstant(
        beta=beta, m=m, u=u, value=fine, error_estimate=error, order=order, warning=warning
    )


def _b_cubature(beta: float, u: Tuple[float, ...], order: int) -> float:
    nodes, weights = tensor_difference_rule(order, len(u))
    values = np.linalg.norm(nodes * np.asarray(u), axis=1) ** beta
    return 0.5 * float(np.dot(values, weights))


@lru_cache(maxsize=None)
def b_tilde(beta: float, m: int) -> float:
    """b_{beta,m}(1_m)."""
    return b_const(beta, m).value


def rho_kappa(alpha: SmoothnessSpec, dec: Decomposition, v: Sequence[float]) -> Tuple[float, float]:
    """rho = (sum_j l_j / alpha_j)^{-1} and kappa = prod_j v_j^{l_j / alpha_j}.

    Raises:
        InvalidArgumentError: If any v_j <= 0 or shapes disagree.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (dec.k,) or len(alpha.alpha) != dec.k:
        raise InvalidArgumentError("v, alpha and the decomposition must have k entries each")
    if np.any(~(v > 0)):
        raise InvalidArgumentError(f"v must be positive, got {v.tolist()}")
    exponents = np.asarray(dec.l) / np.asarray(alpha.alpha)
    rho = 1.0 / float(exponents.sum())
    kappa = math.exp(float(np.dot(exponents, np.log(v))))
    return rho, kappa


def optimal_constant(alpha: SmoothnessSpec, dec: Decomposition, v: Sequence[float]) -> float:
    """k * kappa^rho, the MSE constant at the optimal allocation."""
    rho, kappa = rho_kappa(alpha, dec, v)
    return dec.k * kappa**rho


def optimal_rate(alpha: SmoothnessSpec, dec: Decomposition) -> float:
    """1 + rho, the MSE decay exponent at the optimal allocation."""
    return 1.0 + 1.0 / float(np.sum(np.asarray(dec.l) / np.asarray(alpha.alpha)))


def predicted_mse(
    v: Sequence[float], alpha: SmoothnessSpec, dec: Decomposition, alloc: Allocation
) -> float:
    """(1 / N) sum_j v_j / n_j^{alpha_j} at the realized allocation."""
    v = np.asarray(v, dtype=float)
    n = np.asarray(alloc.n, dtype=float)
    if v.shape != (dec.k,) or n.shape != (dec.k,):
        raise InvalidArgumentError("v and allocation must have one entry per component")
    return float(np.sum(v / n ** np.asarray(alpha.alpha)) / alloc.N_actual)


def _coordinate_densities(densities: Sequence[Density], dec: Decomposition) -> List[Density]:
    densities = list(densities)
    if len(densities) != dec.k:
        raise InvalidArgumentError(f"expected {dec.k} densities, got {len(densities)}")
    return [densities[j] for j in range(dec.k) for _ in range(dec.l[j])]


def _v_integrand(
    model: FieldModel, densities: Sequence[Density], j: int
) -> Callable[[np.ndarray], np.ndarray]:
    """c_j(t) b_{alpha_j,l_j}(D_j(t^j)) prod_m 1/h*_m(t_m) at points t of shape (M, d)."""
    dec = model.decomposition
    per_coordinate = _coordinate_densities(densities, dec)
    part = dec.slices()[j]
    alpha_j = model.smoothness.alpha[j]
    c_j = model.local_stationarity_c[j]

    def integrand(t: np.ndarray) -> np.ndarray:
        h = np.stack([density.pdf(t[:, m]) for m, density in enumerate(per_coordinate)], axis=1)
        inv_h = 1.0 / h
        weight = np.prod(inv_h, axis=1)
        u = inv_h[:, part]
        if dec.l[j] == 1:
            b = a_const(alpha_j) * u[:, 0] ** alpha_j
        else:
            unique, inverse = np.unique(u, axis=0, return_inverse=True)
            values = np.array([b_const(alpha_j, dec.l[j], row).value for row in unique])
            b = values[np.asarray(inverse).reshape(-1)]
        return c_j(t) * b * weight

    return integrand


def _shell_integral(
    integrand: Callable[[np.ndarray], np.ndarray], dim: int, order: int, label: str
) -> float:
    """Integral over [0, 1]^dim accumulated over dyadic shells toward the origin.

    Shell k is [0, 2^-k]^dim minus [0, 2^-(k+1)]^dim, split into boxes with a
    tensor Gauss-Legendre rule each. The remainder below 2^-SHELL_DEPTH is
    extrapolated geometrically from the last two shells.

    Raises:
        SingularityError: If shell contributions do not decay, i.e. the
            integral diverges.
    """
    nodes, weights = tensor_gauss_legendre(order, dim)
    corners = [c for c in np.ndindex(*(2,) * dim) if any(c)]
    shells = []
    for k in range(SHELL_DEPTH):
        half = 2.0 ** -(k + 1)
        total = []
        for corner in corners:
            lower = np.asarray(corner, dtype=float) * half
            points = lower + half * nodes
            total.append(float(np.dot(integrand(points), weights)) * half**dim)
        shells.append(math.fsum(total))
    last, previous = shells[-1], shells[-2]
    if not all(np.isfinite(shells)):
        raise SingularityError(f"{label}: non-finite shell contribution near the origin")
    tail = 0.0
    if last > 0 and previous > 0:
        ratio = last / previous
        if ratio >= 1.0 - 1e-3:
            raise SingularityError(
                f"{label}: the integral diverges at the origin (shell ratio {ratio:.3f}); "
                "the singularity degrades the convergence rate"
            )
        tail = last * ratio / (1.0 - ratio)
    return math.fsum(shells) + tail


def v_constant(
    model: FieldModel,
    densities: Sequence[Density],
    dec: Decomposition,
    j: int,
    order: int = DEFAULT_V_ORDER,
    allow_singular: bool = False,
) -> float:
    """Asymptotic constant v_j of component j.

    Regular models with regular densities use a tensor Gauss-Legendre rule of
    ``order`` per dimension. One-dimensional models with quasi-regular
    densities, and singular models when ``allow_singular`` is set, go through
    dyadic shells toward the origin; in d = 1 the quantile substitution
    v = a_alpha int c(G(s)) g(s)^{2+alpha} ds is integrated instead.

    Raises:
        InvalidArgumentError: If the model has no c functions or j is out of range.
        SingularityError: If the model is singular and ``allow_singular`` is
            False, or the singular integral diverges.
    """
    if model.local_stationarity_c is None:
        raise InvalidArgumentError(f"model '{model.name}' carries no local stationarity functions")
    if dec != model.decomposition:
        raise InvalidArgumentError("decomposition does not match the model")
    if not 0 <= j < dec.k:
        raise InvalidArgumentError(f"component {j} outside 0..{dec.k - 1}")
    if model.singular_at_origin and not allow_singular:
        raise SingularityError(
            f"model '{model.name}' is singular at the origin; v_j needs allow_singular=True"
        )
    regular = all(h.regular for h in densities)

    if dec.d == 1 and (model.singular_at_origin or not regular):
        density = densities[0]
        alpha = model.smoothness.alpha[0]
        c = model.local_stationarity_c[0]

        def substituted(s: np.ndarray) -> np.ndarray:
            s = s[:, 0]
            g = density.quantile_density(s)
            return c(density.quantile(s)[:, None]) * g ** (2.0 + alpha)

        value = a_const(alpha) * _shell_integral(substituted, 1, order, model.name)
    elif model.singular_at_origin:
        value = _shell_integral(_v_integrand(model, densities, j), dec.d, max(4, order // 2), model.name)
    else:
        if not regular:
            raise SingularityError("quasi-regular densities are supported for d = 1 only")
        nodes, weights = tensor_gauss_legendre(order, dec.d)
        value = float(np.dot(_v_integrand(model, densities, j)(nodes), weights))
    logger.debug("v_constant", model=model.name, component=j, value=value)
    return value


def q_function(
    model: FieldModel,
    densities: Sequence[Density],
    dec: Decomposition,
    j: int,
    t,
    order: int = DEFAULT_V_ORDER,
) -> np.ndarray:
    """Q_j(t): c_j integrated over the other coordinates, weighted by 1/h*.

    Component j must be one-dimensional. ``t`` may be a scalar or an array.

    Raises:
        InvalidArgumentError: If l_j != 1 or the model has no c functions.
    """
    if not 0 <= j < dec.k or dec.l[j] != 1:
        raise InvalidArgumentError(f"Q_j needs a one-dimensional component, got j={j}, l={dec.l}")
    if model.local_stationarity_c is None:
        raise InvalidArgumentError(f"model '{model.name}' carries no local stationarity functions")
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    coordinate = dec.L[j]
    c_j = model.local_stationarity_c[j]
    if dec.d == 1:
        return c_j(flat[:, None]).reshape(t.shape)
    others = [m for m in range(dec.d) if m != coordinate]
    per_coordinate = _coordinate_densities(densities, dec)
    nodes, weights = tensor_gauss_legendre(order, dec.d - 1)
    inv_h = np.prod(
        np.stack([1.0 / per_coordinate[m].pdf(nodes[:, i]) for i, m in enumerate(others)], axis=1),
        axis=1,
    )
    points = np.empty((len(flat), len(weights), dec.d))
    points[:, :, others] = nodes[None, :, :]
    points[:, :, coordinate] = flat[:, None]
    values = c_j(points) * inv_h[None, :]
    return (values @ weights).reshape(t.shape)


def _detect_power_law(Q: Callable[[np.ndarray], np.ndarray]) -> Optional[Tuple[float, float]]:
    """Return (K, e) when Q(t) = K t^e on a log lattice, else None."""
    t = np.logspace(-6, 0, 25)
    values = np.asarray(Q(t), dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise DomainError("Q must be positive and finite on (0, 1]")
    slope, intercept = np.polyfit(np.log(t), np.log(values), 1)
    residual = np.log(values) - (slope * np.log(t) + intercept)
    if np.max(np.abs(residual)) > _POWER_LAW_RESIDUAL:
        return None
    return math.exp(intercept), float(slope)


def optimal_density_1d(
    Q: Callable[[np.ndarray], np.ndarray], alpha: float
) -> Tuple[Density, float]:
    """Density h proportional to Q^gamma, gamma = 1/(2 + alpha), and its v_opt.

    Power laws Q = K t^e give an exact PowerDensity with theta = e gamma and
    constants give the uniform density; other Q become an ExplicitDensity
    normalized by composite Gauss-Legendre panels.

    Returns:
        The density and v_opt = a_alpha (int Q^gamma)^{1/gamma}.

    Raises:
        DomainError: If Q^gamma is not integrable or Q is not positive.
    """
    gamma = 1.0 / (2.0 + alpha)
    a = a_const(alpha)
    power_law = _detect_power_law(Q)
    if power_law is not None:
        K, exponent = power_law
        if abs(exponent) < 1e-12:
            return UniformDensity(), a * K
        theta = exponent * gamma
        if not theta > -1:
            raise DomainError(f"Q^gamma ~ t^{theta:.4f} is not integrable at the origin")
        mass = K**gamma / (theta + 1.0)
        return PowerDensity(theta), a * mass ** (1.0 / gamma)

    edges = panel_edges()
    nodes, weights = gauss_legendre_unit(DEFAULT_V_ORDER)
    left = edges[:-1, None]
    width = np.diff(edges)[:, None]
    values = np.asarray(Q(left + width * nodes), dtype=float) ** gamma
    mass = float(np.sum((values * weights).sum(axis=1) * width[:, 0]))
    if not np.isfinite(mass) or mass <= 0:
        raise DomainError("Q^gamma is not integrable on [0, 1]")

    def h(t: np.ndarray) -> np.ndarray:
        return np.asarray(Q(t), dtype=float) ** gamma / mass

    return ExplicitDensity(h, label="optimal"), a * mass ** (1.0 / gamma)


def holder_upper_bound(
    C: float,
    densities: Sequence[Density],
    alpha: SmoothnessSpec,
    dec: Decomposition,
    alloc: Allocation,
) -> float:
    """Upper bound (C / N) sum_j d_j / n_j^{alpha_j} for Hölder-class fields.

    d_j = a_{alpha_j} l_j^{1 + alpha_j/2} C_j^{alpha_j} prod_i C_i^{l_i} with
    C_j = 1 / min h_j.

    Raises:
        InvalidArgumentError: If a density vanishes somewhere (min h = 0).
    """
    if C <= 0:
        raise InvalidArgumentError(f"Hölder constant must be positive, got {C}")
    if len(densities) != dec.k:
        raise InvalidArgumentError(f"expected {dec.k} densities, got {len(densities)}")
    minima = np.array([h.min_density for h in densities], dtype=float)
    if np.any(~(minima > 0)):
        raise InvalidArgumentError("Hölder bound needs densities bounded away from zero")
    C_j = 1.0 / minima
    a = np.asarray(alpha.alpha)
    l = np.asarray(dec.l, dtype=float)
    volume_factor = float(np.prod(C_j**l))
    d_j = np.array([a_const(x) for x in a]) * l ** (1.0 + a / 2.0) * C_j**a * volume_factor
    n = np.asarray(alloc.n, dtype=float)
    return float(C * np.sum(d_j / n**a) / alloc.N_actual)


def shifting_bounds(dim: int) -> Tuple[float, float]:
    """(C_L, C_U) of the shifting condition for dimension ``dim``."""
    if dim == 1:
        return 0.5, 2.0
    return 1.0 / math.sqrt(3.0 + dim), math.sqrt(3.0 + dim)


def _classify(slope: float) -> Trend:
    if slope > 0.01:
        return Trend.DECREASING
    if slope < -0.01:
        return Trend.INCREASING
    return Trend.FLAT


def singularity_diagnostics(
    G: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    beta: float,
    bound: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    dim: int = 1,
) -> SingularityReport:
    """Check G(s) = o(s^{(1+alpha)/(2+beta)}) and, optionally, the shifting condition.

    Args:
        G: Quantile function of the design density.
        alpha: Local smoothness away from the singularity.
        beta: Hölder exponent near the singularity.
        bound: Optional radial bound function f(r) for the shifting check.
        dim: Dimension, selecting the shifting bounds.
    """
    exponent = (1.0 + alpha) / (2.0 + beta)
    s = 10.0 ** -np.arange(1, 9)
    ratios = np.asarray(G(s), dtype=float) / s**exponent
    slope = float(np.polyfit(np.log(s), np.log(ratios), 1)[0])
    trend = _classify(slope)
    c_low, c_up = shifting_bounds(dim)
    shifting = None
    if bound is not None:
        radii = np.logspace(-8, -1, 141)
        quotient = radii[:, None] / radii[None, :]
        admissible = (quotient >= c_low) & (quotient <= c_up)
        values = np.asarray(bound(radii), dtype=float)
        pair_ratio = values[:, None] / values[None, :]
        shifting = float(np.max(pair_ratio[admissible]))
    return SingularityReport(
        exponent=exponent,
        s_values=s.tolist(),
        ratios=ratios.tolist(),
        slope=slope,
        trend=trend,
        condition_holds=trend == Trend.DECREASING,
        shifting_bounds=(c_low, c_up),
        shifting_ratio=shifting,
    )


def analyze(
    model: FieldModel,
    densities: Sequence[Density],
    N_targets: Sequence[int] = (),
    allow_singular: bool = False,
    optimize_densities: bool = False,
) -> AsymptoticsReport:
    """Collect v_j, rho, kappa, optimal allocations and optimal 1-d constants.

    Raises:
        SingularityError: As v_constant.
    """
    dec = model.decomposition
    alpha = model.smoothness
    v = [v_constant(model, densities, dec, j, allow_singular=allow_singular) for j in range(dec.k)]
    rho, kappa = rho_kappa(alpha, dec, v)
    underflow = kappa == 0.0 or not math.isfinite(kappa)
    b_evaluations = [b_const(a_j, l_j) for a_j, l_j in zip(alpha.alpha, dec.l)]
    warnings = [b.warning for b in b_evaluations if b.warning]

    rows = []
    for N in N_targets:
        alloc = allocate_optimal(v, alpha, dec, N)
        rows.append(
            AllocationRow(
                N_target=int(N),
                n=alloc.n,
                N_actual=alloc.N_actual,
                n_real=tuple(float(x) for x in optimal_allocation_reals(v, alpha, dec, N)),
                predicted_e2=predicted_mse(v, alpha, dec, alloc),
            )
        )

    v_optimal = None
    if optimize_densities:
        v_optimal = []
        for j in range(dec.k):
            if dec.l[j] != 1:
                v_optimal.append(None)
                continue
            try:
                _, v_opt = optimal_density_1d(
                    lambda t, j=j: q_function(model, densities, dec, j, t), alpha.alpha[j]
                )
            except DomainError as e:
                warnings.append(f"component {j}: no optimal density ({e})")
                v_opt = None
            v_optimal.append(v_opt)

    report = AsymptoticsReport(
        v=v,
        rho=rho,
        kappa=kappa,
        optimal_constant=dec.k * kappa**rho,
        optimal_rate=1.0 + rho,
        b_evaluations=b_evaluations,
        allocations=rows,
        v_optimal=v_optimal,
        densities=[h.spec_string for h in densities],
        underflow=underflow,
        warnings=warnings,
    )
    logger.info("asymptotics_computed", model=model.name, v=v, rho=rho, kappa=kappa)
    return report
