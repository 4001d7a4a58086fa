"""Random field models described by their incremental variance.

A model is the incremental variance d_X(t, v) = E|X(t) - X(v)|^2 on [0, 1]^d,
an optional covariance (needed only by the simulation oracle) and the
smoothness metadata the asymptotic formulas consume. All callables are
vectorized: points are arrays whose last axis has length d, and results drop
that axis.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from strataquad.errors import DomainError, InvalidArgumentError
from strataquad.logging import get_logger

logger = get_logger(__name__)

PairFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
PointFunction = Callable[[np.ndarray], np.ndarray]


class Decomposition(BaseModel):
    """Partition of the d coordinates into k consecutive components.

    Attributes:
        l: Component widths l_1..l_k, each at least 1.
    """

    model_config = ConfigDict(frozen=True)

    l: Tuple[int, ...]

    @field_validator("l")
    @classmethod
    def validate_widths(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(value) == 0:
            raise ValueError("decomposition needs at least one component")
        if any(width < 1 for width in value):
            raise ValueError(f"component widths must be >= 1, got {value}")
        return value

    @classmethod
    def single(cls, d: int) -> "Decomposition":
        """One component spanning all d coordinates."""
        return cls(l=(d,))

    @property
    def d(self) -> int:
        return sum(self.l)

    @property
    def k(self) -> int:
        return len(self.l)

    @property
    def L(self) -> Tuple[int, ...]:
        """Cumulative widths L_0 = 0, ..., L_k = d."""
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.l)]))

    def slices(self) -> list:
        """Zero-based coordinate slices, one per component."""
        cumulative = self.L
        return [slice(cumulative[j], cumulative[j + 1]) for j in range(self.k)]

    def component_of(self, m: int) -> int:
        """Return the component index j whose slice contains coordinate m (both 0-based)."""
        if not 0 <= m < self.d:
            raise InvalidArgumentError(f"coordinate {m} outside 0..{self.d - 1}")
        return int(np.searchsorted(self.L, m, side="right")) - 1

    def expand(self, values: Sequence) -> np.ndarray:
        """Repeat per-component values to per-coordinate values."""
        if len(values) != self.k:
            raise InvalidArgumentError(
                f"expected {self.k} per-component values, got {len(values)}"
            )
        return np.repeat(np.asarray(values), self.l)


class SmoothnessSpec(BaseModel):
    """Per-component smoothness exponents and their per-coordinate expansion.

    Attributes:
        alpha: Exponents alpha_1..alpha_k, each in (0, 2).
        alpha_star: Per-coordinate expansion, alpha_star_i = alpha_j on component j.
    """

    model_config = ConfigDict(frozen=True)

    alpha: Tuple[float, ...]
    alpha_star: Tuple[float, ...]

    @field_validator("alpha", "alpha_star")
    @classmethod
    def validate_range(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        for a in value:
            if not 0 < a < 2:
                raise ValueError(f"smoothness exponents must lie in (0, 2), got {a}")
        return value

    @classmethod
    def for_decomposition(cls, alpha: Sequence[float], dec: Decomposition) -> "SmoothnessSpec":
        """Build the smoothness for ``dec``, expanding alpha per coordinate."""
        alpha = tuple(float(a) for a in alpha)
        if len(alpha) != dec.k:
            raise InvalidArgumentError(
                f"alpha has {len(alpha)} entries but the decomposition has {dec.k} components"
            )
        return cls(alpha=alpha, alpha_star=tuple(float(a) for a in dec.expand(alpha)))


class HolderData(BaseModel):
    """Global Hölder bound d_X(t, t+s) <= constant * |s|^beta near a singularity."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(gt=0, lt=2)
    constant: float = Field(gt=0)


@dataclass(frozen=True)
class FieldModel:
    """A second-order random field on [0, 1]^d.

    Attributes:
        dim: Dimension d.
        incremental_variance: Vectorized d_X(t, v).
        decomposition: Coordinate partition l.
        smoothness: Exponents alpha per component.
        covariance: Optional vectorized r(t, s); required by simulate_mse.
        local_stationarity_c: Optional c_j(t) functions, one per component.
        holder: Optional global Hölder data.
        singular_at_origin: Whether the local behavior degenerates at t = 0.
        increment_kernel: For stationary increments, K(s) = d_X(t, t+s),
            even in every coordinate. Enables the reduced cubature in exact_mse.
        name: Short label used in logs and reports.
    """

    dim: int
    incremental_variance: PairFunction
    decomposition: Decomposition
    smoothness: SmoothnessSpec
    covariance: Optional[PairFunction] = None
    local_stationarity_c: Optional[Tuple[PointFunction, ...]] = None
    holder: Optional[HolderData] = None
    singular_at_origin: bool = False
    increment_kernel: Optional[PointFunction] = field(default=None, compare=False)
    name: str = "field"

    def __post_init__(self) -> None:
        if self.decomposition.d != self.dim:
            raise InvalidArgumentError(
                f"decomposition covers {self.decomposition.d} coordinates, model has {self.dim}"
            )
        if len(self.smoothness.alpha) != self.decomposition.k:
            raise InvalidArgumentError("smoothness does not match the decomposition")
        if (
            self.local_stationarity_c is not None
            and len(self.local_stationarity_c) != self.decomposition.k
        ):
            raise InvalidArgumentError(
                f"expected {self.decomposition.k} local stationarity functions, "
                f"got {len(self.local_stationarity_c)}"
            )

    def d_x(self, t, v) -> np.ndarray:
        """Evaluate the incremental variance on array-like points."""
        return self.incremental_variance(_as_points(t, self.dim), _as_points(v, self.dim))

    def local_scale(self, t, s) -> np.ndarray:
        """Evaluate sum_j c_j(t) |s^j|^{alpha_j}, the leading term of d_X(t, t+s)."""
        if self.local_stationarity_c is None:
            raise InvalidArgumentError(f"model '{self.name}' carries no local stationarity functions")
        t = _as_points(t, self.dim)
        s = _as_points(s, self.dim)
        total = np.zeros(np.broadcast_shapes(t.shape[:-1], s.shape[:-1]))
        for c_j, part, a_j in zip(
            self.local_stationarity_c, self.decomposition.slices(), self.smoothness.alpha
        ):
            total = total + c_j(t) * np.linalg.norm(s[..., part], axis=-1) ** a_j
        return total


def _as_points(x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != dim:
        if dim == 1:
            arr = arr[..., np.newaxis]
        else:
            raise InvalidArgumentError(f"points must have last axis {dim}, got shape {arr.shape}")
    return arr


def anisotropic_norm(s, dec: Decomposition, alpha: SmoothnessSpec) -> np.ndarray:
    """Return sum_j |s^j|^{alpha_j} over the component slices of ``s``.

    Args:
        s: Point or array of points with last axis d.
        dec: Coordinate decomposition.
        alpha: Smoothness exponents, one per component.

    Returns:
        The anisotropic norm; a scalar array for a single point.

    Raises:
        InvalidArgumentError: If the last axis of ``s`` is not d, or alpha
            does not match the decomposition.
    """
    arr = np.asarray(s, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != dec.d:
        raise InvalidArgumentError(
            f"expected points with last axis {dec.d}, got shape {arr.shape}"
        )
    if len(alpha.alpha) != dec.k:
        raise InvalidArgumentError(
            f"alpha has {len(alpha.alpha)} entries, decomposition has {dec.k} components"
        )
    total = np.zeros(arr.shape[:-1])
    for part, a_j in zip(dec.slices(), alpha.alpha):
        total = total + np.linalg.norm(arr[..., part], axis=-1) ** a_j
    return total


def _constant(value: float) -> PointFunction:
    def c(t: np.ndarray) -> np.ndarray:
        return np.full(np.shape(t)[:-1], value)

    return c


def make_fbf(dec: Decomposition, alpha: SmoothnessSpec) -> FieldModel:
    """Fractional Brownian field with stationary increments d_X(t, v) = |t - v|_alpha."""
    if len(alpha.alpha) != dec.k:
        raise InvalidArgumentError("alpha does not match the decomposition")

    def norm(x: np.ndarray) -> np.ndarray:
        return anisotropic_norm(x, dec, alpha)

    def d_x(t: np.ndarray, v: np.ndarray) -> np.ndarray:
        return norm(t - v)

    def covariance(t: np.ndarray, s: np.ndarray) -> np.ndarray:
        return 0.5 * (norm(t) + norm(s) - norm(t - s))

    holder = HolderData(beta=alpha.alpha[0], constant=1.0) if dec.k == 1 else None
    return FieldModel(
        dim=dec.d,
        incremental_variance=d_x,
        decomposition=dec,
        smoothness=alpha,
        covariance=covariance,
        local_stationarity_c=tuple(_constant(1.0) for _ in range(dec.k)),
        holder=holder,
        increment_kernel=norm,
        name=f"fbf(l={list(dec.l)}, alpha={list(alpha.alpha)})",
    )


def make_exp_field(alpha: float, dim: int) -> FieldModel:
    """Stationary field with covariance exp(-|t - s|^alpha).

    Raises:
        InvalidArgumentError: If alpha is outside (0, 2).
    """
    if not 0 < alpha < 2:
        raise InvalidArgumentError(f"alpha must lie in (0, 2), got {alpha}")
    if dim < 1:
        raise InvalidArgumentError(f"dimension must be >= 1, got {dim}")
    dec = Decomposition.single(dim)

    def kernel(s: np.ndarray) -> np.ndarray:
        # 2(1 - exp(-x)) without cancellation for small x
        return -2.0 * np.expm1(-np.linalg.norm(s, axis=-1) ** alpha)

    def d_x(t: np.ndarray, v: np.ndarray) -> np.ndarray:
        return kernel(t - v)

    def covariance(t: np.ndarray, s: np.ndarray) -> np.ndarray:
        return np.exp(-np.linalg.norm(t - s, axis=-1) ** alpha)

    return FieldModel(
        dim=dim,
        incremental_variance=d_x,
        decomposition=dec,
        smoothness=SmoothnessSpec.for_decomposition((alpha,), dec),
        covariance=covariance,
        local_stationarity_c=(_constant(2.0),),
        holder=HolderData(beta=alpha, constant=2.0),
        increment_kernel=kernel,
        name=f"exp(alpha={alpha}, d={dim})",
    )


def make_amplitude_modulated(
    base: FieldModel,
    a: PointFunction,
    *,
    local_stationarity_c: Optional[Tuple[PointFunction, ...]] = None,
    singular_at_origin: Optional[bool] = None,
    holder: Optional[HolderData] = None,
    name: Optional[str] = None,
) -> FieldModel:
    """Modulate ``base`` by a positive amplitude: X(t) = a(t) Y(t).

    The covariance is a(t) a(s) r_base(t, s). Without explicit c functions the
    model uses c_j(t) = a(t)^2 c_base,j(t).

    Raises:
        InvalidArgumentError: If ``base`` has no covariance.
        DomainError: At evaluation time, if a(t) <= 0 at an evaluated point.
    """
    if base.covariance is None:
        raise InvalidArgumentError(f"base model '{base.name}' has no covariance")
    base_cov = base.covariance
    base_dx = base.incremental_variance

    def amplitude(t: np.ndarray) -> np.ndarray:
        values = np.asarray(a(t), dtype=float)
        if np.any(~(values > 0)):
            raise DomainError("amplitude must be positive at every evaluated point")
        return values

    def covariance(t: np.ndarray, s: np.ndarray) -> np.ndarray:
        return amplitude(t) * amplitude(s) * base_cov(t, s)

    def d_x(t: np.ndarray, v: np.ndarray) -> np.ndarray:
        a_t = amplitude(t)
        a_v = amplitude(v)
        var_t = base_cov(t, t)
        var_v = base_cov(v, v)
        return (a_t - a_v) * (a_t * var_t - a_v * var_v) + a_t * a_v * base_dx(t, v)

    if local_stationarity_c is None and base.local_stationarity_c is not None:
        local_stationarity_c = tuple(
            _modulated_c(amplitude, c_base) for c_base in base.local_stationarity_c
        )

    return FieldModel(
        dim=base.dim,
        incremental_variance=d_x,
        decomposition=base.decomposition,
        smoothness=base.smoothness,
        covariance=covariance,
        local_stationarity_c=local_stationarity_c,
        holder=holder,
        singular_at_origin=base.singular_at_origin if singular_at_origin is None else singular_at_origin,
        name=name or f"modulated({base.name})",
    )


def _modulated_c(amplitude: PointFunction, c_base: PointFunction) -> PointFunction:
    def c(t: np.ndarray) -> np.ndarray:
        return amplitude(t) ** 2 * c_base(t)

    return c


def inverse_shift(scale: float = 1.0, shift: float = 0.1) -> PointFunction:
    """Amplitude a(t) = scale / (|t| + shift)."""
    if shift <= 0 or scale <= 0:
        raise InvalidArgumentError("inverse_shift needs positive scale and shift")

    def a(t: np.ndarray) -> np.ndarray:
        return scale / (np.linalg.norm(t, axis=-1) + shift)

    return a


def radial_power(scale: float = 1.0, power: float = 0.5) -> PointFunction:
    """Amplitude a(t) = scale * |t|^power, vanishing at the origin."""
    if scale <= 0 or power <= 0:
        raise InvalidArgumentError("radial_power needs positive scale and power")

    def a(t: np.ndarray) -> np.ndarray:
        return scale * np.linalg.norm(t, axis=-1) ** power

    return a


def make_warped_fbm(lam: float, beta: float, amplitude: float = 1.0) -> FieldModel:
    """Time-warped fractional Brownian motion X(t) = amplitude * B_beta(t^lam) on [0, 1].

    Args:
        lam: Warp exponent in (0, 1]; lam < 1 makes the model singular at 0.
        beta: Exponent of the underlying fBm increment variance, in (0, 2).
        amplitude: Positive scale factor.

    Raises:
        InvalidArgumentError: On out-of-range parameters.
    """
    if not 0 < lam <= 1:
        raise InvalidArgumentError(f"lambda must lie in (0, 1], got {lam}")
    if not 0 < beta < 2:
        raise InvalidArgumentError(f"beta must lie in (0, 2), got {beta}")
    if amplitude <= 0:
        raise InvalidArgumentError(f"amplitude must be positive, got {amplitude}")
    dec = Decomposition.single(1)
    scale = amplitude**2

    def d_x(t: np.ndarray, v: np.ndarray) -> np.ndarray:
        return scale * np.abs(t[..., 0] ** lam - v[..., 0] ** lam) ** beta

    def covariance(t: np.ndarray, s: np.ndarray) -> np.ndarray:
        tw = t[..., 0] ** lam
        sw = s[..., 0] ** lam
        return 0.5 * scale * (tw**beta + sw**beta - np.abs(tw - sw) ** beta)

    def c(t: np.ndarray) -> np.ndarray:
        return scale * lam**beta * t[..., 0] ** (beta * (lam - 1.0))

    return FieldModel(
        dim=1,
        incremental_variance=d_x,
        decomposition=dec,
        smoothness=SmoothnessSpec.for_decomposition((beta,), dec),
        covariance=covariance,
        local_stationarity_c=(c,),
        holder=HolderData(beta=beta * lam, constant=scale),
        singular_at_origin=lam < 1,
        name=f"warped_fbm(lambda={lam}, beta={beta}, amplitude={amplitude})",
    )


def local_stationarity_ratio(model: FieldModel, t, s) -> np.ndarray:
    """Ratio d_X(t, t+s) / sum_j c_j(t) |s^j|^{alpha_j}; tends to 1 as s -> 0."""
    t = _as_points(t, model.dim)
    s = _as_points(s, model.dim)
    return model.incremental_variance(t, t + s) / model.local_scale(t, s)


def check_local_stationarity(
    model: FieldModel,
    n_points: int = 100,
    step: float = 1e-3,
    seed: int = 0,
    exclude_radius: float = 0.05,
) -> float:
    """Largest |ratio - 1| of the local stationarity ratio at random interior points.

    Points within ``exclude_radius`` of the origin are skipped for singular
    models. Each point gets an increment of norm ``step`` in a random direction
    pointing into the cube.
    """
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < n_points:
        t = rng.uniform(0.0, 1.0 - step, size=model.dim)
        if model.singular_at_origin and np.linalg.norm(t) < exclude_radius:
            continue
        points.append(t)
    t = np.array(points)
    direction = np.abs(rng.standard_normal((n_points, model.dim)))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    ratio = local_stationarity_ratio(model, t, step * direction)
    worst = float(np.max(np.abs(ratio - 1.0)))
    logger.debug("local_stationarity_checked", model=model.name, step=step, worst=worst)
    return worst
