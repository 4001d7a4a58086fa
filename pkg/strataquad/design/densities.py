"""Grid densities on [0, 1] and their quantile functions.

Every density exposes its CDF H, quantile function G = H^{-1} and quantile
density g = G'. Regular densities are positive and continuous on [0, 1];
quasi-regular ones may blow up at 0 and are best described by G directly.
"""

from abc import ABC, abstractmethod
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from strataquad.errors import DesignError, InvalidArgumentError

ROOT_TOL = 1e-12
NORMALIZATION_TOL = 1e-10
_PANEL_ORDER = 16
_BISECTION_STEPS = 48


class Density(ABC):
    """A probability density on [0, 1] used to place grid points."""

    kind: str = "density"

    @abstractmethod
    def pdf(self, t: np.ndarray) -> np.ndarray:
        """Density h(t)."""

    @abstractmethod
    def cdf(self, t: np.ndarray) -> np.ndarray:
        """Distribution function H(t)."""

    @abstractmethod
    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Quantile function G(u) = H^{-1}(u)."""

    def quantile_density(self, u: np.ndarray) -> np.ndarray:
        """Derivative g(u) = 1 / h(G(u))."""
        with np.errstate(divide="ignore"):
            return 1.0 / self.pdf(self.quantile(u))

    @property
    @abstractmethod
    def regular(self) -> bool:
        """True iff h is positive and continuous on [0, 1]."""

    @property
    @abstractmethod
    def min_density(self) -> float:
        """Infimum of h over [0, 1]; zero for densities vanishing somewhere."""

    @property
    @abstractmethod
    def spec_string(self) -> str:
        """Config string that reproduces this density, where one exists."""

    @property
    def power_exponent(self) -> Optional[float]:
        """Exponent theta when h(t) is proportional to t^theta, else None."""
        return None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec_string!r})"


class UniformDensity(Density):
    kind = "uniform"

    def pdf(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def cdf(self, t):
        return np.clip(np.asarray(t, dtype=float), 0.0, 1.0)

    def quantile(self, u):
        return np.clip(np.asarray(u, dtype=float), 0.0, 1.0)

    def quantile_density(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    @property
    def regular(self) -> bool:
        return True

    @property
    def min_density(self) -> float:
        return 1.0

    @property
    def spec_string(self) -> str:
        return "uniform"

    @property
    def power_exponent(self) -> Optional[float]:
        return 0.0


class PowerDensity(Density):
    """h(t) = (theta + 1) t^theta with closed-form H, G and g.

    theta < 0 gives a quasi-regular density, unbounded at 0.
    """

    kind = "power"

    def __init__(self, theta: float):
        if not theta > -1:
            raise InvalidArgumentError(f"power density needs theta > -1, got {theta}")
        self.theta = float(theta)
        self._q = 1.0 / (self.theta + 1.0)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return (self.theta + 1.0) * t**self.theta

    def cdf(self, t):
        return np.clip(np.asarray(t, dtype=float), 0.0, 1.0) ** (self.theta + 1.0)

    def quantile(self, u):
        return np.clip(np.asarray(u, dtype=float), 0.0, 1.0) ** self._q

    def quantile_density(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self._q * u ** (self._q - 1.0)

    @property
    def regular(self) -> bool:
        return self.theta == 0.0

    @property
    def min_density(self) -> float:
        if self.theta > 0:
            return 0.0
        # decreasing (or constant) in t, smallest at t = 1
        return self.theta + 1.0

    @property
    def spec_string(self) -> str:
        return f"power:{self.theta!r}"

    @property
    def power_exponent(self) -> Optional[float]:
        return self.theta


def panel_edges() -> np.ndarray:
    """Composite-rule panel edges: a 1/64 lattice refined dyadically toward 0."""
    uniform = np.arange(65) / 64.0
    dyadic = 2.0 ** -np.arange(7, 41)
    return np.unique(np.concatenate([[0.0], dyadic, uniform]))


class ExplicitDensity(Density):
    """Density given as a callable h, integrated by composite Gauss-Legendre panels.

    Panels follow a 1/64 lattice refined dyadically toward 0 (down to 2^-40),
    so mildly singular behavior at the origin is resolved.

    Raises:
        DesignError: If h is negative or non-finite at a panel node, or if it
            does not integrate to 1 within 1e-10.
    """

    kind = "explicit"

    def __init__(self, h: Callable[[np.ndarray], np.ndarray], label: str = "explicit"):
        self._h = h
        self.label = label
        self._edges = panel_edges()
        nodes, weights = np.polynomial.legendre.leggauss(_PANEL_ORDER)
        self._gl_nodes = 0.5 * (nodes + 1.0)
        self._gl_weights = 0.5 * weights
        left = self._edges[:-1, None]
        width = np.diff(self._edges)[:, None]
        values = np.asarray(h(left + width * self._gl_nodes), dtype=float)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DesignError(f"density '{label}' is negative or non-finite; H is not monotone")
        masses = (values * self._gl_weights).sum(axis=1) * width[:, 0]
        self._cumulative = np.concatenate([[0.0], np.cumsum(masses)])
        total = self._cumulative[-1]
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DesignError(f"density '{label}' integrates to {total!r}, not 1")
        self._node_min = float(values.min())
        with np.errstate(divide="ignore", invalid="ignore"):
            ends = np.asarray(h(np.array([0.0, 1.0])), dtype=float)
        # blow-up or a zero at an endpoint breaks positivity and continuity on [0, 1]
        self._ends_positive = bool(np.all(np.isfinite(ends)) and ends.min() > 0)
        finite_ends = ends[np.isfinite(ends)]
        if finite_ends.size:
            self._node_min = min(self._node_min, float(finite_ends.min()))

    def pdf(self, t):
        return np.asarray(self._h(np.asarray(t, dtype=float)), dtype=float)

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        flat = t.ravel()
        panel = np.clip(np.searchsorted(self._edges, flat, side="right") - 1, 0, len(self._edges) - 2)
        left = self._edges[panel]
        width = flat - left
        inner = left[:, None] + width[:, None] * self._gl_nodes
        partial = (np.asarray(self._h(inner), dtype=float) * self._gl_weights).sum(axis=1) * width
        return (self._cumulative[panel] + partial).reshape(t.shape)

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        flat = u.ravel()
        panel = np.clip(
            np.searchsorted(self._cumulative, flat, side="right") - 1, 0, len(self._edges) - 2
        )
        roots = invert_monotone(
            self.cdf, flat, self._edges[panel], self._edges[panel + 1], label=self.label
        )
        return roots.reshape(u.shape)

    @property
    def regular(self) -> bool:
        return self._ends_positive and self._node_min > 0

    @property
    def min_density(self) -> float:
        return self._node_min

    @property
    def spec_string(self) -> str:
        return self.label


class QuantileDensity(Density):
    """Quasi-regular design specified by its quantile function G.

    Args:
        G: Quantile function with G(0) = 0, G(1) = 1, strictly increasing.
        g: Optional derivative of G; numerically differentiated when absent.
        label: Config string for this density.

    Raises:
        DesignError: If G fails the endpoint or monotonicity checks on a
            1e-3 lattice.
    """

    kind = "quantile"

    def __init__(
        self,
        G: Callable[[np.ndarray], np.ndarray],
        g: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        label: str = "quantile",
    ):
        self._G = G
        self._g = g
        self.label = label
        lattice = np.linspace(0.0, 1.0, 1001)
        values = np.asarray(G(lattice), dtype=float)
        if abs(values[0]) > ROOT_TOL or abs(values[-1] - 1.0) > ROOT_TOL:
            raise DesignError(f"quantile '{label}' must satisfy G(0) = 0 and G(1) = 1")
        if np.any(np.diff(values) <= 0):
            raise DesignError(f"quantile '{label}' is not strictly increasing")

    def quantile(self, u):
        return np.asarray(self._G(np.clip(np.asarray(u, dtype=float), 0.0, 1.0)), dtype=float)

    def quantile_density(self, u):
        u = np.asarray(u, dtype=float)
        if self._g is not None:
            with np.errstate(divide="ignore"):
                return np.asarray(self._g(u), dtype=float)
        step = 1e-6
        lo = np.clip(u - step, 0.0, 1.0)
        hi = np.clip(u + step, 0.0, 1.0)
        return (self.quantile(hi) - self.quantile(lo)) / (hi - lo)

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        flat = t.ravel()
        roots = invert_monotone(
            self.quantile, flat, np.zeros_like(flat), np.ones_like(flat), label=self.label
        )
        return roots.reshape(t.shape)

    def pdf(self, t):
        with np.errstate(divide="ignore"):
            return 1.0 / self.quantile_density(self.cdf(t))

    @property
    def regular(self) -> bool:
        return False

    @cached_property
    def _min_density(self) -> float:
        g = self.quantile_density(np.linspace(0.0, 1.0, 1001))
        with np.errstate(divide="ignore"):
            h = np.where(np.isfinite(g), 1.0 / g, 0.0)
        return float(max(h.min(), 0.0))

    @property
    def min_density(self) -> float:
        return self._min_density

    @property
    def spec_string(self) -> str:
        return self.label


def invert_monotone(
    func: Callable[[np.ndarray], np.ndarray],
    targets: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float = ROOT_TOL,
    label: str = "density",
) -> np.ndarray:
    """Solve func(t) = target for increasing ``func`` on brackets [lo, hi].

    Vectorized bisection keeps the bracket; one secant step on the final
    bracket polishes the root.

    Raises:
        DesignError: If a root misses ``tol`` after refinement.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    targets = np.asarray(targets, dtype=float)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = func(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    f_lo = func(lo) - targets
    f_hi = func(hi) - targets
    span = f_hi - f_lo
    with np.errstate(divide="ignore", invalid="ignore"):
        secant = np.where(span > 0, lo - f_lo * (hi - lo) / span, 0.5 * (lo + hi))
    roots = np.clip(secant, lo, hi)
    residual = np.abs(func(roots) - targets)
    if np.any(residual > tol):
        worst = float(residual.max())
        raise DesignError(f"root finding for '{label}' stalled at residual {worst:.3e}")
    return roots


def _pow_quantile(p: float, label: str) -> QuantileDensity:
    if p <= 0:
        raise InvalidArgumentError(f"quantile power must be positive, got {p}")
    return QuantileDensity(
        G=lambda u: u**p,
        g=lambda u: p * u ** (p - 1.0),
        label=label,
    )


def parse_density(spec: str) -> Density:
    """Build a density from a config string.

    Accepted forms are ``uniform``, ``power:THETA``, ``quantile:square`` and
    ``quantile:pow:P``. The ``optimal`` form depends on the model and is
    resolved by strataquad.asymptotics.optimal_density_1d.

    Raises:
        InvalidArgumentError: For unknown or malformed strings.
    """
    text = spec.strip()
    if text == "uniform":
        return UniformDensity()
    if text == "optimal":
        raise InvalidArgumentError("'optimal' densities are resolved from the model, not parsed")
    head, _, rest = text.partition(":")
    try:
        if head == "power":
            return PowerDensity(float(rest))
        if head == "quantile":
            if rest == "square":
                return _pow_quantile(2.0, text)
            name, _, arg = rest.partition(":")
            if name == "pow":
                return _pow_quantile(float(arg), text)
    except ValueError as e:
        if isinstance(e, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"malformed density '{spec}': {e}") from e
    raise InvalidArgumentError(f"unknown density '{spec}'")
