"""Convergence fits of (N, e2) tables in log-log space.

Three fit families are supported: a single power C N^{-p}, a sum of two
powers with fixed exponents, and the scaled sequence N^p e2 whose settling
value approximates an asymptotic constant. Fits describe the sampled range
only.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from strataquad.errors import InvalidArgumentError
from strataquad.logging import get_logger
from strataquad.models import FitKind, FitReport

logger = get_logger(__name__)

MIN_POINTS = 4
TREND_TOLERANCE = 1e-2
# relative last step below which a scaled column counts as settled outright
NOISE_FLOOR = 1e-4


def _prepare(
    N: Sequence[float], e2: Sequence[float], n_min: Optional[int] = None, min_points: int = MIN_POINTS
) -> Tuple[np.ndarray, np.ndarray]:
    N = np.asarray(N, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if N.shape != e2.shape or N.ndim != 1:
        raise InvalidArgumentError("N and e2 must be 1-d arrays of equal length")
    if n_min is not None:
        keep = N >= n_min
        N, e2 = N[keep], e2[keep]
    if len(N) < min_points:
        raise InvalidArgumentError(f"a fit needs at least {min_points} points, got {len(N)}")
    if np.any(N <= 0) or np.any(e2 <= 0):
        raise InvalidArgumentError("log-log fits need positive N and e2")
    return N, e2


def scaled_error(N: Sequence[float], e2: Sequence[float], p: float) -> np.ndarray:
    """Elementwise N^p e2."""
    N = np.asarray(N, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if len(N) == 0 or N.shape != e2.shape:
        raise InvalidArgumentError("scaled_error needs a nonempty table")
    return N**p * e2


def fit_single(N, e2, n_min: Optional[int] = None) -> FitReport:
    """Least squares of log e2 on log N: e2 ~ C N^{-rate}."""
    N, e2 = _prepare(N, e2, n_min)
    x, y = np.log(N), np.log(e2)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    return FitReport(
        kind=FitKind.SINGLE,
        params={"rate": float(-slope), "C": float(math.exp(intercept))},
        residual_norm=float(np.linalg.norm(residual)),
        n_range=(int(N[0]), int(N[-1])),
    )


def fit_two_power(N, e2, exponents: Tuple[float, float], n_min: Optional[int] = None) -> FitReport:
    """Nonnegative least squares of e2 on (N^{-p1}, N^{-p2}), rows weighted by 1/e2."""
    N, e2 = _prepare(N, e2, n_min)
    p1, p2 = (float(p) for p in exponents)
    basis = np.stack([N**-p1, N**-p2], axis=1) / e2[:, None]
    coefficients, residual = optimize.nnls(basis, np.ones_like(e2))
    degenerate = bool(np.any(coefficients <= 0))
    notes = []
    if degenerate:
        notes.append("a coefficient was clamped to zero; the two-power fit is degenerate")
    return FitReport(
        kind=FitKind.TWO_POWER,
        params={"C1": float(coefficients[0]), "p1": p1, "C2": float(coefficients[1]), "p2": p2},
        residual_norm=float(residual),
        n_range=(int(N[0]), int(N[-1])),
        degenerate=degenerate,
        notes=notes,
    )


def remaining_change(scaled: Sequence[float]) -> float:
    """Change still ahead of the last value of ``scaled``.

    Successive increments are extrapolated as a geometric series from the
    ratio of the last two. Returns inf when the increments do not shrink and
    0 when the last step is below the noise floor.
    """
    scaled = np.asarray(scaled, dtype=float)
    steps = np.diff(scaled)
    if len(steps) == 0:
        raise InvalidArgumentError("remaining_change needs at least two values")
    last = float(steps[-1])
    if abs(last) <= NOISE_FLOOR * abs(scaled[-1]):
        return 0.0
    if len(steps) < 2 or steps[-2] == 0.0:
        return math.inf
    ratio = last / float(steps[-2])
    if abs(ratio) >= 1.0:
        return math.inf
    return last * ratio / (1.0 - ratio)


def fit_scaled(N, e2, p: float, n_min: Optional[int] = None) -> FitReport:
    """Settling value of N^p e2; flags a sequence that is still moving.

    The column counts as settled when the change projected from the decay of
    its increments is within TREND_TOLERANCE of the last value. Otherwise the
    last value is a finite-N figure and no constant is reported; a finite
    projection is reported as 'projected'.
    """
    N, e2 = _prepare(N, e2, n_min, min_points=2)
    scaled = scaled_error(N, e2, p)
    change = abs(scaled[-1] - scaled[-2]) / abs(scaled[-1])
    remaining = remaining_change(scaled)
    still_trending = bool(abs(remaining) > TREND_TOLERANCE * abs(scaled[-1]))
    params = {"p": float(p), "last": float(scaled[-1])}
    notes = []
    if still_trending:
        direction = "increasing" if scaled[-1] > scaled[-2] else "decreasing"
        if math.isfinite(remaining):
            params["projected"] = float(scaled[-1] + remaining)
            outlook = f"about {abs(remaining) / abs(scaled[-1]):.1%} of change still projected"
        else:
            outlook = "its increments are not shrinking"
        notes.append(
            f"scaled column still {direction} ({change:.1%} over the last step, {outlook}); "
            f"the last value {scaled[-1]:.6g} is a finite-N figure, not the constant"
        )
    else:
        params["C"] = float(scaled[-1])
    return FitReport(
        kind=FitKind.SCALED,
        params=params,
        residual_norm=float(change),
        n_range=(int(N[0]), int(N[-1])),
        still_trending=still_trending,
        notes=notes,
    )


def fit_loglog(
    N,
    e2,
    kind: FitKind = FitKind.SINGLE,
    exponents: Optional[Tuple[float, float]] = None,
    p: Optional[float] = None,
    n_min: Optional[int] = None,
) -> FitReport:
    """Fit an (N, e2) table with the requested family.

    Raises:
        InvalidArgumentError: With fewer than 4 points, missing exponents for a
            two-power fit or a missing p for a scaled fit.
    """
    kind = FitKind(kind)
    if kind == FitKind.SINGLE:
        report = fit_single(N, e2, n_min)
    elif kind == FitKind.TWO_POWER:
        if exponents is None:
            raise InvalidArgumentError("two-power fits need fixed exponents")
        report = fit_two_power(N, e2, exponents, n_min)
    else:
        if p is None:
            raise InvalidArgumentError("scaled fits need the scaling power p")
        _prepare(N, e2, n_min)
        report = fit_scaled(N, e2, p, n_min)
    logger.debug("fit_done", kind=kind.value, params=report.params)
    return report


def rate_stability(N, e2, n_min: Optional[int] = None) -> float:
    """Change of the fitted single-power rate when the smallest N is dropped."""
    N, e2 = _prepare(N, e2, n_min, min_points=MIN_POINTS + 1)
    full = fit_single(N, e2).params["rate"]
    trimmed = fit_single(N[1:], e2[1:]).params["rate"]
    return abs(full - trimmed)
