"""Exact mean squared error of stratified Monte Carlo quadrature.

With one uniform point per stratum, the MSE of the quadrature equals
half the sum over strata of the double integral of the incremental variance
over D_i x D_i. This module evaluates those integrals with the pair
cubature from strataquad.quadrature.rules, or with the reduced difference
cubature when the model has stationary increments.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from strataquad.config import settings
from strataquad.design.grids import CrossRegularDesign
from strataquad.errors import BudgetExceededError, InvalidArgumentError
from strataquad.fields import FieldModel
from strataquad.logging import get_logger
from strataquad.models import MseReport
from strataquad.quadrature.rules import (
    pair_rule_size,
    tensor_difference_rule,
    tensor_pair_rule,
)

logger = get_logger(__name__)

# elements of the (strata x nodes) evaluation block
BLOCK_ELEMENTS = 1 << 18
MIN_ORDER = 3


def default_order(model: FieldModel) -> int:
    """Default Gauss-Legendre order per dimension for ``model``."""
    if model.dim == 1 and min(model.smoothness.alpha) < 1:
        return 12
    return 8 if model.dim <= 2 else 6


def _uses_stationary_path(model: FieldModel) -> bool:
    return model.increment_kernel is not None and not model.singular_at_origin


def _evaluations(model: FieldModel, design: CrossRegularDesign, order: int) -> int:
    if _uses_stationary_path(model):
        # upper bound: every stratum with its own diagonal
        return design.N_actual * order**model.dim
    total = design.N_actual * pair_rule_size(order, model.dim)
    if model.singular_at_origin:
        total += pair_rule_size(2 * order, model.dim)
    return total


def projected_cost(model: FieldModel, design: CrossRegularDesign, order: Optional[int] = None) -> int:
    """Kernel evaluations exact_mse would spend, including the order - 2 check run."""
    order = default_order(model) if order is None else order
    return _evaluations(model, design, order) + _evaluations(model, design, order - 2)


def exact_mse(
    model: FieldModel,
    design: CrossRegularDesign,
    order: Optional[int] = None,
    *,
    per_stratum: bool = False,
    threads: Optional[int] = None,
    budget: Optional[float] = None,
) -> MseReport:
    """Exact MSE of sMCQ for ``model`` on ``design``.

    Args:
        model: Field model providing d_X.
        design: Cross-regular design.
        order: Gauss-Legendre order per dimension; model default when None.
        per_stratum: Include the per-stratum contributions in the report.
        threads: Worker threads; settings default when None.
        budget: Kernel evaluation cap; STRATAQUAD_BUDGET when None.

    Returns:
        MseReport with the total, the per-stratum terms if requested and an
        error estimate from a second run at order - 2.

    Raises:
        InvalidArgumentError: If the design and model dimensions differ or the
            order is below 3.
        BudgetExceededError: If the projected evaluations exceed the budget.
    """
    if design.dim != model.dim:
        raise InvalidArgumentError(
            f"design dimension {design.dim} does not match model dimension {model.dim}"
        )
    order = default_order(model) if order is None else int(order)
    if order < MIN_ORDER:
        raise InvalidArgumentError(f"cubature order must be >= {MIN_ORDER}, got {order}")
    budget = settings.STRATAQUAD_BUDGET if budget is None else budget
    projected = projected_cost(model, design, order)
    if projected > budget:
        raise BudgetExceededError(projected, budget)
    workers = settings.get_thread_count(threads)

    terms, evaluations = _stratum_terms(model, design, order, workers)
    coarse, coarse_evaluations = _stratum_terms(model, design, order - 2, workers)
    e2 = math.fsum(terms.tolist())
    e2_coarse = math.fsum(coarse.tolist())
    method = "stationary" if _uses_stationary_path(model) else "general"

    logger.info(
        "exact_mse_finished",
        model=model.name,
        n_strata=design.N_actual,
        order=order,
        method=method,
        e2=e2,
        evaluations=evaluations + coarse_evaluations,
    )
    return MseReport(
        N_actual=design.N_actual,
        e2=e2,
        error_estimate=abs(e2 - e2_coarse),
        cubature_order=order,
        method=method,
        kernel_evaluations=evaluations + coarse_evaluations,
        per_stratum=terms.tolist() if per_stratum else None,
    )


def _stratum_terms(
    model: FieldModel, design: CrossRegularDesign, order: int, workers: int
) -> Tuple[np.ndarray, int]:
    if _uses_stationary_path(model):
        return _stationary_terms(model, design, order, workers)
    return _general_terms(model, design, order, workers)


def _chunks(start: int, stop: int, size: int) -> List[Tuple[int, int]]:
    return [(lo, min(lo + size, stop)) for lo in range(start, stop, size)]


def _run_chunks(worker, chunks: List[Tuple[int, int]], workers: int) -> List[np.ndarray]:
    if workers <= 1 or len(chunks) <= 1:
        return [worker(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves chunk order
        return list(pool.map(worker, chunks))


def _block_sums(values_fn, n_rows: int, weights: np.ndarray) -> np.ndarray:
    """Weighted row sums of a (rows x nodes) evaluation, blocked over nodes."""
    block = max(1, BLOCK_ELEMENTS // max(n_rows, 1))
    partial = [
        (values_fn(lo, hi) * weights[lo:hi]).sum(axis=1)
        for lo, hi in _chunks(0, len(weights), block)
    ]
    return np.sum(np.stack(partial, axis=0), axis=0)


def _stationary_terms(
    model: FieldModel, design: CrossRegularDesign, order: int, workers: int
) -> Tuple[np.ndarray, int]:
    kernel = model.increment_kernel
    nodes, weights = tensor_difference_rule(order, model.dim)
    diagonals = design.stratum_arrays().diagonals
    unique, inverse = np.unique(diagonals, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    chunk = max(1, BLOCK_ELEMENTS // len(weights))

    def worker(bounds: Tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        u = unique[lo:hi]
        sums = _block_sums(
            lambda a, b: kernel(u[:, None, :] * nodes[None, a:b, :]), len(u), weights
        )
        return 0.5 * np.prod(u, axis=1) ** 2 * sums

    parts = _run_chunks(worker, _chunks(0, len(unique), chunk), workers)
    per_unique = np.concatenate(parts)
    return per_unique[inverse], len(unique) * len(weights)


def _general_terms(
    model: FieldModel, design: CrossRegularDesign, order: int, workers: int
) -> Tuple[np.ndarray, int]:
    x, y, weights = tensor_pair_rule(order, model.dim)
    d_x = model.incremental_variance
    n_strata = design.N_actual
    terms = np.empty(n_strata)
    chunk = max(1, BLOCK_ELEMENTS // len(weights))

    def stratum_block(vertices, diagonals, xs, ys, w):
        def values(a: int, b: int) -> np.ndarray:
            t = vertices[:, None, :] + diagonals[:, None, :] * xs[None, a:b, :]
            v = vertices[:, None, :] + diagonals[:, None, :] * ys[None, a:b, :]
            return d_x(t, v)

        volumes = np.prod(diagonals, axis=1)
        return 0.5 * volumes**2 * _block_sums(values, len(vertices), w)

    def worker(bounds: Tuple[int, int]) -> np.ndarray:
        arrays = design.stratum_arrays(*bounds)
        return stratum_block(arrays.vertices, arrays.diagonals, x, y, weights)

    evaluations = 0
    start = 0
    if model.singular_at_origin:
        # the origin stratum gets doubled order and a rule graded toward the corner
        xo, yo, wo = tensor_pair_rule(2 * order, model.dim, graded_corner=True)
        origin = design.stratum_arrays(design.origin_index, design.origin_index + 1)
        terms[0] = stratum_block(origin.vertices, origin.diagonals, xo, yo, wo)[0]
        evaluations += len(wo)
        start = 1
    chunks = _chunks(start, n_strata, chunk)
    for (lo, hi), part in zip(chunks, _run_chunks(worker, chunks, workers)):
        terms[lo:hi] = part
    evaluations += (n_strata - start) * len(weights)
    return terms, evaluations
