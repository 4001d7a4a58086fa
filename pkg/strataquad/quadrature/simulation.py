"""Monte Carlo oracle for the sMCQ mean squared error.

Each field realization is a joint Gaussian draw of the field on a midpoint
refinement lattice together with its exact integral I(X) over the unit cube.
For each realization one uniform point per stratum is sampled from the
field's exact conditional law given those values, and the squared
quadrature error averaged over realizations estimates the MSE that
exact_mse computes deterministically.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from strataquad.config import settings
from strataquad.design.grids import CrossRegularDesign
from strataquad.errors import InvalidArgumentError, OracleError
from strataquad.fields import FieldModel
from strataquad.logging import get_logger
from strataquad.models import SimulationReport
from strataquad.quadrature.rules import split_rule, tensor_two_sided_rule

logger = get_logger(__name__)

MAX_LATTICE_POINTS = 3000
JITTER = 1e-10
# elements of the (fields x strata x lattice) cross-covariance block per batch
BATCH_ELEMENTS = 1 << 22
# kernel evaluations per block of kernel_integrals
INTEGRAL_BLOCK = 1 << 20


def integral_order(dim: int) -> int:
    """Graded Gauss-Legendre order used for the integrals of the covariance."""
    return 12 if dim == 1 else 7


def refinement_lattice(design: CrossRegularDesign, refinement: int) -> np.ndarray:
    """Midpoints of each stratum split ``refinement`` times per coordinate."""
    axes = []
    fractions = (np.arange(refinement) + 0.5) / refinement
    for grid in design.grids:
        widths = np.diff(grid)
        axes.append((grid[:-1, None] + widths[:, None] * fractions).ravel())
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def kernel_integrals(covariance: Callable, points: np.ndarray, order: int) -> np.ndarray:
    """Integral of r(p, s) over s in the unit cube, for each row p of ``points``."""
    points = np.asarray(points, dtype=float)
    n_nodes = (4 * order) ** points.shape[1]
    block = max(1, INTEGRAL_BLOCK // n_nodes)
    parts = []
    for lo in range(0, len(points), block):
        chunk = points[lo : lo + block]
        nodes, weights = split_rule(chunk, order)
        parts.append((covariance(chunk[:, None, :], nodes) * weights).sum(axis=1))
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def integral_variance(covariance: Callable, dim: int, order: int) -> float:
    """Double integral of r over the unit cube squared, the variance of I(X)."""
    outer, weights = tensor_two_sided_rule(order, dim)
    return float(np.dot(weights, kernel_integrals(covariance, outer, order)))


def _factorize(covariance: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(covariance, lower=True)
    except linalg.LinAlgError:
        jitter = JITTER * float(np.mean(np.diag(covariance)))
        logger.info("joint_covariance_jittered", jitter=jitter)
        try:
            return linalg.cholesky(
                covariance + jitter * np.eye(len(covariance)), lower=True
            )
        except linalg.LinAlgError as e:
            raise OracleError(f"joint covariance is indefinite beyond jitter: {e}") from e


def simulate_mse(
    model: FieldModel,
    design: CrossRegularDesign,
    eta_samples: int = 1,
    field_replications: int = 10_000,
    riemann_refinement: int = 8,
    seed: int = 0,
    threads: Optional[int] = None,
) -> SimulationReport:
    """Estimate the MSE of sMCQ by simulation.

    Args:
        model: Field model with a covariance.
        design: Design whose strata receive one uniform point each.
        eta_samples: Stratified samples drawn per field realization.
        field_replications: Field realizations.
        riemann_refinement: Lattice cells per stratum and coordinate.
        seed: Master seed; batch seeds are spawned from it.
        threads: Worker threads for batches; settings default when None.

    Returns:
        SimulationReport with the mean squared error and its standard error
        over field realizations.

    Raises:
        InvalidArgumentError: If the model has no covariance or the lattice
            exceeds MAX_LATTICE_POINTS.
        OracleError: If the joint covariance cannot be factorized.
    """
    if model.covariance is None:
        raise InvalidArgumentError(f"model '{model.name}' has no covariance")
    if min(eta_samples, field_replications, riemann_refinement) < 1:
        raise InvalidArgumentError("sample counts and refinement must be >= 1")
    n_lattice = design.N_actual * riemann_refinement**design.dim
    if n_lattice > MAX_LATTICE_POINTS:
        raise InvalidArgumentError(
            f"refinement lattice of {n_lattice} points exceeds {MAX_LATTICE_POINTS}; "
            "lower riemann_refinement or N"
        )
    report = dict(
        N_actual=design.N_actual,
        replications=field_replications,
        eta_samples=eta_samples,
        refinement=riemann_refinement,
        lattice_points=n_lattice,
        seed=seed,
    )

    points = refinement_lattice(design, riemann_refinement)
    cov = model.covariance(points[:, None, :], points[None, :, :])
    if float(np.max(np.diag(cov))) <= 0.0:
        return SimulationReport(estimate=0.0, std_error=0.0, **report)
    order = integral_order(design.dim)
    # the integral I(X) is the last component of the joint Gaussian vector
    to_integral = kernel_integrals(model.covariance, points, order)
    joint = np.empty((n_lattice + 1, n_lattice + 1))
    joint[:n_lattice, :n_lattice] = cov
    joint[:n_lattice, n_lattice] = to_integral
    joint[n_lattice, :n_lattice] = to_integral
    joint[n_lattice, n_lattice] = integral_variance(model.covariance, design.dim, order)
    factor = _factorize(joint)

    strata = design.stratum_arrays()
    per_batch = max(1, BATCH_ELEMENTS // (design.N_actual * (n_lattice + 1)))
    sizes = [min(per_batch, field_replications - lo) for lo in range(0, field_replications, per_batch)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(args) -> np.ndarray:
        size, child = args
        return _batch(model, strata, points, factor, order, size, eta_samples, child)

    workers = settings.get_thread_count(threads)
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, zip(sizes, seeds)))
    else:
        parts = [run(args) for args in zip(sizes, seeds)]
    per_field = np.concatenate(parts)
    estimate = math.fsum(per_field.tolist()) / len(per_field)
    std_error = float(np.std(per_field, ddof=1) / math.sqrt(len(per_field))) if len(per_field) > 1 else 0.0

    logger.info(
        "simulate_mse_finished",
        model=model.name,
        n_strata=design.N_actual,
        estimate=estimate,
        std_error=std_error,
    )
    return SimulationReport(estimate=estimate, std_error=std_error, **report)


def _batch(model, strata, points, factor, order, size, eta_samples, seed_seq) -> np.ndarray:
    """Mean squared quadrature error per field realization for one batch."""
    rng = np.random.default_rng(seed_seq)
    n_strata, dim = strata.vertices.shape
    n_joint = len(factor)
    z = rng.standard_normal((size, n_joint))
    integral = z @ factor[-1]
    errors = np.zeros(size)
    for _ in range(eta_samples):
        eta = strata.vertices + strata.diagonals * rng.random((size, n_strata, dim))
        cross = np.concatenate(
            [
                model.covariance(eta[:, :, None, :], points[None, None, :, :]),
                kernel_integrals(model.covariance, eta.reshape(-1, dim), order).reshape(size, n_strata, 1),
            ],
            axis=-1,
        )
        solved = linalg.solve_triangular(
            factor, cross.reshape(-1, n_joint).T, lower=True, check_finite=False
        )
        w = solved.T.reshape(size, n_strata, n_joint)
        mean = np.einsum("bnl,bl->bn", w, z)
        cond_cov = model.covariance(eta[:, :, None, :], eta[:, None, :, :]) - np.einsum(
            "bnl,bml->bnm", w, w
        )
        # eigen-factor of the conditional covariance, negative rounding clipped
        values, vectors = np.linalg.eigh(0.5 * (cond_cov + np.swapaxes(cond_cov, 1, 2)))
        scale = vectors * np.sqrt(np.clip(values, 0.0, None))[:, None, :]
        sample = mean + np.einsum("bnk,bk->bn", scale, rng.standard_normal((size, n_strata)))
        quadrature = sample @ strata.volumes
        errors += (integral - quadrature) ** 2
    return errors / eta_samples
