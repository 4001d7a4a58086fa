"""Gauss-Legendre based cubature rules on the unit cube and its square.

Stratum integrals of d_X over D_i x D_i carry a kink along the diagonal
t = v. The pair rules here split each coordinate square along that diagonal
and grade the difference coordinate s = z^4 toward it, so kernels like
|t - v|^beta become smooth in the integration variable. The split rules cut
the unit cube at a single point instead, for integrals of a covariance
against one of its arguments.
"""

import itertools
from functools import lru_cache
from typing import Tuple

import numpy as np

GRADING_POWER = 4
# half-interval grading of the two-sided rule; keeps the far end analytic
TWO_SIDED_POWER = 2


@lru_cache(maxsize=None)
def gauss_legendre_unit(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


@lru_cache(maxsize=None)
def graded_rule(order: int, power: int = GRADING_POWER) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on [0, 1] with nodes s = z^power clustered at 0."""
    z, w = gauss_legendre_unit(order)
    return z**power, w * power * z ** (power - 1)


@lru_cache(maxsize=None)
def two_sided_graded_rule(order: int, power: int = TWO_SIDED_POWER) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on [0, 1] graded toward both endpoints; 2 * order nodes, weights sum to 1."""
    s, w = graded_rule(order, power)
    nodes = np.concatenate([0.5 * s, 1.0 - 0.5 * s[::-1]])
    weights = np.concatenate([0.5 * w, 0.5 * w[::-1]])
    return nodes, weights


def split_rule(points: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-point rules on [0, 1]^dim split at each point, coordinate by coordinate.

    Every coordinate interval is cut at the point's coordinate and both
    pieces get a two-sided graded rule, so kernels with a kink at s = t or
    at the cube faces are integrated accurately.

    Args:
        points: Array (P, dim) of split points.
        order: Gauss-Legendre order of each graded half.

    Returns:
        Nodes of shape (P, (4 order)^dim, dim) and weights (P, (4 order)^dim);
        each point's weights sum to 1.
    """
    points = np.asarray(points, dtype=float)
    u, w = two_sided_graded_rule(order)
    nodes_1d = []
    weights_1d = []
    for m in range(points.shape[1]):
        t = points[:, m : m + 1]
        nodes_1d.append(np.concatenate([t * u, t + (1.0 - t) * u], axis=1))
        weights_1d.append(np.concatenate([t * w, (1.0 - t) * w], axis=1))
    index = np.array(list(itertools.product(range(2 * len(u)), repeat=points.shape[1])))
    nodes = np.stack([nodes_1d[m][:, index[:, m]] for m in range(points.shape[1])], axis=-1)
    weights = np.prod(
        np.stack([weights_1d[m][:, index[:, m]] for m in range(points.shape[1])], axis=-1), axis=-1
    )
    return nodes, weights


@lru_cache(maxsize=None)
def difference_rule_1d(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rule for the law of |x - y| with x, y uniform on [0, 1].

    Integrates f against the density 2(1 - s); weights sum to 1.
    """
    s, w = graded_rule(order)
    return s, 2.0 * (1.0 - s) * w


@lru_cache(maxsize=None)
def pair_rule_1d(order: int, graded_corner: bool = False) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rule for pairs (x, y) uniform on [0, 1]^2, split along the diagonal.

    The upper triangle is parametrized by s = x - y (graded) and the position
    tau of y on [0, 1 - s]; the lower triangle mirrors it. With
    ``graded_corner`` tau is graded as well, resolving behavior at x = y = 0.

    Returns:
        Arrays x, y, w of length 2 * order^2; weights sum to 1.
    """
    s, w_s = graded_rule(order)
    if graded_corner:
        tau, w_tau = graded_rule(order)
    else:
        tau, w_tau = gauss_legendre_unit(order)
    s_grid, tau_grid = np.meshgrid(s, tau, indexing="ij")
    w_grid = np.outer(w_s, w_tau) * (1.0 - s_grid)
    lower = ((1.0 - s_grid) * tau_grid).ravel()
    upper = lower + s_grid.ravel()
    weights = w_grid.ravel()
    x = np.concatenate([upper, lower])
    y = np.concatenate([lower, upper])
    return x, y, np.concatenate([weights, weights])


def _tensor(points_1d: list, weights_1d: list) -> Tuple[np.ndarray, np.ndarray]:
    # lexicographic node order, first coordinate slowest
    index = np.array(list(itertools.product(*[range(len(w)) for w in weights_1d])))
    nodes = np.stack([p[index[:, m]] for m, p in enumerate(points_1d)], axis=-1)
    weights = np.prod(
        np.stack([w[index[:, m]] for m, w in enumerate(weights_1d)], axis=-1), axis=-1
    )
    return nodes, weights


@lru_cache(maxsize=None)
def tensor_gauss_legendre(order: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss-Legendre rule on [0, 1]^dim: nodes (order^dim, dim), weights."""
    x, w = gauss_legendre_unit(order)
    return _tensor([x] * dim, [w] * dim)


@lru_cache(maxsize=None)
def tensor_difference_rule(order: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor rule for |X - Y| componentwise, X and Y uniform on [0, 1]^dim.

    For a kernel K even in every coordinate,
    int int K(u * (x - y)) dx dy = sum w K(u * s).
    """
    s, w = difference_rule_1d(order)
    return _tensor([s] * dim, [w] * dim)


@lru_cache(maxsize=None)
def tensor_pair_rule(
    order: int, dim: int, graded_corner: bool = False
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tensor product of pair rules: x, y of shape ((2 order^2)^dim, dim) and weights."""
    x1, y1, w1 = pair_rule_1d(order, graded_corner)
    index = np.array(list(itertools.product(range(len(w1)), repeat=dim)))
    x = x1[index]
    y = y1[index]
    w = np.prod(w1[index], axis=-1)
    return x, y, w


def pair_rule_size(order: int, dim: int) -> int:
    """Node count of tensor_pair_rule without building it."""
    return (2 * order * order) ** dim


@lru_cache(maxsize=None)
def tensor_two_sided_rule(order: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor product of two_sided_graded_rule on [0, 1]^dim."""
    u, w = two_sided_graded_rule(order)
    return _tensor([u] * dim, [w] * dim)
