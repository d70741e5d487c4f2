"""
Hausdorff distance engine.

Finite sets use a k-d tree for the nearest-neighbour half of the directed
distance; continuous manifolds are discretised first and the discretisation
error is reported with the value.
"""

import logging

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from manifold_lab.exceptions import GeometryError

from .models import HausdorffEstimate, PointCloud

logger = logging.getLogger(__name__)

EMPTY_SET_MESSAGE = "empty set has undefined Hausdorff distance"


def as_cloud(points):
    if isinstance(points, PointCloud):
        return points
    return PointCloud(points)


def _check_pair(a, b):
    a, b = as_cloud(a), as_cloud(b)
    if a.is_empty or b.is_empty:
        raise GeometryError(EMPTY_SET_MESSAGE)
    if a.ambient_dim != b.ambient_dim:
        raise GeometryError(
            f"ambient dimensions differ: {a.ambient_dim} vs {b.ambient_dim}"
        )
    return a, b


def distances_to_cloud(points, cloud):
    """Distance from each row of ``points`` to its nearest point of ``cloud``."""
    distances, _ = cKDTree(cloud.points).query(np.atleast_2d(points), k=1)
    return distances


def directed_hausdorff(a, b):
    """max over a in A of the distance from a to B."""
    a, b = _check_pair(a, b)
    return float(distances_to_cloud(a.points, b).max())


def hausdorff_distance(a, b):
    """
    Hausdorff distance between two finite point sets.

    Args:
        a (PointCloud): First set.
        b (PointCloud): Second set, same ambient dimension.

    Returns:
        float: max(directed(A, B), directed(B, A)).

    Raises:
        GeometryError: If either set is empty or the dimensions differ.
    """
    a, b = _check_pair(a, b)
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def hausdorff_bruteforce(a, b):
    """O(nm) reference implementation over the full distance matrix."""
    a, b = _check_pair(a, b)
    matrix = cdist(a.points, b.points)
    return float(max(matrix.min(axis=1).max(), matrix.min(axis=0).max()))


def _refine(chart, start, target):
    bounds = [
        (None, None) if wraps else (lo, hi)
        for lo, hi, wraps in zip(chart.lower, chart.upper, chart.periodic)
    ]

    def objective(u):
        residual = chart.points(u)[0] - target
        gradient = 2 * chart.jacobians(u)[0].T @ residual
        return float(residual @ residual), gradient

    result = minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200},
    )
    return float(np.linalg.norm(chart.points(result.x)[0] - target))


def distance_to_manifold(x, manifold, tol=1e-6, candidates=8):
    """
    Distance from a point to a parametric manifold.

    A parameter net locates the nearest candidates; each is then refined by
    bounded quasi-Newton minimisation of the squared distance. Every value
    considered is attained by a point of the manifold, so the result never
    falls below the true distance, and the refinement drives it to within
    ``tol`` of it.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise GeometryError("point must have finite coordinates")
    if x.shape[0] != manifold.ambient_dim:
        raise GeometryError("point dimension differs from the manifold's")
    if not tol > 0:
        raise GeometryError("tolerance must be positive")

    resolution = manifold.bounding_box.diameter / 512
    if np.isfinite(manifold.reach_floor):
        resolution = min(resolution, manifold.reach_floor / 4)
    net = manifold.ambient_net(max(resolution, tol))
    coarse = np.linalg.norm(net.points - x, axis=1)
    best = float(coarse.min())
    for index in np.argsort(coarse)[:candidates]:
        chart = manifold.charts[net.chart_ids[index]]
        best = min(best, _refine(chart, net.params[index], x))
    return best


def manifold_hausdorff(m0, m1, resolution):
    """
    Hausdorff distance between two manifolds via parameter nets.

    The nets use ``resolution`` as parameter spacing, so each net point lies
    within resolution * L of its neighbours (L the chart Lipschitz constant).
    The reported bound is resolution * (1 + max L).

    Returns:
        HausdorffEstimate: The discrete distance and its error bound.
    """
    if m0.ambient_dim != m1.ambient_dim:
        raise GeometryError("manifolds live in different ambient dimensions")
    if not resolution > 0:
        raise GeometryError("resolution must be positive")
    net0 = m0.parameter_net(resolution)
    net1 = m1.parameter_net(resolution)
    m0.require_full_rank(net0)
    m1.require_full_rank(net1)
    value = hausdorff_distance(net0.cloud(), net1.cloud())
    bound = resolution * (1 + max(m0.lipschitz, m1.lipschitz))
    logger.debug(
        "hausdorff(%s, %s) = %.6g (bound %.3g, %d x %d points)",
        m0.label,
        m1.label,
        value,
        bound,
        net0.points.shape[0],
        net1.points.shape[0],
    )
    return HausdorffEstimate(value=value, bound=bound)


def clip_to_box(cloud, box):
    """Points of ``cloud`` lying in the closed box."""
    cloud = as_cloud(cloud)
    return PointCloud(cloud.points[box.contains(cloud.points)])
