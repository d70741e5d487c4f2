"""
Built-in manifold families.

Every constructor returns a ParametricManifold with analytic jacobians, except
``tabulated_curve`` which interpolates user-sampled points and differentiates
numerically.
"""

import logging
import math

import numpy as np
from scipy.interpolate import CubicSpline

from manifold_lab.exceptions import GeometryError

from .models import Box, Chart, ParametricManifold

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi


def _unit(vector, dim):
    vector = np.zeros(dim) if vector is None else np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector)
    if norm == 0:
        raise GeometryError("direction vector must be nonzero")
    return vector / norm


def _center(center, dim):
    if center is None:
        return np.zeros(dim)
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.shape[0] != dim:
        raise GeometryError(f"center must have {dim} coordinates")
    return center


def finite_difference_jacobian(embed, step):
    """Central-difference jacobian of ``embed``, shape (m, D, d)."""

    def jacobian(params):
        params = np.atleast_2d(params)
        columns = []
        for axis in range(params.shape[1]):
            shift = np.zeros(params.shape[1])
            shift[axis] = step
            columns.append((embed(params + shift) - embed(params - shift)) / (2 * step))
        return np.stack(columns, axis=2)

    return jacobian


def segment(length=2.0, dim=2, center=None, direction=None, box_padding=0.5):
    """Straight segment of the given length, centred at ``center``."""
    center = _center(center, dim)
    if direction is None:
        direction = np.eye(dim)[0]
    direction = _unit(direction, dim)
    half = length / 2

    def embed(u):
        return center + u[:, :1] * direction

    def jacobian(u):
        return np.broadcast_to(direction[None, :, None], (u.shape[0], dim, 1)).copy()

    chart = Chart([-half], [half], embed, jacobian, lipschitz=1.0)
    ends = np.vstack([center - half * direction, center + half * direction])
    return ParametricManifold(
        label="segment",
        ambient_dim=dim,
        intrinsic_dim=1,
        charts=(chart,),
        reach_floor=math.inf,
        bounding_box=Box.bounding(ends, box_padding),
        metadata={"length": length},
    )


def line(half_length=5.0, dim=2, center=None, direction=None, box=None):
    """
    Noncompact straight line, truncated to a parameter window.

    ``box`` is the compact set used by truncated losses; by default it is the
    cube of half-width ``half_length / 2`` about ``center``.
    """
    center = _center(center, dim)
    direction = _unit(np.eye(dim)[0] if direction is None else direction, dim)

    def embed(u):
        return center + u[:, :1] * direction

    def jacobian(u):
        return np.broadcast_to(direction[None, :, None], (u.shape[0], dim, 1)).copy()

    chart = Chart([-half_length], [half_length], embed, jacobian, lipschitz=1.0)
    return ParametricManifold(
        label="line",
        ambient_dim=dim,
        intrinsic_dim=1,
        charts=(chart,),
        reach_floor=math.inf,
        bounding_box=box or Box.cube(half_length / 2, dim, center),
        compact=False,
    )


def circle(radius=1.0, center=None, dim=2, box_padding=0.5):
    """Circle of the given radius in the plane of the first two axes."""
    if dim < 2:
        raise GeometryError("a circle needs at least two ambient dimensions")
    if not radius > 0:
        raise GeometryError("circle radius must be positive")
    center = _center(center, dim)

    def embed(u):
        points = np.tile(center, (u.shape[0], 1))
        points[:, 0] += radius * np.cos(u[:, 0])
        points[:, 1] += radius * np.sin(u[:, 0])
        return points

    def jacobian(u):
        jac = np.zeros((u.shape[0], dim, 1))
        jac[:, 0, 0] = -radius * np.sin(u[:, 0])
        jac[:, 1, 0] = radius * np.cos(u[:, 0])
        return jac

    chart = Chart([0.0], [TWO_PI], embed, jacobian, periodic=(True,), lipschitz=radius)
    extent = np.zeros(dim)
    extent[:2] = radius
    return ParametricManifold(
        label="circle",
        ambient_dim=dim,
        intrinsic_dim=1,
        charts=(chart,),
        reach_floor=radius,
        bounding_box=Box(center - extent - box_padding, center + extent + box_padding),
        metadata={"radius": radius},
    )


def _cube_face_chart(axis, sign, radius, center):
    others = [i for i in range(3) if i != axis]

    def lift(u):
        v = np.empty((u.shape[0], 3))
        v[:, axis] = sign
        v[:, others[0]] = u[:, 0]
        v[:, others[1]] = u[:, 1]
        return v

    def embed(u):
        v = lift(u)
        return center + radius * v / np.linalg.norm(v, axis=1, keepdims=True)

    def jacobian(u):
        v = lift(u)
        norm = np.linalg.norm(v, axis=1)
        n = v / norm[:, None]
        jac = np.empty((u.shape[0], 3, 2))
        for column, other in enumerate(others):
            e = np.zeros(3)
            e[other] = 1.0
            jac[:, :, column] = (e - n * n[:, other : other + 1]) * (
                radius / norm[:, None]
            )
        return jac

    return Chart([-1.0, -1.0], [1.0, 1.0], embed, jacobian, lipschitz=radius)


def sphere(radius=1.0, center=None, box_padding=0.5):
    """Two-sphere in R^3 covered by the six charts of the projected cube."""
    if not radius > 0:
        raise GeometryError("sphere radius must be positive")
    center = _center(center, 3)
    charts = tuple(
        _cube_face_chart(axis, sign, radius, center)
        for axis in range(3)
        for sign in (1.0, -1.0)
    )
    return ParametricManifold(
        label="sphere",
        ambient_dim=3,
        intrinsic_dim=2,
        charts=charts,
        reach_floor=radius,
        bounding_box=Box.cube(radius + box_padding, 3, center),
        metadata={"radius": radius},
    )


def torus(major=2.0, minor=0.5, center=None, box_padding=0.5):
    """Torus of revolution about the third axis."""
    if not 0 < minor < major:
        raise GeometryError("torus needs 0 < minor radius < major radius")
    center = _center(center, 3)

    def embed(u):
        theta, phi = u[:, 0], u[:, 1]
        ring = major + minor * np.cos(phi)
        return center + np.stack(
            [ring * np.cos(theta), ring * np.sin(theta), minor * np.sin(phi)], axis=1
        )

    def jacobian(u):
        theta, phi = u[:, 0], u[:, 1]
        ring = major + minor * np.cos(phi)
        jac = np.zeros((u.shape[0], 3, 2))
        jac[:, 0, 0] = -ring * np.sin(theta)
        jac[:, 1, 0] = ring * np.cos(theta)
        jac[:, 0, 1] = -minor * np.sin(phi) * np.cos(theta)
        jac[:, 1, 1] = -minor * np.sin(phi) * np.sin(theta)
        jac[:, 2, 1] = minor * np.cos(phi)
        return jac

    chart = Chart(
        [0.0, 0.0],
        [TWO_PI, TWO_PI],
        embed,
        jacobian,
        periodic=(True, True),
        lipschitz=major + minor,
    )
    outer = major + minor
    half = np.array([outer, outer, minor]) + box_padding
    return ParametricManifold(
        label="torus",
        ambient_dim=3,
        intrinsic_dim=2,
        charts=(chart,),
        reach_floor=min(minor, major - minor),
        bounding_box=Box(center - half, center + half),
        metadata={"major": major, "minor": minor},
    )


def graph(
    func,
    grad,
    lower,
    upper,
    dim,
    reach_floor,
    label="graph",
    compact=True,
    box=None,
    box_padding=0.5,
    metadata=None,
):
    """
    Graph {(u, f(u))} of a smooth map f: R^d -> R^(D-d).

    Args:
        func (callable): Maps parameters (m, d) to heights (m, D - d).
        grad (callable): Maps parameters (m, d) to derivatives (m, D - d, d).
        lower, upper (array-like): Parameter box.
        dim (int): Ambient dimension D.
        reach_floor (float): Level the graph is built to clear.
        box (Box): Compact set K; defaults to the padded bounding box of a net.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.shape[0]
    codim = dim - d

    def embed(u):
        return np.hstack([u, np.asarray(func(u)).reshape(u.shape[0], codim)])

    def jacobian(u):
        jac = np.zeros((u.shape[0], dim, d))
        jac[:, :d, :] = np.eye(d)
        jac[:, d:, :] = np.asarray(grad(u)).reshape(u.shape[0], codim, d)
        return jac

    trial = Chart(lower, upper, embed, jacobian)
    params = trial.parameter_grid(float((upper - lower).max()) / 64)
    slopes = np.linalg.svd(np.asarray(grad(params)).reshape(-1, codim, d),
                           compute_uv=False)[:, 0]
    lipschitz = math.sqrt(1 + float(slopes.max()) ** 2) * (1 + 1e-3)
    chart = Chart(lower, upper, embed, jacobian, lipschitz=lipschitz)
    if box is None:
        box = Box.bounding(embed(params), box_padding)
    return ParametricManifold(
        label=label,
        ambient_dim=dim,
        intrinsic_dim=d,
        charts=(chart,),
        reach_floor=reach_floor,
        bounding_box=box,
        compact=compact,
        metadata=dict(metadata or {}),
    )


def tabulated_curve(params, points, reach_floor, periodic=False, label="tabulated",
                    box_padding=0.5):
    """
    Curve through user-sampled points, interpolated by a cubic spline.

    For a closed curve pass ``periodic=True`` with the last point repeating the
    first. The jacobian is a central finite difference of the spline.
    """
    params = np.asarray(params, dtype=float).reshape(-1)
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] != params.shape[0]:
        raise GeometryError("one sampled point is required per parameter value")
    if points.shape[0] < 4 or np.any(np.diff(params) <= 0):
        raise GeometryError("need at least four strictly increasing parameters")
    if periodic and not np.allclose(points[0], points[-1]):
        raise GeometryError("a periodic table must repeat its first point")
    spline = CubicSpline(
        params, points, axis=0, bc_type="periodic" if periodic else "not-a-knot"
    )

    def embed(u):
        return spline(u[:, 0])

    step = 1e-6 * (params[-1] - params[0])
    jacobian = finite_difference_jacobian(embed, step)
    speeds = np.linalg.norm(spline(np.linspace(params[0], params[-1], 2048), 1), axis=1)
    chart = Chart(
        [params[0]],
        [params[-1]],
        embed,
        jacobian,
        periodic=(bool(periodic),),
        lipschitz=float(speeds.max()) * (1 + 1e-3),
    )
    dense = spline(np.linspace(params[0], params[-1], 2048))
    return ParametricManifold(
        label=label,
        ambient_dim=points.shape[1],
        intrinsic_dim=1,
        charts=(chart,),
        reach_floor=reach_floor,
        bounding_box=Box.bounding(dense, box_padding),
    )


def rigid_transform(manifold, rotation, translation):
    """Image of ``manifold`` under x -> R x + t with R orthogonal."""
    rotation = np.asarray(rotation, dtype=float)
    translation = np.asarray(translation, dtype=float).reshape(-1)
    dim = manifold.ambient_dim
    if rotation.shape != (dim, dim) or translation.shape != (dim,):
        raise GeometryError("rotation and translation must match the ambient dim")
    if not np.allclose(rotation @ rotation.T, np.eye(dim), atol=1e-10):
        raise GeometryError("rotation must be orthogonal")

    def moved(chart):
        def embed(u):
            return chart.points(u) @ rotation.T + translation

        def jacobian(u):
            return np.einsum("ij,mjk->mik", rotation, chart.jacobians(u))

        return Chart(chart.lower, chart.upper, embed, jacobian, chart.periodic,
                     chart.lipschitz)

    box = manifold.bounding_box
    corners = np.array(np.meshgrid(*zip(box.lower, box.upper), indexing="ij"))
    corners = corners.reshape(dim, -1).T @ rotation.T + translation
    logger.debug("rigid transform of %s", manifold.label)
    return ParametricManifold(
        label=manifold.label,
        ambient_dim=dim,
        intrinsic_dim=manifold.intrinsic_dim,
        charts=tuple(moved(chart) for chart in manifold.charts),
        reach_floor=manifold.reach_floor,
        bounding_box=Box.bounding(corners),
        compact=manifold.compact,
        box_padding=manifold.box_padding,
        metadata=dict(manifold.metadata),
    )


def translate(manifold, offset):
    """Rigid translation, used to build offset candidate families."""
    return rigid_transform(manifold, np.eye(manifold.ambient_dim), offset)
