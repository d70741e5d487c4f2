"""Slab construction and membership."""

import numpy as np

from manifold_lab.exceptions import GeometryError

from .models import Slab


def tangent_frame(chart, param, tolerance=1e-10):
    """
    Orthonormal tangent and normal bases at a chart parameter.

    The complete QR factorisation of the jacobian gives both at once: the
    first d columns of Q span the tangent space, the rest its complement.
    """
    jac = chart.jacobians(np.atleast_2d(param))[0]
    q, r = np.linalg.qr(jac, mode="complete")
    if np.abs(np.diag(r)).min() <= tolerance * max(1.0, np.abs(r).max()):
        raise GeometryError("rank-deficient jacobian")
    d = jac.shape[1]
    return q[:, :d].T, q[:, d:].T


def build_slab(manifold, param, epsilon, b1, b2, chart_index=0):
    """Slab S_M(y) centred at y = embed(param)."""
    if not (epsilon > 0 and b1 > 0 and b2 > 0):
        raise GeometryError("epsilon, b1 and b2 must be positive")
    chart = manifold.charts[chart_index]
    tangent, normal = tangent_frame(chart, param)
    return Slab(
        center=chart.points(np.atleast_2d(param))[0],
        tangent_basis=tangent,
        normal_basis=normal,
        tangent_halfwidth=b1 * np.sqrt(epsilon),
        normal_halfwidth=b2 * epsilon,
    )


def slab_membership(slab, x):
    """Whether the single point ``x`` lies in the closed slab."""
    return bool(slab.contains(np.asarray(x, dtype=float).reshape(1, -1))[0])


def slabs_along(manifold, epsilon, b1, b2, spacing):
    """
    Slabs centred on a net of the manifold.

    Net points are at most ``spacing`` apart in ambient units.
    """
    net = manifold.ambient_net(spacing)
    return [
        build_slab(manifold, param, epsilon, b1, b2, chart_index=int(chart))
        for param, chart in zip(net.params, net.chart_ids)
    ]
