"""
Gauss-Legendre quadrature over chart parameter boxes.

Integrals against a manifold distribution are pulled back to the parameter
boxes of its charts: int_M f dvol = sum_charts int_box f(phi(u)) vol(u) du,
where vol(u) = sqrt(det(J^T J)).
"""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss


def gauss_legendre_panels(lower, upper, panels, order):
    """
    Composite Gauss-Legendre rule on [lower, upper].

    Args:
        lower (float): Left end of the interval.
        upper (float): Right end of the interval.
        panels (int): Number of equal sub-intervals.
        order (int): Nodes per sub-interval.

    Returns:
        tuple: (nodes, weights) as 1-D arrays.
    """
    base_nodes, base_weights = leggauss(order)
    edges = np.linspace(lower, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * base_nodes[None, :]).reshape(-1)
    weights = (half[:, None] * base_weights[None, :]).reshape(-1)
    return nodes, weights


def chart_quadrature(chart, spacing, order=6):
    """
    Tensor-product rule over a chart's parameter box.

    Panels along each axis are at most ``spacing`` wide in parameter units.
    Returns ``(params, weights)`` where ``weights`` already include the
    volume factor, so ``sum(weights * f(embed(params)))`` integrates f
    against the d-dimensional volume measure of the chart image.
    """
    axes_nodes, axes_weights = [], []
    for lo, hi in zip(chart.lower, chart.upper):
        panels = max(1, math.ceil((hi - lo) / spacing - 1e-9))
        nodes, weights = gauss_legendre_panels(lo, hi, panels, order)
        axes_nodes.append(nodes)
        axes_weights.append(weights)
    node_mesh = np.meshgrid(*axes_nodes, indexing="ij")
    weight_mesh = np.meshgrid(*axes_weights, indexing="ij")
    params = np.stack([m.reshape(-1) for m in node_mesh], axis=1)
    weights = np.prod(np.stack([w.reshape(-1) for w in weight_mesh]), axis=0)
    return params, weights * chart.volume_factor(params)


def breakpoint_rule(lower, upper, spacing, breaks=(), order=6, min_panels=8):
    """
    Tensor rule over a parameter box whose panels align with ``breaks``.

    Each axis is cut at the breakpoints falling strictly inside it; every
    piece gets at least ``min_panels`` panels no wider than ``spacing``.
    Weights are plain parameter-domain weights (no volume factor).

    Returns:
        tuple: (params, weights) with params of shape (m, d).
    """
    axes_nodes, axes_weights = [], []
    for lo, hi in zip(np.atleast_1d(lower), np.atleast_1d(upper)):
        cuts = sorted(b for b in breaks if lo < b < hi)
        edges = [lo, *cuts, hi]
        nodes, weights = [], []
        for left, right in zip(edges[:-1], edges[1:]):
            panels = max(min_panels, math.ceil((right - left) / spacing - 1e-9))
            piece_nodes, piece_weights = gauss_legendre_panels(
                left, right, panels, order
            )
            nodes.append(piece_nodes)
            weights.append(piece_weights)
        axes_nodes.append(np.concatenate(nodes))
        axes_weights.append(np.concatenate(weights))
    node_mesh = np.meshgrid(*axes_nodes, indexing="ij")
    weight_mesh = np.meshgrid(*axes_weights, indexing="ij")
    params = np.stack([m.reshape(-1) for m in node_mesh], axis=1)
    weights = np.prod(np.stack([w.reshape(-1) for w in weight_mesh]), axis=0)
    return params, weights


def manifold_quadrature(manifold, spacing, order=6):
    """
    Quadrature nodes for every chart of ``manifold``.

    Returns:
        tuple: (points, weights, chart_ids, params) stacked across charts.
    """
    points, weights, ids, params = [], [], [], []
    for index, chart in enumerate(manifold.charts):
        chart_params, chart_weights = chart_quadrature(chart, spacing, order)
        params.append(chart_params)
        points.append(chart.points(chart_params))
        weights.append(chart_weights)
        ids.append(np.full(chart_params.shape[0], index))
    return (
        np.vstack(points),
        np.concatenate(weights),
        np.concatenate(ids),
        np.vstack(params),
    )


def manifold_volume(manifold, spacing=None, order=6):
    """d-dimensional volume of the manifold (within its parameter boxes)."""
    if spacing is None:
        spacing = manifold.check_spacing()
    _, weights, _, _ = manifold_quadrature(manifold, spacing, order)
    return float(weights.sum())
