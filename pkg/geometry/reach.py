"""
Sampled reach certification.

Reach is not computed exactly. Sampled criteria are checked on a parameter
net instead: a curvature bound (normal acceleration along parameter
directions, from second differences) and a bottleneck bound. Within a chart,
the bottleneck bound looks for pairs close in space but far along the
manifold. Across charts, where parameter distances do not compare, it uses
the pointwise identity

    reach = inf over x != y of |y - x|^2 / (2 dist(y - x, T_x M)),

which needs only the tangent space at one end of each pair.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .models import direction_set

logger = logging.getLogger(__name__)

CURVATURE_SLACK = 1e-5
# Bottleneck nets never go below this many points per reach-floor length.
BOTTLENECK_DENSITY = 16


@dataclass(frozen=True)
class ReachReport:
    passed: bool
    curvature_ok: bool
    bottleneck_ok: bool
    max_curvature: float
    reach_estimate: float
    worst_pair: tuple = None

    def as_dict(self):
        return {
            "passed": self.passed,
            "curvature_ok": self.curvature_ok,
            "bottleneck_ok": self.bottleneck_ok,
            "max_curvature": self.max_curvature,
            "reach_estimate": self.reach_estimate,
        }


def normal_curvatures(chart, params, step):
    """
    Normal curvature of the chart image along each probing direction.

    Returns an (m, n_directions) array: the norm of the normal component of
    the second difference divided by the squared speed.
    """
    params = np.atleast_2d(params)
    tangent, _ = np.linalg.qr(chart.jacobians(params))
    centre = chart.points(params)
    jac = chart.jacobians(params)
    curvatures = []
    for direction in direction_set(chart.intrinsic_dim):
        shift = step * direction
        forward, backward = chart.points(params + shift), chart.points(params - shift)
        accel = (forward - 2 * centre + backward) / step**2
        along = np.einsum("mkd,mk->md", tangent, accel)
        normal = accel - np.einsum("mkd,md->mk", tangent, along)
        speed = np.linalg.norm(jac @ direction, axis=1)
        curvatures.append(np.linalg.norm(normal, axis=1) / speed**2)
    return np.stack(curvatures, axis=1)


def _interior(chart, params, step):
    """Mask of net parameters whose second-difference stencil stays in the box."""
    keep = np.ones(params.shape[0], dtype=bool)
    for axis, wraps in enumerate(chart.periodic):
        if not wraps:
            keep &= params[:, axis] - step >= chart.lower[axis] - 1e-15
            keep &= params[:, axis] + step <= chart.upper[axis] + 1e-15
    return keep


def _curvature_check(manifold, net, kappa):
    diameter = manifold.bounding_box.diameter
    ambient_step = 1e-3 * min(kappa, diameter)
    worst = 0.0
    for index, chart in enumerate(manifold.charts):
        step = ambient_step / chart.lipschitz
        params = net.params[net.chart_ids == index]
        params = params[_interior(chart, params, step)]
        if params.shape[0] == 0:
            continue
        worst = max(worst, float(normal_curvatures(chart, params, step).max()))
    return worst


def tangent_frames(manifold, net):
    """Orthonormal tangent frames, shape (m, D, d), at every point of ``net``."""
    shape = (net.points.shape[0], manifold.ambient_dim, manifold.intrinsic_dim)
    frames = np.empty(shape)
    for index, chart in enumerate(manifold.charts):
        mask = net.chart_ids == index
        if mask.any():
            frames[mask], _ = np.linalg.qr(chart.jacobians(net.params[mask]))
    return frames


def _cross_chart_check(manifold, kappa, net, pairs):
    """
    Pointwise reach ratios over pairs whose ends lie on different charts.

    Each pair is used in both orientations. Coincident points (shared chart
    seams) are skipped.

    Returns:
        tuple: (ok, smallest ratio, worst pair or None).
    """
    cross = pairs[net.chart_ids[pairs[:, 0]] != net.chart_ids[pairs[:, 1]]]
    if cross.shape[0] == 0:
        return True, math.inf, None
    first = np.concatenate([cross[:, 0], cross[:, 1]])
    second = np.concatenate([cross[:, 1], cross[:, 0]])
    diff = net.points[second] - net.points[first]
    chord = np.linalg.norm(diff, axis=1)
    scale = max(1.0, float(np.abs(net.points).max()))
    apart = chord > 1e-9 * scale
    first, second, diff, chord = first[apart], second[apart], diff[apart], chord[apart]
    if first.shape[0] == 0:
        return True, math.inf, None
    frame = tangent_frames(manifold, net)[first]
    along = np.einsum("mkd,mk->md", frame, diff)
    normal = np.linalg.norm(diff - np.einsum("mkd,md->mk", frame, along), axis=1)
    ratio = np.full(chord.shape, math.inf)
    bent = normal > 1e-12 * scale
    ratio[bent] = chord[bent] ** 2 / (2 * normal[bent])
    worst_index = int(np.argmin(ratio))
    smallest = float(ratio[worst_index])
    ok = not math.isfinite(kappa) or smallest >= kappa * (1 - 1e-6)
    worst = None if ok else (int(first[worst_index]), int(second[worst_index]))
    return ok, smallest, worst


def _bottleneck_check(manifold, kappa, resolution):
    """
    Look for pairs within 2 kappa that are too close for reach kappa.

    For reach >= kappa, two points at chord c < 2 kappa on one chart are joined
    by a path on the manifold of length at most 2 kappa arcsin(c / 2 kappa).
    The chart gives the lower bound sigma_min * |du| on that path length.
    Pairs split across charts go through the pointwise ratio instead.
    """
    spacing = resolution
    if math.isfinite(kappa):
        spacing = max(resolution, kappa / BOTTLENECK_DENSITY)
    net = manifold.ambient_net(spacing)
    tree = cKDTree(net.points)
    radius = 2 * kappa if math.isfinite(kappa) else manifold.bounding_box.diameter
    pairs = tree.query_pairs(radius * (1 - 1e-9), output_type="ndarray")
    bottleneck = math.inf
    worst = None
    ok = True
    for index, chart in enumerate(manifold.charts):
        in_chart = net.chart_ids == index
        sigma = float(chart.smallest_singular_values(net.params[in_chart]).min())
        mask = in_chart[pairs[:, 0]] & in_chart[pairs[:, 1]]
        chart_pairs = pairs[mask]
        if chart_pairs.shape[0] == 0:
            continue
        first, second = net.points[chart_pairs[:, 0]], net.points[chart_pairs[:, 1]]
        chord = np.linalg.norm(first - second, axis=1)
        along = sigma * chart.parameter_distance(
            net.params[chart_pairs[:, 0]], net.params[chart_pairs[:, 1]]
        )
        if math.isfinite(kappa):
            allowed = 2 * kappa * np.arcsin(np.clip(chord / (2 * kappa), 0.0, 1.0))
            excess = along - allowed * (1 + 1e-6) - 2 * spacing
            if excess.max() > 0:
                ok = False
                worst = tuple(int(i) for i in chart_pairs[int(np.argmax(excess))])
        folded = along > math.pi / 2 * chord + 2 * spacing
        if folded.any():
            bottleneck = min(bottleneck, float(chord[folded].min()) / 2)
    cross_ok, cross_ratio, cross_worst = _cross_chart_check(
        manifold, kappa, net, pairs
    )
    bottleneck = min(bottleneck, cross_ratio)
    if not cross_ok:
        ok = False
        worst = worst or cross_worst
    return ok, bottleneck, worst


def reach_validate(manifold, kappa, resolution):
    """
    Certify numerically that the reach of ``manifold`` is at least ``kappa``.

    Args:
        manifold (ParametricManifold): Manifold to check.
        kappa (float): Claimed reach level.
        resolution (float): Ambient spacing of the curvature net.

    Returns:
        ReachReport: Pass/fail per criterion and an estimated reach, the
        smaller of the inverse maximal curvature and half the shortest
        folded chord.
    """
    net = manifold.ambient_net(resolution)
    max_curvature = _curvature_check(manifold, net, kappa)
    curvature_ok = max_curvature <= (1 / kappa) * (1 + CURVATURE_SLACK)
    bottleneck_ok, bottleneck, worst = _bottleneck_check(manifold, kappa, resolution)
    estimate = min(1 / max_curvature if max_curvature > 0 else math.inf, bottleneck)
    report = ReachReport(
        passed=bool(curvature_ok and bottleneck_ok),
        curvature_ok=bool(curvature_ok),
        bottleneck_ok=bool(bottleneck_ok),
        max_curvature=max_curvature,
        reach_estimate=estimate,
        worst_pair=worst,
    )
    logger.debug("reach check for %s at %.4g: %s", manifold.label, kappa, report)
    return report
