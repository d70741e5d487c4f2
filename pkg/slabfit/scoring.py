"""
Slab score and the candidate-family maximiser.

s(M) is the smallest empirical mass of the slabs S_M(y) as y runs over a net
of M. On the true manifold every slab holds about eps_n^(d/2) of the sample;
a candidate that strays by more than eps_n has slabs holding only clutter.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.spatial import cKDTree

from geometry.manifolds import translate
from geometry.slabs import build_slab
from manifold_lab.exceptions import GeometryError, ParameterError

from .models import CandidateFamily, FitResult, SlabScore

logger = logging.getLogger(__name__)


def epsilon_n(n, d, K):
    """eps_n = (K log n / n)^(2/d)."""
    if n < 2 or not K > 0:
        raise ParameterError(f"eps_n needs n >= 2 and K > 0, got n={n}, K={K}")
    return (K * math.log(n) / n) ** (2.0 / d)


def required_spacing(epsilon, b1):
    """Coarsest net spacing for which neighbouring slabs overlap."""
    return b1 * math.sqrt(epsilon) / 2


def slab_score(manifold, cloud, epsilon, b1, b2, net_spacing=None, label=None):
    """
    Smallest empirical slab mass over a net of ``manifold``.

    Args:
        manifold (ParametricManifold): Candidate M.
        cloud (PointCloud): Sample (weighted clouds use their weights).
        epsilon (float): Slab scale eps.
        b1, b2 (float): Tangent and normal width constants.
        net_spacing (float): Ambient net spacing; defaults to b1 sqrt(eps) / 2.
        label (str): Name reported with the score.

    Returns:
        SlabScore: The minimum and the net point attaining it.

    Raises:
        GeometryError: If the net is coarser than b1 sqrt(eps) / 2 or the
            cloud and manifold dimensions differ.
    """
    required = required_spacing(epsilon, b1)
    spacing = required if net_spacing is None else float(net_spacing)
    if spacing > required * (1 + 1e-12):
        raise GeometryError(
            f"net spacing {spacing:.4g} is too coarse; slab scores need at most "
            f"b1 sqrt(eps) / 2 = {required:.4g}"
        )
    if cloud.ambient_dim != manifold.ambient_dim:
        raise GeometryError("cloud and candidate live in different dimensions")

    net = manifold.ambient_net(spacing)
    tree = cKDTree(cloud.points) if not cloud.is_empty else None
    mass = cloud.mass()
    best, where = math.inf, 0
    for index, (param, chart) in enumerate(zip(net.params, net.chart_ids)):
        slab = build_slab(manifold, param, epsilon, b1, b2, chart_index=int(chart))
        nearby = []
        if tree is not None:
            nearby = tree.query_ball_point(slab.center, slab.half_diagonal * 1.000001)
        value = 0.0
        if nearby:
            inside = slab.contains(cloud.points[nearby])
            value = float(mass[nearby][inside].sum())
        if value < best:
            best, where = value, index
        if best == 0.0:
            break
    return SlabScore(
        label=label or manifold.label,
        value=best,
        point=tuple(float(x) for x in net.points[where]),
        chart_index=int(net.chart_ids[where]),
        net_spacing=spacing,
        net_size=int(net.points.shape[0]),
        coverage=spacing / (b1 * math.sqrt(epsilon)),
    )


def fit(
    candidates, cloud, n=None, K=8.0, b1=1.0, b2=1.0, threads=1, net_spacing=None
):
    """
    Maximise the slab score over a candidate family.

    Candidates are scored independently (in a thread pool when ``threads`` is
    above one) and reduced in family order, so ties go to the lowest index.

    Args:
        candidates (CandidateFamily): Family to score.
        cloud (PointCloud): The sample.
        n (int): Sample size entering eps_n; defaults to ``len(cloud)``.
        K (float): Constant in eps_n.
        b1, b2 (float): Slab width constants.
        threads (int): Worker threads across candidates.
        net_spacing (float): Optional net spacing passed to slab_score.

    Returns:
        FitResult
    """
    n = len(cloud) if n is None else n
    epsilon = epsilon_n(n, candidates.intrinsic_dim, K)

    def score(index):
        return slab_score(
            candidates[index],
            cloud,
            epsilon,
            b1,
            b2,
            net_spacing,
            label=candidates.labels[index],
        )

    indices = range(len(candidates))
    if threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = tuple(pool.map(score, indices))
    else:
        scores = tuple(score(index) for index in indices)

    values = np.array([s.value for s in scores])
    chosen = int(np.argmax(values))
    best = float(values[chosen])
    no_support = best == 0.0
    if no_support:
        logger.warning("no support detected: every slab score is zero")
    else:
        logger.info(
            "slab fit chose %s with score %.4g (eps_n=%.3g)",
            candidates.labels[chosen],
            best,
            epsilon,
        )
    return FitResult(
        candidates=candidates,
        epsilon=epsilon,
        scores=scores,
        chosen=chosen,
        tie=bool(np.sum(values == best) > 1),
        no_support=no_support,
        params={"n": n, "K": K, "b1": b1, "b2": b2},
    )


def offset_family(manifold, distance, count=8):
    """
    The manifold followed by ``count`` translated copies.

    Copies are moved by ``distance`` along equally spaced compass directions
    in the plane of the first two ambient axes, so each sits at Hausdorff
    distance ``distance`` from the original.
    """
    if manifold.ambient_dim < 2:
        raise GeometryError("offset families need at least two ambient dimensions")
    members, labels = [manifold], [manifold.label]
    for step in range(count):
        angle = 2 * math.pi * step / count
        offset = np.zeros(manifold.ambient_dim)
        offset[:2] = distance * math.cos(angle), distance * math.sin(angle)
        members.append(translate(manifold, offset))
        labels.append(f"{manifold.label}+{math.degrees(angle):.0f}deg")
    return CandidateFamily(tuple(members), tuple(labels))
