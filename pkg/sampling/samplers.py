"""
Samplers for the noiseless, clutter and additive models.

Manifold draws use rejection sampling across charts: pick a chart in
proportion to its parameter-box volume, propose uniformly in the box and
accept with probability g(u) vol(u) / envelope.
"""

import logging

import numpy as np

from geometry.models import PointCloud
from manifold_lab.exceptions import SamplingError

from . import random
from .models import Additive, Clutter, Dataset, Noiseless

logger = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-4
ACCEPTANCE_GRACE = 100_000
MAX_BATCH = 1_000_000


def draw_parameters(dist, n, rng):
    """
    Draw ``n`` manifold points from ``dist`` by chart rejection sampling.

    Accepted proposals are kept in proposal order, so the output depends only
    on the generator state.

    Returns:
        tuple: (points (n, D), chart_ids (n,), params (n, d)).

    Raises:
        SamplingError: If fewer than one proposal in 10^4 is accepted.
    """
    manifold = dist.manifold
    charts = manifold.charts
    volumes = np.array([chart.volume for chart in charts])
    probabilities = volumes / volumes.sum()
    lowers = np.array([chart.lower for chart in charts])
    extents = np.array([chart.extent for chart in charts])

    points, ids, params = [], [], []
    accepted = proposals = 0
    rate = 0.5
    while accepted < n:
        wanted = 1.2 * (n - accepted) / max(rate, MIN_ACCEPTANCE)
        batch = int(min(MAX_BATCH, max(1024, wanted)))
        chart_ids = rng.choice(len(charts), size=batch, p=probabilities)
        unit = rng.random((batch, manifold.intrinsic_dim))
        u = lowers[chart_ids] + extents[chart_ids] * unit
        threshold = rng.random(batch) * dist.envelope
        keep = np.zeros(batch, dtype=bool)
        for index in range(len(charts)):
            mask = chart_ids == index
            if mask.any():
                keep[mask] = threshold[mask] < dist.proposal_weight(u[mask], index)
        proposals += batch
        accepted += int(keep.sum())
        rate = accepted / proposals
        kept_u, kept_ids = u[keep], chart_ids[keep]
        block = np.empty((kept_u.shape[0], manifold.ambient_dim))
        for index in range(len(charts)):
            mask = kept_ids == index
            if mask.any():
                block[mask] = charts[index].points(kept_u[mask])
        points.append(block)
        ids.append(kept_ids)
        params.append(kept_u)
        if proposals >= ACCEPTANCE_GRACE and rate < MIN_ACCEPTANCE:
            raise SamplingError("degenerate density/parametrization")
    logger.debug("drew %d points on %s, acceptance %.3f", n, manifold.label, rate)
    if n == 0:
        return (
            np.empty((0, manifold.ambient_dim)),
            np.empty(0, dtype=int),
            np.empty((0, manifold.intrinsic_dim)),
        )
    return np.vstack(points)[:n], np.concatenate(ids)[:n], np.vstack(params)[:n]


def sample_on_manifold(dist, n, seed):
    """i.i.d. sample of size ``n`` from G (the noiseless model)."""
    if n < 0:
        raise SamplingError("sample size must be nonnegative")
    record = random.SeedRecord.coerce(seed)
    points, _, _ = draw_parameters(dist, n, record.generator(random.MANIFOLD))
    return Dataset(
        observed=PointCloud(points.reshape(n, dist.ambient_dim)),
        model=Noiseless.tag,
        latent=points,
        seed=record,
    )


def check_inside(dist, box):
    """Raise unless a net of the manifold lies in the closed box."""
    manifold = dist.manifold
    net = manifold.discretize(manifold.check_spacing() * manifold.lipschitz)
    outside = ~box.contains(net.points)
    if outside.any():
        raise SamplingError(
            f"{dist.label} is not inside the clutter box "
            f"({int(outside.sum())} of {len(net)} net points outside)"
        )


def sample_clutter(dist, pi, box, n, seed):
    """
    Sample from (1 - pi) U + pi G with U uniform on ``box``.

    Each point is a manifold draw with probability pi, else uniform clutter.
    The manifold draws are taken from the same stream as the noiseless
    sampler, so pi = 1 reproduces ``sample_on_manifold`` exactly.
    """
    model = Clutter(pi, box)
    if n < 0:
        raise SamplingError("sample size must be nonnegative")
    check_inside(dist, box)
    record = random.SeedRecord.coerce(seed)
    signal, _, _ = draw_parameters(dist, n, record.generator(random.MANIFOLD))
    signal = signal.reshape(n, dist.ambient_dim)
    is_clutter = record.generator(random.CLUTTER_FLAGS).random(n) >= model.pi
    noise = box.sample_uniform(record.generator(random.CLUTTER_POSITIONS), n)
    observed = np.where(is_clutter[:, None], noise, signal)
    latent = np.where(is_clutter[:, None], np.nan, signal)
    logger.debug("clutter sample: %d of %d points are clutter", is_clutter.sum(), n)
    return Dataset(
        observed=PointCloud(observed),
        model=Clutter.tag,
        latent=latent,
        clutter=is_clutter,
        seed=record,
    )


def sample_additive(dist, n, seed, scale=1.0):
    """Sample Y = X + Z with X ~ G and Z ~ N(0, scale^2 I)."""
    model = Additive(scale)
    if n < 0:
        raise SamplingError("sample size must be nonnegative")
    record = random.SeedRecord.coerce(seed)
    signal, _, _ = draw_parameters(dist, n, record.generator(random.MANIFOLD))
    signal = signal.reshape(n, dist.ambient_dim)
    noise = model.scale * record.generator(random.NOISE).standard_normal(
        (n, dist.ambient_dim)
    )
    return Dataset(
        observed=PointCloud(signal + noise),
        model=Additive.tag,
        latent=signal,
        noise=noise,
        seed=record,
    )


def sample(dist, model, n, seed):
    """Dispatch on the noise model."""
    if isinstance(model, Clutter):
        return sample_clutter(dist, model.pi, model.box, n, seed)
    if isinstance(model, Additive):
        return sample_additive(dist, n, seed, model.scale)
    if isinstance(model, Noiseless):
        return sample_on_manifold(dist, n, seed)
    raise SamplingError(f"unknown noise model {model!r}")


def empirical_mass(cloud, region):
    """
    Fraction of the cloud inside a closed region.

    Args:
        cloud (PointCloud): Sample (weighted clouds use their weights).
        region (Slab | Box): Anything with a ``contains`` mask.

    Returns:
        float: Empirical measure of the region, in [0, 1].
    """
    if cloud.is_empty:
        raise SamplingError("empirical mass of an empty cloud is undefined")
    inside = region.contains(cloud.points)
    return float(np.sum(cloud.mass()[inside]))
