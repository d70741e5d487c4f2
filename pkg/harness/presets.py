"""Manifold presets an experiment config can name."""

import logging
from dataclasses import dataclass

from geometry.manifolds import circle, segment, sphere, torus
from lecam.pairs import bump_pair, cosine_pair
from sampling.models import Additive, Clutter, ManifoldDistribution, Noiseless

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    The truth behind one experiment.

    Attributes:
        manifold (ParametricManifold): M.
        dist (ManifoldDistribution): G on M.
        model (Noiseless | Clutter | Additive): Noise model.
        box (Box): The compact set K: clutter support and loss truncation.
    """

    manifold: object
    dist: object
    model: object
    box: object

    @property
    def intrinsic_dim(self):
        return self.manifold.intrinsic_dim


def build_manifold(config):
    """Manifold and distribution for ``config.preset``."""
    preset, padding = config.preset, config.box_padding
    if preset == "circle":
        # The deconvolution experiments use a larger circle than N(0, I).
        radius = config.deconv_radius if config.estimator == "deconv" else config.radius
        manifold = circle(radius, box_padding=padding)
    elif preset == "segment":
        manifold = segment(2 * config.radius, box_padding=padding)
    elif preset == "sphere":
        manifold = sphere(config.radius, box_padding=padding)
    elif preset == "torus":
        manifold = torus(2 * config.radius, config.radius / 2, box_padding=padding)
    elif preset == "cosine":
        pair = cosine_pair(config.gamma, kappa=config.kappa)
        return pair.m0, pair.g0
    else:
        pair = bump_pair(config.gamma, config.kappa, validate=False)
        return pair.m1, pair.g1
    return manifold, ManifoldDistribution.uniform(manifold)


def build_scenario(config):
    manifold, dist = build_manifold(config)
    box = manifold.bounding_box
    if config.noise == "clutter":
        model = Clutter(config.pi, box)
    elif config.noise == "additive":
        model = Additive(1.0)
    else:
        model = Noiseless()
    logger.debug("scenario %s under %s", manifold.label, model.tag)
    return Scenario(manifold=manifold, dist=dist, model=model, box=box)
