"""
Least favorable pair constructions.

The cosine pair serves the additive-noise bound: two graphs +-gamma c(u)
whose difference oscillates so fast that Gaussian smoothing all but erases
it. The bump pair serves the noiseless and clutter bounds: a flat patch and
the same patch with a smooth bump of height gamma, of reach at least kappa.
"""

import dataclasses
import logging
import math

import numpy as np

from geometry.manifolds import graph
from geometry.metrics import distances_to_cloud
from geometry.models import Box
from geometry.quadrature import breakpoint_rule
from geometry.slabs import tangent_frame
from manifold_lab.exceptions import ConstructionError, ParameterError
from sampling.models import ManifoldDistribution

from .models import BumpValidation, LeastFavorablePair

logger = logging.getLogger(__name__)

# Parameter truncation of the cosine graphs; the Gaussian tail beyond is < 1e-8.
COSINE_EXTENT = 6.0


def _check_dims(d, D):
    if not 1 <= d < D:
        raise ParameterError(f"need 1 <= d < D, got d={d}, D={D}")


def _first_normal(values, codim):
    """Heights (m,) placed in the first of ``codim`` normal coordinates."""
    out = np.zeros((values.shape[0], codim))
    out[:, 0] = values
    return out


def _first_normal_grad(grads, codim):
    out = np.zeros((grads.shape[0], codim, grads.shape[1]))
    out[:, 0, :] = grads
    return out


def _gaussian_zeta(params):
    d = params.shape[1]
    return np.exp(-0.5 * np.sum(params**2, axis=1)) / (2 * math.pi) ** (d / 2)


def cosine_pair(gamma, a=1.0, d=1, D=2, kappa=0.5, extent=COSINE_EXTENT):
    """
    Graphs of +-gamma prod_l cos(u_l / (a sqrt(gamma))) over |u_l| <= extent.

    Both distributions push the standard Gaussian parameter density forward,
    renormalised over the truncated box. The vertical gap at u = 0 is 2 gamma,
    which is the separation recorded on the pair.

    Args:
        gamma (float): Construction scale, positive.
        a (float): Frequency constant; the pair needs a > sqrt(kappa).
        d, D (int): Intrinsic and ambient dimension.
        kappa (float): Reach floor both graphs must clear.
        extent (float): Parameter half-width of the truncated graphs.

    Returns:
        LeastFavorablePair

    Raises:
        ConstructionError: If a <= sqrt(kappa).
    """
    if not gamma > 0:
        raise ParameterError("the cosine pair needs gamma > 0")
    _check_dims(d, D)
    if not a > math.sqrt(kappa):
        raise ConstructionError(
            f"reach condition violated: a = {a} must exceed sqrt(kappa) = "
            f"{math.sqrt(kappa):.4g}"
        )
    codim = D - d
    scale = a * math.sqrt(gamma)
    lower, upper = -extent * np.ones(d), extent * np.ones(d)
    box = Box(
        np.concatenate([lower, [-(gamma + 1)], -np.ones(codim - 1)]),
        np.concatenate([upper, [gamma + 1], np.ones(codim - 1)]),
    )

    def profile(params):
        return np.prod(np.cos(params / scale), axis=1)

    def profile_grad(params):
        cosines = np.cos(params / scale)
        grads = np.empty_like(params)
        for axis in range(d):
            others = np.prod(np.delete(cosines, axis, axis=1), axis=1)
            grads[:, axis] = -np.sin(params[:, axis] / scale) / scale * others
        return grads

    members = []
    for sign, name in ((1.0, "cosine+"), (-1.0, "cosine-")):
        manifold = graph(
            lambda u, s=sign: _first_normal(s * gamma * profile(u), codim),
            lambda u, s=sign: _first_normal_grad(s * gamma * profile_grad(u), codim),
            lower,
            upper,
            dim=D,
            reach_floor=kappa,
            label=name,
            compact=False,
            box=box,
            metadata={"gamma": gamma, "a": a},
        )
        dist = ManifoldDistribution.from_parameter_density(
            manifold, _gaussian_zeta, label=f"{name} gaussian"
        )
        members.append((manifold, dist))

    (m0, g0), (m1, g1) = members
    logger.debug("cosine pair at gamma=%.4g (a=%.3g, d=%d, D=%d)", gamma, a, d, D)
    return LeastFavorablePair(
        m0=m0,
        m1=m1,
        g0=g0,
        g1=g1,
        gamma=gamma,
        separation=2 * gamma,
        construction="cosine",
        params={"a": a, "kappa": kappa, "d": d, "D": D, "extent": extent},
    )


def bump_radius(gamma, kappa):
    """Support radius rho = 3 sqrt(gamma kappa), giving curvature 2 / (3 kappa)."""
    return 3 * math.sqrt(gamma * kappa)


def bump_pair(gamma, kappa=0.4, d=1, D=2, validate=True, resolution=None):
    """
    Flat d-patch M0 and the same patch M1 with a bump of height gamma.

    The bump is gamma (1 - |u|^2 / rho^2)^3 on |u| < rho, which is C2, has
    its apex tangent plane parallel to M0 and curvature at most 2 / (3 kappa).
    Both patches span [-2 kappa, 2 kappa]^d and carry uniform distributions.

    Args:
        gamma (float): Bump height, 0 <= gamma <= kappa / 4.
        kappa (float): Reach floor.
        d, D (int): Intrinsic and ambient dimension.
        validate (bool): Run the reach check and the numeric construction
            checks, attaching a BumpValidation to the pair.
        resolution (float): Parameter spacing for the checks; defaults to
            rho / 32.

    Raises:
        ParameterError: If gamma lies outside [0, kappa / 4].
        ConstructionError: If either patch fails the reach check.
    """
    if not 0 <= gamma <= kappa / 4:
        raise ParameterError(f"bump height must lie in [0, kappa/4], got {gamma}")
    _check_dims(d, D)
    codim = D - d
    half = 2 * kappa
    rho = bump_radius(gamma, kappa)
    lower, upper = -half * np.ones(d), half * np.ones(d)
    box = Box.cube(1.25 * half, D)

    def height(params):
        if rho == 0:
            return np.zeros(params.shape[0])
        s = np.sum(params**2, axis=1) / rho**2
        return np.where(s < 1, gamma * np.clip(1 - s, 0, None) ** 3, 0.0)

    def height_grad(params):
        if rho == 0:
            return np.zeros_like(params)
        s = np.sum(params**2, axis=1) / rho**2
        slope = -6 * gamma * np.clip(1 - s, 0, None) ** 2 / rho**2
        return np.where((s < 1)[:, None], slope[:, None] * params, 0.0)

    m0 = graph(
        lambda u: np.zeros((u.shape[0], codim)),
        lambda u: np.zeros((u.shape[0], codim, d)),
        lower,
        upper,
        dim=D,
        reach_floor=kappa,
        label="flat",
        box=box,
    )
    m1 = graph(
        lambda u: _first_normal(height(u), codim),
        lambda u: _first_normal_grad(height_grad(u), codim),
        lower,
        upper,
        dim=D,
        reach_floor=kappa,
        label="bump",
        box=box,
        metadata={"gamma": gamma, "rho": rho},
    )
    pair = LeastFavorablePair(
        m0=m0,
        m1=m1,
        g0=ManifoldDistribution.uniform(m0),
        g1=ManifoldDistribution.uniform(m1),
        gamma=gamma,
        separation=gamma,
        construction="bump",
        params={"kappa": kappa, "d": d, "D": D, "rho": rho, "half_width": half},
    )
    if not validate or gamma == 0:
        return pair
    resolution = resolution or rho / 32
    validation = validate_bump(pair, resolution)
    logger.info(
        "bump pair gamma=%.4g: H=%.4g, mu1(B)/gamma^(d/2)=%.3g, "
        "mu1(A)/gamma^(d/2)=%.3g",
        gamma,
        validation.hausdorff,
        validation.b_ratio,
        validation.a_constant,
    )
    return dataclasses.replace(pair, validation=validation)


def validate_bump(pair, resolution):
    """
    Numeric checks of a bump pair.

    Covers the Hausdorff distance against the apex gap, the G1 mass of the
    core B = {bump > gamma / 2} and of the support A, the distance from B
    to M0, apex tangent planes and the reach of both patches.

    Returns:
        BumpValidation

    Raises:
        ConstructionError: If a patch fails the reach check.
    """
    gamma, d = pair.gamma, pair.intrinsic_dim
    rho = pair.params["rho"]
    reports = pair.validate(resolution * pair.m1.lipschitz)

    origin = np.zeros((1, d))
    apex = float(np.linalg.norm(pair.m1.embed(origin) - pair.m0.embed(origin)))
    estimate = pair.hausdorff(resolution)

    chart0, chart1 = pair.m0.charts[0], pair.m1.charts[0]
    params, weights = breakpoint_rule(
        chart1.lower, chart1.upper, resolution, breaks=(-rho, rho)
    )
    mass = weights * pair.g1.proposal_weight(params, 0)
    heights = pair.m1.embed(params)[:, d]
    core, support = heights > gamma / 2, heights > 0
    unit = gamma ** (d / 2)

    far = math.inf
    if core.any():
        flat = pair.m0.parameter_net(resolution).cloud()
        far = float(distances_to_cloud(pair.m1.embed(params[core]), flat).min())
        far /= gamma

    tangent1, _ = tangent_frame(chart1, origin[0])
    _, normal0 = tangent_frame(chart0, origin[0])
    overlap = float(np.linalg.norm(normal0 @ tangent1.T, 2))

    return BumpValidation(
        apex_separation=apex,
        hausdorff=estimate.value,
        hausdorff_bound=estimate.bound,
        b_mass=float(mass[core].sum()),
        b_ratio=float(mass[core].sum()) / unit,
        a_mass=float(mass[support].sum()),
        a_constant=float(mass[support].sum()) / unit,
        far_factor=far,
        tangent_angle=math.asin(min(1.0, overlap)),
        max_curvature=max(report.max_curvature for report in reports),
    )
