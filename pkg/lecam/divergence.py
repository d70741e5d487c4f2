"""
Divergences between manifold distributions and the Le Cam bound.

Under additive noise both hypotheses have smooth densities q_j = G_j * phi,
tabulated on a shared grid and compared by grid quadrature. Under the
noiseless and clutter models G0 and G1 are mutually singular away from the
part where the two manifolds coincide, and TV is computed over the shared
parameter box instead.
"""

import dataclasses
import logging
import math

import numpy as np

from deconv.estimator import kernel_sum
from deconv.models import DensityField
from geometry.quadrature import breakpoint_rule
from manifold_lab.exceptions import ConstructionError, GeometryError, ParameterError
from sampling import random
from sampling.samplers import check_inside, draw_parameters, sample_additive

from .models import ClutterTV, DivergenceReport

logger = logging.getLogger(__name__)

# Grid padding, in noise standard deviations, below which the tail is flagged.
PADDING_SIGMAS = 6.0
TAIL_TOLERANCE = 1e-6
# The two clutter TV paths may differ by this many Monte Carlo standard
# errors plus the parameter quadrature slack.
CLUTTER_SIGMAS = 4.0
QUADRATURE_SLACK = 1e-3


def gaussian_profile(dim, scale=1.0):
    """phi_D as a function of the distance r, for the noise N(0, scale^2 I)."""
    norm = (2 * math.pi) ** (dim / 2) * scale**dim

    def profile(distances):
        return np.exp(-0.5 * (distances / scale) ** 2) / norm

    return profile


def convolve_with_gaussian(dist, grid, scale=1.0, spacing=None, threads=1):
    """
    q(y) = int phi(y - u) dG(u) on the nodes of ``grid``.

    G enters through its quadrature atoms; ``spacing`` refines them. The
    grid's shortfall from unit mass is reported as ``tail`` in the field's
    metadata together with the padding achieved around the atoms.

    Returns:
        DensityField
    """
    atoms = dist.atoms(spacing) if spacing else dist.atoms()
    if atoms.ambient_dim != grid.dim:
        raise GeometryError("grid and distribution live in different dimensions")
    profile = gaussian_profile(grid.dim, scale)
    values = kernel_sum(atoms, grid.points(), profile, threads)
    mass = float(values.sum() * grid.cell_volume)
    padding = float(
        min(
            (atoms.points.min(axis=0) - grid.box.lower).min(),
            (grid.box.upper - atoms.points.max(axis=0)).min(),
        )
        / scale
    )
    tail = max(0.0, 1.0 - mass)
    if padding < PADDING_SIGMAS and tail > TAIL_TOLERANCE:
        logger.warning(
            "grid padding is %.2f sd around %s; tail mass %.2e is reported",
            padding,
            getattr(dist, "label", "G"),
            tail,
        )
    logger.debug("convolved %d atoms onto %d nodes", len(atoms), grid.size)
    return DensityField(
        grid,
        values,
        {"scale": scale, "atoms": len(atoms), "padding_sd": padding, "tail": tail},
    )


def _l1(values0, values1, cell_volume):
    return float(np.abs(values0 - values1).sum() * cell_volume)


def tv_distance(q0, q1):
    """
    TV = (1/2) cell volume sum |q0 - q1| between fields on the same grid.

    The quadrature error is the change against every other node (twice the
    spacing); the tail error is the larger of the two reported tails.

    Raises:
        GeometryError: If the fields live on different grids.
    """
    if not q0.grid.same_as(q1.grid):
        raise GeometryError("TV needs both densities on the same grid")
    l1 = _l1(q0.values, q1.values, q0.grid.cell_volume)
    coarse = tuple(slice(None, None, 2) for _ in range(q0.grid.dim))
    coarse_l1 = _l1(
        q0.values[coarse], q1.values[coarse], q0.grid.cell_volume * 2**q0.grid.dim
    )
    tv = min(1.0, l1 / 2)
    return DivergenceReport(
        l1=l1,
        tv=tv,
        affinity=1.0 - tv,
        quadrature_error=abs(l1 - coarse_l1) / 2,
        tail_error=max(q0.metadata.get("tail", 0.0), q1.metadata.get("tail", 0.0)),
    )


def lecam_bound(separation, tv, n):
    """Two-point lower bound separation / 8 (1 - TV)^(2n)."""
    if not -1e-12 <= tv <= 1 + 1e-12:
        raise ParameterError(f"TV must lie in [0, 1], got {tv}")
    if n < 1:
        raise ParameterError(f"sample size must be at least 1, got {n}")
    return separation / 8 * (1 - min(max(tv, 0.0), 1.0)) ** (2 * n)


def affinity_product_lower(l1, n):
    """Lower bound (1/8)(1 - l1/2)^(2n) on the affinity of the n-fold products."""
    if not -1e-12 <= l1 <= 2 + 1e-12:
        raise ParameterError(f"l1 distance must lie in [0, 2], got {l1}")
    if n < 1:
        raise ParameterError(f"sample size must be at least 1, got {n}")
    return (1 - min(max(l1, 0.0), 2.0) / 2) ** (2 * n) / 8


def at_sample_size(report, n, separation):
    """Copy of ``report`` with the product affinity and Le Cam bound at n."""
    return dataclasses.replace(
        report,
        n=n,
        product_affinity=affinity_product_lower(min(report.l1, 2.0), n),
        separation=separation,
        lecam=lecam_bound(separation, report.tv, n),
    )


def pair_divergence(pair, grid, scale=1.0, spacing=None, threads=1, n=None):
    """TV between the noisy laws of a pair, optionally with its bound at n."""
    q0 = convolve_with_gaussian(pair.g0, grid, scale, spacing, threads)
    q1 = convolve_with_gaussian(pair.g1, grid, scale, spacing, threads)
    report = tv_distance(q0, q1)
    if n is not None:
        report = at_sample_size(report, n, pair.separation)
    return report


def _shared_chart(g0, g1):
    m0, m1 = g0.manifold, g1.manifold
    if len(m0.charts) != 1 or len(m1.charts) != 1:
        raise GeometryError("singular TV needs single-chart manifolds")
    c0, c1 = m0.charts[0], m1.charts[0]
    if not (np.allclose(c0.lower, c1.lower) and np.allclose(c0.upper, c1.upper)):
        raise GeometryError("singular TV needs a shared parameter box")
    return c0, c1


def _coincide(points0, points1):
    gap = np.linalg.norm(points0 - points1, axis=1)
    return gap <= 1e-12 * max(1.0, float(np.abs(points0).max(initial=0.0)))


def parameter_atoms(g0, g1, spacing=None, breaks=(), order=6):
    """
    Atoms of G0 and G1 on one parameter rule over their shared box.

    Returns:
        tuple: (points0, mass0, points1, mass1, coincide) where ``coincide``
        flags the nodes at which both manifolds embed to the same point.
    """
    c0, _ = _shared_chart(g0, g1)
    spacing = spacing or g0.manifold.check_spacing()
    params, weights = breakpoint_rule(c0.lower, c0.upper, spacing, breaks, order)
    points0, points1 = g0.manifold.embed(params), g1.manifold.embed(params)
    mass0 = weights * g0.proposal_weight(params, 0)
    mass1 = weights * g1.proposal_weight(params, 0)
    coincide = _coincide(points0, points1)
    return points0, mass0, points1, mass1, coincide


def singular_tv(g0, g1, spacing=None, breaks=(), order=6):
    """
    TV between distributions on two graphs over one parameter box.

    Where the embeddings coincide (the set E) the measures overlap and
    contribute |w0 - w1|; elsewhere they are mutually singular and contribute
    w0 + w1. Panels should align with the boundary of E through ``breaks``.
    """
    _, mass0, _, mass1, coincide = parameter_atoms(g0, g1, spacing, breaks, order)
    common = np.abs(mass0[coincide] - mass1[coincide]).sum()
    apart = mass0[~coincide].sum() + mass1[~coincide].sum()
    return float(min(1.0, 0.5 * (common + apart)))


def clutter_ratios(source, other, pi, box, count, seed):
    """
    |p_s - p_o| / (p_s + p_o) at ``count`` draws from (1 - pi) U + pi G_s.

    p_s and p_o are the densities of the two clutter mixtures against
    Lebesgue measure plus surface measure on both manifolds. A clutter draw
    misses both manifolds almost surely, where both mixtures have the
    density (1 - pi) / vol(box), so its ratio is 0. A manifold draw at
    parameter u has p_s = pi g_s(u); p_o is pi g_o(u) when the other
    manifold passes through the same point at u, and 0 otherwise.
    """
    check_inside(source, box)
    record = random.SeedRecord.coerce(seed)
    on_manifold = record.generator(random.CLUTTER_FLAGS).random(count) < pi
    ratios = np.zeros(count)
    signal = int(on_manifold.sum())
    if signal == 0:
        return ratios
    points, _, params = draw_parameters(
        source, signal, record.generator(random.MANIFOLD)
    )
    own = source.proposal_weight(params, 0)
    shared = _coincide(points, other.manifold.embed(params))
    theirs = np.where(shared, other.proposal_weight(params, 0), 0.0)
    ratios[on_manifold] = np.abs(own - theirs) / (own + theirs)
    return ratios


def clutter_tv(g0, g1, pi, box, spacing=None, breaks=(), draws=20000, seed=0):
    """
    TV between the clutter mixtures (1 - pi) U + pi G_j by two paths.

    The first path is a Monte Carlo estimate, TV = E_M |p0 - p1| / (p0 + p1)
    with M the even mixture of the two clutter laws, from ``draws`` samples.
    The second is pi times the singular TV of G0 and G1.

    Raises:
        ParameterError: If pi is outside (0, 1] or fewer than two draws.
        ConstructionError: If the paths disagree beyond four standard errors.
    """
    if not 0 < pi <= 1:
        raise ParameterError(f"clutter weight must satisfy 0 < pi <= 1, got {pi}")
    if draws < 2:
        raise ParameterError("Monte Carlo TV needs at least two draws")
    _shared_chart(g0, g1)
    record = random.SeedRecord.coerce(seed)
    half = draws // 2
    ratios = np.concatenate(
        [
            clutter_ratios(g0, g1, pi, box, half, record.child(0)),
            clutter_ratios(g1, g0, pi, box, draws - half, record.child(1)),
        ]
    )
    mixture = float(ratios.mean())
    error = float(ratios.std(ddof=1) / math.sqrt(draws))
    singular = singular_tv(g0, g1, spacing, breaks)
    result = ClutterTV(
        pi=pi,
        mixture_tv=mixture,
        mixture_error=error,
        scaled_tv=pi * singular,
        singular_tv=singular,
        tolerance=CLUTTER_SIGMAS * error + QUADRATURE_SLACK,
    )
    if result.discrepancy > result.tolerance:
        raise ConstructionError(
            f"clutter TV paths disagree: {mixture:.6g} +- {error:.2g} "
            f"vs pi TV = {pi * singular:.6g}"
        )
    logger.debug("clutter TV at pi=%.3g: %.4g +- %.2g", pi, mixture, error)
    return result


def tv_monte_carlo(g0, g1, n, seed, scale=1.0, spacing=None):
    """
    Monte Carlo TV between G0 * phi and G1 * phi.

    Uses TV = E_M |q0 - q1| / (q0 + q1) with M the even mixture of the two
    laws, sampling n/2 points from each.

    Returns:
        DivergenceReport: ``quadrature_error`` holds the standard error.
    """
    if n < 2:
        raise ParameterError("Monte Carlo TV needs at least two draws")
    record = random.SeedRecord.coerce(seed)
    half = n // 2
    draws = np.vstack(
        [
            sample_additive(g0, half, record.child(0), scale).observed.points,
            sample_additive(g1, n - half, record.child(1), scale).observed.points,
        ]
    )
    profile = gaussian_profile(g0.ambient_dim, scale)
    atoms0 = g0.atoms(spacing) if spacing else g0.atoms()
    atoms1 = g1.atoms(spacing) if spacing else g1.atoms()
    q0 = kernel_sum(atoms0, draws, profile)
    q1 = kernel_sum(atoms1, draws, profile)
    ratio = np.abs(q0 - q1) / np.maximum(q0 + q1, np.finfo(float).tiny)
    tv = float(ratio.mean())
    return DivergenceReport(
        l1=2 * tv,
        tv=tv,
        affinity=1 - tv,
        quadrature_error=float(ratio.std(ddof=1) / math.sqrt(n)),
    )
