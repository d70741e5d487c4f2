"""
Empirical-measure deviation bounds over slabs.

Slabs are hyper-rectangles in arbitrary orientation. Each one is the
intersection of 2D halfspaces, and halfspaces in R^D have VC dimension D + 1,
so the class of slabs has VC dimension at most 2 (D + 1) k log2(3k) with
k = 2D (Blumer et al., 1989). That bound is the default V below; the
axis-parallel value 2D undercounts once slabs rotate.

References:
    Blumer, A., Ehrenfeucht, A., Haussler, D. and Warmuth, M. K. (1989)
        'Learnability and the Vapnik-Chervonenkis dimension', Journal of the
        ACM, 36(4), pp. 929-965.
    Vapnik, V. N. and Chervonenkis, A. Ya. (1971) 'On the uniform convergence
        of relative frequencies of events to their probabilities', Theory of
        Probability and its Applications, 16(2), pp. 264-280.
"""

import logging
import math

import numpy as np

from manifold_lab.exceptions import ParameterError
from sampling.models import Additive, Clutter, Noiseless
from sampling.samplers import empirical_mass

from .models import DeviationReport

logger = logging.getLogger(__name__)

# Lattice points per axis when a slab crosses the boundary of K.
VOLUME_LATTICE = 32


def slab_vc_dimension(dim):
    """
    Upper bound on the VC dimension of rotated hyper-rectangles in R^dim.

    Args:
        dim (int): Ambient dimension D >= 1.

    Returns:
        int: ceil(2 (D + 1) k log2(3k)) with k = 2D halfspaces per slab.

    References:
        Blumer et al. (1989), Lemma 3.2.3 (k-fold intersections).
    """
    if dim < 1:
        raise ParameterError(f'ambient dimension must be at least 1, got {dim}')
    # Two parallel faces per axis of the slab frame
    halfspaces = 2 * dim
    bound = 2 * (dim + 1) * halfspaces * math.log2(3 * halfspaces)
    return math.ceil(bound - 1e-9)


def vc_beta(n, V, u):
    """beta_n = sqrt((4 / n) (V log(2n) + log(8 / u)))."""
    if n < 1 or V < 1 or not 0 < u < 1:
        raise ParameterError(
            f'vc_beta needs n >= 1, V >= 1 and 0 < u < 1, got {n}, {V}, {u}'
        )
    return math.sqrt((4.0 / n) * (V * math.log(2 * n) + math.log(8.0 / u)))


def deviation_constant(V, xi):
    """C = 4 (V + max(3, xi))."""
    return 4.0 * (V + max(3.0, xi))


def _corners(slab):
    dim = slab.ambient_dim
    # Every sign pattern of the half-widths, one corner per row
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * dim), indexing='ij'))
    signs = signs.reshape(dim, -1).T
    return slab.center + (signs * slab.halfwidths) @ slab.basis


def box_fraction(slab, box):
    """vol(slab intersected with box) / vol(box)."""
    # A convex slab lies in the box exactly when all its corners do
    if box.contains(_corners(slab)).all():
        return slab.volume / box.volume
    inside = box.contains(slab.lattice(VOLUME_LATTICE)).mean()
    return float(inside) * slab.volume / box.volume


def slab_truth(dist, slabs, model=None, spacing=None):
    """
    Q(A) for every slab under the noiseless or clutter model.

    G(A) is the mass of quadrature atoms of G inside A; the uniform part of
    the clutter mixture is exact when A lies inside K and a lattice estimate
    otherwise.
    """
    model = model or Noiseless()
    if isinstance(model, Additive):
        raise ParameterError('slab masses are checked under singular models only')
    if spacing is None and slabs and hasattr(dist, 'manifold'):
        # 32 atoms across the thinnest tangent extent of any slab
        narrowest = min(slab.tangent_halfwidth for slab in slabs)
        spacing = narrowest / (32 * dist.manifold.lipschitz)
    atoms = dist.atoms(spacing) if spacing else dist.atoms()
    singular = np.array([empirical_mass(atoms, slab) for slab in slabs])
    if isinstance(model, Clutter):
        uniform = np.array([box_fraction(slab, model.box) for slab in slabs])
        return (1 - model.pi) * uniform + model.pi * singular
    return singular


def deviation_check(
    cloud, dist, slabs, xi=1.0, model=None, vc_dim=None, spacing=None
):
    """
    Compare empirical slab masses with their true values.

    Two families of bounds are checked. The multiplicative ones use
    r = C log n / n with C = 4 (V + max(3, xi)); the VC-lemma ones use
    beta_n at u = n^-xi (Vapnik and Chervonenkis, 1971).

    Args:
        cloud (PointCloud): The sample, of size n >= 2.
        dist: The manifold distribution G (anything with ``atoms()``).
        slabs (list): Slab instances.
        xi (float): Confidence exponent; the bounds hold with probability at
            least 1 - n^-xi.
        model: Noiseless (default) or Clutter.
        vc_dim (int): VC dimension V; defaults to ``slab_vc_dimension(D)``.
        spacing (float): Parameter spacing of the atoms of G.

    Returns:
        DeviationReport
    """
    n = len(cloud)
    if n < 2:
        raise ParameterError('deviation bounds need at least two observations')
    vc_dim = vc_dim or slab_vc_dimension(cloud.ambient_dim)
    constant = deviation_constant(vc_dim, xi)
    rate = constant * math.log(n) / n
    beta = vc_beta(n, vc_dim, n ** (-xi))

    truth = slab_truth(dist, slabs, model, spacing)
    empirical = np.array([empirical_mass(cloud, slab) for slab in slabs])
    # Q - sqrt(r Q) <= Q_n <= Q + r + sqrt(r Q)
    root = np.sqrt(np.clip(truth, 0.0, None))
    upper = truth + rate + math.sqrt(rate) * root
    lower = truth - math.sqrt(rate) * root
    slack = 1e-12
    violations = np.nonzero((empirical > upper + slack) | (empirical < lower - slack))

    # Q - Q_n against the two-sided VC-lemma envelope
    gap = truth - empirical
    root_hat = np.sqrt(empirical)
    above = np.minimum(beta**2 + beta * root_hat, beta * root)
    below = -np.minimum(beta * root_hat, beta**2 + beta * root)
    vc_violations = np.nonzero((gap > above + slack) | (gap < below - slack))

    report = DeviationReport(
        n=n,
        vc_dim=vc_dim,
        xi=xi,
        constant=constant,
        beta=beta,
        truth=truth,
        empirical=empirical,
        lower=lower,
        upper=upper,
        violations=tuple(int(i) for i in violations[0]),
        vc_violations=tuple(int(i) for i in vc_violations[0]),
    )
    if report.violations:
        logger.warning(
            '%d of %d slabs violate the deviation bounds',
            len(report.violations),
            len(slabs),
        )
    return report
