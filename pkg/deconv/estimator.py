"""
The level-set estimator for the additive Gaussian model.

ghat(y) = (1/n) sum_j K_h(y - Y_j) is the deconvolved density surrogate; its
expectation gbar is a smoothed version of G that is large on the manifold
and small away from it. Thresholding ghat at lambda between the two regimes
yields the estimate.

The kernel K_h divides the spectrum of a band-limited kernel by the noise
characteristic function (Stefanski and Carroll, 1990); with Gaussian noise
only logarithmic bandwidths keep that quotient finite (Fan, 1991).

References:
    Stefanski, L. A. and Carroll, R. J. (1990) 'Deconvolving kernel density
        estimators', Statistics, 21(2), pp. 169-184.
    Fan, J. (1991) 'On the optimal rates of convergence for nonparametric
        deconvolution problems', The Annals of Statistics, 19(3),
        pp. 1257-1272.
    The SciPy community (2023) SciPy reference guide. Version 1.11.
        Available at: https://docs.scipy.org/doc/scipy-1.11.4/reference/
        spatial.html (cKDTree, distance.cdist).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from geometry.metrics import clip_to_box, hausdorff_distance
from geometry.models import Box, Grid, HausdorffEstimate
from geometry.quadrature import gauss_legendre_panels
from manifold_lab.exceptions import CalibrationError, GeometryError, ParameterError
from sampling.random import ESTIMATOR, SeedRecord

from .kernels import build_kernel, make_psi
from .models import Calibration, DensityField, GaussianCharFn, Threshold

logger = logging.getLogger(__name__)

# Pairwise distances evaluated per block in the kernel sum.
BLOCK_ENTRIES = 4_000_000


def _require_points(cloud):
    if cloud.is_empty:
        raise GeometryError('the cloud is empty')


def empirical_charfn(cloud, t):
    """
    (1/n) sum_j exp(-i t.Y_j) at one frequency or an (m, D) array of them.

    Weighted clouds use their weights in place of 1/n.
    """
    _require_points(cloud)
    t = np.asarray(t, dtype=float)
    single = t.ndim == 1
    t = np.atleast_2d(t)
    if t.shape[1] != cloud.ambient_dim:
        raise GeometryError("frequency dimension differs from the cloud's")
    mass = cloud.mass()
    out = np.empty(t.shape[0], dtype=complex)
    rows = max(1, BLOCK_ENTRIES // max(1, len(cloud)))
    for start in range(0, t.shape[0], rows):
        phase = t[start : start + rows] @ cloud.points.T
        out[start : start + rows] = np.exp(-1j * phase) @ mass
    return out[0] if single else out


def table_radius(cloud, box, h):
    """Radius a kernel table needs to cover every grid-to-data distance."""
    union = Box(
        np.minimum(box.lower, cloud.points.min(axis=0)),
        np.maximum(box.upper, cloud.points.max(axis=0)),
    )
    # Whole multiples of 8h so nearby n share table lengths
    block = 8 * h
    return block * math.ceil(union.diameter / block + 1e-9)


def kernel_sum(cloud, points, table, threads=1):
    """
    sum_j w_j K(|y - Y_j|) at every row of ``points``.

    Points are split into blocks that are evaluated independently and
    concatenated in order, so the result does not depend on ``threads``.
    """
    points = np.atleast_2d(points)
    mass = cloud.mass()
    rows = max(1, BLOCK_ENTRIES // max(1, len(cloud)))
    starts = list(range(0, points.shape[0], rows))

    def block(start):
        distances = cdist(points[start : start + rows], cloud.points)
        return table(distances) @ mass

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(start) for start in starts]
    return np.concatenate(parts) if parts else np.empty(0)


def ghat_at(cloud, points, h, k, table=None, threads=1):
    """ghat evaluated at arbitrary points."""
    _require_points(cloud)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if table is None:
        box = Box.bounding(points)
        table = build_kernel(h, k, cloud.ambient_dim, table_radius(cloud, box, h))
    return kernel_sum(cloud, points, table, threads)


def ghat_field(cloud, grid, h, k, table=None, threads=1):
    """
    ghat on every node of ``grid`` by the kernel-sum path.

    Args:
        cloud (PointCloud): Observations Y_1..Y_n (or weighted atoms).
        grid (Grid): Evaluation grid.
        h (float): Bandwidth.
        k (int): Kernel order.
        table (DeconvKernelTable | None): Prebuilt table; rebuilt wider when
            it does not reach every grid-to-data distance.
        threads (int): Worker threads over grid blocks.

    Returns:
        DensityField: Real field with metadata (n, h, k).
    """
    _require_points(cloud)
    if grid.dim != cloud.ambient_dim:
        raise GeometryError('grid and cloud dimensions differ')
    needed = table_radius(cloud, grid.box, h)
    if table is None or not table.covers(needed):
        if table is not None:
            logger.debug('extending kernel table to radius %.3g', needed)
        table = build_kernel(h, k, cloud.ambient_dim, needed)
    values = kernel_sum(cloud, grid.points(), table, threads)
    return DensityField(
        grid,
        values,
        {'n': len(cloud), 'h': h, 'k': k, 'source': 'kernel'},
    )


def frequency_grid(radius, spacing, dim, order=4):
    """Tensor Gauss-Legendre nodes and weights on [-radius, radius]^D."""
    panels = max(1, math.ceil(2 * radius / spacing))
    nodes, weights = gauss_legendre_panels(-radius, radius, panels, order)
    node_mesh = np.meshgrid(*([nodes] * dim), indexing='ij')
    weight_mesh = np.meshgrid(*([weights] * dim), indexing='ij')
    t = np.stack([m.reshape(-1) for m in node_mesh], axis=1)
    w = np.prod(np.stack([m.reshape(-1) for m in weight_mesh]), axis=0)
    return t, w


def ghat_fourier(cloud, grid, h, k, t_spacing=0.05, scale=1.0):
    """
    ghat from its Fourier definition on a Cartesian frequency grid.

    ghat(y) = (2 pi)^-D int exp(-i t.y) psi_k*(h|t|) conj(ecf(t)) / phi*(t) dt,
    where ecf uses exp(-i t.Y); its conjugate is the characteristic function
    of the sample. Slow, and kept as a cross-check of the kernel path.
    """
    _require_points(cloud)
    dim = cloud.ambient_dim
    psi = make_psi(k)
    t, w = frequency_grid(1.0 / h, t_spacing, dim)
    radius = np.linalg.norm(t, axis=1)
    # psi_k* vanishes beyond |t| = 1/h
    inside = radius <= 1.0 / h
    t, w, radius = t[inside], w[inside], radius[inside]
    charfn = GaussianCharFn(dim, scale)
    spectrum = (
        psi.spectral(h * radius)
        * np.exp(charfn.log_reciprocal(radius))
        * np.conj(empirical_charfn(cloud, t))
        * w
    )
    nodes = grid.points()
    values = np.empty(nodes.shape[0], dtype=complex)
    rows = max(1, BLOCK_ENTRIES // max(1, t.shape[0]))
    for start in range(0, nodes.shape[0], rows):
        phase = nodes[start : start + rows] @ t.T
        values[start : start + rows] = np.exp(-1j * phase) @ spectrum
    # Inverse transform normalisation
    values /= (2 * math.pi) ** dim
    residue = float(np.abs(values.imag).max())
    return DensityField(
        grid,
        values.real,
        {'n': len(cloud), 'h': h, 'k': k, 'source': 'fourier'},
        imaginary_residue=residue,
    )


def _atom_spacing(dist, h):
    manifold = getattr(dist, 'manifold', None)
    if manifold is None:
        return None
    return h / (8 * manifold.lipschitz)


def gbar_oracle(dist, y, h, k, spacing=None):
    """
    gbar(y) = (2 pi h)^-D int Psi_D(|y - u| / h) dG(u), the mean of ghat.

    Integrates against quadrature atoms of G (parameter panels of width
    ``spacing``, default h / (8 L)). Returns an array for an (m, D) input.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    spacing = spacing or _atom_spacing(dist, h)
    atoms = dist.atoms(spacing) if spacing else dist.atoms()
    dim = atoms.ambient_dim
    psi = make_psi(k)
    mass = atoms.mass()
    out = np.empty(y.shape[0])
    rows = max(1, BLOCK_ENTRIES // max(1, len(atoms)))
    for start in range(0, y.shape[0], rows):
        distances = cdist(y[start : start + rows], atoms.points) / h
        profile = psi.radial_profile(distances.reshape(-1), dim)
        out[start : start + rows] = profile.reshape(distances.shape) @ mass
    out /= (2 * math.pi * h) ** dim
    return float(out[0]) if single else out


def gbar_at(dist, points, h, k, spacing=None, threads=1):
    """gbar at many points through the tabulated expectation kernel."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    spacing = spacing or _atom_spacing(dist, h)
    atoms = dist.atoms(spacing) if spacing else dist.atoms()
    radius = table_radius(atoms, Box.bounding(points), h)
    table = build_kernel(h, k, atoms.ambient_dim, radius, deconvolve=False)
    return kernel_sum(atoms, points, table, threads)


def gbar_field(dist, grid, h, k, spacing=None, threads=1):
    """gbar on every node of ``grid``."""
    values = gbar_at(dist, grid.points(), h, k, spacing, threads)
    return DensityField(grid, values, {'h': h, 'k': k, 'source': 'expectation'})


def select_bandwidth(n):
    """h = 1 / sqrt(log n); real-valued n > 1 is accepted."""
    if not n > 1:
        raise ParameterError(f'bandwidth needs n > 1, got {n}')
    return 1.0 / math.sqrt(math.log(n))


def default_order(d, delta):
    """Smallest integer k with k >= d / (2 delta)."""
    return max(1, math.ceil(d / (2 * delta) - 1e-12))


def select_threshold(h, D, d, k, L, calibration):
    """
    Threshold lambda from the calibrated bracket.

    lower = C'' L^(-2k) h^(d-D) bounds gbar off the tube, upper = C' h^(d-D)
    bounds it from below on the manifold. lambda is their geometric mean
    (half the upper end when the lower end vanishes).

    Raises:
        CalibrationError: If d >= D or the bracket is empty.
    """
    if d >= D:
        raise CalibrationError('estimator undefined for full-dimensional support')
    # Both ends scale like h^(d - D) (Stefanski and Carroll, 1990)
    scale = h ** (d - D)
    lower = calibration.c_double_prime * L ** (-2 * k) * scale
    upper = calibration.c_prime * scale
    if not upper > lower:
        raise CalibrationError('k or L too small for target delta')
    # Geometric mean keeps lambda equally far from both ends on a log scale
    value = math.sqrt(lower * upper) if lower > 0 else upper / 2
    return Threshold(lower=lower, upper=upper, value=value)


def tube_distances(manifold, points, resolution):
    """Distance from each point to a net of the manifold (within resolution)."""
    net = manifold.discretize(resolution)
    distances, _ = cKDTree(net.points).query(np.atleast_2d(points), k=1)
    return distances


def calibrate_constants(
    dist, h_list, k, L, delta, seed=0, box=None, grid_factor=0.25, samples=2000
):
    """
    Empirical stand-ins for the threshold constants.

    For every h: C'(h) = h^(D-d) min gbar over a net of M inside K, and
    C''(h) = L^(2k) h^(D-d) max gbar over grid and random points of K farther
    than L h^(1-delta) from M. C' is the smallest C'(h), C'' the largest C''(h).

    Raises:
        CalibrationError: If k < d / (2 delta).
    """
    manifold = dist.manifold
    D, d = manifold.ambient_dim, manifold.intrinsic_dim
    if k < d / (2 * delta):
        raise CalibrationError(
            f'k = {k} is below d / (2 delta) = {d / (2 * delta):.3g}'
        )
    box = box or manifold.bounding_box
    rng = SeedRecord.coerce(seed).generator(ESTIMATOR)
    random_points = box.sample_uniform(rng, samples)
    c_prime, c_double_prime = math.inf, 0.0
    rows = []
    for h in sorted(h_list, reverse=True):
        on = manifold.discretize(h / 4).points
        # Only the part of M inside K is thresholded
        on = on[box.contains(on)]
        if on.shape[0] == 0:
            raise CalibrationError('the manifold does not meet the calibration box')
        # Tube radius L h^(1 - delta) separates the two regimes
        tube = L * h ** (1 - delta)
        grid = Grid.with_spacing(box, grid_factor * h ** (1 - delta))
        candidates = np.vstack([grid.points(), random_points])
        # Points strictly outside the tube, with 2% margin for the net
        far = candidates[tube_distances(manifold, candidates, tube / 50) > tube * 1.02]
        on_min = float(gbar_at(dist, on, h, k).min())
        off_max = float(gbar_at(dist, far, h, k).max()) if far.shape[0] else 0.0
        c_prime = min(c_prime, h ** (D - d) * on_min)
        off_scaled = L ** (2 * k) * h ** (D - d) * max(off_max, 0.0)
        c_double_prime = max(c_double_prime, off_scaled)
        rows.append(
            {
                'h': h,
                'on_min': on_min,
                'off_max': off_max,
                'tube': tube,
                'off_points': int(far.shape[0]),
            }
        )
        logger.debug('calibration at h=%.3g: on %.4g, off %.4g', h, on_min, off_max)
    calibration = Calibration(
        c_prime=c_prime,
        c_double_prime=c_double_prime,
        order=k,
        tube_factor=L,
        delta=delta,
        rows=tuple(rows),
    )
    logger.info("calibrated C'=%.4g C''=%.4g", c_prime, c_double_prime)
    return calibration


def level_grid(box, h, delta, grid_factor=0.25):
    """Grid whose spacing resolves the tube radius scale h^(1 - delta)."""
    return Grid.with_spacing(box, grid_factor * h ** (1 - delta))


def extract_levelset(field, level):
    """Cell centres where the field strictly exceeds ``level``."""
    return field.cells(field.superlevel(level))


def truncated_loss(manifold, estimate, box, resolution, grid=None):
    """
    Hausdorff distance between M and the estimate, both clipped to ``box``.

    When the estimate is a set of cell centres of ``grid``, the reported
    bound adds half the cell diagonal to the net resolution of M.

    Raises:
        GeometryError: If either clipped set is empty.
    """
    truth = clip_to_box(manifold.discretize(resolution), box)
    clipped = clip_to_box(estimate, box)
    if truth.is_empty or clipped.is_empty:
        raise GeometryError('empty truncated set')
    bound = resolution
    if grid is not None:
        # centre to farthest corner of its cell
        bound += 0.5 * float(np.linalg.norm(grid.spacing))
    return HausdorffEstimate(value=hausdorff_distance(truth, clipped), bound=bound)


def charfn_sup_deviation(cloud, dist, h, t_resolution, scale=1.0):
    """
    sup over |t| < 1/h of |ecf(t) - q*(t)| on a Cartesian frequency lattice.

    q* is the characteristic function of G * Phi: the atoms of G give G's
    part in closed form and phi* the Gaussian factor.
    """
    _require_points(cloud)
    dim = cloud.ambient_dim
    # Odd lattice so that t = 0 is a node
    count = max(1, math.ceil(1.0 / (h * t_resolution)))
    axis = np.linspace(-1.0 / h, 1.0 / h, 2 * count + 1)
    mesh = np.meshgrid(*([axis] * dim), indexing='ij')
    t = np.stack([m.reshape(-1) for m in mesh], axis=1)
    t = t[np.linalg.norm(t, axis=1) < 1.0 / h]
    spacing = _atom_spacing(dist, h)
    truth = empirical_charfn(dist.atoms(spacing) if spacing else dist.atoms(), t)
    truth = truth * GaussianCharFn(dim, scale)(t)
    return float(np.abs(empirical_charfn(cloud, t) - truth).max())


def estimate_manifold(cloud, grid, h, k, threshold, threads=1):
    """ghat on ``grid`` and its strict superlevel set at ``threshold``."""
    field = ghat_field(cloud, grid, h, k, threads=threads)
    field = field.with_metadata(**{'lambda': threshold.value})
    estimate = extract_levelset(field, threshold.value)
    if estimate.is_empty:
        logger.warning('level set at lambda=%.4g is empty', threshold.value)
    return field, estimate
