"""
Kernel pair construction and the tabulated deconvolution kernel.

``make_psi`` builds the spectral profile by repeated convolution of a box and
verifies the kernel properties the estimator relies on before handing the
kernel out. ``build_kernel`` tabulates K_h on a radial grid, refining the
spectral quadrature until successive tables agree.
"""

import logging
import math
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from manifold_lab.exceptions import (
    ConstructionError,
    NumericFloorError,
    ParameterError,
)

from .models import DeconvKernelTable, GaussianCharFn, PsiKernel

logger = logging.getLogger(__name__)

# exp(x) overflows double precision just above this exponent.
EXP_FLOOR = 709.0
TABLE_DENSITY = 128
START_ORDER = 16
MAX_ORDER = 1024


def box_self_convolution(k, per_unit=1000):
    """
    psi_k* tabulated as the 2k-fold convolution of a box of half-width 1/(2k).

    The box carries trapezoid masses on a lattice of spacing 1/(k per_unit),
    so each convolution is a discrete ``np.convolve`` of mass vectors.
    """
    step = 1.0 / (k * per_unit)
    box = np.full(per_unit + 1, k * step)
    box[[0, -1]] *= 0.5
    mass = box
    for _ in range(2 * k - 1):
        mass = np.convolve(mass, box)
    nodes = step * (np.arange(mass.shape[0]) - (mass.shape[0] - 1) / 2)
    return nodes, mass / step


def verify_psi(kernel, tolerance=1e-8):
    """
    Check the kernel pair and return the measured errors.

    Raises:
        ConstructionError: If any property fails.
    """
    k = kernel.order
    checks = {}
    t = np.linspace(-1.5, 1.5, 10001)
    spectral = kernel.spectral(t)
    checks["support"] = float(np.abs(spectral[np.abs(t) > 1]).max())
    checks["spectral_min"] = float(min(spectral.min(), kernel.spectral_table.min()))
    scale = kernel.spectral_table.max()
    checks["table_error"] = float(
        np.abs(kernel.spectral(kernel.spectral_nodes) - kernel.spectral_table).max()
        / scale
    )
    nodes, weights = kernel.spectral_quadrature(32)
    checks["mass_error"] = abs(2 * float(kernel.spectral(nodes) @ weights) - 1.0)
    checks["origin_error"] = abs(float(kernel.spatial(0.0)) - 1.0)
    y = np.linspace(0.0, 3 * kernel.first_zero, 257)
    transformed = kernel.radial_transform(kernel.spectral, y, 1, order=64)
    checks["transform_error"] = float(np.abs(transformed - kernel.spatial(y)).max())
    far = np.linspace(1.01 * math.pi / (2 * k), 50.0 * k, 2000)
    spatial = kernel.spatial(far)
    checks["spatial_min"] = float(spatial.min())
    checks["decay_excess"] = float(
        (np.abs(spatial) - (2 * k / far) ** (2 * k)).max()
    )

    failures = []
    if checks["support"] != 0.0:
        failures.append("spectral profile leaks outside [-1, 1]")
    if checks["spectral_min"] < -1e-12 or checks["spatial_min"] < 0:
        failures.append("kernel pair takes negative values")
    if checks["table_error"] > 1e-3:
        failures.append("box self-convolution disagrees with its closed form")
    if checks["mass_error"] > tolerance or checks["origin_error"] > tolerance:
        failures.append("spectral mass or psi(0) differs from 1")
    if checks["transform_error"] > tolerance:
        failures.append("spatial profile is not the transform of the spectral one")
    if checks["decay_excess"] > 1e-12:
        failures.append("spatial profile decays slower than |y|^(-2k)")
    if failures:
        raise ConstructionError(f"psi_{k}: " + "; ".join(failures))
    return checks


@lru_cache(maxsize=None)
def make_psi(k):
    """
    Build and verify the order-k kernel pair.

    Args:
        k (int): Kernel order, at least 1.

    Returns:
        PsiKernel: Verified kernel; ``checks`` holds the measured errors.
    """
    if int(k) != k or k < 1:
        raise ParameterError(f"kernel order must be a positive integer, got {k}")
    k = int(k)
    nodes, table = box_self_convolution(k)
    checks = verify_psi(PsiKernel(k, nodes, table))
    logger.debug("psi_%d verified: %s", k, checks)
    return PsiKernel(k, nodes, table, checks=checks)


def forward_transform(kernel, t):
    """
    (1 / 2 pi) int exp(i t y) psi_k(y) dy by Fourier-weighted quadrature.

    Recovers psi_k* from the spatial side; used to check the pair.
    """
    t = abs(float(t))
    if t == 0.0:
        value, _ = quad(kernel.spatial, 0.0, np.inf, limit=500)
    else:
        value, _ = quad(kernel.spatial, 0.0, np.inf, weight="cos", wvar=t)
    return value / math.pi


def default_radius(h, k):
    return 16.0 * k * h


def check_bandwidth_floor(h, dim, scale=1.0):
    """Raise NumericFloorError if 1 / phi*(1 / h) overflows double precision."""
    if GaussianCharFn(dim, scale).log_reciprocal(1.0 / h) > EXP_FLOOR:
        raise NumericFloorError("bandwidth below numeric floor")


@lru_cache(maxsize=64)
def build_kernel(
    h, k, dim, max_radius=None, deconvolve=True, scale=1.0, tolerance=1e-7
):
    """
    Tabulate K_h on radii 0..max_radius with spacing h / 128.

    Args:
        h (float): Bandwidth, 0 < h <= 1.
        k (int): Kernel order.
        dim (int): Ambient dimension, 1 to 3.
        max_radius (float): Largest tabulated radius.
        deconvolve (bool): Divide by phi*; False gives the expectation kernel
            (2 pi h)^-D Psi_D(r / h).
        scale (float): Noise standard deviation.
        tolerance (float): Relative change between successive quadrature
            orders at which refinement stops.

    Raises:
        NumericFloorError: If exp(scale^2 / (2 h^2)) overflows.
    """
    if not 0 < h <= 1:
        raise ParameterError(f"bandwidth must satisfy 0 < h <= 1, got {h}")
    if dim not in (1, 2, 3):
        raise ParameterError(f"kernel tables cover dimensions 1 to 3, got {dim}")
    psi = make_psi(k)
    charfn = GaussianCharFn(dim, scale)
    if deconvolve:
        check_bandwidth_floor(h, dim, scale)
    if max_radius is None:
        max_radius = default_radius(h, k)

    def profile(s):
        base = psi.spectral(s)
        if deconvolve:
            base = base * np.exp(charfn.log_reciprocal(s / h))
        return base

    spacing = h / TABLE_DENSITY
    radii = spacing * np.arange(math.ceil(max_radius / spacing) + 1)
    order = START_ORDER
    previous = psi.radial_transform(profile, radii / h, dim, order)
    while True:
        order *= 2
        current = psi.radial_transform(profile, radii / h, dim, order)
        error = float(np.abs(current - previous).max() / np.abs(current).max())
        if error < tolerance or order >= MAX_ORDER:
            break
        previous = current
    if error >= tolerance:
        logger.warning(
            "kernel quadrature stopped at order %d with relative change %.2e",
            order,
            error,
        )
    values = current / (2 * math.pi * h) ** dim
    magnitude = np.abs(values)
    significant = np.nonzero(magnitude > 1e-3 * magnitude.max())[0]
    logger.debug(
        "kernel table h=%.4g k=%d D=%d: %d radii, order %d, change %.1e",
        h,
        k,
        dim,
        radii.shape[0],
        order,
        error,
    )
    return DeconvKernelTable(
        bandwidth=h,
        order=k,
        dim=dim,
        radii=radii,
        values=values,
        quadrature_error=error,
        quadrature_order=order,
        envelope_radius=float(radii[significant[-1]]),
        deconvolve=deconvolve,
    )
