"""
Deconvolution Models

Kernel pair, tabulated deconvolution kernel, Gaussian characteristic function
and the density fields the level-set estimator thresholds.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb, factorial, j0

from geometry.models import PointCloud
from geometry.quadrature import gauss_legendre_panels
from manifold_lab.exceptions import GeometryError


@dataclass(frozen=True)
class FourierConvention:
    """
    Transform pair used throughout the lab.

    p*(t) = int exp(i t.u) dP(u); inversion carries (2 pi)^-D. The kernel
    pair satisfies psi_k(y) = int exp(-i t y) psi_k*(t) dt, which makes
    int psi_k* = psi_k(0) = 1.
    """

    characteristic_sign: int = 1
    inverse_factor: str = "(2 pi)^-D"
    kernel_pair: str = "psi(y) = int exp(-i t y) psi*(t) dt"

    def as_dict(self):
        return {
            "characteristic_sign": self.characteristic_sign,
            "inverse_factor": self.inverse_factor,
            "kernel_pair": self.kernel_pair,
        }


@dataclass(frozen=True)
class GaussianCharFn:
    """phi*(t) = exp(-scale^2 |t|^2 / 2), the noise characteristic function."""

    dim: int
    scale: float = 1.0

    def __call__(self, t):
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return np.exp(-0.5 * self.scale**2 * np.sum(t**2, axis=1))

    def radial(self, s):
        return np.exp(-0.5 * self.scale**2 * np.asarray(s, dtype=float) ** 2)

    def log_reciprocal(self, s):
        """log(1 / phi*) at radius s, the exponent deconvolution amplifies by."""
        return 0.5 * self.scale**2 * np.asarray(s, dtype=float) ** 2


def _irwin_hall(x, r):
    """Density of a sum of r independent U[0, 1] variables."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for j in range(r + 1):
        total += (-1) ** j * comb(r, j) * np.clip(x - j, 0.0, None) ** (r - 1)
    total /= factorial(r - 1)
    return np.where((x >= 0) & (x <= r), np.clip(total, 0.0, None), 0.0)


@dataclass(frozen=True, eq=False)
class PsiKernel:
    """
    Band-limited kernel pair of order k.

    The spectral side psi_k* is the density of the mean of 2k independent
    U[-1, 1] variables: the 2k-fold self-convolution of a box of half-width
    1/(2k), supported on exactly [-1, 1]. The spatial side is its transform,
    psi_k(y) = (sin(y / 2k) / (y / 2k))^(2k).

    Attributes:
        order (int): k.
        spectral_nodes (ndarray): Abscissae of the self-convolution table.
        spectral_table (ndarray): Tabulated psi_k* from repeated convolution.
        convention (FourierConvention): Transform convention in force.
        checks (dict): Measured errors of the verified kernel properties.
    """

    order: int
    spectral_nodes: np.ndarray
    spectral_table: np.ndarray
    convention: FourierConvention = field(default_factory=FourierConvention)
    checks: dict = field(default_factory=dict)

    @property
    def knots(self):
        """Breakpoints of the piecewise polynomial psi_k* on [0, 1]."""
        return np.arange(self.order + 1) / self.order

    @property
    def first_zero(self):
        return 2 * self.order * math.pi

    def spectral(self, t):
        """psi_k*(t) in closed form (radial: uses |t|)."""
        t = np.abs(np.asarray(t, dtype=float))
        k = self.order
        return k * _irwin_hall(k * (t + 1), 2 * k) * (t <= 1)

    def spatial(self, y):
        """psi_k(y) = sinc^(2k)(y / 2k) with sinc(x) = sin(x) / x."""
        y = np.asarray(y, dtype=float)
        return np.sinc(y / (2 * self.order * math.pi)) ** (2 * self.order)

    def spectral_quadrature(self, order):
        """Gauss-Legendre nodes on [0, 1] with panels between the knots."""
        return gauss_legendre_panels(0.0, 1.0, self.order, order)

    def radial_transform(self, profile, r, dim, order=64, chunk=4096):
        """
        int_{R^D} exp(-i s.x) F(|s|) ds at |x| = r for a radial F on [0, 1].

        Args:
            profile (callable): F evaluated at radii in [0, 1].
            r (array-like): Radii at which to evaluate the transform.
            dim (int): Ambient dimension (1, 2 or 3).
            order (int): Gauss-Legendre nodes per knot panel.
        """
        nodes, weights = self.spectral_quadrature(order)
        weighted = profile(nodes) * weights
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty(r.shape[0])
        for start in range(0, r.shape[0], chunk):
            phase = np.outer(r[start : start + chunk], nodes)
            if dim == 1:
                out[start : start + chunk] = 2 * np.cos(phase) @ weighted
            elif dim == 2:
                out[start : start + chunk] = 2 * math.pi * j0(phase) @ (
                    weighted * nodes
                )
            elif dim == 3:
                out[start : start + chunk] = 4 * math.pi * np.sinc(phase / math.pi) @ (
                    weighted * nodes**2
                )
            else:
                raise GeometryError("radial transforms cover dimensions 1 to 3")
        return out

    def radial_profile(self, r, dim, order=None):
        """
        Psi_D(r), the D-dimensional transform of the radial profile psi_k*.

        For D = 1 this is psi_k itself.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if dim == 1:
            return self.spatial(r)
        if order is None:
            reach = float(r.max()) if r.size else 0.0
            order = int(min(512, 16 + 8 * math.ceil(reach / (4 * self.order))))
        return self.radial_transform(self.spectral, r, dim, order)


@dataclass(frozen=True, eq=False)
class DeconvKernelTable:
    """
    Radial table of the deconvolution kernel K_h.

    K_h(x) = (2 pi)^-D int_{|t| <= 1/h} exp(-i t.x) psi_k*(h |t|) / phi*(t) dt,
    tabulated at radii 0, spacing, 2 spacing, ... and linearly interpolated.
    With ``deconvolve=False`` the 1 / phi* factor is dropped, which gives the
    kernel of the expected estimate.
    """

    bandwidth: float
    order: int
    dim: int
    radii: np.ndarray
    values: np.ndarray
    quadrature_error: float
    quadrature_order: int
    envelope_radius: float
    deconvolve: bool = True

    @property
    def spacing(self):
        return float(self.radii[1] - self.radii[0])

    @property
    def max_radius(self):
        return float(self.radii[-1])

    def covers(self, radius):
        return radius <= self.max_radius

    def __call__(self, distances):
        """Kernel values at the given distances (linear interpolation)."""
        return np.interp(distances, self.radii, self.values)

    def describe(self):
        return {
            "h": self.bandwidth,
            "k": self.order,
            "D": self.dim,
            "spacing": self.spacing,
            "max_radius": self.max_radius,
            "quadrature_error": self.quadrature_error,
            "envelope_radius": self.envelope_radius,
            "deconvolve": self.deconvolve,
        }


@dataclass(frozen=True, eq=False)
class DensityField:
    """
    Scalar field sampled on a Grid (for ghat, gbar and convolved densities).

    ``values`` has the grid's shape. ``imaginary_residue`` is the largest
    imaginary part discarded when the field came from a complex integral.
    """

    grid: object
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    imaginary_residue: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.isfinite(values).all():
            raise GeometryError("density field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def flat(self):
        return self.values.reshape(-1)

    def superlevel(self, level):
        """Strict superlevel mask {value > level}, flattened in grid order."""
        return self.flat > level

    def cells(self, mask):
        return PointCloud(self.grid.points()[mask])

    def mass(self):
        return float(self.flat.sum() * self.grid.cell_volume)

    def with_metadata(self, **extra):
        return DensityField(
            self.grid, self.values, {**self.metadata, **extra}, self.imaginary_residue
        )


@dataclass(frozen=True)
class Calibration:
    """Empirical constants for the threshold bracket, with per-bandwidth rows."""

    c_prime: float
    c_double_prime: float
    order: int
    tube_factor: float
    delta: float
    rows: tuple = ()

    def as_dict(self):
        return {
            "C_prime": self.c_prime,
            "C_double_prime": self.c_double_prime,
            "k": self.order,
            "L": self.tube_factor,
            "delta": self.delta,
            "rows": [dict(row) for row in self.rows],
        }


@dataclass(frozen=True)
class Threshold:
    """A threshold lambda with the bracket it was chosen from."""

    lower: float
    upper: float
    value: float

    def as_dict(self):
        return {"lower": self.lower, "upper": self.upper, "lambda": self.value}
