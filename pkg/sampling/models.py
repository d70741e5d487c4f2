"""
Sampling Models

Distributions supported on manifolds, the three noise models and the Dataset
returned by the samplers.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from geometry.models import Box, PointCloud
from geometry.quadrature import chart_quadrature, manifold_quadrature
from manifold_lab.exceptions import SamplingError

from .random import SeedRecord

NORMALISATION_TOLERANCE = 1e-6
# Safety factor on the sampled supremum used as the rejection envelope.
ENVELOPE_FACTOR = 1.05


@dataclass(frozen=True, eq=False)
class ManifoldDistribution:
    """
    Distribution G on a manifold with density g relative to its volume.

    Attributes:
        manifold (ParametricManifold): Support of G.
        density (callable | None): ``density(params, chart_index)`` returning
            g at the embedded parameters. None means uniform.
        quadrature_spacing (float | None): Parameter panel width used for
            normalisation and atoms. Defaults to the manifold check spacing.
        label (str): Name used in reports.
        lower_bound (float): b, the smallest g on a net inside the box K.
        upper_bound (float): B, the largest g on the same net.
    """

    manifold: object
    density: object = None
    quadrature_spacing: float = None
    label: str = ""
    lower_bound: float = field(init=False, default=0.0)
    upper_bound: float = field(init=False, default=0.0)
    envelope: float = field(init=False, default=0.0)

    def __post_init__(self):
        spacing = self.quadrature_spacing or self.manifold.check_spacing()
        object.__setattr__(self, "quadrature_spacing", spacing)
        if not self.label:
            object.__setattr__(self, "label", self.manifold.label)
        if self.density is None:
            _, weights, _, _ = manifold_quadrature(self.manifold, spacing)
            volume = float(weights.sum())

            def uniform(params, chart_index):
                return np.full(np.atleast_2d(params).shape[0], 1.0 / volume)

            object.__setattr__(self, "density", uniform)

        _, mass = self._quadrature(spacing)
        total = float(mass.sum())
        if abs(total - 1.0) > NORMALISATION_TOLERANCE:
            raise SamplingError(
                f"density of {self.label} integrates to {total:.9f}, not 1"
            )

        net = self.manifold.parameter_net(self.manifold.check_spacing() / 2)
        values = np.empty(net.points.shape[0])
        weights = np.empty(net.points.shape[0])
        for index in range(len(self.manifold.charts)):
            mask = net.chart_ids == index
            values[mask] = self.values(net.params[mask], index)
            weights[mask] = self.proposal_weight(net.params[mask], index)
        if np.any(values < 0) or not np.isfinite(values).all():
            raise SamplingError("density must be finite and nonnegative")
        inside = self.manifold.bounding_box.contains(net.points)
        if inside.any():
            object.__setattr__(self, "lower_bound", float(values[inside].min()))
            object.__setattr__(self, "upper_bound", float(values[inside].max()))
        object.__setattr__(self, "envelope", float(weights.max()) * ENVELOPE_FACTOR)

    @classmethod
    def uniform(cls, manifold, quadrature_spacing=None):
        return cls(manifold, quadrature_spacing=quadrature_spacing)

    @classmethod
    def from_parameter_density(cls, manifold, zeta, label="", normalize=True):
        """
        Distribution whose chart parameters have density ``zeta``.

        Only single-chart manifolds qualify. With ``normalize`` the density is
        rescaled to integrate to one over the (truncated) parameter box.
        """
        if len(manifold.charts) != 1:
            raise SamplingError("parameter densities need a single-chart manifold")
        chart = manifold.charts[0]
        scale = 1.0
        if normalize:
            params, weights = chart_quadrature(chart, manifold.check_spacing())
            scale = float(np.sum(zeta(params) * weights / chart.volume_factor(params)))

        def density(params, chart_index):
            params = np.atleast_2d(params)
            return zeta(params) / (scale * chart.volume_factor(params))

        return cls(manifold, density=density, label=label)

    @property
    def ambient_dim(self):
        return self.manifold.ambient_dim

    @property
    def intrinsic_dim(self):
        return self.manifold.intrinsic_dim

    def values(self, params, chart_index):
        return np.asarray(self.density(np.atleast_2d(params), chart_index), dtype=float)

    def proposal_weight(self, params, chart_index):
        """g times the volume factor: the density of G in parameter space."""
        chart = self.manifold.charts[chart_index]
        return self.values(params, chart_index) * chart.volume_factor(params)

    def _quadrature(self, spacing, order=6):
        points, weights, ids, params = manifold_quadrature(
            self.manifold, spacing, order
        )
        mass = np.empty_like(weights)
        for index in range(len(self.manifold.charts)):
            mask = ids == index
            mass[mask] = weights[mask] * self.values(params[mask], index)
        return points, mass

    def atoms(self, spacing=None, order=6):
        """Quadrature atoms of G as a weighted cloud."""
        return PointCloud(*self._quadrature(spacing or self.quadrature_spacing, order))


@dataclass(frozen=True, eq=False)
class AtomicDistribution:
    """
    Distribution given by finitely many weighted atoms.

    Shares ``atoms()`` with ManifoldDistribution, so plug-in operations accept
    either.
    """

    cloud: PointCloud
    label: str = "atomic"

    def __post_init__(self):
        if self.cloud.is_empty:
            raise SamplingError("an atomic distribution needs at least one atom")
        if self.cloud.weights is None:
            object.__setattr__(
                self, "cloud", PointCloud(self.cloud.points, self.cloud.mass())
            )

    @classmethod
    def point_mass(cls, point):
        point = np.asarray(point, dtype=float).reshape(1, -1)
        return cls(PointCloud(point, [1.0]), label="point mass")

    @classmethod
    def gaussian_convolution(cls, base, order=16, scale=1.0, spacing=None):
        """
        Atoms of base * Phi by tensor Gauss-Hermite quadrature.

        Each atom of ``base`` spreads over order**D Hermite nodes.
        """
        atoms = base.atoms(spacing) if spacing else base.atoms()
        dim = atoms.ambient_dim
        nodes, weights = hermegauss(order)
        weights = weights / math.sqrt(2 * math.pi)
        node_mesh = np.meshgrid(*([nodes] * dim), indexing="ij")
        weight_mesh = np.meshgrid(*([weights] * dim), indexing="ij")
        offsets = scale * np.stack([m.reshape(-1) for m in node_mesh], axis=1)
        offset_weights = np.prod(np.stack([w.reshape(-1) for w in weight_mesh]), axis=0)
        points = (atoms.points[:, None, :] + offsets[None, :, :]).reshape(-1, dim)
        mass = (atoms.mass()[:, None] * offset_weights[None, :]).reshape(-1)
        label = f"{getattr(base, 'label', '')} * N(0, I)"
        return cls(PointCloud(points, mass), label=label)

    @property
    def ambient_dim(self):
        return self.cloud.ambient_dim

    def atoms(self, spacing=None, order=None):
        return self.cloud


@dataclass(frozen=True)
class Noiseless:
    tag = "noiseless"

    def describe(self):
        return {"model": self.tag}


@dataclass(frozen=True, eq=False)
class Clutter:
    """Mixture (1 - pi) U + pi G with U uniform on the box K."""

    pi: float
    box: Box
    tag = "clutter"

    def __post_init__(self):
        if not 0 < self.pi <= 1:
            raise SamplingError("clutter mixing weight must satisfy 0 < pi <= 1")
        if not self.box.volume > 0:
            raise SamplingError("clutter box must have positive volume")

    def describe(self):
        return {
            "model": self.tag,
            "pi": self.pi,
            "box": [self.box.lower.tolist(), self.box.upper.tolist()],
        }


@dataclass(frozen=True)
class Additive:
    """Y = X + scale * Z with Z standard Gaussian (scale 1 reproduces the model)."""

    scale: float = 1.0
    tag = "additive"

    def __post_init__(self):
        if not self.scale > 0:
            raise SamplingError("noise scale must be positive")

    def describe(self):
        return {"model": self.tag, "scale": self.scale}


MODEL_TAGS = (Noiseless.tag, Clutter.tag, Additive.tag)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Observed sample with its latent structure.

    Attributes:
        observed (PointCloud): Y.
        latent (ndarray | None): X, the manifold draws (NaN rows for clutter).
        noise (ndarray | None): Z, additive noise draws.
        clutter (ndarray | None): Boolean clutter flags.
        model (str): One of ``noiseless``, ``clutter``, ``additive``.
        seed (SeedRecord | None): Record that regenerates the sample.
    """

    observed: PointCloud
    model: str = Noiseless.tag
    latent: np.ndarray = None
    noise: np.ndarray = None
    clutter: np.ndarray = None
    seed: SeedRecord = None

    def __post_init__(self):
        if self.model not in MODEL_TAGS:
            raise SamplingError(f"unknown model tag {self.model!r}")
        n = len(self.observed)
        for name in ("latent", "noise"):
            value = getattr(self, name)
            if value is not None:
                value = np.array(value, dtype=float)
                value = value.reshape(n, self.observed.ambient_dim)
                value.setflags(write=False)
                object.__setattr__(self, name, value)
        if self.clutter is not None:
            flags = np.array(self.clutter, dtype=bool).reshape(n)
            flags.setflags(write=False)
            object.__setattr__(self, "clutter", flags)

        if self.model == Additive.tag:
            if self.latent is None or self.noise is None:
                raise SamplingError("additive datasets carry both X and Z")
            if not np.array_equal(self.observed.points, self.latent + self.noise):
                raise SamplingError("additive dataset violates Y = X + Z")
        if self.model == Clutter.tag:
            if self.clutter is None or self.latent is None:
                raise SamplingError("clutter datasets carry flags and X")
            signal = ~self.clutter
            gap = np.abs(self.observed.points[signal] - self.latent[signal])
            if gap.size and gap.max() > 1e-12:
                raise SamplingError("non-clutter points must equal their latent draw")

    def __len__(self):
        return len(self.observed)

    @property
    def ambient_dim(self):
        return self.observed.ambient_dim

    @property
    def signal(self):
        """Observed points that came from the manifold."""
        if self.clutter is None:
            return self.observed
        return PointCloud(self.observed.points[~self.clutter])

    def columns(self):
        dim = self.ambient_dim
        header = [f"y{i + 1}" for i in range(dim)]
        blocks = [self.observed.points]
        if self.model != Noiseless.tag and self.latent is not None:
            header += [f"x{i + 1}" for i in range(dim)]
            blocks.append(self.latent)
        if self.noise is not None:
            header += [f"z{i + 1}" for i in range(dim)]
            blocks.append(self.noise)
        if self.clutter is not None:
            header.append("is_clutter")
            blocks.append(self.clutter.astype(float)[:, None])
        return header, np.hstack(blocks)
