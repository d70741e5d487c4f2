"""
Geometry Models

Domain types for embedded manifolds: point clouds, axis-aligned boxes and
grids, parametric charts, parametric manifolds and the anisotropic slabs used
to score candidate manifolds.

Every type is immutable after construction. Arrays are copied on the way in
and flagged read-only, so instances can be shared between worker threads.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from manifold_lab.exceptions import GeometryError

# Relative slack for the closed-boundary convention of boxes and slabs.
BOUNDARY_SLACK = 1e-12


def _frozen(values, dtype=float):
    """Return a read-only copy of ``values`` as an array."""
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    A finite set of points in R^D, optionally carrying probability weights.

    Unweighted clouds are the observed samples Y_1..Y_n. Weighted clouds hold
    quadrature atoms of a known distribution; the empirical operations treat
    them as the plug-in measure sum_j w_j delta_{p_j}.

    Attributes:
        points (ndarray): Array of shape (n, D) with finite coordinates.
        weights (ndarray | None): Optional nonnegative weights summing to 1.
    """

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise GeometryError(
                f"point cloud must be an (n, D) array, got shape {points.shape}"
            )
        if not np.all(np.isfinite(points)):
            raise GeometryError("point cloud has non-finite coordinates")
        object.__setattr__(self, "points", _frozen(points))

        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if weights.shape[0] != points.shape[0]:
                raise GeometryError("one weight is required per point")
            if np.any(weights < 0) or not np.isfinite(weights).all():
                raise GeometryError("weights must be finite and nonnegative")
            total = weights.sum()
            if total <= 0:
                raise GeometryError("weights must have positive total mass")
            object.__setattr__(self, "weights", _frozen(weights / total))

    @classmethod
    def empty(cls, ambient_dim):
        return cls(np.empty((0, ambient_dim)))

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @property
    def is_empty(self):
        return len(self) == 0

    def mass(self):
        """Probability mass of each point (uniform unless weighted)."""
        if self.weights is not None:
            return self.weights
        if self.is_empty:
            return np.empty(0)
        return np.full(len(self), 1.0 / len(self))

    def union(self, other):
        """Unweighted union of two clouds (duplicates kept)."""
        if other.ambient_dim != self.ambient_dim:
            raise GeometryError("cannot merge clouds of different dimension")
        return PointCloud(np.vstack([self.points, other.points]))

    def translated(self, offset):
        return PointCloud(self.points + np.asarray(offset, dtype=float), self.weights)

    def transformed(self, rotation, translation):
        rotation = np.asarray(rotation, dtype=float)
        moved = self.points @ rotation.T + np.asarray(translation, dtype=float)
        return PointCloud(moved, self.weights)


@dataclass(frozen=True, eq=False)
class Box:
    """
    Closed axis-aligned box [lower, upper] in R^D.

    Used as the compact set K of the clutter and additive models and as the
    extent of evaluation grids.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise GeometryError("box bounds must have the same dimension")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise GeometryError("box bounds must be finite")
        if np.any(upper < lower):
            raise GeometryError("box upper bound below lower bound")
        object.__setattr__(self, "lower", _frozen(lower))
        object.__setattr__(self, "upper", _frozen(upper))

    @classmethod
    def cube(cls, half_width, dim, center=None):
        center = np.zeros(dim) if center is None else np.asarray(center, float)
        return cls(center - half_width, center + half_width)

    @classmethod
    def bounding(cls, points, padding=0.0):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points.min(axis=0) - padding, points.max(axis=0) + padding)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def volume(self):
        return float(np.prod(self.widths))

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def diameter(self):
        return float(np.linalg.norm(self.widths))

    def padded(self, padding):
        return Box(self.lower - padding, self.upper + padding)

    def contains(self, points, padding=0.0):
        """Boolean mask of points inside the closed (padded) box."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        slack = BOUNDARY_SLACK * max(1.0, float(np.abs(self.widths).max()))
        low = self.lower - padding - slack
        high = self.upper + padding + slack
        return np.all((points >= low) & (points <= high), axis=1)

    def overlap_lengths(self, lower, upper):
        """Per-axis overlap of [lower, upper] cells with this box."""
        return np.clip(
            np.minimum(upper, self.upper) - np.maximum(lower, self.lower), 0.0, None
        )

    def sample_uniform(self, rng, count):
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Axis-aligned grid of nodes over a box.

    Nodes along axis i are lower_i + j * spacing_i for j = 0..counts_i - 1,
    so spacing = (max - min) / (count - 1). Flattened node order is C order:
    the last axis varies fastest, and row blocks along the first axis are the
    unit of parallel evaluation.
    """

    box: Box
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != self.box.dim:
            raise GeometryError("one node count is required per axis")
        if min(counts) < 2:
            raise GeometryError("grids need at least two nodes per axis")
        if np.any(self.box.widths <= 0):
            raise GeometryError("grid box must have positive width on every axis")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def with_spacing(cls, box, max_spacing):
        """Finest-needed grid whose spacing does not exceed ``max_spacing``."""
        if max_spacing <= 0:
            raise GeometryError("grid spacing must be positive")
        counts = [max(2, math.ceil(w / max_spacing - 1e-9) + 1) for w in box.widths]
        return cls(box, tuple(counts))

    @property
    def dim(self):
        return self.box.dim

    @property
    def shape(self):
        return self.counts

    @property
    def size(self):
        return int(np.prod(self.counts))

    @property
    def spacing(self):
        return self.box.widths / (np.asarray(self.counts) - 1)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axes(self):
        return [
            np.linspace(lo, hi, count)
            for lo, hi, count in zip(self.box.lower, self.box.upper, self.counts)
        ]

    def points(self):
        """All nodes as an (N, D) array in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def row_points(self, row):
        """Nodes whose first-axis index equals ``row``."""
        axes = self.axes()
        rest = np.meshgrid(*axes[1:], indexing="ij")
        block = [np.full(rest[0].size if rest else 1, axes[0][row])]
        block.extend(m.reshape(-1) for m in rest)
        return np.stack(block, axis=1)

    def cell_edges(self):
        """Histogram edges placing each node at the centre of its cell."""
        half = self.spacing / 2
        return [
            np.linspace(lo - h, hi + h, count + 1)
            for lo, hi, h, count in zip(
                self.box.lower, self.box.upper, half, self.counts
            )
        ]

    def shifted(self, offset):
        offset = np.asarray(offset, dtype=float)
        return Grid(Box(self.box.lower + offset, self.box.upper + offset), self.counts)

    def same_as(self, other):
        return (
            self.counts == other.counts
            and np.allclose(self.box.lower, other.box.lower, rtol=0, atol=1e-12)
            and np.allclose(self.box.upper, other.box.upper, rtol=0, atol=1e-12)
        )

    def describe(self):
        return {
            "lower": self.box.lower.tolist(),
            "upper": self.box.upper.tolist(),
            "counts": list(self.counts),
            "spacing": self.spacing.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Chart:
    """
    One parametrisation patch of a manifold.

    Attributes:
        lower (ndarray): Lower corner of the parameter box, shape (d,).
        upper (ndarray): Upper corner of the parameter box, shape (d,).
        embed (callable): Maps parameters of shape (m, d) to points (m, D).
        jacobian (callable): Maps parameters (m, d) to jacobians (m, D, d).
        periodic (tuple): Per-axis flags; periodic axes wrap at the box edge.
        lipschitz (float): Upper bound on the operator norm of the jacobian
            over the parameter box.
    """

    lower: np.ndarray
    upper: np.ndarray
    embed: object
    jacobian: object
    periodic: tuple = None
    lipschitz: float = 1.0

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise GeometryError("chart parameter box must have positive extent")
        periodic = self.periodic
        if periodic is None:
            periodic = (False,) * lower.shape[0]
        if len(periodic) != lower.shape[0]:
            raise GeometryError("one periodic flag is required per parameter axis")
        if not self.lipschitz > 0:
            raise GeometryError("chart Lipschitz constant must be positive")
        object.__setattr__(self, "lower", _frozen(lower))
        object.__setattr__(self, "upper", _frozen(upper))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in periodic))

    @property
    def intrinsic_dim(self):
        return self.lower.shape[0]

    @property
    def extent(self):
        return self.upper - self.lower

    @property
    def volume(self):
        return float(np.prod(self.extent))

    def axis_nodes(self, spacing):
        """Per-axis parameter nodes at most ``spacing`` apart."""
        nodes = []
        for lo, hi, wraps in zip(self.lower, self.upper, self.periodic):
            width = hi - lo
            if wraps:
                count = max(1, math.ceil(width / spacing - 1e-9))
                nodes.append(lo + width * np.arange(count) / count)
            else:
                count = max(2, math.ceil(width / spacing - 1e-9) + 1)
                nodes.append(np.linspace(lo, hi, count))
        return nodes

    def parameter_grid(self, spacing):
        """Tensor net of parameters, shape (m, d)."""
        mesh = np.meshgrid(*self.axis_nodes(spacing), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def points(self, params):
        return np.asarray(self.embed(np.atleast_2d(params)), dtype=float)

    def jacobians(self, params):
        return np.asarray(self.jacobian(np.atleast_2d(params)), dtype=float)

    def volume_factor(self, params):
        """sqrt(det(J^T J)) at each parameter: the local area element."""
        jac = self.jacobians(params)
        gram = np.einsum("mki,mkj->mij", jac, jac)
        return np.sqrt(np.clip(np.linalg.det(gram), 0.0, None))

    def smallest_singular_values(self, params):
        return np.linalg.svd(self.jacobians(params), compute_uv=False)[:, -1]

    def parameter_distance(self, a, b):
        """Distance between parameter arrays, wrapping periodic axes."""
        delta = np.abs(np.asarray(a) - np.asarray(b))
        for axis, wraps in enumerate(self.periodic):
            if wraps:
                width = self.extent[axis]
                wrapped = width - delta[..., axis]
                delta[..., axis] = np.minimum(delta[..., axis], wrapped)
        return np.linalg.norm(delta, axis=-1)


@dataclass(frozen=True, eq=False)
class ManifoldNet:
    """Net of chart parameters together with their embedded points."""

    points: np.ndarray
    chart_ids: np.ndarray
    params: np.ndarray
    spacing: float

    def cloud(self):
        return PointCloud(self.points)


@dataclass(frozen=True, eq=False)
class HausdorffEstimate:
    """A Hausdorff distance computed between discretisations, with its bound."""

    value: float
    bound: float

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True, eq=False)
class ParametricManifold:
    """
    Chart-based embedded d-manifold in R^D with a certified reach floor.

    The charts are expected to cover the manifold with overlaps of measure
    zero, which is what the rejection sampler and the chart quadrature rely
    on. Noncompact manifolds (``compact=False``) carry a truncated parameter
    box; their bounding box is the region used by truncated losses.

    Attributes:
        label (str): Human-readable name used in reports.
        ambient_dim (int): D.
        intrinsic_dim (int): d, with 1 <= d < D.
        charts (tuple): Chart instances.
        reach_floor (float): The level kappa the manifold is built to clear.
        bounding_box (Box): Compact box K housing the manifold.
        compact (bool): Whether every chart point must lie in K.
        box_padding (float): Allowed excursion outside K for compact manifolds.
    """

    label: str
    ambient_dim: int
    intrinsic_dim: int
    charts: tuple
    reach_floor: float
    bounding_box: Box
    compact: bool = True
    box_padding: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.intrinsic_dim < self.ambient_dim:
            raise GeometryError(
                f"need 1 <= d < D, got d={self.intrinsic_dim}, D={self.ambient_dim}"
            )
        if not self.charts:
            raise GeometryError("a manifold needs at least one chart")
        object.__setattr__(self, "charts", tuple(self.charts))
        for chart in self.charts:
            if chart.intrinsic_dim != self.intrinsic_dim:
                raise GeometryError("chart dimension differs from intrinsic dim")
        if self.bounding_box.dim != self.ambient_dim:
            raise GeometryError("bounding box dimension differs from ambient dim")
        if not self.reach_floor > 0:
            raise GeometryError("reach floor must be positive")
        if self.compact:
            trial = self.parameter_net(self.check_spacing())
            if trial.points.shape[1] != self.ambient_dim:
                raise GeometryError("embedding returns the wrong ambient dimension")
            outside = ~self.bounding_box.contains(trial.points, self.box_padding)
            if outside.any():
                raise GeometryError(
                    f"{self.label}: {int(outside.sum())} chart points leave the "
                    "padded bounding box"
                )

    @property
    def lipschitz(self):
        return max(chart.lipschitz for chart in self.charts)

    def check_spacing(self):
        widest = max(float(chart.extent.max()) for chart in self.charts)
        return widest / 64

    def embed(self, params, chart_index=0):
        return self.charts[chart_index].points(params)

    def parameter_net(self, spacing):
        """
        Tensor parameter net of every chart at the given parameter spacing.

        Args:
            spacing (float): Parameter-domain spacing (same for all charts).

        Returns:
            ManifoldNet: Points, owning chart index and parameters.
        """
        if not spacing > 0:
            raise GeometryError("net spacing must be positive")
        points, ids, params = [], [], []
        for index, chart in enumerate(self.charts):
            grid = chart.parameter_grid(spacing)
            params.append(grid)
            points.append(chart.points(grid))
            ids.append(np.full(grid.shape[0], index))
        return ManifoldNet(
            points=np.vstack(points),
            chart_ids=np.concatenate(ids),
            params=np.vstack(params),
            spacing=spacing,
        )

    def ambient_net(self, resolution):
        """Net whose neighbouring points are at most ``resolution`` apart."""
        return self.parameter_net(resolution / self.lipschitz)

    def discretize(self, resolution):
        return self.ambient_net(resolution).cloud()

    def require_full_rank(self, net, tolerance=1e-10):
        """Raise GeometryError if any chart jacobian on ``net`` loses rank."""
        for index, chart in enumerate(self.charts):
            mask = net.chart_ids == index
            if not mask.any():
                continue
            sigma = chart.smallest_singular_values(net.params[mask])
            if sigma.min() <= tolerance * chart.lipschitz:
                raise GeometryError(
                    f"{self.label}: rank-deficient jacobian in chart {index} "
                    f"(smallest singular value {sigma.min():.3e})"
                )


@dataclass(frozen=True, eq=False)
class Slab:
    """
    Anisotropic box S_M(y) centred on a manifold point.

    The slab is wide along the d tangent directions (half-width b1 * sqrt(eps))
    and thin along the D - d normal directions (half-width b2 * eps). It is
    closed: points exactly on the boundary are inside.
    """

    center: np.ndarray
    tangent_basis: np.ndarray
    normal_basis: np.ndarray
    tangent_halfwidth: float
    normal_halfwidth: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        tangent = np.atleast_2d(np.asarray(self.tangent_basis, dtype=float))
        normal = np.asarray(self.normal_basis, dtype=float).reshape(
            -1, center.shape[0]
        )
        if tangent.shape[1] != center.shape[0]:
            raise GeometryError("tangent basis has the wrong ambient dimension")
        if tangent.shape[0] + normal.shape[0] != center.shape[0]:
            raise GeometryError("tangent and normal bases must span R^D")
        if not (self.tangent_halfwidth > 0 and self.normal_halfwidth > 0):
            raise GeometryError("slab half-widths must be positive")
        basis = np.vstack([tangent, normal])
        if not np.allclose(basis @ basis.T, np.eye(basis.shape[0]), atol=1e-10):
            raise GeometryError("slab basis is not orthonormal")
        object.__setattr__(self, "center", _frozen(center))
        object.__setattr__(self, "tangent_basis", _frozen(tangent))
        object.__setattr__(self, "normal_basis", _frozen(normal))

    @property
    def ambient_dim(self):
        return self.center.shape[0]

    @property
    def intrinsic_dim(self):
        return self.tangent_basis.shape[0]

    @property
    def basis(self):
        return np.vstack([self.tangent_basis, self.normal_basis])

    @property
    def halfwidths(self):
        d = self.intrinsic_dim
        widths = np.full(self.ambient_dim, float(self.normal_halfwidth))
        widths[:d] = self.tangent_halfwidth
        return widths

    @property
    def half_diagonal(self):
        return float(np.linalg.norm(self.halfwidths))

    @property
    def volume(self):
        return float(np.prod(2 * self.halfwidths))

    def local_coordinates(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.ambient_dim:
            raise GeometryError(
                f"point dimension {points.shape[1]} does not match slab "
                f"dimension {self.ambient_dim}"
            )
        return (points - self.center) @ self.basis.T

    def contains(self, points):
        """Boolean mask of points inside the closed slab."""
        coords = np.abs(self.local_coordinates(points))
        widths = self.halfwidths
        return np.all(coords <= widths * (1 + BOUNDARY_SLACK) + 1e-15, axis=1)

    def lattice(self, per_axis):
        """Cell-centre lattice filling the slab (for volume fractions)."""
        unit = (np.arange(per_axis) + 0.5) / per_axis * 2 - 1
        mesh = np.meshgrid(*([unit] * self.ambient_dim), indexing="ij")
        local = np.stack([m.reshape(-1) for m in mesh], axis=1) * self.halfwidths
        return self.center + local @ self.basis


def direction_set(dim):
    """Parameter directions probing normal curvature: axes and diagonals."""
    eye = np.eye(dim)
    directions = [eye[i] for i in range(dim)]
    for i, j in combinations(range(dim), 2):
        directions.append((eye[i] + eye[j]) / math.sqrt(2))
        directions.append((eye[i] - eye[j]) / math.sqrt(2))
    return np.array(directions)
