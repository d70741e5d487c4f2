"""
Domain types of the lower-bound lab.

A least favorable pair is two manifold distributions that are far apart in
Hausdorff distance yet hard to tell apart from samples; the reports below
carry the divergences and bounds computed from them.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from geometry.metrics import manifold_hausdorff
from geometry.reach import reach_validate
from manifold_lab.exceptions import ConstructionError

CONSTRUCTIONS = ("bump", "cosine")


@dataclass(frozen=True, eq=False)
class LeastFavorablePair:
    """
    Two manifolds M0, M1 with their distributions G0, G1.

    Attributes:
        m0, m1 (ParametricManifold): The pair, sharing one parameter box.
        g0, g1 (ManifoldDistribution): Distributions on m0 and m1.
        gamma (float): Construction scale.
        separation (float): Hausdorff distance the pair is built to realise.
        construction (str): "bump" or "cosine".
        params (dict): a, kappa, d, D and construction-specific values.
        validation (BumpValidation | None): Numeric checks, when run.
    """

    m0: object
    m1: object
    g0: object
    g1: object
    gamma: float
    separation: float
    construction: str
    params: dict = field(default_factory=dict)
    validation: object = None

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise ConstructionError(f"unknown construction {self.construction!r}")
        if self.construction == "cosine":
            a, kappa = self.params["a"], self.params["kappa"]
            if not a > math.sqrt(kappa):
                raise ConstructionError(
                    "reach condition violated: need a > sqrt(kappa)"
                )

    @property
    def kappa(self):
        return self.params["kappa"]

    @property
    def ambient_dim(self):
        return self.m0.ambient_dim

    @property
    def intrinsic_dim(self):
        return self.m0.intrinsic_dim

    def hausdorff(self, resolution):
        return manifold_hausdorff(self.m0, self.m1, resolution)

    def validate(self, resolution):
        """
        Run the reach check on both manifolds.

        Raises:
            ConstructionError: With the maximal curvature found.
        """
        reports = [
            reach_validate(manifold, self.kappa, resolution)
            for manifold in (self.m0, self.m1)
        ]
        for name, report in zip(("M0", "M1"), reports):
            if not report.passed:
                raise ConstructionError(
                    f"{self.construction} pair {name} fails the reach check at "
                    f"{self.kappa:.4g}: max curvature {report.max_curvature:.4g}"
                )
        return reports

    def describe(self):
        return {
            "construction": self.construction,
            "gamma": self.gamma,
            "separation": self.separation,
            **self.params,
        }


@dataclass(frozen=True)
class BumpValidation:
    """
    Numeric checks of the bump construction.

    ``b_ratio`` is mu1(B) / gamma^(d/2) for the core B where the bump rises
    above gamma / 2; ``a_constant`` is mu1(A) / gamma^(d/2) for the whole
    bump support A. ``far_factor`` is the smallest distance from B to M0 in
    units of gamma.
    """

    apex_separation: float
    hausdorff: float
    hausdorff_bound: float
    b_mass: float
    b_ratio: float
    a_mass: float
    a_constant: float
    far_factor: float
    tangent_angle: float
    max_curvature: float

    @property
    def separation_ok(self):
        gap = abs(self.hausdorff - self.apex_separation)
        return gap <= max(self.hausdorff_bound, 1e-12)

    @property
    def mass_ok(self):
        return self.b_ratio >= 1.0

    @property
    def tangents_parallel(self):
        return self.tangent_angle < 1e-8

    def as_dict(self):
        return {
            "apex_separation": self.apex_separation,
            "hausdorff": self.hausdorff,
            "hausdorff_bound": self.hausdorff_bound,
            "b_mass": self.b_mass,
            "b_ratio": self.b_ratio,
            "a_mass": self.a_mass,
            "a_constant": self.a_constant,
            "far_factor": self.far_factor,
            "tangent_angle": self.tangent_angle,
            "max_curvature": self.max_curvature,
            "separation_ok": self.separation_ok,
            "mass_ok": self.mass_ok,
        }


@dataclass(frozen=True)
class DivergenceReport:
    """
    l1, TV and affinity between two densities, plus Le Cam quantities.

    The sample-size fields stay None until divergence.at_sample_size fills
    them in.
    """

    l1: float
    tv: float
    affinity: float
    quadrature_error: float = 0.0
    tail_error: float = 0.0
    n: int = None
    product_affinity: float = None
    separation: float = None
    lecam: float = None

    def __post_init__(self):
        for name in ("tv", "affinity"):
            value = getattr(self, name)
            if not -1e-12 <= value <= 1 + 1e-12:
                raise ConstructionError(f"{name} = {value} is outside [0, 1]")

    def as_dict(self):
        return {
            "l1": self.l1,
            "tv": self.tv,
            "affinity": self.affinity,
            "quadrature_error": self.quadrature_error,
            "tail_error": self.tail_error,
            "n": self.n,
            "product_affinity_lower": self.product_affinity,
            "separation": self.separation,
            "lecam_bound": self.lecam,
        }


@dataclass(frozen=True)
class ClutterTV:
    """
    TV between clutter mixtures by two paths that must agree.

    ``mixture_tv`` is a Monte Carlo estimate with standard error
    ``mixture_error``; ``tolerance`` is the allowed discrepancy.
    """

    pi: float
    mixture_tv: float
    mixture_error: float
    scaled_tv: float
    singular_tv: float
    tolerance: float

    @property
    def discrepancy(self):
        return abs(self.mixture_tv - self.scaled_tv)

    def as_dict(self):
        return {
            "pi": self.pi,
            "mixture_tv": self.mixture_tv,
            "mixture_error": self.mixture_error,
            "tolerance": self.tolerance,
            "pi_times_tv": self.scaled_tv,
            "singular_tv": self.singular_tv,
            "discrepancy": self.discrepancy,
        }


@dataclass(frozen=True, eq=False)
class TVTable:
    """TV(gamma) over a decreasing gamma grid, with error estimates."""

    gammas: np.ndarray
    tvs: np.ndarray
    errors: np.ndarray
    separation_factor: float = 1.0
    label: str = ""

    def __post_init__(self):
        for name in ("gammas", "tvs", "errors"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1)
            )
        if not self.gammas.shape == self.tvs.shape == self.errors.shape:
            raise ConstructionError("gamma, tv and error columns differ in length")

    def tv(self, gamma):
        """TV at tabulated gammas (interpolated in log TV against 1 / gamma)."""
        order = np.argsort(1.0 / self.gammas)
        x = 1.0 / self.gammas[order]
        y = np.log(np.clip(self.tvs[order], 1e-300, None))
        return np.exp(np.interp(1.0 / np.asarray(gamma, dtype=float), x, y))

    def rows(self):
        return [
            {"gamma": g, "tv": t, "err": e}
            for g, t, e in zip(self.gammas, self.tvs, self.errors)
        ]


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line log TV = intercept + slope / gamma."""

    slope: float
    intercept: float
    r_squared: float
    stderr: float
    separation_factor: float = 1.0

    def tv(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        return np.minimum(1.0, np.exp(self.intercept + self.slope / gamma))

    def as_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "stderr": self.stderr,
        }


@dataclass(frozen=True)
class RateBound:
    """Le Cam bound maximised over gamma at one sample size."""

    n: int
    gamma_star: float
    bound: float

    def as_dict(self):
        return {"n": self.n, "gamma_star": self.gamma_star, "bound": self.bound}
