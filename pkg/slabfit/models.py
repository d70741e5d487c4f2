"""
Domain types of the slab-score fit.

A candidate family is the finite set of manifolds the estimator maximises the
slab score over; FitResult and DeviationReport are what the fit and the
empirical-measure diagnostics hand back to the harness.
"""

from dataclasses import dataclass, field

import numpy as np

from geometry.reach import reach_validate
from manifold_lab.exceptions import GeometryError


@dataclass(frozen=True, eq=False)
class CandidateFamily:
    """
    Finite set of candidate manifolds sharing D, d and the reach floor.

    Attributes:
        members (tuple): ParametricManifold instances, index 0 first.
        labels (tuple): One description per member; defaults to the manifold
            labels with their index appended.
    """

    members: tuple
    labels: tuple = ()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise GeometryError("a candidate family needs at least one member")
        first = members[0]
        for member in members[1:]:
            if (member.ambient_dim, member.intrinsic_dim) != (
                first.ambient_dim,
                first.intrinsic_dim,
            ):
                raise GeometryError("candidates must share ambient and intrinsic dim")
            if member.reach_floor != first.reach_floor:
                raise GeometryError("candidates must share the reach floor")
        labels = tuple(self.labels) or tuple(
            f"{member.label}[{index}]" for index, member in enumerate(members)
        )
        if len(labels) != len(members):
            raise GeometryError("one label is required per candidate")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, index):
        return self.members[index]

    @property
    def ambient_dim(self):
        return self.members[0].ambient_dim

    @property
    def intrinsic_dim(self):
        return self.members[0].intrinsic_dim

    @property
    def reach_floor(self):
        return self.members[0].reach_floor

    def validate(self, resolution=None):
        """
        Check every member against the shared reach floor.

        Raises:
            GeometryError: Naming the first member whose reach check fails.
        """
        kappa = self.reach_floor
        resolution = resolution or min(kappa, 1.0) / 16
        for label, member in zip(self.labels, self.members):
            report = reach_validate(member, kappa, resolution)
            if not report.passed:
                raise GeometryError(
                    f"candidate {label} fails the reach check at {kappa:.4g} "
                    f"(estimated reach {report.reach_estimate:.4g})"
                )


@dataclass(frozen=True)
class SlabScore:
    """
    s(M) for one candidate: the smallest empirical slab mass over a net.

    ``point`` is the net point attaining the minimum (the first one in net
    order on ties). ``coverage`` is net spacing over the slab's tangent
    half-width; it stays at or below 1/2 so neighbouring slabs overlap.
    """

    label: str
    value: float
    point: tuple
    chart_index: int
    net_spacing: float
    net_size: int
    coverage: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0 + 1e-12:
            raise GeometryError(f"slab score {self.value} is outside [0, 1]")

    def as_dict(self):
        return {
            "label": self.label,
            "score": self.value,
            "point": list(self.point),
            "chart": self.chart_index,
            "net_spacing": self.net_spacing,
            "net_size": self.net_size,
            "coverage": self.coverage,
        }


@dataclass(frozen=True, eq=False)
class FitResult:
    """
    Outcome of the slab-score maximisation over a candidate family.

    Attributes:
        candidates (CandidateFamily): The family that was scored.
        epsilon (float): eps_n used for every slab.
        scores (tuple): SlabScore per candidate, in family order.
        chosen (int): Index of the maximiser (lowest index on ties).
        tie (bool): More than one candidate attains the maximum.
        no_support (bool): Every score is zero; ``chosen`` falls back to 0.
    """

    candidates: CandidateFamily
    epsilon: float
    scores: tuple
    chosen: int
    tie: bool = False
    no_support: bool = False
    params: dict = field(default_factory=dict)

    @property
    def manifold(self):
        return self.candidates[self.chosen]

    @property
    def values(self):
        return np.array([score.value for score in self.scores])

    def as_dict(self):
        return {
            "epsilon_n": self.epsilon,
            "chosen": self.chosen,
            "chosen_label": self.candidates.labels[self.chosen],
            "tie": self.tie,
            "no_support": self.no_support,
            "net_spacing": self.scores[0].net_spacing,
            "scores": [score.as_dict() for score in self.scores],
            **self.params,
        }


@dataclass(frozen=True, eq=False)
class DeviationReport:
    """
    Empirical slab masses checked against the VC-lemma deviation bounds.

    ``upper``/``lower`` hold, per slab, the bounds
    Q + C log n / n + sqrt(C log n / n) sqrt(Q) and
    Q - sqrt(C log n / n) sqrt(Q); ``violations`` lists the slabs whose
    empirical mass falls outside them. ``vc_violations`` does the same for
    the two-sided form with beta_n at u = n^-xi.
    """

    n: int
    vc_dim: int
    xi: float
    constant: float
    beta: float
    truth: np.ndarray
    empirical: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    violations: tuple
    vc_violations: tuple

    @property
    def passed(self):
        return not self.violations

    @property
    def max_deviation(self):
        if self.truth.size == 0:
            return 0.0
        return float(np.abs(self.empirical - self.truth).max())

    def as_dict(self):
        return {
            "n": self.n,
            "V": self.vc_dim,
            "xi": self.xi,
            "C": self.constant,
            "beta_n": self.beta,
            "slabs": int(self.truth.size),
            "max_deviation": self.max_deviation,
            "violations": list(self.violations),
            "vc_violations": list(self.vc_violations),
        }
