"""
Domain types of the experiment harness.

An ExperimentConfig fixes the model, the estimator and the Monte Carlo grid;
running it produces a RiskTable of per-replication losses, and a RateFit is
the regression of the median loss against log n (or log log n).
"""

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from manifold_lab.exceptions import ConfigError, ParameterError

PRESETS = ("circle", "segment", "sphere", "torus", "cosine", "bump")
NOISE_MODELS = ("noiseless", "clutter", "additive")
ESTIMATORS = ("pointcloud", "slab", "deconv")
ABSCISSAE = ("log", "loglog")

# Dotted config-file keys and the ExperimentConfig fields they fill.
KEY_FIELDS = {
    "model.preset": "preset",
    "model.radius": "radius",
    "model.noise": "noise",
    "model.pi": "pi",
    "model.box_padding": "box_padding",
    "model.kappa": "kappa",
    "model.gamma": "gamma",
    "estimator.name": "estimator",
    "slab.K": "slab_K",
    "slab.b1": "slab_b1",
    "slab.b2": "slab_b2",
    "slab.offsets": "slab_offsets",
    "deconv.k": "deconv_k",
    "deconv.L": "deconv_L",
    "deconv.delta": "deconv_delta",
    "deconv.grid_factor": "deconv_grid_factor",
    "deconv.radius": "deconv_radius",
    "loss.resolution": "resolution",
    "experiment.n": "ns",
    "experiment.replications": "replications",
    "experiment.seed": "seed",
    "experiment.threads": "threads",
    "output.dir": "output_dir",
}


def estimator_mismatch(estimator, noise):
    """Reason the estimator cannot run under the noise model, or None."""
    if estimator == "deconv" and noise != "additive":
        return f"the deconv estimator needs additive noise, not {noise}"
    if estimator == "slab" and noise == "additive":
        return "the slab estimator needs the noiseless or clutter model"
    return None


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One Monte Carlo experiment.

    Attributes:
        preset (str): Manifold preset, one of PRESETS.
        noise (str): Noise model, one of NOISE_MODELS.
        estimator (str): Estimator tag, one of ESTIMATORS.
        ns (tuple): Strictly increasing sample sizes.
        replications (int): Replications per sample size.
        seed (int): Base seed; every replication derives its own stream.
        deconv_k (int): Kernel order; 0 derives ceil(d / (2 delta)).
    """

    preset: str = "circle"
    radius: float = 1.0
    noise: str = "noiseless"
    pi: float = 1.0
    box_padding: float = 0.5
    kappa: float = 0.4
    gamma: float = 0.05
    estimator: str = "pointcloud"
    slab_K: float = 8.0
    slab_b1: float = 1.0
    slab_b2: float = 1.0
    slab_offsets: int = 8
    deconv_k: int = 0
    deconv_L: float = 4.0
    deconv_delta: float = 0.25
    deconv_grid_factor: float = 0.25
    deconv_radius: float = 4.0
    resolution: float = 1e-3
    ns: tuple = (500, 2000, 8000)
    replications: int = 1
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        ns = tuple(int(n) for n in self.ns)
        object.__setattr__(self, "ns", ns)
        if not ns or any(a >= b for a, b in zip(ns, ns[1:])):
            raise ConfigError("the n list must be non-empty and strictly increasing")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        for name, allowed in (
            ("preset", PRESETS),
            ("noise", NOISE_MODELS),
            ("estimator", ESTIMATORS),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"unknown {name} {getattr(self, name)!r}")

    @classmethod
    def from_cleaned(cls, data):
        """Build from cleaned form data keyed by field name."""
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in names})

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def mismatch(self):
        return estimator_mismatch(self.estimator, self.noise)

    @property
    def abscissa(self):
        """log log n for the additive model, whose rate is logarithmic."""
        return "loglog" if self.noise == "additive" else "log"

    def as_dict(self):
        """Dotted keys, the layout of a config file."""
        values = {}
        for key, name in KEY_FIELDS.items():
            value = getattr(self, name)
            values[key] = ",".join(str(n) for n in value) if name == "ns" else value
        return values


@dataclass(frozen=True)
class RiskRow:
    n: int
    rep: int
    loss: float
    runtime_ms: float = 0.0


@dataclass(frozen=True, eq=False)
class RiskTable:
    """
    Per-replication losses of one experiment.

    Rows are kept sorted by (n, rep). ``params`` carries the config in
    dotted-key form for the reports.
    """

    rows: tuple = ()
    abscissa: str = "log"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda row: (row.n, row.rep)))
        for row in rows:
            if not (math.isfinite(row.loss) and row.loss >= 0):
                raise ParameterError(
                    f"loss at n={row.n}, rep={row.rep} is not a nonnegative number"
                )
        object.__setattr__(self, "rows", rows)
        if self.abscissa not in ABSCISSAE:
            raise ParameterError(f"unknown abscissa {self.abscissa!r}")

    def __len__(self):
        return len(self.rows)

    @property
    def ns(self):
        return sorted({row.n for row in self.rows})

    def losses(self, n):
        return np.array([row.loss for row in self.rows if row.n == n])

    def medians(self):
        return np.array([np.median(self.losses(n)) for n in self.ns])

    def summary(self):
        """Median, mean and interquartile range of the loss per n."""
        out = []
        for n in self.ns:
            losses = self.losses(n)
            q1, q3 = np.percentile(losses, [25, 75])
            out.append(
                {
                    "n": n,
                    "reps": int(losses.size),
                    "median": float(np.median(losses)),
                    "mean": float(losses.mean()),
                    "q1": float(q1),
                    "q3": float(q3),
                    "iqr": float(q3 - q1),
                }
            )
        return out

    def as_dict(self):
        return {
            "abscissa": self.abscissa,
            "params": self.params,
            "summary": self.summary(),
        }


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log median loss against the abscissa."""

    slope: float
    stderr: float
    intercept: float
    r_squared: float
    abscissa: str
    ns: tuple = ()

    def as_dict(self):
        return {
            "slope": self.slope,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "abscissa": self.abscissa,
            "ns": list(self.ns),
        }
