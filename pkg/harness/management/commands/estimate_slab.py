import math

from geometry.metrics import hausdorff_distance
from harness.management.base import LabCommand
from harness.models import estimator_mismatch
from harness.presets import build_scenario
from harness.reports import emit_reports
from manifold_lab.exceptions import ConfigError
from sampling.random import SeedRecord
from sampling.samplers import sample
from slabfit.scoring import epsilon_n, fit, offset_family


class Command(LabCommand):
    help = "Fit the slab-score maximiser over an offset family to one sample"

    def add_lab_arguments(self, parser):
        parser.add_argument("--n", type=int, help="Sample size (default: first n)")
        parser.add_argument(
            "--offset", type=float, help="Offset distance (default: 2 sqrt(eps_n))"
        )

    def run(self, config, options):
        mismatch = estimator_mismatch("slab", config.noise)
        if mismatch:
            raise ConfigError(mismatch)
        scenario = build_scenario(config)
        n = options.get("n") or config.ns[0]
        d = scenario.intrinsic_dim
        distance = options.get("offset") or 2 * math.sqrt(
            epsilon_n(n, d, config.slab_K)
        )
        family = offset_family(scenario.manifold, distance, config.slab_offsets)
        cloud = sample(
            scenario.dist, scenario.model, n, SeedRecord(config.seed, 0, 0)
        ).observed
        result = fit(
            family,
            cloud,
            n,
            config.slab_K,
            config.slab_b1,
            config.slab_b2,
            threads=config.threads,
        )
        loss = hausdorff_distance(
            result.manifold.discretize(config.resolution),
            scenario.manifold.discretize(config.resolution),
        )
        report = {**result.as_dict(), "offset": distance, "loss": loss}
        self.stdout.write(f"chose {family.labels[result.chosen]} (loss {loss:.4g})")
        self.report(emit_reports(report, self.out_dir(config), name="slab_fit"))
