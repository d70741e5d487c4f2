from deconv.estimator import estimate_manifold
from harness.experiments import deconv_setup, truncated_estimate
from harness.management.base import LabCommand
from harness.models import estimator_mismatch
from harness.presets import build_scenario
from harness.reports import emit_reports, write_density_field
from manifold_lab.exceptions import ConfigError
from sampling.random import SeedRecord
from sampling.samplers import sample


class Command(LabCommand):
    help = "Run the deconvolution level-set estimator on one additive-noise sample"

    def add_lab_arguments(self, parser):
        parser.add_argument("--n", type=int, help="Sample size (default: first n)")
        parser.add_argument(
            "--bandwidth", type=float, help="Bandwidth h (default: 1 / sqrt(log n))"
        )

    def run(self, config, options):
        mismatch = estimator_mismatch("deconv", config.noise)
        if mismatch:
            raise ConfigError(mismatch)
        config = config.replace(estimator="deconv")
        scenario = build_scenario(config)
        n = options.get("n") or config.ns[0]
        setup = deconv_setup(config, scenario, n, 0, h=options.get("bandwidth"))
        cloud = sample(
            scenario.dist, scenario.model, n, SeedRecord(config.seed, 0, 0)
        ).observed
        field, estimate = estimate_manifold(
            cloud,
            setup["grid"],
            setup["h"],
            setup["k"],
            setup["threshold"],
            threads=config.threads,
        )
        loss = truncated_estimate(config, scenario, estimate, setup["grid"])
        report = {
            "n": n,
            "h": setup["h"],
            "k": setup["k"],
            "threshold": setup["threshold"].as_dict(),
            "grid": setup["grid"].describe(),
            "estimate_size": len(estimate),
            "truncated_loss": loss.value,
            "loss_bound": loss.bound,
        }
        out = self.out_dir(config)
        self.stdout.write(
            f"truncated loss {loss.value:.4g} (+- {loss.bound:.2g}) "
            f"from {len(estimate)} cells"
        )
        paths = [write_density_field(field, out / "density.csv")]
        self.report(paths + emit_reports(report, out, name="deconv"))
