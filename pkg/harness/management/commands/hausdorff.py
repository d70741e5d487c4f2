from geometry.metrics import hausdorff_distance
from harness.management.base import LabCommand
from harness.presets import build_scenario
from harness.reports import write_json
from sampling.export import read_dataset
from sampling.random import SeedRecord
from sampling.samplers import sample


class Command(LabCommand):
    help = (
        "Hausdorff distance between two sample CSVs, or between a fresh sample "
        "and the configured manifold"
    )

    def add_lab_arguments(self, parser):
        parser.add_argument("--a", help="First sample CSV")
        parser.add_argument("--b", help="Second sample CSV")
        parser.add_argument("--n", type=int, help="Sample size (default: first n)")

    def run(self, config, options):
        if options.get("a") and options.get("b"):
            a = read_dataset(options["a"]).observed
            b = read_dataset(options["b"]).observed
            payload = {"a": options["a"], "b": options["b"]}
        else:
            scenario = build_scenario(config)
            n = options.get("n") or config.ns[0]
            record = SeedRecord(config.seed, 0, 0)
            a = sample(scenario.dist, scenario.model, n, record).observed
            b = scenario.manifold.discretize(config.resolution)
            payload = {
                "a": f"{config.noise} sample of size {n}",
                "b": scenario.manifold.label,
                "resolution": config.resolution,
            }
        payload["hausdorff"] = hausdorff_distance(a, b)
        self.stdout.write(f"{payload['hausdorff']!r}")
        self.report([write_json(self.out_dir(config) / "hausdorff.json", payload)])
