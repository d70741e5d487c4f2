from harness.management.base import LabCommand
from harness.presets import build_scenario
from sampling.export import write_dataset
from sampling.random import SeedRecord
from sampling.samplers import sample


class Command(LabCommand):
    help = "Draw one sample from the configured model and write it as CSV"

    def add_lab_arguments(self, parser):
        parser.add_argument("--n", type=int, help="Sample size (default: first n)")

    def run(self, config, options):
        scenario = build_scenario(config)
        n = options.get("n") or config.ns[0]
        record = SeedRecord(config.seed, 0, 0)
        dataset = sample(scenario.dist, scenario.model, n, record)
        self.report([write_dataset(dataset, self.out_dir(config) / "sample.csv")])
