from deconv.estimator import (
    calibrate_constants,
    default_order,
    select_bandwidth,
    select_threshold,
)
from deconv.kernels import check_bandwidth_floor
from harness.management.base import LabCommand
from harness.presets import build_scenario
from harness.reports import emit_reports
from sampling.random import SeedRecord


class Command(LabCommand):
    help = "Calibrate the threshold constants over the bandwidths of the n list"

    def run(self, config, options):
        config = config.replace(estimator="deconv")
        scenario = build_scenario(config)
        manifold = scenario.manifold
        d, D = manifold.intrinsic_dim, manifold.ambient_dim
        k = config.deconv_k or default_order(d, config.deconv_delta)
        bandwidths = [select_bandwidth(n) for n in config.ns]
        for h in bandwidths:
            check_bandwidth_floor(h, D)
        calibration = calibrate_constants(
            scenario.dist,
            bandwidths,
            k,
            config.deconv_L,
            config.deconv_delta,
            seed=SeedRecord(config.seed),
            box=scenario.box,
            grid_factor=config.deconv_grid_factor,
        )
        thresholds = [
            {
                "n": n,
                "h": h,
                **select_threshold(h, D, d, k, config.deconv_L, calibration).as_dict(),
            }
            for n, h in zip(config.ns, bandwidths)
        ]
        report = {**calibration.as_dict(), "thresholds": thresholds}
        self.report(emit_reports(report, self.out_dir(config), name="calibration"))
