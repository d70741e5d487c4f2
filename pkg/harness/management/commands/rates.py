from harness.experiments import rate_fit, run_experiment
from harness.management.base import LabCommand
from harness.reports import emit_reports, render_summary


class Command(LabCommand):
    help = "Monte Carlo risk over the n list, with the rate fit and reports"

    def run(self, config, options):
        table = run_experiment(config)
        fit = rate_fit(table) if len(table.ns) >= 3 else None
        paths = emit_reports(table, self.out_dir(config), fit)
        self.stdout.write(render_summary(table, fit))
        self.report(paths)
