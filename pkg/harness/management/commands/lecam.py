"""
Two-point lower bounds.

The cosine pair gives the additive-noise bound through the TV of the
Gaussian-smoothed laws; the bump pair gives the noiseless and clutter bounds
through the singular TV (scaled by pi under clutter). With ``--gammas`` the
command also tabulates TV against gamma and the bound curve over the n list.
"""

from harness.management.base import LabCommand
from harness.reports import emit_reports
from lecam.divergence import (
    at_sample_size,
    clutter_tv,
    pair_divergence,
    singular_tv,
)
from lecam.models import DivergenceReport
from lecam.pairs import bump_pair, cosine_pair
from lecam.rates import (
    bound_curve,
    padded_grid,
    singular_tv_table,
    tv_decay_fit,
    tv_decay_table,
)
from manifold_lab.exceptions import ConfigError


def _gammas(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--gammas must be comma-separated numbers, got {text!r}")


class Command(LabCommand):
    help = "Least favorable pair divergences and Le Cam lower bounds"

    def add_lab_arguments(self, parser):
        parser.add_argument("--construction", choices=("bump", "cosine"))
        parser.add_argument("--gamma", type=float, help="Default: model.gamma")
        parser.add_argument("--gammas", help="Decreasing gammas for the TV table")
        parser.add_argument(
            "--spacing", type=float, default=0.1, help="Grid spacing (cosine pair)"
        )

    def run(self, config, options):
        construction = options.get("construction") or (
            "cosine" if config.noise == "additive" else "bump"
        )
        gamma = options.get("gamma") or config.gamma
        n = config.ns[0]
        out = self.out_dir(config)
        paths = []
        if construction == "cosine":

            def family(value):
                return cosine_pair(value, kappa=config.kappa)

            pair = family(gamma)
            grid = padded_grid(pair, options["spacing"])
            report = pair_divergence(
                pair, grid, spacing=None, threads=config.threads, n=n
            )
            paths += emit_reports(report, out, name="divergence")
            if options.get("gammas"):
                table = tv_decay_table(
                    family,
                    _gammas(options["gammas"]),
                    options["spacing"],
                    threads=config.threads,
                    label="cosine",
                )
                fit = tv_decay_fit(table)
                paths += emit_reports(table, out, name="tv")
                paths += emit_reports(fit, out, name="decay_fit")
                paths += emit_reports(bound_curve(fit, config.ns), out, name="bound")
        else:

            def family(value):
                return bump_pair(value, config.kappa, validate=False)

            pair = bump_pair(gamma, config.kappa)
            rho = pair.params["rho"]
            breaks = (-rho, rho)
            pi = config.pi if config.noise == "clutter" else 1.0
            if config.noise == "clutter":
                paths += emit_reports(
                    clutter_tv(
                        pair.g0,
                        pair.g1,
                        pi,
                        pair.m1.bounding_box,
                        breaks=breaks,
                        seed=config.seed,
                    ),
                    out,
                    name="clutter_tv",
                )
            tv = pi * singular_tv(pair.g0, pair.g1, breaks=breaks)
            report = at_sample_size(
                DivergenceReport(l1=2 * tv, tv=tv, affinity=1 - tv),
                n,
                pair.separation,
            )
            paths += emit_reports(report, out, name="divergence")
            if pair.validation is not None:
                paths += emit_reports(pair.validation, out, name="validation")
            if options.get("gammas"):
                table = singular_tv_table(
                    family,
                    _gammas(options["gammas"]),
                    pi=pi,
                    threads=config.threads,
                    label="bump",
                )
                paths += emit_reports(table, out, name="tv")
                paths += emit_reports(bound_curve(table, config.ns), out, name="bound")
        self.stdout.write(
            f"{construction} pair at gamma={gamma:g}: TV {report.tv:.4e}, "
            f"bound at n={n}: {report.lecam:.4e}"
        )
        self.report(paths)
