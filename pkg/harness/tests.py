import csv
import json
import math
import tempfile
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag

import numpy as np
from scipy.stats import linregress

from geometry.manifolds import circle
from geometry.metrics import hausdorff_distance
from geometry.models import PointCloud
from lecam.models import RateBound, TVTable
from manifold_lab.exceptions import ConfigError, ParameterError
from sampling.export import read_dataset, write_dataset
from sampling.models import Clutter, ManifoldDistribution
from sampling.random import SeedRecord
from sampling.samplers import sample_on_manifold

from .config import load_config
from .experiments import rate_fit, replication_loss, run_experiment
from .forms import ExperimentConfigForm
from .models import KEY_FIELDS, ExperimentConfig, RiskRow, RiskTable
from .presets import build_scenario
from .reports import (
    emit_reports,
    read_risk_csv,
    render_summary,
    write_bound_curve,
    write_risk_csv,
    write_tv_table,
)


def write_config(folder, text, name="lab.cfg"):
    path = Path(folder) / name
    path.write_text(text)
    return path


def planted_table(loss, ns=(10, 100, 1000), reps=3, abscissa="log"):
    rows = [RiskRow(n, rep, loss(n)) for n in ns for rep in range(reps)]
    return RiskTable(tuple(rows), abscissa=abscissa)


class ConfigLoadingTests(SimpleTestCase):
    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.addCleanup(self.folder.cleanup)

    def test_defaults(self):
        config = load_config()
        self.assertEqual(config.ns, (500, 2000, 8000))
        self.assertEqual(config.preset, "circle")
        self.assertEqual(config.seed, int(settings.LAB_DEFAULTS["experiment.seed"]))

    def test_file_values_and_comments(self):
        path = write_config(
            self.folder.name,
            "# clutter run\n"
            "model.noise = clutter\n"
            "model.pi = 0.5\n"
            "experiment.n = 100, 200,400\n"
            "experiment.replications = 4\n",
        )
        config = load_config(path)
        self.assertEqual(config.noise, "clutter")
        self.assertEqual(config.pi, 0.5)
        self.assertEqual(config.ns, (100, 200, 400))
        self.assertEqual(config.replications, 4)

    def test_invalid_ranges_are_reported_per_key(self):
        path = write_config(
            self.folder.name,
            "experiment.n = 500,200\n"
            "model.pi = 1.5\n"
            "experiment.replications = 0\n"
            "deconv.delta = 0.5\n"
            "deconv.L = -1\n",
        )
        with self.assertRaises(ConfigError) as caught:
            load_config(path)
        for key in (
            "experiment.n",
            "model.pi",
            "experiment.replications",
            "deconv.delta",
            "deconv.L",
        ):
            self.assertIn(key, caught.exception.errors)

    def test_unknown_key(self):
        path = write_config(self.folder.name, "model.colour = red\n")
        with self.assertRaisesMessage(ConfigError, "unknown config keys"):
            load_config(path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(Path(self.folder.name) / "absent.cfg")

    def test_estimator_mismatch(self):
        path = write_config(self.folder.name, "estimator.name = deconv\n")
        with self.assertRaises(ConfigError) as caught:
            load_config(path)
        self.assertIn("__all__", caught.exception.errors)

    def test_bump_height_guard(self):
        path = write_config(
            self.folder.name, "model.preset = bump\nmodel.gamma = 0.2\n"
        )
        with self.assertRaises(ConfigError) as caught:
            load_config(path)
        self.assertIn("model.gamma", caught.exception.errors)

    def test_overrides_win(self):
        config = load_config(
            overrides={"experiment.seed": 7, "experiment.threads": None}
        )
        self.assertEqual(config.seed, 7)

    def test_written_config_loads_back(self):
        original = ExperimentConfig(
            noise="clutter", pi=0.25, ns=(50, 70), replications=2, seed=9
        )
        lines = [f"{key} = {value}" for key, value in original.as_dict().items()]
        path = write_config(self.folder.name, "\n".join(lines) + "\n")
        self.assertEqual(load_config(path), original)


class ExperimentConfigFormTests(SimpleTestCase):
    def data(self, **changes):
        values = {KEY_FIELDS[k]: str(v) for k, v in settings.LAB_DEFAULTS.items()}
        values.update(changes)
        return values

    def test_defaults_are_valid(self):
        form = ExperimentConfigForm(data=self.data())
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data["ns"], (500, 2000, 8000))

    def test_repeated_n(self):
        form = ExperimentConfigForm(data=self.data(ns="100,100"))
        self.assertFalse(form.is_valid())
        self.assertIn("ns", form.errors)

    def test_non_integer_n(self):
        form = ExperimentConfigForm(data=self.data(ns="100,abc"))
        self.assertFalse(form.is_valid())
        self.assertIn("ns", form.errors)

    def test_derived_order_allowed(self):
        form = ExperimentConfigForm(data=self.data(deconv_k="0"))
        self.assertTrue(form.is_valid(), form.errors)

    def test_negative_order(self):
        form = ExperimentConfigForm(data=self.data(deconv_k="-1"))
        self.assertFalse(form.is_valid())
        self.assertIn("deconv_k", form.errors)

    def test_positive_fields(self):
        form = ExperimentConfigForm(data=self.data(resolution="0", slab_K="-2"))
        self.assertFalse(form.is_valid())
        self.assertIn("resolution", form.errors)
        self.assertIn("slab_K", form.errors)

    def test_unknown_preset(self):
        form = ExperimentConfigForm(data=self.data(preset="klein"))
        self.assertFalse(form.is_valid())
        self.assertIn("preset", form.errors)


class ExperimentConfigTests(SimpleTestCase):
    def test_n_list_must_increase(self):
        with self.assertRaises(ConfigError):
            ExperimentConfig(ns=(100, 50))

    def test_replications(self):
        with self.assertRaises(ConfigError):
            ExperimentConfig(replications=0)

    def test_abscissa_follows_noise(self):
        self.assertEqual(ExperimentConfig().abscissa, "log")
        self.assertEqual(ExperimentConfig(noise="additive").abscissa, "loglog")

    def test_mismatch_reason(self):
        self.assertIsNone(ExperimentConfig().mismatch)
        self.assertIn("additive", ExperimentConfig(estimator="deconv").mismatch)
        slab = ExperimentConfig(estimator="slab", noise="additive")
        self.assertIsNotNone(slab.mismatch)


class PresetTests(SimpleTestCase):
    def test_every_preset_builds(self):
        dims = {
            "circle": (1, 2),
            "segment": (1, 2),
            "sphere": (2, 3),
            "torus": (2, 3),
            "cosine": (1, 2),
            "bump": (1, 2),
        }
        for preset, (d, D) in dims.items():
            with self.subTest(preset=preset):
                scenario = build_scenario(ExperimentConfig(preset=preset))
                self.assertEqual(scenario.manifold.intrinsic_dim, d)
                self.assertEqual(scenario.manifold.ambient_dim, D)

    def test_clutter_box_is_bounding_box(self):
        scenario = build_scenario(ExperimentConfig(noise="clutter", pi=0.5))
        self.assertIsInstance(scenario.model, Clutter)
        self.assertIs(scenario.model.box, scenario.manifold.bounding_box)

    def test_deconv_circle_radius(self):
        config = ExperimentConfig(noise="additive", estimator="deconv")
        points = build_scenario(config).manifold.discretize(1e-2).points
        np.testing.assert_allclose(np.linalg.norm(points, axis=1), 4.0, atol=1e-9)


class RiskTableTests(SimpleTestCase):
    def test_summary_matches_recomputation(self):
        losses = {10: [3.0, 1.0, 2.0, 4.0], 20: [0.5, 0.25, 0.75, 1.5]}
        rows = [
            RiskRow(n, rep, loss)
            for n, values in losses.items()
            for rep, loss in enumerate(values)
        ]
        summary = RiskTable(tuple(rows)).summary()
        for entry in summary:
            values = np.array(losses[entry["n"]])
            self.assertEqual(entry["median"], np.median(values))
            self.assertEqual(entry["mean"], values.mean())
            self.assertEqual(entry["reps"], 4)
        self.assertEqual(summary[0]["q1"], 1.75)
        self.assertEqual(summary[0]["iqr"], 1.5)

    def test_rows_sorted(self):
        rows = (RiskRow(20, 1, 1.0), RiskRow(10, 0, 2.0), RiskRow(20, 0, 3.0))
        order = [(r.n, r.rep) for r in RiskTable(rows).rows]
        self.assertEqual(order, [(10, 0), (20, 0), (20, 1)])

    def test_negative_loss(self):
        with self.assertRaises(ParameterError):
            RiskTable((RiskRow(10, 0, -1.0),))


class RateFitTests(SimpleTestCase):
    def test_planted_inverse_square(self):
        fit = rate_fit(planted_table(lambda n: n**-2.0))
        self.assertAlmostEqual(fit.slope, -2.0, places=10)
        self.assertAlmostEqual(fit.stderr, 0.0, places=8)

    def test_constant_loss(self):
        fit = rate_fit(planted_table(lambda n: 0.3))
        self.assertAlmostEqual(fit.slope, 0.0, places=12)

    def test_log_log_abscissa(self):
        table = planted_table(lambda n: 1 / math.log(n), abscissa="loglog")
        fit = rate_fit(table)
        self.assertEqual(fit.abscissa, "loglog")
        self.assertAlmostEqual(fit.slope, -1.0, places=10)

    def test_needs_three_sizes(self):
        with self.assertRaises(ParameterError):
            rate_fit(planted_table(lambda n: 1 / n, ns=(10, 100)))

    def test_degenerate_fit(self):
        with self.assertRaisesMessage(ParameterError, "degenerate fit"):
            rate_fit(planted_table(lambda n: 0.0))


class RunExperimentTests(SimpleTestCase):
    def test_single_row_matches_recomputation(self):
        config = ExperimentConfig(ns=(100,), replications=1, seed=11)
        table = run_experiment(config)
        self.assertEqual(len(table), 1)
        manifold = circle()
        draws = sample_on_manifold(
            ManifoldDistribution.uniform(manifold), 100, SeedRecord(11, 0, 0)
        )
        expected = hausdorff_distance(draws.observed, manifold.discretize(1e-3))
        self.assertEqual(table.rows[0].loss, expected)

    def test_bytes_independent_of_threads(self):
        config = ExperimentConfig(ns=(50, 100), replications=3, seed=4)
        with tempfile.TemporaryDirectory() as folder:
            paths = []
            for index, threads in enumerate((1, 4, 1)):
                table = run_experiment(config.replace(threads=threads))
                paths.append(write_risk_csv(table, Path(folder) / f"{index}.csv"))
            contents = [path.read_bytes() for path in paths]
        self.assertEqual(contents[0], contents[1])
        self.assertEqual(contents[0], contents[2])

    def test_full_clutter_weight_recovers_noiseless(self):
        base = ExperimentConfig(ns=(80, 160), replications=2, seed=21)
        noiseless = run_experiment(base)
        clutter = run_experiment(base.replace(noise="clutter", pi=1.0))
        self.assertEqual(
            [r.loss for r in noiseless.rows], [r.loss for r in clutter.rows]
        )

    def test_seed_changes_losses_not_shape(self):
        base = ExperimentConfig(ns=(60, 120), replications=2, seed=1)
        first, second = run_experiment(base), run_experiment(base.replace(seed=2))
        self.assertEqual(len(first), len(second))
        self.assertEqual(first.ns, second.ns)
        self.assertNotEqual(
            [r.loss for r in first.rows], [r.loss for r in second.rows]
        )

    def test_mismatch(self):
        with self.assertRaises(ConfigError):
            run_experiment(ExperimentConfig(estimator="deconv"))

    def test_slab_picks_truth(self):
        config = ExperimentConfig(estimator="slab", ns=(2000,), seed=3)
        table = run_experiment(config)
        self.assertLess(table.rows[0].loss, 1e-6)

    def test_empty_estimate_scores_diameter(self):
        config = ExperimentConfig()
        scenario = build_scenario(config)
        loss = replication_loss(config, scenario, PointCloud.empty(2), None)
        self.assertEqual(loss, scenario.box.diameter)

    def test_estimate_outside_box_scores_diameter(self):
        config = ExperimentConfig(noise="additive")
        scenario = build_scenario(config)
        far = PointCloud([[100.0, 100.0]])
        loss = replication_loss(config, scenario, far, None)
        self.assertEqual(loss, scenario.box.diameter)

    @tag("slow")
    def test_circle_rate_matches_max_gap(self):
        config = ExperimentConfig(
            ns=(500, 2000, 8000), replications=50, seed=5, resolution=1e-4
        )
        fit = rate_fit(run_experiment(config.replace(threads=4)))
        # The loss is half the largest spacing, whose median is
        # (2 pi / n)(log n - log log 2).
        ns = np.array(config.ns, dtype=float)
        oracle = linregress(np.log(ns), np.log((np.log(ns) + 0.3665) / ns)).slope
        self.assertLess(abs(fit.slope - oracle), 0.08)
        self.assertLess(abs(fit.slope + 1.0), 0.2)

    @tag("slow")
    def test_slab_fit_beats_baseline(self):
        base = ExperimentConfig(ns=(4000,), replications=5, seed=8, threads=4)
        slab = run_experiment(base.replace(estimator="slab"))
        baseline = run_experiment(base)
        self.assertLessEqual(slab.medians()[0], baseline.medians()[0])


class ReportTests(SimpleTestCase):
    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.addCleanup(self.folder.cleanup)
        self.out = Path(self.folder.name)
        self.table = RiskTable(
            tuple(
                RiskRow(n, rep, 1.0 / (n + rep), 0.125 * rep)
                for n in (10, 20, 40)
                for rep in range(3)
            ),
            params={"model.preset": "circle"},
        )

    def test_empty_table_writes_header_only(self):
        path = write_risk_csv(RiskTable(()), self.out / "empty.csv")
        self.assertEqual(path.read_text(), "n,rep,loss\n")

    def test_read_back(self):
        emit_reports(self.table, self.out)
        loaded = read_risk_csv(self.out / "risk.csv", self.out / "timings.csv")
        self.assertEqual(loaded.rows, self.table.rows)

    def test_summary_csv_medians(self):
        emit_reports(self.table, self.out)
        with (self.out / "risk_summary.csv").open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        for row in rows:
            n = int(row["n"])
            losses = [1.0 / (n + rep) for rep in range(3)]
            self.assertEqual(float(row["median"]), float(np.median(losses)))

    def test_summary_json_and_text(self):
        fit = rate_fit(self.table)
        emit_reports(self.table, self.out, fit)
        payload = json.loads((self.out / "risk_summary.json").read_text())
        self.assertAlmostEqual(payload["fit"]["slope"], fit.slope)
        self.assertEqual(payload["rows"], 9)
        text = (self.out / "risk_summary.txt").read_text()
        self.assertIn("model.preset = circle", text)
        self.assertIn("RATE FIT", text)

    def test_additive_summary_has_reference_curves(self):
        table = RiskTable(self.table.rows, abscissa="loglog")
        text = render_summary(table)
        self.assertIn("1/sqrt(log n)", text)

    def test_lower_bound_tables(self):
        tv = TVTable([0.4, 0.2], [0.1, 0.01], [1e-6, 1e-7])
        path = write_tv_table(tv, self.out / "tv.csv")
        self.assertEqual(path.read_text().splitlines()[0], "gamma,tv,err")
        bounds = [RateBound(10, 0.1, 0.001), RateBound(100, 0.05, 0.0004)]
        lines = write_bound_curve(bounds, self.out / "bound.csv").read_text()
        self.assertEqual(lines.splitlines()[1], "10,0.1,0.001")

    def test_unwritable_directory(self):
        blocker = self.out / "blocker"
        blocker.write_text("")
        with self.assertRaises(ConfigError):
            emit_reports(self.table, blocker / "reports")


class CommandTests(SimpleTestCase):
    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.addCleanup(self.folder.cleanup)
        self.out = Path(self.folder.name)

    def call(self, *args):
        stdout = StringIO()
        call_command(*args, "--out", str(self.out), stdout=stdout)
        return stdout.getvalue()

    def test_sample(self):
        self.call("sample", "--n", "120", "--seed", "3")
        dataset = read_dataset(self.out / "sample.csv")
        self.assertEqual(len(dataset), 120)

    def test_hausdorff_between_files(self):
        manifold = circle()
        dist = ManifoldDistribution.uniform(manifold)
        a = sample_on_manifold(dist, 50, SeedRecord(1))
        b = sample_on_manifold(dist, 70, SeedRecord(2))
        write_dataset(a, self.out / "a.csv")
        write_dataset(b, self.out / "b.csv")
        self.call(
            "hausdorff", "--a", str(self.out / "a.csv"), "--b", str(self.out / "b.csv")
        )
        payload = json.loads((self.out / "hausdorff.json").read_text())
        self.assertEqual(
            payload["hausdorff"],
            hausdorff_distance(
                read_dataset(self.out / "a.csv").observed,
                read_dataset(self.out / "b.csv").observed,
            ),
        )

    def test_rates(self):
        config = write_config(
            self.folder.name, "experiment.n = 20,40,80\nexperiment.replications = 2\n"
        )
        output = self.call("rates", "--config", str(config))
        self.assertIn("RATE FIT", output)
        for name in ("risk.csv", "timings.csv", "risk_summary.json"):
            self.assertTrue((self.out / name).is_file(), name)
        self.assertEqual(len(read_risk_csv(self.out / "risk.csv")), 6)

    def test_lecam_bump(self):
        self.call("lecam", "--gamma", "0.01")
        payload = json.loads((self.out / "divergence.json").read_text())
        self.assertGreater(payload["tv"], 0.0)
        self.assertIn("lecam_bound", payload)
        self.assertTrue((self.out / "validation.json").is_file())

    def test_config_error_exit_code(self):
        config = write_config(self.folder.name, "model.pi = 2\n")
        with self.assertRaises(CommandError) as caught:
            self.call("rates", "--config", str(config))
        self.assertEqual(caught.exception.returncode, 2)

    def test_mismatch_exit_code(self):
        with self.assertRaises(CommandError) as caught:
            self.call("estimate_deconv")
        self.assertEqual(caught.exception.returncode, 2)

    def test_numeric_floor_exit_code(self):
        config = write_config(self.folder.name, "model.noise = additive\n")
        with self.assertRaises(CommandError) as caught:
            self.call(
                "estimate_deconv", "--config", str(config), "--bandwidth", "0.02"
            )
        self.assertEqual(caught.exception.returncode, 3)

    def test_lab_error_exit_code(self):
        with self.assertRaises(CommandError) as caught:
            self.call("lecam", "--gamma", "0.01", "--gammas", "0.01,0.02,0.03,0.04")
        self.assertEqual(caught.exception.returncode, 1)
