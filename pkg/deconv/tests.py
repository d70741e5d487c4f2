import math

from django.test import SimpleTestCase, tag

import numpy as np
from numpy.testing import assert_allclose
from scipy.spatial import cKDTree
from scipy.stats import linregress

from geometry.manifolds import circle, line, segment
from geometry.metrics import clip_to_box
from geometry.models import Box, Grid, PointCloud
from manifold_lab.exceptions import (
    CalibrationError,
    GeometryError,
    NumericFloorError,
    ParameterError,
)
from sampling.models import AtomicDistribution, ManifoldDistribution
from sampling.random import SeedRecord
from sampling.samplers import sample_additive

from .estimator import (
    calibrate_constants,
    charfn_sup_deviation,
    empirical_charfn,
    estimate_manifold,
    extract_levelset,
    gbar_at,
    gbar_oracle,
    ghat_at,
    ghat_field,
    ghat_fourier,
    level_grid,
    select_bandwidth,
    select_threshold,
    truncated_loss,
)
from .kernels import build_kernel, forward_transform, make_psi
from .models import Calibration, DensityField


class PsiKernelTests(SimpleTestCase):
    def test_unit_value_at_origin(self):
        for k in (1, 2, 3):
            self.assertAlmostEqual(float(make_psi(k).spatial(0.0)), 1.0)

    def test_spectral_support(self):
        for k in (1, 2, 3):
            psi = make_psi(k)
            self.assertEqual(float(psi.spectral(1.0001)), 0.0)
            t = np.linspace(-2, 2, 10000)
            values = psi.spectral(t)
            self.assertTrue(np.all(values[np.abs(t) > 1] == 0))
            self.assertTrue(np.all(values >= 0))
            self.assertTrue(np.all(psi.spatial(40 * t) >= 0))

    def test_first_spatial_zero(self):
        for k in (1, 2, 3):
            psi = make_psi(k)
            y = np.linspace(0.5 * psi.first_zero, 1.5 * psi.first_zero, 100001)
            values = psi.spatial(y)
            location = y[np.argmin(values)]
            self.assertAlmostEqual(location, 2 * k * math.pi, delta=y[1] - y[0])
            self.assertLess(values.min(), 1e-12)

    def test_spatial_side_transforms_back(self):
        for k in (1, 2, 3):
            psi = make_psi(k)
            t = np.linspace(-1, 1, 21)
            recovered = np.array([forward_transform(psi, value) for value in t])
            assert_allclose(recovered, psi.spectral(t), atol=1e-6)

    def test_recorded_checks(self):
        checks = make_psi(2).checks
        self.assertLess(checks["mass_error"], 1e-8)
        self.assertLess(checks["transform_error"], 1e-8)

    def test_invalid_order(self):
        with self.assertRaises(ParameterError):
            make_psi(0)


class CharacteristicFunctionTests(SimpleTestCase):
    def test_zero_frequency(self):
        cloud = PointCloud(np.random.default_rng(1).normal(size=(20, 2)))
        self.assertAlmostEqual(abs(empirical_charfn(cloud, [0.0, 0.0]) - 1), 0.0)

    def test_point_at_origin(self):
        cloud = PointCloud([[0.0, 0.0]])
        t = np.random.default_rng(2).normal(size=(10, 2))
        assert_allclose(empirical_charfn(cloud, t), 1.0)

    def test_symmetric_pair(self):
        y0 = np.array([0.3, -1.2])
        cloud = PointCloud([y0, -y0])
        t = np.random.default_rng(3).normal(size=(10, 2))
        assert_allclose(empirical_charfn(cloud, t), np.cos(t @ y0), atol=1e-15)

    def test_modulus_bounded(self):
        cloud = PointCloud(np.random.default_rng(4).normal(size=(50, 3)))
        t = np.random.default_rng(5).normal(size=(100, 3))
        self.assertTrue(np.all(np.abs(empirical_charfn(cloud, t)) <= 1 + 1e-12))

    def test_empty_cloud(self):
        with self.assertRaises(GeometryError):
            empirical_charfn(PointCloud.empty(2), [0.0, 0.0])


class KernelTableTests(SimpleTestCase):
    def test_identity_deconvolution(self):
        h, k = 0.5, 2
        table = build_kernel(h, k, 1, 10.0, deconvolve=False)
        expected = make_psi(k).spatial(table.radii / h) / (2 * math.pi * h)
        assert_allclose(table.values, expected, atol=1e-6)

    def test_total_mass_is_spectral_origin(self):
        h, k = 0.5, 2
        table = build_kernel(h, k, 1, 60.0)
        total = table.spacing * (2 * table.values.sum() - table.values[0])
        expected = float(make_psi(k).spectral(0.0))
        self.assertAlmostEqual(expected, 4 / 3)
        self.assertAlmostEqual(total, expected, delta=1e-3 * expected)

    def test_even_kernel(self):
        table = build_kernel(0.4, 2, 2, 6.0)
        cloud = PointCloud([[0.0, 0.0]])
        y = np.random.default_rng(6).uniform(-2, 2, size=(25, 2))
        assert_allclose(
            ghat_at(cloud, y, 0.4, 2, table),
            ghat_at(cloud, -y, 0.4, 2, table),
            atol=1e-10,
        )

    def test_numeric_floor(self):
        message = "bandwidth below numeric floor"
        with self.assertRaisesMessage(NumericFloorError, message):
            build_kernel(0.02, 2, 2)

    def test_bandwidth_range(self):
        with self.assertRaises(ParameterError):
            build_kernel(1.5, 2, 2)

    def test_envelope_recorded(self):
        table = build_kernel(0.3, 2, 2, 8.0)
        self.assertGreater(table.envelope_radius, 0.0)


class GhatTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(21)
        self.cloud = PointCloud(rng.normal(size=(40, 2)))
        self.other = PointCloud(rng.normal(size=(25, 2)) + 0.5)
        self.grid = Grid(Box([-2.0, -2.0], [2.0, 2.0]), (9, 9))
        self.table = build_kernel(0.5, 2, 2, 16.0)

    def test_single_observation(self):
        grid = Grid(Box([-3.0], [3.0]), (61,))
        table = build_kernel(0.5, 2, 1, 8.0)
        field = ghat_field(PointCloud([[0.0]]), grid, 0.5, 2, table)
        assert_allclose(field.flat, table(np.abs(grid.points()[:, 0])))

    def test_linearity(self):
        merged = self.cloud.union(self.other)
        fields = [
            ghat_field(cloud, self.grid, 0.5, 2, self.table).flat
            for cloud in (self.cloud, self.other, merged)
        ]
        expected = (40 * fields[0] + 25 * fields[1]) / 65
        assert_allclose(fields[2], expected, atol=1e-10)

    def test_translation_equivariance(self):
        shift = np.array([0.37, -1.1])
        moved = ghat_field(
            self.cloud.translated(shift), self.grid.shifted(shift), 0.5, 2, self.table
        )
        still = ghat_field(self.cloud, self.grid, 0.5, 2, self.table)
        assert_allclose(moved.flat, still.flat, atol=1e-9)

    def test_thread_count_does_not_change_values(self):
        single = ghat_field(self.cloud, self.grid, 0.5, 2, self.table, threads=1)
        pooled = ghat_field(self.cloud, self.grid, 0.5, 2, self.table, threads=4)
        np.testing.assert_array_equal(single.flat, pooled.flat)

    def test_short_table_is_extended(self):
        short = build_kernel(0.5, 2, 2, 1.0)
        field = ghat_field(self.cloud, self.grid, 0.5, 2, short)
        full = ghat_field(self.cloud, self.grid, 0.5, 2, self.table)
        assert_allclose(field.flat, full.flat, atol=1e-6)

    def test_fourier_path_agrees(self):
        cloud = PointCloud(np.random.default_rng(8).normal(size=(30, 1)))
        grid = Grid(Box([-3.0], [3.0]), (41,))
        kernel = ghat_field(cloud, grid, 0.5, 2)
        fourier = ghat_fourier(cloud, grid, 0.5, 2, t_spacing=0.05)
        self.assertLessEqual(np.abs(kernel.flat - fourier.flat).max(), 1e-4)
        self.assertLessEqual(fourier.imaginary_residue, 1e-8)


class GbarTests(SimpleTestCase):
    def test_point_mass(self):
        y0 = np.array([0.2, -0.1])
        dist = AtomicDistribution.point_mass(y0)
        y = np.array([[0.5, 0.5], [0.2, -0.1], [-1.0, 0.3]])
        h, k = 0.3, 2
        expected = make_psi(k).radial_profile(
            np.linalg.norm(y - y0, axis=1) / h, 2
        ) / (2 * math.pi * h) ** 2
        assert_allclose(gbar_oracle(dist, y, h, k), expected, rtol=1e-12)
        assert_allclose(gbar_at(dist, y, h, k), expected, rtol=1e-4)

    def test_on_manifold_scaling(self):
        dist = ManifoldDistribution.uniform(circle())
        bandwidths = np.array([0.4, 0.3, 0.2, 0.15])
        values = [gbar_oracle(dist, [1.0, 0.0], h, 2) for h in bandwidths]
        fit = linregress(np.log(bandwidths), np.log(values))
        self.assertAlmostEqual(fit.slope, -1.0, delta=0.15)

    def test_line_limit_suppression(self):
        h, k = 0.2, 2
        dist = ManifoldDistribution.uniform(segment(40.0))
        on = gbar_oracle(dist, [0.0, 0.0], h, k)
        for offset in (0.1, 0.3, 4 * h ** 0.75):
            ratio = gbar_oracle(dist, [0.0, offset], h, k) / on
            expected = float(make_psi(k).spatial(offset / h))
            self.assertAlmostEqual(ratio, expected, delta=1e-3)

    def test_suppression_grows_with_tube_factor(self):
        h, k = 0.2, 2
        dist = ManifoldDistribution.uniform(segment(40.0))
        values = [gbar_oracle(dist, [0.0, L * h ** 0.75], h, k) for L in (1, 2, 4)]
        self.assertTrue(values[0] > values[1] > values[2] > 0)


class BandwidthTests(SimpleTestCase):
    def test_arithmetic(self):
        self.assertAlmostEqual(select_bandwidth(math.exp(4)), 0.5)
        self.assertAlmostEqual(select_bandwidth(math.e), 1.0)

    def test_decreasing(self):
        values = [select_bandwidth(n) for n in (10, 100, 1000, 10**6)]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_needs_n_above_one(self):
        with self.assertRaises(ParameterError):
            select_bandwidth(1)


class ThresholdTests(SimpleTestCase):
    def setUp(self):
        self.calibration = Calibration(
            c_prime=0.05, c_double_prime=0.4, order=2, tube_factor=4.0, delta=0.25
        )

    def test_homogeneity(self):
        first = select_threshold(0.4, 2, 1, 2, 4.0, self.calibration)
        second = select_threshold(0.2, 2, 1, 2, 4.0, self.calibration)
        self.assertAlmostEqual(second.value / first.value, 2.0)

    def test_inside_bracket(self):
        threshold = select_threshold(0.3, 2, 1, 2, 4.0, self.calibration)
        self.assertLess(threshold.lower, threshold.value)
        self.assertLess(threshold.value, threshold.upper)

    def test_full_dimensional_support(self):
        with self.assertRaises(CalibrationError):
            select_threshold(0.3, 2, 2, 2, 4.0, self.calibration)

    def test_empty_bracket(self):
        with self.assertRaisesMessage(CalibrationError, "k or L too small"):
            select_threshold(0.3, 2, 1, 2, 1.0, self.calibration)


class CalibrationTests(SimpleTestCase):
    def setUp(self):
        self.dist = ManifoldDistribution.uniform(circle(4.0))

    def test_order_below_hypothesis(self):
        with self.assertRaises(CalibrationError):
            calibrate_constants(self.dist, [0.5], 1, 4.0, 0.25)

    def test_circle_constants(self):
        calibration = calibrate_constants(self.dist, [0.5, 0.4], 2, 4.0, 0.25, seed=1)
        self.assertGreater(calibration.c_prime, 0.0)
        self.assertTrue(math.isfinite(calibration.c_double_prime))
        threshold = select_threshold(0.4, 2, 1, 2, 4.0, calibration)
        self.assertLess(threshold.lower, threshold.value)
        self.assertLess(threshold.value, threshold.upper)

    def test_wider_tube_lowers_off_bound(self):
        narrow = calibrate_constants(self.dist, [0.5], 2, 4.0, 0.25, seed=1)
        wide = calibrate_constants(self.dist, [0.5], 2, 6.0, 0.25, seed=1)
        self.assertLessEqual(
            wide.c_double_prime * 6.0**-4,
            (1 + 1e-6) * narrow.c_double_prime * 4.0**-4,
        )


class LevelSetTests(SimpleTestCase):
    def setUp(self):
        grid = Grid(Box([0.0, 0.0], [2.0, 1.0]), (3, 2))
        self.field = DensityField(grid, [[0.1, 0.7], [0.4, 0.9], [0.2, 0.5]])

    def test_above_maximum(self):
        self.assertTrue(extract_levelset(self.field, 1.0).is_empty)

    def test_below_minimum(self):
        self.assertEqual(len(extract_levelset(self.field, 0.0)), 6)

    def test_hand_listed_cells(self):
        cells = extract_levelset(self.field, 0.45).points
        assert_allclose(cells, [[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]])

    def test_strict_threshold(self):
        self.assertEqual(len(extract_levelset(self.field, 0.9)), 0)

    def test_monotone_in_level(self):
        low = {tuple(p) for p in extract_levelset(self.field, 0.3).points}
        high = {tuple(p) for p in extract_levelset(self.field, 0.6).points}
        self.assertTrue(high <= low)


class TruncatedLossTests(SimpleTestCase):
    def test_discretised_truth(self):
        manifold = circle()
        box = Box.cube(2.0, 2)
        loss = truncated_loss(manifold, manifold.discretize(1e-3), box, 1e-3)
        self.assertLessEqual(loss.value, loss.bound)

    def test_differences_outside_box_are_ignored(self):
        manifold = line()
        box = Box.cube(1.0, 2)
        estimate = manifold.discretize(1e-3).union(PointCloud([[0.0, 3.0], [2.0, 2.0]]))
        self.assertLessEqual(truncated_loss(manifold, estimate, box, 1e-3).value, 1e-3)

    def test_concentric_circles(self):
        estimate = circle(1.1).discretize(1e-3)
        loss = truncated_loss(circle(), estimate, Box.cube(2.0, 2), 1e-3)
        self.assertAlmostEqual(loss.value, 0.1, delta=loss.bound)

    def test_empty_estimate(self):
        with self.assertRaisesMessage(GeometryError, "empty truncated set"):
            truncated_loss(circle(), PointCloud([[5.0, 5.0]]), Box.cube(2.0, 2), 1e-3)

    def test_bound_includes_half_cell_diagonal(self):
        manifold = circle()
        box = Box.cube(2.0, 2)
        grid = Grid(box, (41, 41))
        estimate = manifold.discretize(1e-3)
        plain = truncated_loss(manifold, estimate, box, 1e-3)
        gridded = truncated_loss(manifold, estimate, box, 1e-3, grid=grid)
        self.assertAlmostEqual(plain.bound, 1e-3)
        self.assertAlmostEqual(gridded.bound, 1e-3 + 0.05 * math.sqrt(2))
        self.assertEqual(gridded.value, plain.value)


@tag("slow")
class CircleEstimatorTests(SimpleTestCase):
    """The full level-set pipeline on the radius-4 circle under N(0, I) noise."""

    radius = 4.0
    sizes = (1000, 4000, 16000)

    def test_sandwich_and_shrinking_loss(self):
        manifold = circle(self.radius)
        dist = ManifoldDistribution.uniform(manifold)
        box = manifold.bounding_box
        k, L, delta = 2, 4.0, 0.25
        fine_truth = manifold.discretize(2.5e-4).points
        medians = []
        for index, n in enumerate(self.sizes):
            h = select_bandwidth(n)
            calibration = calibrate_constants(
                dist, [h], k, L, delta, seed=SeedRecord(5, index), box=box
            )
            threshold = select_threshold(h, 2, 1, k, L, calibration)
            grid = level_grid(box, h, delta)
            losses = []
            for rep in range(3):
                cloud = sample_additive(dist, n, SeedRecord(5, index, rep)).observed
                _, estimate = estimate_manifold(cloud, grid, h, k, threshold)
                loss = truncated_loss(manifold, estimate, box, 1e-3, grid=grid)
                cells = clip_to_box(estimate, box).points
                off_circle = np.abs(np.linalg.norm(cells, axis=1) - self.radius)
                self.assertLessEqual(off_circle.max(), loss.value + 1e-9)
                uncovered, _ = cKDTree(cells).query(fine_truth)
                self.assertLessEqual(uncovered.max(), loss.value + 1e-3)
                losses.append(loss.value)
            medians.append(float(np.median(losses)))
        self.assertEqual(medians, sorted(medians, reverse=True))
        self.assertLess(medians[-1], medians[0])


class DeviationTests(SimpleTestCase):
    def setUp(self):
        self.dist = ManifoldDistribution.uniform(circle())

    def test_plug_in_truth(self):
        atoms = AtomicDistribution.gaussian_convolution(self.dist, order=16).atoms()
        self.assertLess(charfn_sup_deviation(atoms, self.dist, 0.5, 0.1), 1e-6)

    @tag("slow")
    def test_deviation_shrinks_with_n(self):
        sizes = [1000, 4000]
        medians = []
        for index, n in enumerate(sizes):
            values = [
                charfn_sup_deviation(
                    sample_additive(self.dist, n, SeedRecord(31, index, rep)).observed,
                    self.dist,
                    0.5,
                    0.1,
                )
                for rep in range(50)
            ]
            medians.append(np.median(values))
        self.assertLess(medians[1], medians[0])
        slope = math.log(medians[1] / medians[0]) / math.log(sizes[1] / sizes[0])
        self.assertAlmostEqual(slope, -0.5, delta=0.15)


class ExpectationTests(SimpleTestCase):
    @tag("slow")
    def test_ghat_mean_matches_gbar(self):
        h, k, n, reps = 0.4, 2, 500, 200
        dist = ManifoldDistribution.uniform(circle())
        angle = np.linspace(0, 2 * np.pi, 10, endpoint=False)
        queries = np.vstack(
            [
                np.column_stack([np.cos(angle), np.sin(angle)]),
                1.4 * np.column_stack([np.cos(angle + 0.3), np.sin(angle + 0.3)]),
            ]
        )
        table = build_kernel(h, k, 2, 16.0)

        def observed(rep):
            return sample_additive(dist, n, SeedRecord(41, rep)).observed

        draws = np.array(
            [
                ghat_at(observed(rep), queries, h, k, table)
                for rep in range(reps)
            ]
        )
        mean = draws.mean(axis=0)
        error = draws.std(axis=0, ddof=1) / math.sqrt(reps)
        expected = gbar_oracle(dist, queries, h, k)
        self.assertGreaterEqual(int(np.sum(np.abs(mean - expected) <= 3 * error)), 19)
