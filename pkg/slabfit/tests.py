import math

from django.test import SimpleTestCase, tag

import numpy as np
from numpy.testing import assert_allclose
from scipy.optimize import brentq

from geometry.manifolds import circle, rigid_transform, segment, tabulated_curve
from geometry.metrics import manifold_hausdorff
from geometry.models import Box, PointCloud, Slab
from geometry.slabs import build_slab
from manifold_lab.exceptions import GeometryError, ParameterError
from sampling.models import Additive, Clutter, ManifoldDistribution
from sampling.random import SeedRecord
from sampling.samplers import sample_clutter, sample_on_manifold

from .bounds import (
    box_fraction,
    deviation_check,
    deviation_constant,
    slab_vc_dimension,
    vc_beta,
)
from .models import CandidateFamily
from .scoring import epsilon_n, fit, offset_family, slab_score


class EpsilonTests(SimpleTestCase):
    def test_two_dimensional_exponent(self):
        n, K = 1000, 8.0
        self.assertAlmostEqual(epsilon_n(n, 2, K), K * math.log(n) / n)

    def test_curve_value(self):
        n = brentq(lambda x: math.log(x) / x - 1e-2, 100, 2000)
        self.assertAlmostEqual(epsilon_n(n, 1, 1.0), 1e-4, places=12)

    def test_decreasing_in_n(self):
        values = [epsilon_n(n, 1, 8.0) for n in range(3, 200)]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))

    def test_invalid_arguments(self):
        with self.assertRaises(ParameterError):
            epsilon_n(1, 1, 8.0)
        with self.assertRaises(ParameterError):
            epsilon_n(100, 1, 0.0)


class SlabScoreTests(SimpleTestCase):
    def setUp(self):
        self.manifold = circle()
        self.dist = ManifoldDistribution.uniform(self.manifold)
        self.cloud = sample_on_manifold(self.dist, 300, SeedRecord(5)).observed

    def test_empty_region(self):
        cloud = PointCloud([[10.0, 10.0], [-9.0, 8.0]])
        score = slab_score(self.manifold, cloud, 0.01, 1.0, 1.0)
        self.assertEqual(score.value, 0.0)

    def test_dense_net_on_manifold(self):
        cloud = self.manifold.discretize(1e-3)
        score = slab_score(self.manifold, cloud, 0.01, 1.0, 1.0)
        self.assertGreater(score.value, 0.0)
        self.assertLessEqual(score.value, 1.0)

    def test_net_too_coarse(self):
        with self.assertRaisesMessage(GeometryError, "too coarse"):
            slab_score(self.manifold, self.cloud, 0.01, 1.0, 1.0, net_spacing=0.1)

    def test_refining_never_increases(self):
        coarse = slab_score(
            self.manifold, self.cloud, 0.01, 1.0, 1.0, net_spacing=2 * math.pi / 200
        )
        fine = slab_score(
            self.manifold, self.cloud, 0.01, 1.0, 1.0, net_spacing=2 * math.pi / 400
        )
        self.assertLessEqual(fine.value, coarse.value)

    def test_rigid_motion_invariance(self):
        angle = 0.9
        rotation = np.array(
            [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
        )
        shift = np.array([0.4, -1.3])
        moved = rigid_transform(self.manifold, rotation, shift)
        still = slab_score(self.manifold, self.cloud, 0.01, 1.0, 1.0)
        turned = slab_score(
            moved, self.cloud.transformed(rotation, shift), 0.01, 1.0, 1.0
        )
        self.assertAlmostEqual(still.value, turned.value, delta=1e-10)

    def test_dimension_mismatch(self):
        with self.assertRaises(GeometryError):
            slab_score(self.manifold, PointCloud([[0.0, 0.0, 0.0]]), 0.01, 1.0, 1.0)

    def test_reported_coverage(self):
        score = slab_score(self.manifold, self.cloud, 0.01, 1.0, 1.0)
        self.assertAlmostEqual(score.coverage, 0.5)
        self.assertAlmostEqual(np.linalg.norm(score.point), 1.0)


class FitTests(SimpleTestCase):
    def setUp(self):
        self.manifold = circle()
        self.dist = ManifoldDistribution.uniform(self.manifold)
        self.cloud = sample_on_manifold(self.dist, 2000, SeedRecord(9)).observed

    def test_singleton_family(self):
        result = fit(CandidateFamily((self.manifold,)), self.cloud)
        self.assertEqual(result.chosen, 0)
        self.assertIs(result.manifold, self.manifold)

    def test_duplicate_candidates_tie(self):
        family = CandidateFamily((self.manifold, self.manifold))
        result = fit(family, self.cloud)
        self.assertEqual(result.scores[0].value, result.scores[1].value)
        self.assertTrue(result.tie)
        self.assertEqual(result.chosen, 0)

    def test_no_support(self):
        far = PointCloud(np.full((50, 2), 20.0))
        result = fit(offset_family(self.manifold, 0.05), far)
        self.assertTrue(result.no_support)
        self.assertEqual(result.chosen, 0)

    def test_true_circle_beats_offsets(self):
        eps = epsilon_n(len(self.cloud), 1, 8.0)
        family = offset_family(self.manifold, 2 * math.sqrt(eps))
        result = fit(family, self.cloud)
        self.assertEqual(result.chosen, 0)
        self.assertFalse(result.no_support)
        self.assertTrue(np.all(result.values[1:] < result.values[0]))

    def test_threads_do_not_change_scores(self):
        family = offset_family(self.manifold, 0.05)
        single = fit(family, self.cloud, threads=1)
        pooled = fit(family, self.cloud, threads=4)
        np.testing.assert_array_equal(single.values, pooled.values)

    def test_report_fields(self):
        report = fit(offset_family(self.manifold, 0.05, count=4), self.cloud).as_dict()
        self.assertEqual(len(report["scores"]), 5)
        for key in ("epsilon_n", "chosen", "tie", "no_support", "net_spacing"):
            self.assertIn(key, report)


class CandidateFamilyTests(SimpleTestCase):
    def test_offsets_sit_at_requested_distance(self):
        family = offset_family(circle(), 0.1)
        self.assertEqual(len(family), 9)
        for index in (1, 4, 7):
            estimate = manifold_hausdorff(family[0], family[index], 1e-3)
            self.assertAlmostEqual(estimate.value, 0.1, delta=estimate.bound)

    def test_offsets_pass_reach_check(self):
        offset_family(circle(), 0.1).validate()

    def test_member_failing_reach(self):
        theta = np.linspace(-np.pi / 2, 3 * np.pi / 2, 401)
        points = np.column_stack([np.cos(theta), 0.05 * np.sin(theta)])
        thin = tabulated_curve(theta, points, reach_floor=0.5)
        with self.assertRaises(GeometryError):
            CandidateFamily((thin,)).validate()

    def test_mixed_dimensions(self):
        with self.assertRaises(GeometryError):
            CandidateFamily((circle(), circle(dim=3)))

    def test_empty_family(self):
        with self.assertRaises(GeometryError):
            CandidateFamily(())


class BoundsTests(SimpleTestCase):
    def setUp(self):
        self.manifold = circle()
        self.dist = ManifoldDistribution.uniform(self.manifold)

    def test_beta_arithmetic(self):
        expected = math.sqrt(0.04 * (math.log(200) + math.log(16)))
        self.assertAlmostEqual(vc_beta(100, 1, 0.5), expected)

    def test_beta_monotonicity(self):
        self.assertLess(vc_beta(100, 2, 0.1), vc_beta(100, 4, 0.1))
        values = [vc_beta(n, 4, 0.05) for n in (10, 100, 1000, 10**4, 10**6)]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_beta_invalid(self):
        with self.assertRaises(ParameterError):
            vc_beta(100, 1, 1.0)

    def test_constant(self):
        self.assertEqual(deviation_constant(4, 1.0), 28.0)
        self.assertEqual(deviation_constant(4, 5.0), 36.0)

    def test_rotated_slab_vc_dimension(self):
        # Oriented rectangles in the plane shatter 7 points, more than 2D = 4.
        self.assertEqual(slab_vc_dimension(2), 87)
        self.assertEqual(slab_vc_dimension(3), 201)
        for dim in (1, 2, 3, 4):
            self.assertGreaterEqual(slab_vc_dimension(dim), 2 * dim + 3)
        with self.assertRaises(ParameterError):
            slab_vc_dimension(0)

    def test_default_dimension_covers_rotations(self):
        cloud = PointCloud([[0.0, 1.0], [1.0, 0.0], [0.0, -1.0]])
        far = Slab([5.0, 5.0], [[1.0, 0.0]], [[0.0, 1.0]], 0.1, 0.01)
        report = deviation_check(cloud, self.dist, [far])
        self.assertEqual(report.vc_dim, slab_vc_dimension(2))
        self.assertEqual(report.constant, deviation_constant(87, 1.0))
        explicit = deviation_check(cloud, self.dist, [far], vc_dim=4)
        self.assertEqual(explicit.vc_dim, 4)

    def test_zero_mass_slab(self):
        far = Slab([5.0, 5.0], [[1.0, 0.0]], [[0.0, 1.0]], 0.1, 0.01)
        cloud = PointCloud([[0.0, 1.0], [1.0, 0.0], [0.0, -1.0]])
        report = deviation_check(cloud, self.dist, [far])
        self.assertEqual(report.truth[0], 0.0)
        assert_allclose(report.upper[0], report.constant * math.log(3) / 3)
        self.assertEqual(report.lower[0], 0.0)
        self.assertTrue(report.passed)

    def test_plug_in_atoms(self):
        spacing = 0.01
        slabs = [
            build_slab(self.manifold, np.array([u]), 0.02, 1.0, 1.0)
            for u in np.linspace(0, 6, 12)
        ]
        atoms = self.dist.atoms(spacing)
        report = deviation_check(atoms, self.dist, slabs, spacing=spacing)
        self.assertLess(report.max_deviation, 1e-12)
        self.assertTrue(report.passed)
        self.assertFalse(report.vc_violations)

    def test_clutter_truth_inside_box(self):
        box = Box.cube(2.0, 2)
        slab = Slab([0.0, 0.0], [[1.0, 0.0]], [[0.0, 1.0]], 0.2, 0.1)
        self.assertAlmostEqual(box_fraction(slab, box), 0.08 / 16.0)

    def test_partial_box_overlap(self):
        box = Box.cube(1.0, 2)
        slab = Slab([1.0, 0.0], [[1.0, 0.0]], [[0.0, 1.0]], 0.2, 0.1)
        self.assertAlmostEqual(box_fraction(slab, box), 0.04 / 4.0)

    def test_additive_model_rejected(self):
        slab = build_slab(self.manifold, np.array([0.0]), 0.02, 1.0, 1.0)
        cloud = PointCloud([[0.0, 0.0], [1.0, 1.0]])
        with self.assertRaises(ParameterError):
            deviation_check(cloud, self.dist, [slab], model=Additive())


class SeparationTests(SimpleTestCase):
    """Monte Carlo checks of the score separation on the unit circle."""

    def setUp(self):
        self.manifold = circle()
        self.dist = ManifoldDistribution.uniform(self.manifold)
        self.box = self.manifold.bounding_box
        self.n = 5000
        eps = epsilon_n(self.n, 1, 8.0)
        self.family = offset_family(self.manifold, 2 * math.sqrt(eps))

    @tag("slow")
    def test_noiseless_argmax(self):
        wins = sum(
            fit(
                self.family,
                sample_on_manifold(self.dist, self.n, SeedRecord(100, rep)).observed,
            ).chosen
            == 0
            for rep in range(100)
        )
        self.assertGreaterEqual(wins, 95)

    @tag("slow")
    def test_clutter_argmax(self):
        results = [
            fit(
                self.family,
                sample_clutter(
                    self.dist, 0.5, self.box, self.n, SeedRecord(200, rep)
                ).observed,
            )
            for rep in range(100)
        ]
        wins = sum(r.chosen == 0 and not r.no_support for r in results)
        self.assertGreaterEqual(wins, 95)
        values = np.array([r.values for r in results])
        medians = np.median(values, axis=0)
        self.assertTrue(np.all(medians[1:] < medians[0]))

    @tag("slow")
    def test_true_score_scales_with_eps(self):
        family = CandidateFamily((self.manifold,))

        def sample(n, seed):
            return sample_on_manifold(self.dist, n, seed).observed

        ratios = []
        for index, n in enumerate((2000, 8000)):
            scores = [
                fit(family, sample(n, SeedRecord(300, index, rep))).values[0]
                for rep in range(20)
            ]
            ratios.append(np.median(scores) * n / (8.0 * math.log(n)))
        self.assertGreater(min(ratios), 0.0)
        self.assertLess(max(ratios) / min(ratios), 2.0)

    @tag("slow")
    def test_deviation_bounds_hold(self):
        model = Clutter(0.5, self.box)
        rng = np.random.default_rng(17)
        angles = rng.uniform(0, 2 * np.pi, 90)
        scales = rng.uniform(1e-3, 0.05, 90)
        slabs = [
            build_slab(self.manifold, np.array([u]), eps, 1.0, 1.0)
            for u, eps in zip(angles, scales)
        ]
        slabs += [
            Slab(center, [[1.0, 0.0]], [[0.0, 1.0]], 0.1, 0.02)
            for center in rng.uniform(-0.5, 0.5, size=(10, 2))
        ]
        clean = 0
        for rep in range(100):
            cloud = sample_clutter(
                self.dist, 0.5, self.box, 10_000, SeedRecord(400, rep)
            ).observed
            report = deviation_check(cloud, self.dist, slabs, model=model)
            clean += report.passed
        self.assertGreaterEqual(clean, 99)


class SegmentScoreTests(SimpleTestCase):
    def test_flat_segment_slabs(self):
        manifold = segment(2.0)
        cloud = manifold.discretize(1e-3)
        score = slab_score(manifold, cloud, 0.01, 1.0, 1.0)
        # Interior slabs cover a tenth of the segment, the end slabs half that.
        self.assertAlmostEqual(score.value, 0.05, delta=2e-3)
