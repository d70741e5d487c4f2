import math

from django.test import SimpleTestCase

import numpy as np
from numpy.testing import assert_allclose

from manifold_lab.exceptions import GeometryError

from .manifolds import (
    circle,
    graph,
    line,
    rigid_transform,
    segment,
    sphere,
    tabulated_curve,
    torus,
)
from .metrics import (
    directed_hausdorff,
    distance_to_manifold,
    hausdorff_bruteforce,
    hausdorff_distance,
    manifold_hausdorff,
)
from .models import Box, Grid, ParametricManifold, PointCloud
from .quadrature import manifold_volume
from .reach import reach_validate
from .slabs import build_slab, slab_membership


def circle_cloud(count, radius=1.0):
    theta = np.linspace(0, 2 * np.pi, count, endpoint=False)
    return PointCloud(radius * np.column_stack([np.cos(theta), np.sin(theta)]))


class PointCloudTests(SimpleTestCase):
    def test_rejects_non_finite_points(self):
        with self.assertRaises(GeometryError):
            PointCloud([[0.0, np.nan]])

    def test_weights_are_normalised(self):
        cloud = PointCloud([[0.0], [1.0]], weights=[1.0, 3.0])
        assert_allclose(cloud.mass(), [0.25, 0.75])

    def test_points_are_read_only(self):
        cloud = PointCloud([[0.0, 1.0]])
        with self.assertRaises(ValueError):
            cloud.points[0, 0] = 2.0


class GridTests(SimpleTestCase):
    def test_spacing_follows_counts(self):
        grid = Grid(Box([0.0, -1.0], [1.0, 1.0]), (11, 5))
        assert_allclose(grid.spacing, [0.1, 0.5])
        self.assertEqual(grid.points().shape, (55, 2))

    def test_needs_two_nodes_per_axis(self):
        with self.assertRaises(GeometryError):
            Grid(Box([0.0], [1.0]), (1,))

    def test_row_points_match_full_grid(self):
        grid = Grid(Box([0.0, 0.0], [1.0, 2.0]), (4, 3))
        assert_allclose(grid.row_points(2), grid.points()[6:9])


class HausdorffTests(SimpleTestCase):
    def test_identical_sets(self):
        cloud = circle_cloud(50)
        self.assertEqual(hausdorff_distance(cloud, cloud), 0.0)

    def test_single_pair(self):
        self.assertAlmostEqual(hausdorff_distance([[0.0, 0.0]], [[3.0, 4.0]]), 5.0)

    def test_empty_set(self):
        with self.assertRaisesMessage(GeometryError, "empty set has undefined"):
            hausdorff_distance(PointCloud.empty(2), circle_cloud(3))

    def test_outlier_matches_bruteforce(self):
        rng = np.random.default_rng(7)
        theta = rng.uniform(0, 2 * np.pi, 1000)
        a = PointCloud(np.column_stack([np.cos(theta), np.sin(theta)]))
        b = a.union(PointCloud([[1.2, 0.0]]))
        value = hausdorff_distance(a, b)
        self.assertAlmostEqual(value, hausdorff_bruteforce(a, b), delta=1e-12)
        self.assertAlmostEqual(value, 0.2, delta=0.01)

    def test_indexed_equals_bruteforce_on_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            a = PointCloud(rng.normal(size=(rng.integers(1, 40), 3)))
            b = PointCloud(rng.normal(size=(rng.integers(1, 40), 3)))
            self.assertAlmostEqual(
                hausdorff_distance(a, b), hausdorff_bruteforce(a, b), delta=1e-12
            )

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b, c = (PointCloud(rng.normal(size=(20, 2))) for _ in range(3))
            self.assertEqual(hausdorff_distance(a, b), hausdorff_distance(b, a))
            self.assertLessEqual(
                hausdorff_distance(a, c),
                hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-12,
            )

    def test_adding_points_is_monotone(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            a = PointCloud(rng.normal(size=(15, 2)))
            b = PointCloud(rng.normal(size=(15, 2)))
            grown = a.union(PointCloud(rng.normal(size=(1, 2))))
            self.assertGreaterEqual(
                directed_hausdorff(grown, b), directed_hausdorff(a, b)
            )
            self.assertLessEqual(directed_hausdorff(b, grown), directed_hausdorff(b, a))


class DistanceToManifoldTests(SimpleTestCase):
    def test_center_of_circle(self):
        distance = distance_to_manifold([0.0, 0.0], circle())
        self.assertAlmostEqual(distance, 1.0, delta=1e-6)

    def test_point_on_manifold(self):
        manifold = circle()
        x = manifold.embed(np.array([[0.731]]))[0]
        self.assertLess(distance_to_manifold(x, manifold, tol=1e-6), 1e-6)

    def test_projection_onto_line(self):
        distance = distance_to_manifold([2.0, 1.0], line())
        self.assertAlmostEqual(distance, 1.0, delta=1e-6)

    def test_non_finite_point(self):
        with self.assertRaises(GeometryError):
            distance_to_manifold([np.inf, 0.0], circle())


class ManifoldHausdorffTests(SimpleTestCase):
    def test_same_manifold(self):
        manifold = circle()
        self.assertEqual(manifold_hausdorff(manifold, manifold, 1e-2).value, 0.0)

    def test_concentric_circles(self):
        estimate = manifold_hausdorff(circle(1.0), circle(1.2), 1e-3)
        self.assertAlmostEqual(estimate.value, 0.2, delta=estimate.bound)
        assert_allclose(estimate.bound, 1e-3 * 2.2)

    def test_dimension_mismatch(self):
        with self.assertRaises(GeometryError):
            manifold_hausdorff(circle(), sphere(), 0.1)

    def test_rank_deficient_chart(self):
        flat = graph(
            lambda u: np.zeros((u.shape[0], 1)),
            lambda u: np.zeros((u.shape[0], 1, 1)),
            [-1.0],
            [1.0],
            dim=2,
            reach_floor=1.0,
        )
        pinched = tabulated_curve(
            np.linspace(0, 1, 9),
            np.column_stack([np.linspace(0, 1, 9) ** 3, np.zeros(9)]),
            reach_floor=1.0,
        )
        with self.assertRaisesMessage(GeometryError, "rank-deficient"):
            manifold_hausdorff(flat, pinched, 0.125)


class FamilyTests(SimpleTestCase):
    def test_sphere_area(self):
        area = manifold_volume(sphere(), spacing=0.25)
        self.assertAlmostEqual(area, 4 * np.pi, places=6)

    def test_torus_area(self):
        self.assertAlmostEqual(
            manifold_volume(torus(2.0, 0.5), spacing=0.5), 4 * np.pi**2, places=6
        )

    def test_sphere_points_on_sphere(self):
        net = sphere(2.0).parameter_net(0.1)
        assert_allclose(np.linalg.norm(net.points, axis=1), 2.0)

    def test_sphere_jacobian_matches_differences(self):
        chart = sphere().charts[3]
        u = np.array([[0.3, -0.4]])
        step = 1e-6
        columns = [
            (chart.points(u + step * e) - chart.points(u - step * e))[0]
            for e in np.eye(2)
        ]
        numeric = np.column_stack(columns) / (2 * step)
        assert_allclose(chart.jacobians(u)[0], numeric, atol=1e-8)

    def test_rigid_transform_preserves_distances(self):
        angle = 0.7
        rotation = np.array(
            [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
        )
        moved = rigid_transform(circle(), rotation, [1.0, 2.0])
        points = moved.discretize(0.05).points
        assert_allclose(np.linalg.norm(points - [1.0, 2.0], axis=1), 1.0)

    def test_non_orthogonal_transform(self):
        with self.assertRaises(GeometryError):
            rigid_transform(circle(), np.diag([1.0, 2.0]), [0.0, 0.0])

    def test_tabulated_circle_matches_circle(self):
        theta = np.linspace(0, 2 * np.pi, 201)
        points = np.column_stack([np.cos(theta), np.sin(theta)])
        points[-1] = points[0]
        curve = tabulated_curve(theta, points, reach_floor=1.0, periodic=True)
        estimate = manifold_hausdorff(curve, circle(), 1e-2)
        self.assertLess(estimate.value, 1e-6 + estimate.bound)

    def test_compact_manifold_must_fit_box(self):
        with self.assertRaises(GeometryError):
            graph(
                lambda u: 10 * u,
                lambda u: np.full((u.shape[0], 1, 1), 10.0),
                [-1.0],
                [1.0],
                dim=2,
                reach_floor=1.0,
                box=Box([-2.0, -2.0], [2.0, 2.0]),
            )


class ReachTests(SimpleTestCase):
    def test_circle_passes_at_its_radius(self):
        for radius in (0.5, 1.0, 2.0):
            report = reach_validate(circle(radius), radius, 1e-2)
            self.assertTrue(report.passed)
            self.assertAlmostEqual(report.reach_estimate, radius, delta=1e-4 * radius)

    def test_circle_passes_below_radius(self):
        self.assertTrue(reach_validate(circle(), 0.6, 1e-2).passed)

    def test_circle_fails_above_radius(self):
        report = reach_validate(circle(), 1.5, 1e-2)
        self.assertFalse(report.passed)
        self.assertFalse(report.curvature_ok)

    def test_segment_passes_at_any_level(self):
        for kappa in (0.1, 10.0, 1e4):
            self.assertTrue(reach_validate(segment(), kappa, 1e-2).passed)

    def test_thin_ellipse_fails(self):
        # Opposite sides 0.1 apart, ends curving at radius 1/400.
        theta = np.linspace(-np.pi / 2, 3 * np.pi / 2, 401)
        points = np.column_stack([np.cos(theta), 0.05 * np.sin(theta)])
        curve = tabulated_curve(theta, points, reach_floor=0.01)
        report = reach_validate(curve, 0.5, 1e-2)
        self.assertFalse(report.passed)
        self.assertLess(report.reach_estimate, 0.5)

    def test_sphere_passes_across_chart_seams(self):
        report = reach_validate(sphere(), 0.95, 0.2)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.reach_estimate, 1.0, delta=1e-3)

    def test_parallel_charts_fail(self):
        # Two straight sheets 0.2 apart: flat on each chart, reach 0.1 overall.
        charts = (segment().charts[0], segment(center=[0.0, 0.2]).charts[0])
        sheets = ParametricManifold(
            label="sheets",
            ambient_dim=2,
            intrinsic_dim=1,
            charts=charts,
            reach_floor=0.1,
            bounding_box=Box([-1.5, -0.5], [1.5, 0.7]),
        )
        report = reach_validate(sheets, 0.5, 1e-2)
        self.assertTrue(report.curvature_ok)
        self.assertFalse(report.bottleneck_ok)
        self.assertFalse(report.passed)
        self.assertAlmostEqual(report.reach_estimate, 0.1, places=9)
        self.assertIsNotNone(report.worst_pair)


class SlabTests(SimpleTestCase):
    def setUp(self):
        self.slab = build_slab(segment(4.0), np.array([0.0]), 0.04, 1.0, 1.0)

    def test_flat_slab_extent(self):
        self.assertAlmostEqual(self.slab.tangent_halfwidth, 0.2)
        self.assertAlmostEqual(self.slab.normal_halfwidth, 0.04)
        self.assertTrue(slab_membership(self.slab, [0.2, 0.04]))
        self.assertFalse(slab_membership(self.slab, [0.21, 0.0]))

    def test_contains_center(self):
        self.assertTrue(slab_membership(self.slab, self.slab.center))

    def test_normal_excursion_is_outside(self):
        point = self.slab.center + 2 * 0.04 * self.slab.normal_basis[0]
        self.assertFalse(slab_membership(self.slab, point))

    def test_far_point_is_outside(self):
        self.assertFalse(slab_membership(self.slab, [self.slab.half_diagonal + 1, 0.0]))

    def test_basis_is_orthonormal(self):
        slab = build_slab(sphere(), np.array([0.3, 0.2]), 0.01, 1.0, 1.0, chart_index=4)
        assert_allclose(slab.basis @ slab.basis.T, np.eye(3), atol=1e-10)

    def test_dimension_mismatch(self):
        with self.assertRaises(GeometryError):
            slab_membership(self.slab, [0.0, 0.0, 0.0])

    def test_nonpositive_epsilon(self):
        with self.assertRaises(GeometryError):
            build_slab(circle(), np.array([0.0]), 0.0, 1.0, 1.0)
