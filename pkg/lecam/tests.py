import dataclasses
import math

from django.test import SimpleTestCase, tag

import numpy as np
from numpy.testing import assert_allclose
from scipy.stats import multivariate_normal, norm

from geometry.manifolds import circle
from geometry.models import Box, Grid
from geometry.slabs import tangent_frame
from manifold_lab.exceptions import ConstructionError, GeometryError, ParameterError
from sampling.models import AtomicDistribution, ManifoldDistribution

from .divergence import (
    affinity_product_lower,
    at_sample_size,
    clutter_tv,
    convolve_with_gaussian,
    lecam_bound,
    pair_divergence,
    singular_tv,
    tv_distance,
    tv_monte_carlo,
)
from .models import DecayFit, TVTable
from .pairs import bump_pair, cosine_pair
from .rates import (
    bound_curve,
    padded_grid,
    rate_from_bound,
    singular_tv_table,
    tv_decay_fit,
    tv_decay_table,
)


def point_field(center, grid):
    return convolve_with_gaussian(AtomicDistribution.point_mass(center), grid)


def bump_radius_spacing(gamma, kappa=0.4):
    return 3 * math.sqrt(gamma * kappa) / 16


class CosinePairTests(SimpleTestCase):
    def setUp(self):
        self.pair = cosine_pair(0.1)

    def test_apex_gap(self):
        origin = np.zeros((1, 1))
        assert_allclose(self.pair.m0.embed(origin), [[0.0, 0.1]], atol=1e-15)
        assert_allclose(self.pair.m1.embed(origin), [[0.0, -0.1]], atol=1e-15)
        self.assertAlmostEqual(self.pair.separation, 0.2)

    def test_reach_condition(self):
        with self.assertRaisesMessage(ConstructionError, "reach condition violated"):
            cosine_pair(0.1, a=0.5, kappa=0.5)

    def test_nonpositive_gamma(self):
        with self.assertRaises(ParameterError):
            cosine_pair(0.0)

    def test_horizontal_tangent_at_origin(self):
        tangent, _ = tangent_frame(self.pair.m0.charts[0], np.zeros(1))
        assert_allclose(np.abs(tangent), [[1.0, 0.0]], atol=1e-12)

    def test_hausdorff_collapses_with_gamma(self):
        small = cosine_pair(1e-3).hausdorff(0.01)
        large = self.pair.hausdorff(0.01)
        self.assertLess(small.value, large.value)
        self.assertLessEqual(large.value, 0.2 + large.bound)

    def test_reach_check_passes(self):
        reports = self.pair.validate(0.05)
        self.assertTrue(all(report.passed for report in reports))

    def test_gaussian_weights_normalised(self):
        self.assertAlmostEqual(float(self.pair.g0.atoms().mass().sum()), 1.0, places=6)


class BumpPairTests(SimpleTestCase):
    def test_apex_and_tangents(self):
        pair = bump_pair(0.04)
        check = pair.validation
        self.assertAlmostEqual(check.apex_separation, 0.04, delta=1e-8)
        self.assertTrue(check.separation_ok)
        self.assertTrue(check.tangents_parallel)
        self.assertLess(check.max_curvature, 1 / 0.4)
        self.assertGreater(check.max_curvature, 0.6 / 0.4)

    def test_core_mass_in_one_dimension(self):
        check = bump_pair(0.04).validation
        self.assertTrue(check.mass_ok)
        self.assertGreater(check.far_factor, 0.5)

    def test_support_constant_is_stable(self):
        constants = [bump_pair(g).validation.a_constant for g in (0.02, 0.04, 0.08)]
        mean = np.mean(constants)
        for constant in constants:
            self.assertLessEqual(abs(constant - mean), 0.2 * mean)

    def test_zero_height_gives_identical_laws(self):
        pair = bump_pair(0.0)
        self.assertIsNone(pair.validation)
        self.assertEqual(singular_tv(pair.g0, pair.g1), 0.0)
        grid = padded_grid(pair, 0.1)
        self.assertAlmostEqual(pair_divergence(pair, grid).tv, 0.0, places=12)

    def test_height_guard(self):
        with self.assertRaises(ParameterError):
            bump_pair(0.2, kappa=0.4)
        with self.assertRaises(ParameterError):
            bump_pair(-0.01)

    def test_two_dimensional_bump(self):
        pair = bump_pair(0.02, d=2, D=3, resolution=bump_radius_spacing(0.02))
        check = pair.validation
        self.assertAlmostEqual(check.apex_separation, 0.02, delta=1e-8)
        self.assertTrue(check.tangents_parallel)
        self.assertGreater(check.b_ratio, 0.0)
        self.assertLess(check.max_curvature, 1 / 0.4)

    def test_reach_failure_reports_curvature(self):
        pair = bump_pair(0.08, validate=False)
        strict = dataclasses.replace(pair, params={**pair.params, "kappa": 1.0})
        with self.assertRaisesMessage(ConstructionError, "max curvature"):
            strict.validate(0.01)


class ConvolutionTests(SimpleTestCase):
    def test_point_mass_gives_standard_gaussian(self):
        grid = Grid.with_spacing(Box.cube(4.0, 2), 0.25)
        field = point_field([0.0, 0.0], grid)
        expected = multivariate_normal(mean=np.zeros(2)).pdf(grid.points())
        assert_allclose(field.flat, expected, rtol=0, atol=1e-8)

    def test_circle_mass_with_padding(self):
        dist = ManifoldDistribution.uniform(circle(1.0))
        field = convolve_with_gaussian(dist, Grid.with_spacing(Box.cube(7.0, 2), 0.1))
        self.assertAlmostEqual(field.mass(), 1.0, delta=1e-3)
        self.assertLess(field.metadata["tail"], 1e-3)
        self.assertGreaterEqual(field.metadata["padding_sd"], 6.0)

    def test_symmetric_distribution_gives_symmetric_density(self):
        dist = ManifoldDistribution.uniform(circle(1.0))
        field = convolve_with_gaussian(dist, Grid.with_spacing(Box.cube(5.0, 2), 0.1))
        assert_allclose(field.values, field.values[::-1, ::-1], atol=1e-10)

    def test_dimension_mismatch(self):
        grid = Grid.with_spacing(Box.cube(2.0, 3), 0.5)
        with self.assertRaises(GeometryError):
            point_field([0.0, 0.0], grid)


class TVDistanceTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid.with_spacing(Box([-8.0], [10.0]), 0.01)

    def test_shifted_normals(self):
        q0, q1 = point_field([0.0], self.grid), point_field([2.0], self.grid)
        report = tv_distance(q0, q1)
        self.assertAlmostEqual(report.tv, 2 * norm.cdf(1) - 1, delta=1e-4)
        self.assertAlmostEqual(report.tv + report.affinity, 1.0, places=10)
        self.assertAlmostEqual(report.tv, report.l1 / 2, places=12)

    def test_identical_and_symmetric(self):
        q0, q1 = point_field([0.0], self.grid), point_field([1.0], self.grid)
        self.assertEqual(tv_distance(q0, q0).tv, 0.0)
        self.assertEqual(tv_distance(q0, q1).tv, tv_distance(q1, q0).tv)

    def test_disjoint_supports(self):
        grid = Grid.with_spacing(Box([-8.0], [48.0]), 0.05)
        report = tv_distance(point_field([0.0], grid), point_field([40.0], grid))
        self.assertAlmostEqual(report.tv, 1.0, delta=1e-6 + report.tail_error)

    def test_grid_mismatch(self):
        other = Grid.with_spacing(Box([-8.0], [10.0]), 0.02)
        with self.assertRaises(GeometryError):
            tv_distance(point_field([0.0], self.grid), point_field([0.0], other))


class LeCamBoundTests(SimpleTestCase):
    def test_endpoints(self):
        self.assertAlmostEqual(lecam_bound(0.5, 0.0, 10), 0.5 / 8)
        self.assertEqual(lecam_bound(0.5, 1.0, 10), 0.0)

    def test_large_sample_limit(self):
        n = 10**4
        assert_allclose(lecam_bound(1.0, 1 / (4 * n), n), math.exp(-0.5) / 8, rtol=0.02)

    def test_never_exceeds_separation_and_decreases(self):
        values = [lecam_bound(2.0, 0.01, n) for n in (1, 10, 100, 1000)]
        self.assertLessEqual(max(values), 2.0)
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))

    def test_product_affinity(self):
        self.assertAlmostEqual(affinity_product_lower(0.0, 7), 1 / 8)
        self.assertEqual(affinity_product_lower(2.0, 7), 0.0)
        for l1 in (0.0, 0.3, 1.1, 2.0):
            self.assertAlmostEqual(
                affinity_product_lower(l1, 12), lecam_bound(1.0, l1 / 2, 12)
            )

    def test_invalid_arguments(self):
        with self.assertRaises(ParameterError):
            lecam_bound(1.0, 1.5, 10)
        with self.assertRaises(ParameterError):
            lecam_bound(1.0, 0.5, 0)
        with self.assertRaises(ParameterError):
            affinity_product_lower(2.5, 3)

    def test_report_at_sample_size(self):
        grid = Grid.with_spacing(Box([-8.0], [10.0]), 0.01)
        report = tv_distance(point_field([0.0], grid), point_field([2.0], grid))
        filled = at_sample_size(report, 50, 0.3)
        self.assertEqual(filled.n, 50)
        self.assertAlmostEqual(filled.lecam, lecam_bound(0.3, report.tv, 50))
        self.assertEqual(filled.as_dict()["lecam_bound"], filled.lecam)


class SingularTVTests(SimpleTestCase):
    def setUp(self):
        self.pair = bump_pair(0.04, validate=False)
        rho = self.pair.params["rho"]
        self.breaks = (-rho, rho)

    def test_bump_tv_is_the_support_mass(self):
        rho = self.pair.params["rho"]
        tv = singular_tv(self.pair.g0, self.pair.g1, breaks=self.breaks)
        assert_allclose(tv, 2 * rho / 1.6, rtol=0.02)

    def test_clutter_paths_agree(self):
        box = self.pair.m0.bounding_box
        base = singular_tv(self.pair.g0, self.pair.g1, breaks=self.breaks)
        for pi in (0.25, 0.5, 1.0):
            result = clutter_tv(
                self.pair.g0, self.pair.g1, pi, box, breaks=self.breaks, seed=3
            )
            self.assertGreater(result.mixture_error, 0.0)
            self.assertLessEqual(
                abs(result.mixture_tv - pi * base), 4 * result.mixture_error + 1e-3
            )
            self.assertLessEqual(result.discrepancy, result.tolerance)

    def test_clutter_monte_carlo_is_seeded(self):
        box = self.pair.m0.bounding_box
        runs = [
            clutter_tv(self.pair.g0, self.pair.g1, 0.5, box, breaks=self.breaks, seed=s)
            for s in (1, 1, 2)
        ]
        self.assertEqual(runs[0].mixture_tv, runs[1].mixture_tv)
        self.assertNotEqual(runs[0].mixture_tv, runs[2].mixture_tv)
        self.assertEqual(runs[0].scaled_tv, runs[2].scaled_tv)

    def test_clutter_identical_laws(self):
        box = self.pair.m0.bounding_box
        result = clutter_tv(self.pair.g1, self.pair.g1, 0.5, box, seed=4)
        self.assertEqual(result.mixture_tv, 0.0)
        self.assertEqual(result.scaled_tv, 0.0)

    def test_clutter_weight_range(self):
        box = self.pair.m0.bounding_box
        with self.assertRaises(ParameterError):
            clutter_tv(self.pair.g0, self.pair.g1, 0.0, box)

    def test_needs_shared_parameter_box(self):
        other = ManifoldDistribution.uniform(circle(0.5))
        with self.assertRaises(GeometryError):
            singular_tv(self.pair.g0, other)

    @tag("slow")
    def test_monte_carlo_matches_grid(self):
        pair = bump_pair(0.1, validate=False)
        grid = padded_grid(pair, 0.01, scale=0.1)
        exact = pair_divergence(pair, grid, scale=0.1)
        estimate = tv_monte_carlo(pair.g0, pair.g1, 20000, seed=11, scale=0.1)
        self.assertLess(
            abs(estimate.tv - exact.tv), 4 * estimate.quadrature_error + 1e-3
        )


class DecayFitTests(SimpleTestCase):
    gammas = np.array([0.4, 0.3, 0.2, 0.15, 0.1])

    def test_planted_exponential_law(self):
        table = TVTable(self.gammas, np.exp(-3 / self.gammas), np.zeros(5))
        fit = tv_decay_fit(table)
        self.assertAlmostEqual(fit.slope, -3.0, places=10)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=10)

    def test_needs_four_decreasing_gammas(self):
        short = TVTable(self.gammas[:3], np.exp(-1 / self.gammas[:3]), np.zeros(3))
        with self.assertRaises(ParameterError):
            tv_decay_fit(short)
        rising = TVTable(self.gammas[::-1], np.full(5, 0.1), np.zeros(5))
        with self.assertRaises(ParameterError):
            tv_decay_fit(rising)

    @tag("slow")
    def test_cosine_family_decay(self):
        table = tv_decay_table(cosine_pair, self.gammas, spacing=0.1)
        self.assertTrue(np.all(np.diff(table.tvs) < 0))
        fit = tv_decay_fit(table)
        self.assertLess(fit.slope, 0.0)
        self.assertGreaterEqual(fit.r_squared, 0.95)

        finer = tv_decay_fit(tv_decay_table(cosine_pair, self.gammas, spacing=0.05))
        self.assertLess(abs(finer.slope - fit.slope), 0.05 * abs(fit.slope))

        products = [
            rate_from_bound(fit, n).bound * math.log(n) for n in (10**3, 10**4, 10**5)
        ]
        mean = np.mean(products)
        for value in products:
            self.assertLessEqual(abs(value - mean), 0.3 * mean)


class RateTests(SimpleTestCase):
    def test_planted_square_root_matches_brute_force(self):
        gammas = np.geomspace(0.5, 1e-6, 200)
        table = TVTable(gammas, np.sqrt(gammas), np.zeros(gammas.size))
        for n in (10, 100, 1000):
            brute = gammas[np.argmax(gammas / 8 * (1 - np.sqrt(gammas)) ** (2 * n))]
            self.assertEqual(rate_from_bound(table, n).gamma_star, brute)

    def test_bound_times_log_n_for_exponential_decay(self):
        fit = DecayFit(slope=-0.5, intercept=0.0, r_squared=1.0, stderr=0.0)
        products = [
            rate_from_bound(fit, n).bound * math.log(n) for n in (10**3, 10**4, 10**5)
        ]
        mean = np.mean(products)
        for value in products:
            self.assertLessEqual(abs(value - mean), 0.3 * mean)

    def test_noiseless_bump_optimum_shrinks(self):
        table = singular_tv_table(
            lambda g: bump_pair(g, validate=False), np.geomspace(0.1, 1e-9, 37)
        )
        stars = [bound.gamma_star for bound in bound_curve(table, [10, 100, 1000])]
        self.assertTrue(all(a > b for a, b in zip(stars, stars[1:])))

    def test_clutter_weight_enlarges_optimum(self):
        gammas = np.geomspace(0.1, 1e-9, 37)

        def family(gamma):
            return bump_pair(gamma, validate=False)

        full = singular_tv_table(family, gammas)
        diluted = singular_tv_table(family, gammas, pi=0.25)
        assert_allclose(diluted.tvs, 0.25 * full.tvs, rtol=1e-12)
        self.assertGreater(
            rate_from_bound(diluted, 100).gamma_star,
            rate_from_bound(full, 100).gamma_star,
        )

    def test_sample_size_must_be_positive(self):
        fit = DecayFit(slope=-0.5, intercept=0.0, r_squared=1.0, stderr=0.0)
        with self.assertRaises(ParameterError):
            rate_from_bound(fit, 0)
