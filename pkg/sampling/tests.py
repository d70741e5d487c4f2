import tempfile
from pathlib import Path
from types import SimpleNamespace

from django.test import SimpleTestCase, tag

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import chisquare

from geometry.manifolds import circle, segment
from geometry.models import Box, PointCloud
from manifold_lab.exceptions import SamplingError

from .export import read_dataset, write_dataset
from .models import AtomicDistribution, Clutter, Dataset, ManifoldDistribution
from .random import SeedRecord, stream
from .samplers import (
    draw_parameters,
    empirical_mass,
    sample_additive,
    sample_clutter,
    sample_on_manifold,
)


def angles(points):
    return np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)


class DistributionTests(SimpleTestCase):
    def test_uniform_circle_density_bounds(self):
        dist = ManifoldDistribution.uniform(circle())
        self.assertAlmostEqual(dist.lower_bound, 1 / (2 * np.pi), places=10)
        self.assertAlmostEqual(dist.upper_bound, 1 / (2 * np.pi), places=10)

    def test_unnormalised_density_is_rejected(self):
        with self.assertRaises(SamplingError):
            ManifoldDistribution(circle(), density=lambda u, chart: np.ones(len(u)))

    def test_atoms_carry_unit_mass(self):
        atoms = ManifoldDistribution.uniform(circle(2.0)).atoms()
        self.assertAlmostEqual(float(atoms.mass().sum()), 1.0)
        assert_allclose(np.linalg.norm(atoms.points, axis=1), 2.0)

    def test_gaussian_convolution_moments(self):
        smoothed = AtomicDistribution.gaussian_convolution(
            AtomicDistribution.point_mass([1.0, -2.0]), order=10
        )
        cloud = smoothed.atoms()
        mean = cloud.mass() @ cloud.points
        centred = cloud.points - mean
        covariance = (centred * cloud.mass()[:, None]).T @ centred
        assert_allclose(mean, [1.0, -2.0], atol=1e-12)
        assert_allclose(covariance, np.eye(2), atol=1e-10)


class StreamTests(SimpleTestCase):
    def test_streams_are_reproducible(self):
        assert_array_equal(stream(5, 1, 2).random(8), stream(5, 1, 2).random(8))

    def test_keys_separate_streams(self):
        first, second = stream(5, 1, 2).random(8), stream(5, 2, 1).random(8)
        self.assertFalse(np.array_equal(first, second))


class NoiselessSamplerTests(SimpleTestCase):
    def setUp(self):
        self.dist = ManifoldDistribution.uniform(circle())

    def test_empty_sample(self):
        dataset = sample_on_manifold(self.dist, 0, 1)
        self.assertEqual(len(dataset), 0)
        self.assertEqual(dataset.ambient_dim, 2)

    def test_points_lie_on_circle(self):
        points = sample_on_manifold(self.dist, 5000, 2).observed.points
        self.assertLessEqual(np.abs(np.linalg.norm(points, axis=1) - 1).max(), 1e-12)

    def test_same_seed_same_dataset(self):
        first = sample_on_manifold(self.dist, 500, SeedRecord(9, 0, 3))
        second = sample_on_manifold(self.dist, 500, SeedRecord(9, 0, 3))
        assert_array_equal(first.observed.points, second.observed.points)

    def test_non_uniform_density_bin_frequencies(self):
        def density(params, chart_index):
            return (1 + 0.5 * np.cos(params[:, 0])) / (2 * np.pi)

        dist = ManifoldDistribution(circle(), density=density)
        n = 20000
        theta = angles(sample_on_manifold(dist, n, 4).observed.points)
        edges = np.linspace(0, 2 * np.pi, 21)
        counts, _ = np.histogram(theta, edges)
        expected = (np.diff(edges) + 0.5 * np.diff(np.sin(edges))) / (2 * np.pi)
        error = 4 * np.sqrt(expected * (1 - expected) / n)
        self.assertTrue(np.all(np.abs(counts / n - expected) <= error))

    def test_degenerate_acceptance_raises(self):
        stub = SimpleNamespace(
            manifold=segment(),
            envelope=1e7,
            proposal_weight=lambda u, chart: np.ones(len(u)),
        )
        with self.assertRaisesMessage(SamplingError, "degenerate density"):
            draw_parameters(stub, 10, stream(1))

    @tag("slow")
    def test_circular_mean_is_centred(self):
        n = 100000
        points = sample_on_manifold(self.dist, n, 3).observed.points
        self.assertTrue(np.all(np.abs(points.mean(axis=0)) <= 3 / np.sqrt(2 * n)))

    @tag("slow")
    def test_angles_pass_chi_square(self):
        passes = 0
        for rep in range(100):
            dataset = sample_on_manifold(self.dist, 100000, SeedRecord(11, rep))
            theta = angles(dataset.observed.points)
            counts, _ = np.histogram(theta, np.linspace(0, 2 * np.pi, 21))
            passes += chisquare(counts).pvalue > 0.001
        self.assertGreaterEqual(passes, 99)


class ClutterSamplerTests(SimpleTestCase):
    def setUp(self):
        self.dist = ManifoldDistribution.uniform(circle())
        self.box = Box.cube(1.5, 2)

    def test_full_signal_reproduces_noiseless(self):
        clutter = sample_clutter(self.dist, 1.0, self.box, 300, 8)
        clean = sample_on_manifold(self.dist, 300, 8)
        self.assertFalse(clutter.clutter.any())
        assert_array_equal(clutter.observed.points, clean.observed.points)

    def test_vanishing_signal_is_all_clutter(self):
        dataset = sample_clutter(self.dist, 1e-12, self.box, 50, 8)
        self.assertTrue(dataset.clutter.all())
        self.assertTrue(self.box.contains(dataset.observed.points).all())

    def test_manifold_outside_box(self):
        with self.assertRaises(SamplingError):
            sample_clutter(self.dist, 0.5, Box.cube(0.5, 2), 10, 1)

    def test_invalid_mixing_weight(self):
        with self.assertRaises(SamplingError):
            Clutter(0.0, self.box)

    def test_signal_points_equal_latent(self):
        dataset = sample_clutter(self.dist, 0.3, self.box, 400, 2)
        signal = ~dataset.clutter
        assert_array_equal(dataset.observed.points[signal], dataset.latent[signal])

    @tag("slow")
    def test_signal_fraction(self):
        n = 100000
        dataset = sample_clutter(self.dist, 0.5, self.box, n, 12)
        fraction = 1 - dataset.clutter.mean()
        self.assertLessEqual(abs(fraction - 0.5), 3 * np.sqrt(0.25 / n))


class AdditiveSamplerTests(SimpleTestCase):
    def setUp(self):
        self.dist = ManifoldDistribution.uniform(circle())

    def test_signal_is_recovered(self):
        dataset = sample_additive(self.dist, 1000, 6)
        recovered = dataset.observed.points - dataset.noise
        self.assertLessEqual(np.abs(np.linalg.norm(recovered, axis=1) - 1).max(), 1e-12)

    def test_broken_decomposition_is_rejected(self):
        with self.assertRaises(SamplingError):
            Dataset(
                observed=PointCloud([[1.0, 1.0]]),
                model="additive",
                latent=[[1.0, 0.0]],
                noise=[[0.0, 0.0]],
            )

    @tag("slow")
    def test_moments(self):
        n = 100000
        dataset = sample_additive(self.dist, n, 13)
        variance = dataset.observed.points.var(axis=0)
        self.assertTrue(np.all(np.abs(variance - 1.5) <= 3 * np.sqrt(4.125 / n)))
        self.assertTrue(np.all(np.abs(dataset.noise.mean(axis=0)) <= 3 / np.sqrt(n)))


class EmpiricalMassTests(SimpleTestCase):
    def setUp(self):
        self.cloud = PointCloud([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])

    def test_covering_region(self):
        self.assertEqual(empirical_mass(self.cloud, Box.cube(2.0, 2)), 1.0)

    def test_disjoint_region(self):
        self.assertEqual(empirical_mass(self.cloud, Box([5.0, 5.0], [6.0, 6.0])), 0.0)

    def test_half_space(self):
        self.assertEqual(empirical_mass(self.cloud, Box([0.0, -2.0], [2.0, 2.0])), 0.5)

    def test_empty_cloud(self):
        with self.assertRaises(SamplingError):
            empirical_mass(PointCloud.empty(2), Box.cube(1.0, 2))


class ExportTests(SimpleTestCase):
    def test_additive_dataset_survives_csv(self):
        dataset = sample_additive(ManifoldDistribution.uniform(circle()), 25, 3)
        with tempfile.TemporaryDirectory() as folder:
            path = write_dataset(dataset, Path(folder) / "additive.csv")
            header = path.read_text().splitlines()[0]
            restored = read_dataset(path)
        self.assertEqual(header, "y1,y2,x1,x2,z1,z2")
        self.assertEqual(restored.model, "additive")
        assert_array_equal(restored.observed.points, dataset.observed.points)
