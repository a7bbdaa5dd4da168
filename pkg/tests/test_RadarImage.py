import unittest
from unittest import TestCase

import numpy as np

from mimoray import RadarImage, EmptyImage, Volume, VoxelGrid, max_project, finalize_image, image_similarity
from mimoray.RadarImage import point_response_width


def image_of(values):
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    return RadarImage(values, np.zeros_like(values), np.arange(nx) * 1e-3, np.arange(ny) * 1e-3)


class TestFinalizeImage(TestCase):


    def test_floor(self):
        image = finalize_image(image_of([[2.0, 1.0, 0.02]]), floor_db=-15)
        np.testing.assert_allclose(image.amplitude, [[1.0, 0.5, 10 ** (-15 / 20)]])
        self.assertAlmostEqual(image.amplitude[0, 2], 0.17783, places=5)
        self.assertEqual(image.floor_db, -15)


    def test_peak_is_one(self):
        values = np.random.default_rng(1).random((7, 9)) * 42.0
        image = finalize_image(image_of(values))
        self.assertEqual(image.amplitude.max(), 1.0)
        self.assertGreaterEqual(image.amplitude.min(), 10 ** (-15 / 20))


    def test_no_floor(self):
        image = finalize_image(image_of([[4.0, 1.0, 0.0]]), floor_db=-np.inf)
        np.testing.assert_array_equal(image.amplitude, [[1.0, 0.25, 0.0]])


    def test_zero_mode(self):
        image = finalize_image(image_of([[1.0, 0.5, 0.01]]), floor_db=-15, clip_mode='zero')
        np.testing.assert_array_equal(image.amplitude, [[1.0, 0.5, 0.0]])


    def test_empty(self):
        with self.assertRaises(EmptyImage):
            finalize_image(image_of(np.zeros((3, 3))))


    def test_invalid(self):
        with self.assertRaises(ValueError):
            finalize_image(image_of([[1.0]]), floor_db=3.0)
        with self.assertRaises(ValueError):
            finalize_image(image_of([[1.0]]), clip_mode='mirror')


    def test_depth_kept(self):
        raw = RadarImage([[1.0, 2.0]], [[0.28, 0.3]], [0.0, 1e-3], [0.0])
        image = finalize_image(raw)
        np.testing.assert_array_equal(image.depth_z, raw.depth_z)


class TestMaxProject(TestCase):


    def setUp(self):
        self.grid = VoxelGrid((0, 0, 0.28), (0.002, 0.001, 0.3), 1e-3)


    def test_single_voxel(self):
        values = np.zeros(self.grid.shape)
        values[1, 1, 2] = 3.0
        image = max_project(Volume(self.grid, values))
        self.assertEqual(image.shape, (2, 3))
        self.assertEqual(image.peak_index, (1, 2))
        self.assertEqual(image.amplitude[1, 2], 3.0)
        self.assertAlmostEqual(image.depth_z[1, 2], 0.281)


    def test_complex_volume(self):
        values = np.zeros(self.grid.shape, dtype=complex)
        values[2, 0, 0] = 3j - 4
        image = max_project(Volume(self.grid, values))
        self.assertEqual(image.amplitude[0, 0], 5.0)
        self.assertAlmostEqual(image.depth_z[0, 0], 0.282)


    def test_ties_go_to_smallest_z(self):
        image = max_project(Volume(self.grid, np.ones(self.grid.shape)))
        np.testing.assert_array_equal(image.depth_z, np.full((2, 3), self.grid.z[0]))


    def test_shape_checked(self):
        with self.assertRaises(ValueError):
            RadarImage(np.zeros((2, 3)), np.zeros((2, 3)), [0, 1], [0, 1])


class TestImageSimilarity(TestCase):


    def test_identical(self):
        values = np.random.default_rng(2).random((5, 5))
        result = image_similarity(image_of(values), image_of(values * 3.0))
        self.assertAlmostEqual(result.correlation, 1.0)
        self.assertAlmostEqual(result.rms_difference, 0.0)


    def test_different(self):
        a = np.zeros((4, 4))
        a[0, 0] = 1.0
        b = np.zeros((4, 4))
        b[3, 3] = 1.0
        result = image_similarity(a, b)
        self.assertLess(result.correlation, 0.0)
        self.assertAlmostEqual(result.rms_difference, np.sqrt(2.0 / 16))


    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            image_similarity(np.ones((2, 2)), np.ones((3, 2)))


class TestPointResponseWidth(TestCase):


    def test_triangle(self):
        level = 10 ** (-3 / 20)
        width = point_response_width([0.0, 0.5, 1.0, 0.5, 0.0], 2e-3)
        self.assertAlmostEqual(width, 2 * 2 * (1 - level) * 2e-3)


    def test_lobe_reaches_edge(self):
        self.assertEqual(point_response_width([1.0, 0.9, 0.8], 1e-3), np.inf)


if __name__ == '__main__':
    unittest.main()
