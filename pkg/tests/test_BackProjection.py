import unittest
from unittest import TestCase

import numpy as np

from mimoray import BasebandCube, DimensionMismatch, VoxelGrid, Volume, PATH_RECORD_DTYPE
from mimoray import build_square_array, build_waveform, synthesize_cube, backproject, backproject_reference
from mimoray.RadarImage import point_response_width


def point_target_cube(array, waveform, point):
    '''Cube of a single ideal scatterer: one path per channel'''
    tx = np.repeat(np.arange(array.n_tx), array.n_rx)
    rx = np.tile(np.arange(array.n_rx), array.n_tx)
    records = np.zeros(len(tx), dtype=PATH_RECORD_DTYPE)
    records['tx'] = tx
    records['rx'] = rx
    records['length'] = np.linalg.norm(array.tx_positions[tx] - point, axis=1) \
        + np.linalg.norm(array.rx_positions[rx] - point, axis=1)
    records['bounces'] = 1
    return synthesize_cube(records, waveform, array)


class TestBackProjection(TestCase):


    def test_zero_cube(self):
        array = build_square_array(2, 1e-2)
        wf = build_waveform(72e9, 82e9, 8)
        cube = BasebandCube(np.zeros((4, 4, 8)), wf, array)
        grid = VoxelGrid((-0.01, -0.01, 0.2), (0.01, 0.01, 0.22), 0.01)
        volume = backproject(cube, grid)
        self.assertEqual(volume.values.shape, grid.shape)
        self.assertTrue(volume.is_complex)
        self.assertFalse(volume.values.any())


    def test_matches_reference(self):
        array = build_square_array(2, 2e-2)
        wf = build_waveform(72e9, 82e9, 16)
        rng = np.random.default_rng(31)
        samples = rng.standard_normal((4, 4, 16)) + 1j * rng.standard_normal((4, 4, 16))
        cube = BasebandCube(samples, wf, array)
        grid = VoxelGrid((-0.01, -0.01, 0.25), (0.01, 0.01, 0.27), 0.005)
        self.assertLessEqual(grid.n_voxels * 4 * 4 * 16, 100000)

        fast = backproject(cube, grid, block_size=7).values
        slow = backproject_reference(cube, grid).values
        np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-9 * np.abs(slow).max())


    def test_threads_and_blocks(self):
        array = build_square_array(3, 1e-2)
        wf = build_waveform(72e9, 82e9, 8)
        cube = point_target_cube(array, wf, np.array([0.0, 0.0, 0.2]))
        grid = VoxelGrid((-0.01, -0.01, 0.19), (0.01, 0.01, 0.21), 0.002)
        expected = backproject(cube, grid).values
        for threads, block_size in ((1, 100), (3, 100), (4, 4096)):
            with self.subTest(threads=threads, block_size=block_size):
                got = backproject(cube, grid, threads=threads, block_size=block_size).values
                np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-9)


    def test_dimension_mismatch(self):
        wf = build_waveform(72e9, 82e9, 8)
        cube = BasebandCube(np.zeros((4, 4, 8)), wf, build_square_array(2, 1e-2))
        grid = VoxelGrid((0, 0, 0.2), (0.01, 0.01, 0.21), 0.01)
        with self.assertRaises(DimensionMismatch):
            backproject(cube, grid, array=build_square_array(3, 1e-2))
        with self.assertRaises(DimensionMismatch):
            Volume(grid, np.zeros(3))


class TestPointTarget(TestCase):
    '''Full size array and sweep imaging one scatterer at 0.3 m'''

    @classmethod
    def setUpClass(cls):
        cls.array = build_square_array(47, 3e-3)
        cls.waveform = build_waveform(72e9, 82e9, 128)
        cls.point = np.array([0.0, 0.0, 0.3])
        cls.cube = point_target_cube(cls.array, cls.waveform, cls.point)


    def test_cube_dimensions(self):
        self.assertEqual(self.cube.shape, (94, 94, 128))


    def test_axial_response(self):
        grid = VoxelGrid((-5e-4, -5e-4, 0.28), (5e-4, 5e-4, 0.32), 5e-4)
        magnitude = backproject(self.cube, grid).magnitude
        k, j, i = np.unravel_index(np.argmax(magnitude), magnitude.shape)
        self.assertEqual((i, j), (1, 1))
        self.assertAlmostEqual(grid.z[k], 0.3, delta=5e-4)

        peak = magnitude.max()
        self.assertGreaterEqual(peak, 0.99 * 94 * 94 * 128)

        width = point_response_width(magnitude[:, 1, 1], 5e-4)
        # c / 2B is 15 mm
        self.assertGreater(width, 0.75 * 0.015)
        self.assertLess(width, 1.25 * 0.015)


    def test_lateral_response(self):
        grid = VoxelGrid((-0.02, -5e-4, 0.2995), (0.02, 5e-4, 0.3005), 5e-4)
        magnitude = backproject(self.cube, grid).magnitude
        k, j, i = np.unravel_index(np.argmax(magnitude), magnitude.shape)
        self.assertAlmostEqual(grid.x[i], 0.0, delta=5e-4)
        self.assertEqual(j, 1)

        width = point_response_width(magnitude[1, 1, :], 5e-4)
        self.assertLess(width, 5e-3)
        self.assertGreater(width, 1e-3)


    def test_off_center_target(self):
        point = np.array([0.02, -0.015, 0.29])
        cube = point_target_cube(self.array, self.waveform, point)
        grid = VoxelGrid((0.015, -0.02, 0.285), (0.025, -0.01, 0.295), 1e-3)
        magnitude = backproject(cube, grid).magnitude
        k, j, i = np.unravel_index(np.argmax(magnitude), magnitude.shape)
        np.testing.assert_allclose([grid.x[i], grid.y[j], grid.z[k]], point, atol=1e-3)


if __name__ == '__main__':
    unittest.main()
