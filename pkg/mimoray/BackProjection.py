import cmath
import logging
import math

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from .Baseband import DimensionMismatch

log = logging.getLogger(__name__)


# Voxels evaluated together; each block is independent
BLOCK_SIZE = 4096


class Volume:
    '''Reconstructed values on a VoxelGrid, stored (nz, ny, nx)'''

    def __init__(self, grid, values):
        values = np.asarray(values)
        if values.size != grid.n_voxels:
            raise DimensionMismatch("Volume has %d values for %d voxels" % (values.size, grid.n_voxels))
        self.__grid = grid
        self.__values = values.reshape(grid.shape)


    def __repr__(self):
        return "%s(shape=%s, complex=%s)" % (
            self.__class__.__name__, self.__values.shape, self.is_complex)


    @property
    def grid(self):
        return self.__grid


    @property
    def values(self):
        return self.__values


    @property
    def is_complex(self):
        return np.iscomplexobj(self.__values)


    @property
    def magnitude(self):
        return np.abs(self.__values)


def _check_dimensions(cube, array):
    if array is not None and (array.n_tx, array.n_rx) != cube.shape[:2]:
        raise DimensionMismatch("Cube has %d x %d channels, array has %d x %d" % (
            cube.shape[0], cube.shape[1], array.n_tx, array.n_rx))


def _distances(antennas, points):
    '''(n_antennas, n_points) Euclidean distances'''
    return np.sqrt(((antennas[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))


def _backproject_block(samples, tx, rx, k0, dk, points):
    '''
    Matched filter for one block of voxels

    exp(j k_n R) for successive n is built by repeated multiplication with
    exp(j dk R) instead of evaluating n_f exponentials.
    '''
    r_tx = _distances(tx, points)
    r_rx = _distances(rx, points)
    phase_tx = np.exp(1j * k0 * r_tx)
    phase_rx = np.exp(1j * k0 * r_rx)
    step_tx = np.exp(1j * dk * r_tx)
    step_rx = np.exp(1j * dk * r_rx)

    acc = np.zeros(len(points), dtype=np.complex128)
    for step in samples:
        # sum_tx phase_tx * sum_rx s[tx, rx, n] * phase_rx
        acc += (phase_tx * (step @ phase_rx)).sum(axis=0)
        phase_tx *= step_tx
        phase_rx *= step_rx
    return acc


def backproject(cube, grid, array=None, threads=1, block_size=BLOCK_SIZE, progress=False):
    '''
    SFCW brute-force back-projection

        v(p) = sum_tx sum_rx sum_n s[tx, rx, n] exp(+j 2 pi f_n (|p_tx - p| + |p_rx - p|) / c)

    evaluated at every voxel center.

    :param cube: BasebandCube
    :param grid: VoxelGrid
    :param array: Geometry to image with (default the cube's own)
    :param threads: Worker threads over voxel blocks (joblib)
    :param block_size: Voxels per block
    :return: Volume with complex values
    :raises DimensionMismatch: If the array does not match the cube's channels
    '''
    _check_dimensions(cube, array)
    array = array or cube.array
    waveform = cube.waveform
    k0 = 2.0 * np.pi * waveform.f0 / waveform.c
    dk = 2.0 * np.pi * waveform.delta_f / waveform.c

    points = grid.points()
    # (n_f, n_tx, n_rx) so each step is one contiguous matrix
    samples = np.ascontiguousarray(np.moveaxis(cube.samples, 2, 0), dtype=np.complex128)
    blocks = range(0, len(points), block_size)
    blocks = tqdm(blocks, desc='backproject', unit='block', disable=not progress)
    parts = Parallel(n_jobs=threads, prefer='threads')(
        delayed(_backproject_block)(samples, array.tx_positions, array.rx_positions,
                                    k0, dk, points[s:s + block_size])
        for s in blocks)

    log.info("Back-projected %d channels x %d steps onto %d voxels",
             cube.shape[0] * cube.shape[1], cube.shape[2], grid.n_voxels)
    return Volume(grid, np.concatenate(parts))


def backproject_reference(cube, grid, array=None):
    '''
    Naive nested loop back-projection

    Slow; used to check backproject() on tiny instances.
    '''
    _check_dimensions(cube, array)
    array = array or cube.array
    waveform = cube.waveform
    freqs = waveform.frequencies
    c = waveform.c
    samples = cube.samples
    values = list()
    for p in grid.points():
        total = 0j
        for t, tx in enumerate(array.tx_positions):
            r_tx = math.dist(tx, p)
            for r, rx in enumerate(array.rx_positions):
                r_rx = math.dist(rx, p)
                for n, f in enumerate(freqs):
                    total += samples[t, r, n] * cmath.exp(2j * math.pi * f * (r_tx + r_rx) / c)
        values.append(total)
    return Volume(grid, np.array(values, dtype=np.complex128))
