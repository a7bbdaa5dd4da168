import numpy as np


class GridError(ValueError): pass


class VoxelGrid:
    '''
    Regular grid of voxel centers

    Both ends of every axis are sample points: an axis from min to max with
    edge e has round((max - min) / e) + 1 points at min + i * e.  Arrays
    indexed by the grid are shaped (nz, ny, nx) so x varies fastest in memory.
    '''

    def __init__(self, min_corner, max_corner, voxel_size):
        '''
        :param min_corner: (x, y, z) in meters
        :param max_corner: (x, y, z) in meters, greater than min on every axis
        :param voxel_size: Edge length per axis, or one value for all axes
        '''
        lo = np.array(min_corner, dtype=float).reshape(3)
        hi = np.array(max_corner, dtype=float).reshape(3)
        edge = np.broadcast_to(np.array(voxel_size, dtype=float), (3, )).copy()

        if not np.all(hi > lo):
            raise GridError("Grid max must exceed min on every axis")
        if not np.all(edge > 0):
            raise GridError("Voxel size must be positive")

        counts = np.rint((hi - lo) / edge).astype(np.int64) + 1

        for arr in (lo, hi, edge, counts):
            arr.setflags(write=False)
        self.__min = lo
        self.__max = hi
        self.__edge = edge
        self.__counts = counts


    def __repr__(self):
        return "%s(min=%s, max=%s, voxel=%s, counts=%s)" % (
            self.__class__.__name__, self.__min.tolist(), self.__max.tolist(),
            self.__edge.tolist(), self.__counts.tolist())


    @property
    def min_corner(self):
        return self.__min


    @property
    def max_corner(self):
        return self.__max


    @property
    def voxel_size(self):
        return self.__edge


    @property
    def counts(self):
        '''(nx, ny, nz)'''
        return tuple(int(n) for n in self.__counts)


    @property
    def shape(self):
        '''Array shape (nz, ny, nx)'''
        nx, ny, nz = self.counts
        return nz, ny, nx


    @property
    def n_voxels(self):
        return int(np.prod(self.__counts))


    def axis(self, i):
        '''Center coordinates along axis i (0=x, 1=y, 2=z)'''
        return self.__min[i] + np.arange(self.__counts[i]) * self.__edge[i]


    @property
    def x(self):
        return self.axis(0)


    @property
    def y(self):
        return self.axis(1)


    @property
    def z(self):
        return self.axis(2)


    def points(self):
        '''(n_voxels, 3) centers in x-fastest order'''
        zz, yy, xx = np.meshgrid(self.z, self.y, self.x, indexing='ij')
        return np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
