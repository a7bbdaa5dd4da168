import numpy as np
from scipy.spatial.distance import pdist


# Antennas closer than this (m) are considered the same position
MIN_SEPARATION = 1e-6


class ArrayGeometryError(ValueError): pass


class ArrayGeometry:
    '''
    Positions of all transmit and receive antennas of a MIMO array

    Antennas are ideal isotropic points.  Every (tx, rx) pair is one channel.
    '''

    def __init__(self, tx_positions, rx_positions):
        '''
        :param tx_positions: (n_tx, 3) positions in meters
        :param rx_positions: (n_rx, 3) positions in meters
        :raises ArrayGeometryError: On empty sets or coincident antennas
        '''
        tx = np.array(tx_positions, dtype=float).reshape(-1, 3)
        rx = np.array(rx_positions, dtype=float).reshape(-1, 3)
        if not len(tx) or not len(rx):
            raise ArrayGeometryError("Need at least one Tx and one Rx antenna")
        if not np.all(np.isfinite(tx)) or not np.all(np.isfinite(rx)):
            raise ArrayGeometryError("Non-finite antenna position")

        both = np.concatenate([tx, rx])
        if len(both) > 1:
            closest = pdist(both).min()
            if closest <= MIN_SEPARATION:
                raise ArrayGeometryError(
                    "Antennas must be distinct (closest pair %.3g m apart)" % (closest))

        tx.setflags(write=False)
        rx.setflags(write=False)
        self.__tx = tx
        self.__rx = rx


    def __repr__(self):
        return "%s(n_tx=%d, n_rx=%d, aperture=%.4f m)" % (
            self.__class__.__name__, self.n_tx, self.n_rx, self.aperture)


    @property
    def tx_positions(self):
        return self.__tx


    @property
    def rx_positions(self):
        return self.__rx


    @property
    def n_tx(self):
        return len(self.__tx)


    @property
    def n_rx(self):
        return len(self.__rx)


    @property
    def n_channels(self):
        return self.n_tx * self.n_rx


    @property
    def all_positions(self):
        return np.concatenate([self.__tx, self.__rx])


    @property
    def aperture(self):
        '''Largest coordinate span over all antennas (m)'''
        pos = self.all_positions
        return float((pos.max(axis=0) - pos.min(axis=0)).max())


    @property
    def center(self):
        pos = self.all_positions
        return 0.5 * (pos.max(axis=0) + pos.min(axis=0))


    def subset(self, tx=None, rx=None):
        '''New geometry with only the selected antenna indices'''
        return ArrayGeometry(
            self.__tx if tx is None else self.__tx[list(tx)],
            self.__rx if rx is None else self.__rx[list(rx)])


def build_square_array(elements_per_side, spacing, plane_z=0.0, edge_offset=None):
    '''
    Square MIMO layout centered on the z axis

    Tx antennas sit on the two horizontal edges (y = +/- side/2, corners
    included), Rx antennas on the two vertical edges.  The Rx columns are
    moved edge_offset outward in x so they never share a corner with a Tx.

    :param elements_per_side: Antennas per edge (>= 2)
    :param spacing: Distance between neighbours on an edge (m)
    :param plane_z: z of the array plane
    :param edge_offset: Outward shift of the Rx columns, default spacing/2
    :return: ArrayGeometry with 2*elements_per_side Tx and Rx
    '''
    if elements_per_side < 2:
        raise ArrayGeometryError("elements_per_side must be >= 2")
    if not spacing > 0:
        raise ArrayGeometryError("spacing must be positive")
    if edge_offset is None:
        edge_offset = spacing / 2.0

    side = (elements_per_side - 1) * spacing
    coords = np.linspace(-side / 2.0, side / 2.0, elements_per_side)
    half = side / 2.0
    column = half + edge_offset

    z = np.full(elements_per_side, float(plane_z))
    tx = np.concatenate([
        np.stack([coords, np.full(elements_per_side, -half), z], axis=1),
        np.stack([coords, np.full(elements_per_side, half), z], axis=1),
    ])
    rx = np.concatenate([
        np.stack([np.full(elements_per_side, -column), coords, z], axis=1),
        np.stack([np.full(elements_per_side, column), coords, z], axis=1),
    ])
    return ArrayGeometry(tx, rx)
