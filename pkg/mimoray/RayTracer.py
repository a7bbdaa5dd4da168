import logging

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from .Material import face_alphas, scatter, MAX_RETRIES
from .TriangleMesh import sample_triangle_points

log = logging.getLogger(__name__)


# One received ray.  Packed little-endian layout doubles as the binary dump format.
PATH_RECORD_DTYPE = np.dtype([
    ('tx', '<u4'),
    ('rx', '<u4'),
    ('length', '<f8'),
    ('bounces', '<u4'),
])

# Purposes of the per (tx, face) random streams
SAMPLE_STREAM = 0
SCATTER_STREAM = 1

# Rays handled together in the Rx capture test
CAPTURE_CHUNK = 4096


class TraceConfig:
    '''Ray budget and reception settings'''

    def __init__(self, rays_per_triangle=32, max_bounces=3, rx_radius=2e-3, master_seed=0,
                 area_weighted=False):
        '''
        :param rays_per_triangle: Primary rays per face from each Tx (mean when area weighted)
        :param max_bounces: Surface interactions followed per ray
        :param rx_radius: Capture sphere radius around each Rx antenna (m)
        :param master_seed: Seed all random streams derive from (0 .. 2**64-1)
        :param area_weighted: Spread the total ray budget over faces by area
        '''
        if int(rays_per_triangle) != rays_per_triangle or rays_per_triangle < 1:
            raise ValueError("rays_per_triangle must be an integer >= 1")
        if int(max_bounces) != max_bounces or max_bounces < 1:
            raise ValueError("max_bounces must be an integer >= 1")
        if not rx_radius > 0:
            raise ValueError("rx_radius must be positive")
        if int(master_seed) != master_seed or not 0 <= master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64 bit unsigned integer")
        self.rays_per_triangle = int(rays_per_triangle)
        self.max_bounces = int(max_bounces)
        self.rx_radius = float(rx_radius)
        self.master_seed = int(master_seed)
        self.area_weighted = bool(area_weighted)


    def __repr__(self):
        return "%s(rays_per_triangle=%d, max_bounces=%d, rx_radius=%g, master_seed=%d, area_weighted=%s)" % (
            self.__class__.__name__, self.rays_per_triangle, self.max_bounces,
            self.rx_radius, self.master_seed, self.area_weighted)


def empty_records(count=0):
    return np.zeros(count, dtype=PATH_RECORD_DTYPE)


def sort_records(records):
    '''Order records by (tx, rx, length, bounces)'''
    order = np.lexsort((records['bounces'], records['length'], records['rx'], records['tx']))
    return records[order]


def unit_rng(master_seed, tx, face_id, purpose):
    '''Independent generator for one (tx, face) work unit and purpose'''
    seq = np.random.SeedSequence(master_seed, spawn_key=(int(tx), int(face_id), int(purpose)))
    return np.random.Generator(np.random.Philox(seq))


def ray_budget(mesh, config):
    '''Primary rays per face from one Tx'''
    n = mesh.n_faces
    if not config.area_weighted or not n:
        return np.full(n, config.rays_per_triangle, dtype=np.int64)
    share = mesh.face_areas / mesh.face_areas.sum()
    return np.maximum(1, np.rint(share * config.rays_per_triangle * n)).astype(np.int64)


def capture_rx_many(origins, directions, extents, rx_positions, rx_radius, accel):
    '''
    Rx antennas reached by outgoing segments

    An Rx is captured when its perpendicular distance to the segment line is
    at most rx_radius, its closest approach lies within [0, extent] along
    the segment, and nothing blocks the straight path from the segment
    start to the antenna.

    :param origins: (N, 3) interaction points
    :param directions: (N, 3) unit outgoing directions
    :param extents: (N,) distance to the next surface, inf when the ray escapes
    :param rx_positions: (K, 3)
    :param rx_radius: Capture radius (m)
    :param accel: AccelStructure for the occlusion test
    :return: (ray index, rx index, distance from origin to the Rx)
    '''
    rays, rxs, dists = list(), list(), list()
    r2 = rx_radius * rx_radius
    for s in range(0, len(origins), CAPTURE_CHUNK):
        o = origins[s:s + CAPTURE_CHUNK]
        d = directions[s:s + CAPTURE_CHUNK]
        ext = extents[s:s + CAPTURE_CHUNK]
        w = rx_positions[None, :, :] - o[:, None, :]
        along = np.einsum('ikj,ij->ik', w, d)
        dist2 = np.einsum('ikj,ikj->ik', w, w)
        perp2 = dist2 - along * along
        hit = (along >= 0.0) & (along <= ext[:, None]) & (perp2 <= r2)
        ri, ki = np.nonzero(hit)
        rays.append(ri + s)
        rxs.append(ki)
        dists.append(np.sqrt(dist2[ri, ki]))

    if not rays:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)

    rays = np.concatenate(rays)
    rxs = np.concatenate(rxs)
    dists = np.concatenate(dists)
    if rays.size:
        clear = ~accel.occluded_many(origins[rays], rx_positions[rxs])
        rays, rxs, dists = rays[clear], rxs[clear], dists[clear]
    return rays, rxs, dists


def capture_rx(origin, direction, array, accel, rx_radius, extent=np.inf):
    '''
    Rx antennas captured by one outgoing segment

    :return: list of (rx index, distance from origin to the Rx)
    '''
    _, rxs, dists = capture_rx_many(
        np.asarray(origin, dtype=float).reshape(1, 3),
        np.asarray(direction, dtype=float).reshape(1, 3),
        np.array([extent], dtype=float),
        array.rx_positions, rx_radius, accel)
    return [(int(k), float(d)) for k, d in zip(rxs, dists)]


def _primary_rays(mesh, tx_pos, tx, config):
    '''Sample points on every face that faces the Tx, grouped by face'''
    counts = ray_budget(mesh, config)
    normals = mesh.face_normals
    targets = list()
    units = list()
    for face in range(mesh.n_faces):
        rng = unit_rng(config.master_seed, tx, face, SAMPLE_STREAM)
        pts = sample_triangle_points(mesh, face, int(counts[face]), rng)
        front = (pts - tx_pos) @ normals[face] < 0.0
        if front.any():
            targets.append(pts[front])
            units.append(np.full(int(front.sum()), face, dtype=np.int64))
    if not targets:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    return np.concatenate(targets), np.concatenate(units)


def trace_tx(accel, array, material, config, tx):
    '''
    Trace all rays of one transmitter

    :param accel: AccelStructure of the scene
    :param array: ArrayGeometry
    :param material: MaterialParams or per face alpha values
    :param config: TraceConfig
    :param tx: Transmitter index
    :return: PATH_RECORD_DTYPE array sorted by (rx, length)
    '''
    mesh = accel.mesh
    if not 0 <= tx < array.n_tx:
        raise IndexError("Tx index %d out of range" % (tx))
    if not mesh.n_faces:
        return empty_records()

    alphas = face_alphas(material, mesh.n_faces)
    tx_pos = array.tx_positions[tx]
    targets, units = _primary_rays(mesh, tx_pos, tx, config)
    if not len(targets):
        return empty_records()

    directions = targets - tx_pos
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    origins = np.broadcast_to(tx_pos, directions.shape)
    face_ids, dist = accel.intersect_many(origins, directions)

    alive = face_ids >= 0
    units = units[alive]
    incident = directions[alive]
    travelled = dist[alive]
    hit_faces = face_ids[alive]
    points = tx_pos + travelled[:, None] * incident

    scatter_rngs = dict()
    found = list()
    fallbacks = 0
    for bounce in range(1, config.max_bounces + 1):
        if not units.size:
            break

        normals = accel.facing_normals(hit_faces, incident)
        outgoing = np.empty_like(incident)

        # Rays stay grouped by work unit; each unit draws from its own stream
        starts = np.flatnonzero(np.r_[True, units[1:] != units[:-1]])
        ends = np.r_[starts[1:], len(units)]
        for s, e in zip(starts, ends):
            unit = int(units[s])
            rng = scatter_rngs.get(unit)
            if rng is None:
                rng = scatter_rngs[unit] = unit_rng(config.master_seed, tx, unit, SCATTER_STREAM)
            sample = scatter(incident[s:e], normals[s:e], alphas[hit_faces[s:e]], rng)
            outgoing[s:e] = sample.outgoing
            fallbacks += sample.fallbacks

        next_faces, next_dist = accel.intersect_many(points, outgoing)
        rays, rxs, rx_dist = capture_rx_many(
            points, outgoing, next_dist, array.rx_positions, config.rx_radius, accel)

        if rays.size:
            rec = empty_records(rays.size)
            rec['tx'] = tx
            rec['rx'] = rxs
            rec['length'] = travelled[rays] + rx_dist
            rec['bounces'] = bounce
            found.append(rec)

        cont = next_faces >= 0
        units = units[cont]
        hit_faces = next_faces[cont]
        incident = outgoing[cont]
        travelled = travelled[cont] + next_dist[cont]
        points = points[cont] + next_dist[cont, None] * incident

    records = np.concatenate(found) if found else empty_records()
    records = records[np.lexsort((records['bounces'], records['length'], records['rx']))]
    if fallbacks:
        log.warning("Tx %d: %d scattered ray(s) used the mirror direction after %d diffuse redraws",
                    tx, fallbacks, MAX_RETRIES)
    log.debug("Tx %d: %d primary rays, %d records", tx, len(targets), len(records))
    return records


def trace_all(accel, array, material, config, threads=1, progress=False):
    '''
    Trace every transmitter

    Results do not depend on the thread count: every (tx, face) unit owns
    its random streams and the merged records are sorted.

    :param threads: Worker threads (joblib)
    :param progress: Show a progress bar
    :return: PATH_RECORD_DTYPE array sorted by (tx, rx, length, bounces)
    '''
    tx_range = tqdm(range(array.n_tx), desc='trace', unit='tx', disable=not progress)
    parts = Parallel(n_jobs=threads, prefer='threads')(
        delayed(trace_tx)(accel, array, material, config, tx) for tx in tx_range)
    records = sort_records(np.concatenate(parts)) if parts else empty_records()
    log.info("Traced %d Tx x %d faces: %d path records",
             array.n_tx, accel.mesh.n_faces, len(records))
    return records


def channel_slices(records, n_tx, n_rx):
    '''
    Yield ((tx, rx), records of that channel) for every channel with records

    :param records: Array sorted by (tx, rx)
    '''
    if not len(records):
        return
    key = records['tx'].astype(np.int64) * n_rx + records['rx'].astype(np.int64)
    if key.max() >= n_tx * n_rx:
        raise IndexError("Record channel outside %d x %d array" % (n_tx, n_rx))
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    ends = np.r_[starts[1:], len(key)]
    for s, e in zip(starts, ends):
        yield (int(records['tx'][s]), int(records['rx'][s])), records[s:e]
