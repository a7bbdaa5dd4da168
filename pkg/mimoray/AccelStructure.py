import logging

import numpy as np

from .TriangleMesh import EPSILON, Hit

log = logging.getLogger(__name__)


# Faces per leaf before a node is split
LEAF_SIZE = 4

# Rays tested together against all faces in brute force mode
BRUTE_FORCE_CHUNK = 1 << 18

# Box padding (m); keeps axis aligned flat boxes from being missed
BOX_PAD = 1e-9


def _ray_triangle(origins, directions, v0, e1, e2):
    '''
    Moller-Trumbore for every (ray, triangle) pair

    :param origins: (R, 3)
    :param directions: (R, 3)
    :param v0, e1, e2: (T, 3) first corner and the two edge vectors
    :return: (R, T) distances, inf where there is no hit
    '''
    d = directions[:, None, :]
    pvec = np.cross(d, e2[None, :, :])
    det = (pvec * e1[None, :, :]).sum(axis=2)

    # Parallel rays never hit; scale the cutoff with the edge lengths
    scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    parallel = np.abs(det) <= 1e-12 * scale[None, :]

    with np.errstate(divide='ignore', invalid='ignore'):
        inv_det = 1.0 / det
        tvec = origins[:, None, :] - v0[None, :, :]
        u = (tvec * pvec).sum(axis=2) * inv_det
        qvec = np.cross(tvec, e1[None, :, :])
        v = (d * qvec).sum(axis=2) * inv_det
        t = (qvec * e2[None, :, :]).sum(axis=2) * inv_det

    inside = ~parallel & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
    return np.where(inside, t, np.inf)


def _closest(t, face_ids, t_min, best_t, best_f):
    '''
    Choose the nearest valid hit per row of t

    Equal distances resolve to the lowest face id.
    '''
    t = np.where((t > t_min[:, None]) & (t <= best_t[:, None]), t, np.inf)
    # Lowest face id first so argmin picks it on ties
    order = np.argsort(face_ids, kind='stable')
    t = t[:, order]
    ids = face_ids[order]
    col = np.argmin(t, axis=1)
    rows = np.arange(len(t))
    cand_t = t[rows, col]
    cand_f = ids[col]
    better = (cand_t < best_t) | (
        (cand_t == best_t) & np.isfinite(cand_t) & ((best_f < 0) | (cand_f < best_f)))
    return np.where(better, cand_t, best_t), np.where(better, cand_f, best_f)


def _prepare_rays(origins, directions, t_min, t_max):
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    directions = np.asarray(directions, dtype=float).reshape(-1, 3)
    n = len(origins)
    t_min = np.maximum(np.broadcast_to(np.asarray(t_min, dtype=float), (n, )), EPSILON)
    t_max = np.broadcast_to(np.asarray(t_max, dtype=float), (n, )).copy()
    return origins, directions, t_min, t_max


def brute_force_intersect(mesh, origins, directions, t_min=EPSILON, t_max=np.inf):
    '''
    Nearest hit of each ray against every face

    Reference implementation for AccelStructure.

    :return: (face ids with -1 for no hit, distances with inf for no hit)
    '''
    origins, directions, t_min, t_max = _prepare_rays(origins, directions, t_min, t_max)
    n = len(origins)
    best_f = np.full(n, -1, dtype=np.int64)
    best_t = t_max.copy()

    if mesh.n_faces and n:
        tri = mesh.triangles
        v0 = tri[:, 0]
        e1 = tri[:, 1] - v0
        e2 = tri[:, 2] - v0
        face_ids = np.arange(mesh.n_faces)
        step = max(1, BRUTE_FORCE_CHUNK // mesh.n_faces)
        for s in range(0, n, step):
            sl = slice(s, s + step)
            t = _ray_triangle(origins[sl], directions[sl], v0, e1, e2)
            best_t[sl], best_f[sl] = _closest(t, face_ids, t_min[sl], best_t[sl], best_f[sl])

    best_t[best_f < 0] = np.inf
    return best_f, best_t


class AccelStructure:
    '''
    Bounding volume hierarchy over a TriangleMesh

    Nodes live in flat arrays.  Internal nodes have two children, leaves
    reference a contiguous run of faces in `face_order`.  The structure is
    read only after construction, so any number of threads may query it.

    Queries are batched: a whole set of rays walks the tree together and
    each node only sees the rays whose box test passed.
    '''

    def __init__(self, mesh, leaf_size=LEAF_SIZE):
        '''
        :param mesh: TriangleMesh to index
        :param leaf_size: Maximum faces per leaf
        '''
        self.__mesh = mesh
        self.__leaf_size = max(1, int(leaf_size))
        self._build()


    @property
    def mesh(self):
        return self.__mesh


    @property
    def n_nodes(self):
        return len(self.__left)


    @property
    def n_leaves(self):
        return int(np.count_nonzero(self.__left < 0))


    def _build(self):
        mesh = self.__mesh
        n = mesh.n_faces
        tri = mesh.triangles
        centroids = tri.mean(axis=1) if n else np.zeros((0, 3))
        tri_min = tri.min(axis=1) if n else np.zeros((0, 3))
        tri_max = tri.max(axis=1) if n else np.zeros((0, 3))

        order = np.arange(n)
        node_min, node_max = list(), list()
        left, right, start, count = list(), list(), list(), list()

        def new_node(lo, hi):
            idx = order[lo:hi]
            node_min.append(tri_min[idx].min(axis=0) - BOX_PAD)
            node_max.append(tri_max[idx].max(axis=0) + BOX_PAD)
            left.append(-1)
            right.append(-1)
            start.append(lo)
            count.append(hi - lo)
            return len(left) - 1

        if n:
            stack = [(new_node(0, n), 0, n)]
            while stack:
                node, lo, hi = stack.pop()
                if hi - lo <= self.__leaf_size:
                    continue

                # Median split along the widest centroid axis
                idx = order[lo:hi]
                c = centroids[idx]
                axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
                sorted_idx = idx[np.argsort(c[:, axis], kind='stable')]
                order[lo:hi] = sorted_idx
                mid = (lo + hi) // 2

                left_node = new_node(lo, mid)
                right_node = new_node(mid, hi)
                left[node] = left_node
                right[node] = right_node
                stack.append((right_node, mid, hi))
                stack.append((left_node, lo, mid))

        self.__node_min = np.array(node_min, dtype=float).reshape(-1, 3)
        self.__node_max = np.array(node_max, dtype=float).reshape(-1, 3)
        self.__left = np.array(left, dtype=np.int64)
        self.__right = np.array(right, dtype=np.int64)
        self.__start = np.array(start, dtype=np.int64)
        self.__count = np.array(count, dtype=np.int64)
        self.__face_order = order

        v0 = tri[order, 0] if n else np.zeros((0, 3))
        self.__v0 = v0
        self.__e1 = (tri[order, 1] - v0) if n else np.zeros((0, 3))
        self.__e2 = (tri[order, 2] - v0) if n else np.zeros((0, 3))

        for arr in (self.__node_min, self.__node_max, self.__left, self.__right,
                    self.__start, self.__count, self.__face_order,
                    self.__v0, self.__e1, self.__e2):
            arr.setflags(write=False)

        log.debug("Built BVH for %d faces: %d nodes, %d leaves", n, self.n_nodes, self.n_leaves)


    def _box_entry(self, node, origins, inv_dir):
        '''Slab test: (t_enter, t_exit) per ray'''
        t0 = (self.__node_min[node] - origins) * inv_dir
        t1 = (self.__node_max[node] - origins) * inv_dir
        t_enter = np.minimum(t0, t1).max(axis=1)
        t_exit = np.maximum(t0, t1).min(axis=1)
        return t_enter, t_exit


    def intersect_many(self, origins, directions, t_min=EPSILON, t_max=np.inf):
        '''
        Nearest hit for a batch of rays

        :param origins: (N, 3) ray origins
        :param directions: (N, 3) unit directions
        :param t_min: Lower distance bound, scalar or (N,); never below EPSILON
        :param t_max: Upper distance bound (inclusive), scalar or (N,)
        :return: (face ids, -1 for no hit; distances, inf for no hit)
        '''
        origins, directions, t_min, t_max = _prepare_rays(origins, directions, t_min, t_max)
        n = len(origins)
        best_f = np.full(n, -1, dtype=np.int64)
        best_t = t_max

        if not self.n_nodes or not n:
            return best_f, np.full(n, np.inf)

        # Zero components would give nan in the slab test
        safe = np.where(np.abs(directions) < 1e-300, 1e-300, directions)
        with np.errstate(divide='ignore', over='ignore'):
            inv_dir = 1.0 / safe

        stack = [(0, np.arange(n))]
        while stack:
            node, rays = stack.pop()
            with np.errstate(over='ignore', invalid='ignore'):
                t_enter, t_exit = self._box_entry(node, origins[rays], inv_dir[rays])
            keep = (t_enter <= t_exit) & (t_exit >= t_min[rays]) & (t_enter <= best_t[rays])
            rays = rays[keep]
            if not rays.size:
                continue

            if self.__left[node] < 0:
                lo = self.__start[node]
                hi = lo + self.__count[node]
                t = _ray_triangle(origins[rays], directions[rays],
                                  self.__v0[lo:hi], self.__e1[lo:hi], self.__e2[lo:hi])
                best_t[rays], best_f[rays] = _closest(
                    t, self.__face_order[lo:hi], t_min[rays], best_t[rays], best_f[rays])
            else:
                stack.append((self.__right[node], rays))
                stack.append((self.__left[node], rays))

        distances = np.where(best_f >= 0, best_t, np.inf)
        return best_f, distances


    def intersect(self, ray, t_min=0.0, t_max=np.inf):
        '''
        Nearest hit along one ray in (max(t_min, EPSILON), t_max]

        :param ray: Ray
        :return: Hit with the normal facing the ray, or None
        '''
        if t_max <= t_min:
            raise ValueError("t_max must be greater than t_min")
        face_ids, distances = self.intersect_many(
            ray.origin[None, :], ray.direction[None, :], t_min, t_max)
        face_id = int(face_ids[0])
        if face_id < 0:
            return None
        distance = float(distances[0])
        return Hit(
            face_id = face_id,
            point = ray.origin + distance * ray.direction,
            distance = distance,
            normal = self.facing_normals(face_ids, ray.direction[None, :])[0])


    def facing_normals(self, face_ids, directions):
        '''Face normals flipped to oppose the given directions'''
        normals = self.__mesh.face_normals[face_ids]
        flip = np.einsum('ij,ij->i', normals, directions) > 0.0
        return np.where(flip[:, None], -normals, normals)


    def occluded_many(self, a, b):
        '''
        Test segments a[i] -> b[i] for blocking faces

        A face blocks when it crosses the open segment shortened by EPSILON at
        both ends.  Segments shorter than 2 * EPSILON are never blocked.

        :return: (N,) bool
        '''
        a = np.asarray(a, dtype=float).reshape(-1, 3)
        b = np.asarray(b, dtype=float).reshape(-1, 3)
        delta = b - a
        length = np.linalg.norm(delta, axis=1)
        result = np.zeros(len(a), dtype=bool)
        test = length > 2.0 * EPSILON
        if not test.any() or not self.n_nodes:
            return result

        directions = delta[test] / length[test, None]
        face_ids, _ = self.intersect_many(a[test], directions, EPSILON, length[test] - EPSILON)
        result[test] = face_ids >= 0
        return result


    def occluded(self, a, b):
        '''True if any face crosses the open segment between points a and b'''
        return bool(self.occluded_many(a, b)[0])


def build_accel(mesh, leaf_size=LEAF_SIZE):
    '''Index mesh for intersection queries (an empty mesh gives an empty structure)'''
    return AccelStructure(mesh, leaf_size=leaf_size)
