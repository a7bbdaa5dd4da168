import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

log = logging.getLogger(__name__)


# Minimum hit distance (m).  Keeps bounced rays off the surface they left.
EPSILON = 1e-6

# Faces smaller than this (m^2) are rejected at load
MIN_FACE_AREA = 1e-12


class MeshError(ValueError): pass
class MeshParseError(MeshError): pass
class InvalidTransform(MeshError): pass


class DegenerateFaces(MeshError):

    def __init__(self, face_ids, source=None):
        self.face_ids = [int(i) for i in face_ids]
        shown = ', '.join(str(i) for i in self.face_ids[:20])
        if len(self.face_ids) > 20:
            shown += ', ...'
        msg = "%d degenerate face(s): %s" % (len(self.face_ids), shown)
        if source:
            msg = "%s: %s" % (source, msg)
        super().__init__(msg)


@dataclass(frozen=True, eq=False)
class Ray:
    '''Ray with a unit direction'''
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        direction = np.asarray(self.direction, dtype=float).reshape(3)
        length = np.linalg.norm(direction)
        if not length > 0:
            raise ValueError("Ray direction has zero length")
        if abs(length - 1.0) > 1e-9:
            direction = direction / length
        object.__setattr__(self, 'origin', origin)
        object.__setattr__(self, 'direction', direction)


    def at(self, t):
        return self.origin + t * self.direction


@dataclass(frozen=True, eq=False)
class Hit:
    face_id: int
    point: np.ndarray
    distance: float
    normal: np.ndarray


class RigidTransform:
    '''
    Rotation, then uniform scale, then translation

        v' = scale * (R @ v) + translation
    '''

    def __init__(self, rotation=None, translation=None, scale=1.0):
        '''
        :param rotation: 3x3 proper rotation matrix (default identity)
        :param translation: 3-vector in meters (default zero)
        :param scale: Positive uniform scale factor
        '''
        rotation = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        translation = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)

        if rotation.shape != (3, 3):
            raise InvalidTransform("Rotation must be 3x3, got %s" % (rotation.shape, ))
        if not np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-9) \
                or np.linalg.det(rotation) < 0:
            raise InvalidTransform("Rotation is not a proper rotation matrix")
        if translation.shape != (3, ):
            raise InvalidTransform("Translation must be a 3-vector")
        if not np.isfinite(scale) or scale <= 0:
            raise InvalidTransform("Scale must be positive, got %r" % (scale, ))

        self.rotation = rotation
        self.translation = translation
        self.scale = float(scale)


    @classmethod
    def from_euler(cls, rotation_deg=(0, 0, 0), translation=(0, 0, 0), scale=1.0):
        '''Build from extrinsic x-y-z Euler angles in degrees'''
        rotation = Rotation.from_euler('xyz', rotation_deg, degrees=True).as_matrix()
        return cls(rotation, translation, scale)


    @property
    def is_identity(self):
        return self.scale == 1.0 and not self.translation.any() \
            and np.array_equal(self.rotation, np.eye(3))


    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return self.scale * (points @ self.rotation.T) + self.translation


    def __repr__(self):
        return "RigidTransform(translation=%s, scale=%g)" % (
            np.array2string(self.translation, precision=4), self.scale)


def _face_geometry(vertices, faces):
    '''Return (unnormalized cross products, areas) per face'''
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    cross = np.cross(b - a, c - a)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    return cross, areas


class TriangleMesh:
    '''
    Immutable triangle soup with flat per-face normals

    Normals follow the winding of each face (right hand rule) and are always
    recomputed from the vertices; file provided normals are never used.
    '''

    def __init__(self, vertices, faces, name=None):
        '''
        :param vertices: (V, 3) positions in meters
        :param faces: (F, 3) vertex indices
        :param name: Label used in log and error messages
        :raises MeshError: If an index is out of bounds
        :raises DegenerateFaces: If a face has (near) zero area
        '''
        vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        faces = np.array(faces, dtype=np.int64).reshape(-1, 3)

        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError("Face index out of bounds for %d vertices" % (len(vertices)))
        if not np.all(np.isfinite(vertices)):
            raise MeshError("Non-finite vertex coordinates")

        cross, areas = _face_geometry(vertices, faces)
        bad = np.flatnonzero(areas < MIN_FACE_AREA)
        if bad.size:
            raise DegenerateFaces(bad, source=name)

        normals = cross / (2.0 * areas[:, None]) if faces.size else np.zeros((0, 3))

        triangles = vertices[faces]

        for arr in (vertices, faces, normals, areas, triangles):
            arr.setflags(write=False)

        self.__vertices = vertices
        self.__faces = faces
        self.__normals = normals
        self.__areas = areas
        self.__triangles = triangles
        self.name = name


    def __repr__(self):
        return "%s(name=%r, vertices=%d, faces=%d)" % (
            self.__class__.__name__, self.name, self.n_vertices, self.n_faces)


    @property
    def vertices(self):
        return self.__vertices


    @property
    def faces(self):
        return self.__faces


    @property
    def face_normals(self):
        '''Unit normal per face, oriented by winding'''
        return self.__normals


    @property
    def face_areas(self):
        return self.__areas


    @property
    def n_vertices(self):
        return len(self.__vertices)


    @property
    def n_faces(self):
        return len(self.__faces)


    @property
    def triangles(self):
        '''(F, 3, 3) corner positions'''
        return self.__triangles


    @property
    def centroids(self):
        return self.triangles.mean(axis=1)


    @property
    def bounds(self):
        '''(min corner, max corner) of all vertices'''
        if not self.n_vertices:
            return np.zeros(3), np.zeros(3)
        return self.__vertices.min(axis=0), self.__vertices.max(axis=0)


    def transformed(self, transform):
        '''New mesh with transform applied to all vertices (normals recomputed)'''
        if transform is None or transform.is_identity:
            return self
        return TriangleMesh(transform.apply(self.__vertices), self.__faces, name=self.name)


def combine_meshes(meshes, name=None):
    '''
    Merge meshes into one

    :param meshes: List of TriangleMesh
    :return: (TriangleMesh, per-face index into meshes)
    '''
    vertices = list()
    faces = list()
    source = list()
    offset = 0
    for i, mesh in enumerate(meshes):
        vertices.append(mesh.vertices)
        faces.append(mesh.faces + offset)
        source.append(np.full(mesh.n_faces, i, dtype=np.int64))
        offset += mesh.n_vertices

    if not meshes:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3)), name=name), np.zeros(0, dtype=np.int64)

    merged = TriangleMesh(np.concatenate(vertices), np.concatenate(faces), name=name)
    return merged, np.concatenate(source)


def _obj_index(token, n_vertices, path, lineno):
    '''Resolve one OBJ face token ("7", "7/1", "7//3", "-1") to a 0-based index'''
    try:
        idx = int(token.split('/')[0])
    except ValueError:
        raise MeshParseError("%s:%d: bad face index %r" % (path, lineno, token))
    if idx > 0:
        idx -= 1
    elif idx < 0:
        idx += n_vertices
    else:
        raise MeshParseError("%s:%d: face index 0 is not valid" % (path, lineno))
    if idx < 0 or idx >= n_vertices:
        raise MeshParseError("%s:%d: face index %s out of range (%d vertices so far)" % (
            path, lineno, token, n_vertices))
    return idx


def parse_obj(lines, path='<obj>'):
    '''
    Parse Wavefront OBJ text into (vertices, faces)

    Only positions and faces are read.  Polygons are fan triangulated.

    :param lines: Iterable of text lines
    :param path: Name used in error messages
    '''
    vertices = list()
    faces = list()

    for lineno, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        values = line.split()

        if values[0] == 'v':
            if len(values) < 4:
                raise MeshParseError("%s:%d: vertex needs 3 coordinates" % (path, lineno))
            try:
                vertices.append([float(v) for v in values[1:4]])
            except ValueError:
                raise MeshParseError("%s:%d: bad vertex coordinate" % (path, lineno))

        elif values[0] == 'f':
            if len(values) < 4:
                raise MeshParseError("%s:%d: face needs at least 3 vertices" % (path, lineno))
            polygon = [_obj_index(tok, len(vertices), path, lineno) for tok in values[1:]]
            for k in range(1, len(polygon) - 1):
                faces.append((polygon[0], polygon[k], polygon[k + 1]))

    return np.array(vertices, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, transform=None, name=None):
    '''
    Load an OBJ mesh

    :param path: Path to .obj file
    :param transform: RigidTransform applied to vertices before normals are computed
    :param name: Mesh label (defaults to the path)
    :return: TriangleMesh
    :raises MeshParseError: Malformed file
    :raises DegenerateFaces: Zero area faces (after transform)
    '''
    with open(path, 'rt') as fh:
        vertices, faces = parse_obj(fh, path=str(path))

    if transform is not None:
        vertices = transform.apply(vertices)

    mesh = TriangleMesh(vertices, faces, name=name or str(path))
    log.debug("Loaded %s: %d vertices, %d faces", path, mesh.n_vertices, mesh.n_faces)
    return mesh


def write_obj(mesh, path):
    '''Write mesh positions and faces as OBJ text'''
    with open(path, 'wt') as fh:
        if mesh.name:
            fh.write("# %s\n" % (mesh.name))
        for v in mesh.vertices:
            fh.write("v %.9g %.9g %.9g\n" % tuple(v))
        for f in mesh.faces:
            fh.write("f %d %d %d\n" % tuple(f + 1))


def sample_triangle_points(mesh, face_id, count, rng):
    '''
    Uniform points on one face (folded barycentric sampling)

    :param mesh: TriangleMesh
    :param face_id: Index of face
    :param count: Number of points (>= 1)
    :param rng: numpy Generator
    :return: (count, 3) points
    '''
    if count < 1:
        raise ValueError("count must be >= 1")
    a, b, c = mesh.triangles[face_id]
    uv = rng.random((count, 2))
    flip = uv.sum(axis=1) > 1.0
    uv[flip] = 1.0 - uv[flip]
    return a + uv[:, :1] * (b - a) + uv[:, 1:] * (c - a)
