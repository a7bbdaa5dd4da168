'''
Procedural test geometry

Plates, boxes, tubes and an articulated hand phantom, all built with
outward facing winding.  Units are meters.
'''

import numpy as np
from scipy.spatial.transform import Rotation

from .TriangleMesh import TriangleMesh, combine_meshes


def _grid_face(origin, u, v, nu=1, nv=1):
    '''Quad origin..origin+u+v split into 2*nu*nv triangles with normal along u x v'''
    origin, u, v = (np.asarray(a, dtype=float) for a in (origin, u, v))
    i, j = np.meshgrid(np.arange(nu + 1), np.arange(nv + 1), indexing='ij')
    vertices = origin + (i.reshape(-1, 1) / nu) * u + (j.reshape(-1, 1) / nv) * v

    def vid(a, b):
        return a * (nv + 1) + b

    faces = list()
    for a in range(nu):
        for b in range(nv):
            p00, p10, p11, p01 = vid(a, b), vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1)
            faces.append((p00, p10, p11))
            faces.append((p00, p11, p01))
    return vertices, np.array(faces, dtype=np.int64)


def _merge(parts):
    vertices = list()
    faces = list()
    offset = 0
    for v, f in parts:
        vertices.append(v)
        faces.append(f + offset)
        offset += len(v)
    return np.concatenate(vertices), np.concatenate(faces)


def _rotation_from_z(axis):
    '''Rotation taking +z onto the unit vector axis'''
    z = np.array([0.0, 0.0, 1.0])
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    cross = np.cross(z, axis)
    sin = np.linalg.norm(cross)
    cos = float(np.dot(z, axis))
    if sin < 1e-12:
        if cos > 0:
            return Rotation.identity()
        return Rotation.from_rotvec([np.pi, 0.0, 0.0])
    return Rotation.from_rotvec(cross / sin * np.arctan2(sin, cos))


def make_plate(width, height, center=(0, 0, 0), rotation_deg=(0, 0, 0), divisions=(1, 1), name='plate'):
    '''
    Flat rectangle, normal along -z before rotation (faces an array below it)

    :param width: Extent along x (m)
    :param height: Extent along y (m)
    :param center: Plate center after rotation
    :param rotation_deg: Extrinsic x-y-z Euler angles applied about the center
    :param divisions: (nx, ny) grid subdivisions
    '''
    nx, ny = divisions
    vertices, faces = _grid_face(
        origin = (-width / 2.0, -height / 2.0, 0.0),
        u = (0.0, height, 0.0),
        v = (width, 0.0, 0.0),
        nu = ny, nv = nx)
    rot = Rotation.from_euler('xyz', rotation_deg, degrees=True)
    vertices = rot.apply(vertices) + np.asarray(center, dtype=float)
    return TriangleMesh(vertices, faces, name=name)


def make_box(size, center=(0, 0, 0), divisions=(1, 1, 1), name='box'):
    '''Axis aligned box with outward normals, each side split into a grid'''
    sx, sy, sz = size
    nx, ny, nz = divisions
    m = np.asarray(center, dtype=float) - np.array([sx, sy, sz]) / 2.0
    X, Y, Z = np.array([sx, 0, 0]), np.array([0, sy, 0]), np.array([0, 0, sz])
    vertices, faces = _merge([
        _grid_face(m, Y, X, ny, nx),
        _grid_face(m + Z, X, Y, nx, ny),
        _grid_face(m, X, Z, nx, nz),
        _grid_face(m + Y, Z, X, nz, nx),
        _grid_face(m, Z, Y, nz, ny),
        _grid_face(m + X, Y, Z, ny, nz),
    ])
    return TriangleMesh(vertices, faces, name=name)


def make_tube(start, end, radius, segments=12, caps=True, name='tube'):
    '''Closed cylinder from start to end'''
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = np.linalg.norm(end - start)
    theta = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([radius * np.cos(theta), radius * np.sin(theta), np.zeros(segments)], axis=1)
    top = ring + np.array([0.0, 0.0, length])

    k = np.arange(segments)
    k1 = (k + 1) % segments
    faces = [np.stack([k, k1, k1 + segments], axis=1),
             np.stack([k, k1 + segments, k + segments], axis=1)]
    vertices = [ring, top]
    if caps:
        bottom_center = 2 * segments
        top_center = 2 * segments + 1
        vertices.append(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, length]]))
        faces.append(np.stack([np.full(segments, bottom_center), k1, k], axis=1))
        faces.append(np.stack([np.full(segments, top_center), k + segments, k1 + segments], axis=1))

    vertices = _rotation_from_z(end - start).apply(np.concatenate(vertices)) + start
    return TriangleMesh(vertices, np.concatenate(faces), name=name)


# (base x, base y, segment lengths, radii) per finger in the palm frame
_FINGERS = {
    'index':  ((0.031, 0.047), (0.045, 0.027, 0.022), (0.0095, 0.0085, 0.0075)),
    'middle': ((0.010, 0.049), (0.050, 0.030, 0.023), (0.0095, 0.0085, 0.0075)),
    'ring':   ((-0.011, 0.047), (0.047, 0.028, 0.022), (0.0090, 0.0080, 0.0070)),
    'little': ((-0.031, 0.043), (0.036, 0.021, 0.019), (0.0080, 0.0072, 0.0065)),
    'thumb':  ((0.040, -0.020), (0.042, 0.032, 0.027), (0.0110, 0.0100, 0.0090)),
}

# Joint flexion in degrees toward the palm side, proximal to distal
HAND_POSES = {
    'open': {
        'index': (0, 0, 0), 'middle': (0, 0, 0), 'ring': (0, 0, 0),
        'little': (0, 0, 0), 'thumb': (0, 0, 0),
    },
    # Index and thumb meet in a ring, other fingers extended
    'f': {
        'index': (55, 65, 35), 'middle': (5, 5, 0), 'ring': (5, 5, 0),
        'little': (5, 5, 0), 'thumb': (35, 30, 20),
    },
}


def make_hand_phantom(pose='open', segments=12, name=None):
    '''
    Articulated hand built from a palm slab and three segment fingers

    The palm lies in the x-y plane centered on the origin with its inner side
    facing -z; fingers point toward +y.  Place it in front of an array in the
    x-y plane by translating along +z.

    :param pose: Key of HAND_POSES
    :param segments: Facets around each finger segment
    '''
    try:
        flexion = HAND_POSES[pose.lower()]
    except KeyError:
        raise ValueError("Unknown hand pose %r (have %s)" % (pose, ', '.join(sorted(HAND_POSES))))

    palm_normal = np.array([0.0, 0.0, -1.0])
    parts = [make_box((0.085, 0.095, 0.025), divisions=(6, 7, 2), name='palm')]

    for finger, (base, lengths, radii) in _FINGERS.items():
        if finger == 'thumb':
            direction = np.array([0.8, 0.6, 0.0])
        else:
            direction = np.array([0.0, 1.0, 0.0])
        direction /= np.linalg.norm(direction)
        hinge = np.cross(direction, palm_normal)
        hinge /= np.linalg.norm(hinge)

        joint = np.array([base[0], base[1], 0.0])
        angle = 0.0
        for i, (length, radius, flex) in enumerate(zip(lengths, radii, flexion[finger])):
            angle += np.radians(flex)
            seg_dir = Rotation.from_rotvec(hinge * angle).apply(direction)
            tip = joint + length * seg_dir
            parts.append(make_tube(joint, tip, radius, segments=segments,
                                   name='%s%d' % (finger, i)))
            joint = tip

    mesh, _ = combine_meshes(parts, name=name or 'hand-%s' % (pose.lower()))
    return mesh
