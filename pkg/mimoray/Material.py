'''
Alpha-mix surface scattering

The outgoing direction is a linear blend of a Lambertian (diffuse) sample
and the mirror reflection, renormalized to unit length:

    out = normalize(alpha * diffuse + (1 - alpha) * specular)

alpha = 0 is a perfect mirror, alpha = 1 purely diffuse.

All functions take single vectors (3,) or stacks (N, 3) and return the
same shape.
'''

import logging
from collections import namedtuple

import numpy as np

log = logging.getLogger(__name__)


# Blends shorter than this are treated as degenerate
MIN_NORM = 1e-6

# Diffuse redraws for a blend below the surface before using the mirror direction
MAX_RETRIES = 16


class MaterialError(ValueError): pass


ScatterSample = namedtuple('ScatterSample', [
    'outgoing',     # unit direction leaving the surface
    'diffuse',      # diffuse term that was used
    'specular',     # mirror term
    'fallbacks',    # rows that fell back to the mirror direction
])


class MaterialParams:
    '''Scattering parameters of one surface'''

    def __init__(self, alpha):
        '''
        :param alpha: 0 (specular) .. 1 (diffuse)
        '''
        alpha = float(alpha)
        if not 0.0 <= alpha <= 1.0:
            raise MaterialError("alpha must be within [0, 1], got %r" % (alpha, ))
        self.__alpha = alpha


    def __repr__(self):
        return "%s(alpha=%g)" % (self.__class__.__name__, self.__alpha)


    def __eq__(self, other):
        if not isinstance(other, MaterialParams):
            return NotImplemented
        return self.__alpha == other.alpha


    def __hash__(self):
        return hash(self.__alpha)


    @property
    def alpha(self):
        return self.__alpha


def face_alphas(material, n_faces):
    '''
    Alpha per face

    :param material: MaterialParams (same for all faces) or a sequence of
        per face alpha values / MaterialParams
    :return: (n_faces,) float array
    '''
    if isinstance(material, MaterialParams):
        return np.full(n_faces, material.alpha)
    alphas = np.array([m.alpha if isinstance(m, MaterialParams) else float(m) for m in material],
                      dtype=float)
    if alphas.shape != (n_faces, ):
        raise MaterialError("Expected %d per face alpha values, got %d" % (n_faces, len(alphas)))
    if np.any((alphas < 0) | (alphas > 1)):
        raise MaterialError("alpha must be within [0, 1]")
    return alphas


def _rows(v):
    v = np.asarray(v, dtype=float)
    return v.reshape(-1, 3), v.ndim == 1


def _dot(a, b):
    return np.einsum('ij,ij->i', a, b)


def sample_unit_sphere(rng, count):
    '''(count, 3) points uniform on the unit sphere'''
    while True:
        g = rng.standard_normal((count, 3))
        norm = np.linalg.norm(g, axis=1)
        if np.all(norm > 0):
            return g / norm[:, None]


def _diffuse_rows(normals, rng):
    out = np.empty_like(normals)
    todo = np.arange(len(normals))
    while todo.size:
        d = normals[todo] + sample_unit_sphere(rng, len(todo))
        norm = np.linalg.norm(d, axis=1)
        ok = norm >= MIN_NORM
        out[todo[ok]] = d[ok] / norm[ok, None]
        todo = todo[~ok]
    return out


def sample_diffuse(normal, rng):
    '''
    Lambertian direction about the normal: normalize(normal + r), r uniform on
    the unit sphere (cosine weighted about the normal)

    :param normal: Unit normal(s)
    :param rng: numpy Generator
    '''
    normals, single = _rows(normal)
    out = _diffuse_rows(normals, rng)
    return out[0] if single else out


def reflect_specular(incident, normal):
    '''Mirror law: incident - 2 (incident . normal) normal'''
    inc, single = _rows(incident)
    n, _ = _rows(normal)
    out = inc - 2.0 * _dot(inc, n)[:, None] * n
    return out[0] if single else out


def mix_directions(diffuse, specular, alpha):
    '''
    Normalized alpha blend of two unit directions

    alpha == 0 returns specular and alpha == 1 returns diffuse unchanged.

    :return: (directions, norm of the raw blend)
    '''
    d, single = _rows(diffuse)
    m, _ = _rows(specular)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (len(d), ))
    blend = alpha[:, None] * d + (1.0 - alpha[:, None]) * m
    norm = np.linalg.norm(blend, axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        out = blend / norm[:, None]
    out = np.where((alpha == 0.0)[:, None], m, out)
    out = np.where((alpha == 1.0)[:, None], d, out)
    norm = np.where((alpha == 0.0) | (alpha == 1.0), 1.0, norm)
    if single:
        return out[0], norm[0]
    return out, norm


def scatter(incident, normal, params, rng):
    '''
    Draw outgoing directions with the alpha-mix model

    Exactly one diffuse draw is taken per row (plus redraws for blends that
    point into the surface), so a fixed generator state gives the same
    diffuse terms for any alpha.

    :param incident: Unit incident direction(s), dot(incident, normal) < 0
    :param normal: Unit surface normal(s) facing the incident ray
    :param params: MaterialParams, or per row alpha values
    :param rng: numpy Generator
    :return: ScatterSample
    '''
    inc, single = _rows(incident)
    n, _ = _rows(normal)
    if isinstance(params, MaterialParams):
        alpha = np.full(len(inc), params.alpha)
    else:
        alpha = np.broadcast_to(np.asarray(params, dtype=float), (len(inc), ))

    specular = reflect_specular(inc, n)
    diffuse = _diffuse_rows(n, rng)
    out, norm = mix_directions(diffuse, specular, alpha)

    bad = np.flatnonzero((norm < MIN_NORM) | (_dot(out, n) <= 0.0))
    for _ in range(MAX_RETRIES):
        if not bad.size:
            break
        diffuse[bad] = _diffuse_rows(n[bad], rng)
        out[bad], norm[bad] = mix_directions(diffuse[bad], specular[bad], alpha[bad])
        still = (norm[bad] < MIN_NORM) | (_dot(out[bad], n[bad]) <= 0.0)
        bad = bad[still]

    if bad.size:
        log.debug("Scatter fell back to specular for %d ray(s)", bad.size)
        out[bad] = specular[bad]

    if single:
        return ScatterSample(out[0], diffuse[0], specular[0], int(bad.size))
    return ScatterSample(out, diffuse, specular, int(bad.size))
