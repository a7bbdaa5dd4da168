'''
Readers and writers for the artifact files

All binary layouts are little-endian except the portable graymaps, whose
16 bit samples are big-endian as the PGM format requires.  Functions work
on open file objects so they can be pointed at artifact store handles.

    path records (binary)   packed PATH_RECORD_DTYPE rows, no header
    path records (text)     "tx rx length bounces" per line
    cube                    magic, n_tx n_rx n_f (u4), f0 delta_f (f8),
                            interleaved re/im, tx slowest, n fastest
    volume                  magic, min max voxel (3 x f8 each),
                            counts nx ny nz (u4), f4 magnitudes, x fastest
'''

import numpy as np

from .RayTracer import PATH_RECORD_DTYPE, empty_records
from .Waveform import Waveform
from .VoxelGrid import VoxelGrid
from .Baseband import BasebandCube
from .BackProjection import Volume


CUBE_MAGIC = {
    'binary64': b'MRCUBE64',
    'binary32': b'MRCUBE32',
}
CUBE_DTYPES = {
    'binary64': np.dtype('<c16'),
    'binary32': np.dtype('<c8'),
}
CUBE_HEADER = np.dtype([('n', '<u4', 3), ('f0', '<f8'), ('delta_f', '<f8')])

VOLUME_MAGIC = b'MRVOL001'
VOLUME_HEADER = np.dtype([
    ('min', '<f8', 3), ('max', '<f8', 3), ('voxel', '<f8', 3), ('counts', '<u4', 3)])

PGM_MAXVAL = 65535


class FormatError(ValueError): pass


def _name(fh):
    return getattr(fh, 'name', '<stream>')


def _read_exact(fh, size, what):
    data = fh.read(size)
    if len(data) != size:
        raise FormatError("%s: truncated %s (%d of %d bytes)" % (_name(fh), what, len(data), size))
    return data


# -- Path records -----------------------------------------------------------

def write_records_binary(records, fh):
    fh.write(np.ascontiguousarray(records, dtype=PATH_RECORD_DTYPE).tobytes())


def read_records_binary(fh):
    data = fh.read()
    if len(data) % PATH_RECORD_DTYPE.itemsize:
        raise FormatError("%s: %d bytes is not a whole number of %d byte records" % (
            _name(fh), len(data), PATH_RECORD_DTYPE.itemsize))
    return np.frombuffer(data, dtype=PATH_RECORD_DTYPE).copy()


def write_records_text(records, fh):
    '''One "tx rx length bounces" line per record, lengths at full precision'''
    for rec in records:
        fh.write("%d %d %r %d\n" % (rec['tx'], rec['rx'], float(rec['length']), rec['bounces']))


def read_records_text(fh):
    rows = list()
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        try:
            if len(parts) != 4:
                raise ValueError("expected 4 fields, got %d" % (len(parts)))
            tx, rx, bounces = int(parts[0]), int(parts[1]), int(parts[3])
            length = float(parts[2])
        except ValueError as e:
            raise FormatError("%s:%d: %s" % (_name(fh), lineno, e))
        if tx < 0 or rx < 0 or bounces < 1 or not length > 0:
            raise FormatError("%s:%d: invalid path record" % (_name(fh), lineno))
        rows.append((tx, rx, length, bounces))

    records = empty_records(len(rows))
    if rows:
        records[:] = rows
    return records


# -- Baseband cube ----------------------------------------------------------

def write_cube(cube, fh, precision='binary64'):
    '''
    :param cube: BasebandCube
    :param fh: File opened 'wb'
    :param precision: 'binary64' or 'binary32' sample payload
    '''
    if precision not in CUBE_MAGIC:
        raise ValueError("Unknown cube precision %r" % (precision, ))
    header = np.zeros(1, dtype=CUBE_HEADER)
    header['n'] = cube.shape
    header['f0'] = cube.waveform.f0
    header['delta_f'] = cube.waveform.delta_f
    fh.write(CUBE_MAGIC[precision])
    fh.write(header.tobytes())
    fh.write(np.ascontiguousarray(cube.samples, dtype=CUBE_DTYPES[precision]).tobytes())


def read_cube(fh, array):
    '''
    :param fh: File opened 'rb'
    :param array: ArrayGeometry the cube was synthesized for
    :return: BasebandCube (complex128 samples)
    :raises FormatError: Bad magic or truncated payload
    :raises DimensionMismatch: Cube channels disagree with the array
    '''
    magic = _read_exact(fh, 8, 'magic')
    precision = None
    for name, value in CUBE_MAGIC.items():
        if value == magic:
            precision = name
    if precision is None:
        raise FormatError("%s: not a cube file" % (_name(fh)))

    header = np.frombuffer(_read_exact(fh, CUBE_HEADER.itemsize, 'header'), dtype=CUBE_HEADER)[0]
    n_tx, n_rx, n_f = (int(n) for n in header['n'])
    dtype = CUBE_DTYPES[precision]
    payload = _read_exact(fh, n_tx * n_rx * n_f * dtype.itemsize, 'samples')
    samples = np.frombuffer(payload, dtype=dtype).astype(np.complex128).reshape(n_tx, n_rx, n_f)
    waveform = Waveform(float(header['f0']), float(header['delta_f']), n_f)
    return BasebandCube(samples, waveform, array)


# -- Volume -----------------------------------------------------------------

def write_volume(volume, fh):
    '''Magnitudes as binary32, x fastest'''
    grid = volume.grid
    header = np.zeros(1, dtype=VOLUME_HEADER)
    header['min'] = grid.min_corner
    header['max'] = grid.max_corner
    header['voxel'] = grid.voxel_size
    header['counts'] = grid.counts
    fh.write(VOLUME_MAGIC)
    fh.write(header.tobytes())
    fh.write(np.ascontiguousarray(volume.magnitude, dtype='<f4').tobytes())


def read_volume(fh):
    if _read_exact(fh, 8, 'magic') != VOLUME_MAGIC:
        raise FormatError("%s: not a volume file" % (_name(fh)))
    header = np.frombuffer(_read_exact(fh, VOLUME_HEADER.itemsize, 'header'), dtype=VOLUME_HEADER)[0]
    grid = VoxelGrid(header['min'], header['max'], header['voxel'])
    if tuple(int(n) for n in header['counts']) != grid.counts:
        raise FormatError("%s: voxel counts %s disagree with grid %s" % (
            _name(fh), tuple(header['counts']), grid.counts))
    payload = _read_exact(fh, grid.n_voxels * 4, 'magnitudes')
    return Volume(grid, np.frombuffer(payload, dtype='<f4').astype(np.float32))


def write_complex_volume(volume, fh):
    '''Complex values as a .npy array shaped (nz, ny, nx)'''
    np.save(fh, np.asarray(volume.values, dtype=np.complex128))


# -- Images -----------------------------------------------------------------

def write_pgm(values, fh, vmin, vmax):
    '''
    16 bit binary graymap

    values are mapped linearly from [vmin, vmax] to [0, 65535].  The first
    row written is the largest y so the image reads with +y up.

    :param values: (ny, nx) array
    '''
    values = np.asarray(values, dtype=float)
    span = vmax - vmin
    if span > 0:
        scaled = (values - vmin) / span
    else:
        scaled = np.zeros_like(values)
    gray = np.rint(np.clip(scaled, 0.0, 1.0) * PGM_MAXVAL).astype('>u2')
    ny, nx = gray.shape
    fh.write(b"P5\n%d %d\n%d\n" % (nx, ny, PGM_MAXVAL))
    fh.write(np.ascontiguousarray(gray[::-1]).tobytes())


def read_pgm(fh):
    '''
    :return: (ny, nx) uint16 array with row 0 at the smallest y
    '''
    tokens = list()
    while len(tokens) < 4:
        line = fh.readline()
        if not line:
            raise FormatError("%s: truncated graymap header" % (_name(fh)))
        tokens.extend(line.split(b'#')[0].split())
    if tokens[0] != b'P5':
        raise FormatError("%s: not a binary graymap" % (_name(fh)))
    nx, ny, maxval = (int(t) for t in tokens[1:4])
    if maxval != PGM_MAXVAL:
        raise FormatError("%s: expected 16 bit samples" % (_name(fh)))
    data = _read_exact(fh, nx * ny * 2, 'pixels')
    return np.frombuffer(data, dtype='>u2').reshape(ny, nx)[::-1].astype(np.uint16)


def write_range_sidecar(fh, vmin, vmax, unit):
    '''Text file stating the values mapped to gray 0 and 65535'''
    fh.write("min %r\nmax %r\nunit %s\n" % (float(vmin), float(vmax), unit))


def read_range_sidecar(fh):
    values = dict()
    for line in fh:
        key, _, value = line.strip().partition(' ')
        if key:
            values[key] = value
    try:
        return float(values['min']), float(values['max']), values.get('unit', '')
    except (KeyError, ValueError):
        raise FormatError("%s: incomplete range sidecar" % (_name(fh)))


def image_ranges(image):
    '''
    Gray mapping ranges of an image

    :return: ((amplitude min, max), (depth min, max))
    '''
    if image.floor_db is None:
        amplitude = (0.0, float(image.amplitude.max()))
    else:
        # Clipped images span [floor, 1]; the 'zero' clip mode reaches 0
        amplitude = (min(10.0 ** (image.floor_db / 20.0), float(image.amplitude.min())), 1.0)
    return amplitude, (float(image.depth_z.min()), float(image.depth_z.max()))


def write_image_csv(image, fh):
    '''One "x,y,amplitude,depth_z" row per pixel, x fastest'''
    fh.write("x,y,amplitude,depth_z\n")
    for j, y in enumerate(image.y):
        for i, x in enumerate(image.x):
            fh.write("%r,%r,%r,%r\n" % (float(x), float(y),
                                        float(image.amplitude[j, i]), float(image.depth_z[j, i])))
