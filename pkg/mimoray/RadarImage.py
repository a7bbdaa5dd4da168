import logging
from collections import namedtuple

import numpy as np

log = logging.getLogger(__name__)


# Default display window below the image maximum
DEFAULT_FLOOR_DB = -15.0

CLIP_MODES = ('floor', 'zero')


class EmptyImage(ValueError): pass


ImageSimilarity = namedtuple('ImageSimilarity', ['correlation', 'rms_difference'])


class RadarImage:
    '''
    2D reduction of a volume

    amplitude and depth_z are (ny, nx) arrays over the grid's x and y axes.
    floor_db is None until the image has been normalized and clipped.
    '''

    def __init__(self, amplitude, depth_z, x, y, floor_db=None):
        amplitude = np.asarray(amplitude, dtype=float)
        depth_z = np.asarray(depth_z, dtype=float)
        if amplitude.shape != depth_z.shape or amplitude.shape != (len(y), len(x)):
            raise ValueError("Amplitude %s, depth %s and axes (%d, %d) disagree" % (
                amplitude.shape, depth_z.shape, len(y), len(x)))
        if floor_db is not None and floor_db > 0:
            raise ValueError("floor_db must be <= 0")
        self.amplitude = amplitude
        self.depth_z = depth_z
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.floor_db = floor_db


    def __repr__(self):
        return "%s(shape=%s, floor_db=%s)" % (
            self.__class__.__name__, self.amplitude.shape, self.floor_db)


    @property
    def shape(self):
        return self.amplitude.shape


    @property
    def peak_index(self):
        '''(row, col) of the largest amplitude'''
        return np.unravel_index(np.argmax(self.amplitude), self.amplitude.shape)


def max_project(volume):
    '''
    Maximum amplitude over z for every (x, y) pixel

    The depth map holds the z of the strongest voxel; ties go to the
    smallest z (closest to an array in the z = 0 plane).

    :param volume: Volume
    :return: RadarImage (not normalized)
    '''
    grid = volume.grid
    magnitude = volume.magnitude
    if not magnitude.size:
        raise EmptyImage("Volume has no voxels")
    # argmax returns the first maximum, i.e. the lowest z index
    k = np.argmax(magnitude, axis=0)
    amplitude = np.take_along_axis(magnitude, k[None, :, :], axis=0)[0]
    return RadarImage(amplitude, grid.z[k], grid.x, grid.y)


def finalize_image(image, floor_db=DEFAULT_FLOOR_DB, clip_mode='floor'):
    '''
    Normalize to the image maximum and apply a dynamic range floor

    Pixels below floor_db (relative to the maximum) are set to
    10 ** (floor_db / 20), or to 0 with clip_mode 'zero'.  A floor of -inf
    only normalizes.

    :param image: RadarImage
    :param floor_db: Dynamic range in dB (< 0)
    :param clip_mode: 'floor' or 'zero'
    :return: New RadarImage
    :raises EmptyImage: If every amplitude is zero
    '''
    if not floor_db < 0:
        raise ValueError("floor_db must be negative")
    if clip_mode not in CLIP_MODES:
        raise ValueError("clip_mode must be one of %s" % (', '.join(CLIP_MODES)))

    peak = float(np.max(image.amplitude)) if image.amplitude.size else 0.0
    if not peak > 0:
        raise EmptyImage("Nothing to normalize: image is all zero")

    amplitude = image.amplitude / peak
    if np.isfinite(floor_db):
        floor = 10.0 ** (floor_db / 20.0)
        with np.errstate(divide='ignore'):
            below = 20.0 * np.log10(amplitude) < floor_db
        amplitude = np.where(below, floor if clip_mode == 'floor' else 0.0, amplitude)
        log.debug("Clipped %d of %d pixels at %g dB", int(below.sum()), below.size, floor_db)

    return RadarImage(amplitude, image.depth_z.copy(), image.x, image.y, floor_db=floor_db)


def image_similarity(a, b):
    '''
    Compare two amplitude images of equal shape

    :return: ImageSimilarity(normalized cross correlation in [-1, 1],
        RMS difference of the max-normalized amplitudes)
    '''
    pa = np.asarray(a.amplitude if isinstance(a, RadarImage) else a, dtype=float)
    pb = np.asarray(b.amplitude if isinstance(b, RadarImage) else b, dtype=float)
    if pa.shape != pb.shape:
        raise ValueError("Image shapes differ: %s vs %s" % (pa.shape, pb.shape))
    if pa.max() > 0:
        pa = pa / pa.max()
    if pb.max() > 0:
        pb = pb / pb.max()
    da = pa - pa.mean()
    db = pb - pb.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    correlation = float((da * db).sum() / denom) if denom > 0 else 0.0
    return ImageSimilarity(correlation, float(np.sqrt(np.mean((pa - pb) ** 2))))


def point_response_width(profile, spacing, level_db=-3.0):
    '''
    Width of the main lobe of a 1D magnitude profile at level_db below its peak

    Crossings are linearly interpolated between samples.

    :param profile: 1D magnitudes on a uniform axis
    :param spacing: Axis step (m)
    :return: Width in meters (inf if the lobe reaches an end of the profile)
    '''
    p = np.asarray(profile, dtype=float)
    peak = int(np.argmax(p))
    level = p[peak] * 10.0 ** (level_db / 20.0)

    def crossing(direction):
        i = peak
        while 0 <= i + direction < len(p):
            j = i + direction
            if p[j] < level:
                return i + direction * (p[i] - level) / (p[i] - p[j])
            i = j
        return None

    left = crossing(-1)
    right = crossing(+1)
    if left is None or right is None:
        return np.inf
    return (right - left) * spacing
