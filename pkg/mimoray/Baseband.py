import logging

import numpy as np
from joblib import Parallel, delayed

from .RayTracer import channel_slices, sort_records

log = logging.getLogger(__name__)


class DimensionMismatch(ValueError): pass


class BasebandCube:
    '''
    SFCW baseband samples of every channel

    samples[tx, rx, n] is the complex sample of channel (tx, rx) at
    frequency step n of the waveform.
    '''

    def __init__(self, samples, waveform, array):
        '''
        :param samples: (n_tx, n_rx, n_f) complex array
        :param waveform: Waveform the samples were taken with
        :param array: ArrayGeometry of the channels
        :raises DimensionMismatch: If the sample shape disagrees with waveform or array
        '''
        samples = np.asarray(samples)
        expected = (array.n_tx, array.n_rx, waveform.n_f)
        if samples.shape != expected:
            raise DimensionMismatch("Cube shape %s does not match array/waveform %s" % (
                samples.shape, expected))
        if not np.iscomplexobj(samples):
            samples = samples.astype(np.complex128)
        self.__samples = samples
        self.__waveform = waveform
        self.__array = array


    def __repr__(self):
        return "%s(n_tx=%d, n_rx=%d, n_f=%d)" % ((self.__class__.__name__, ) + self.shape)


    @property
    def samples(self):
        return self.__samples


    @property
    def waveform(self):
        return self.__waveform


    @property
    def array(self):
        return self.__array


    @property
    def shape(self):
        return self.__samples.shape


    def with_samples(self, samples):
        return BasebandCube(samples, self.__waveform, self.__array)


def synthesize_channel(lengths, waveform, spreading_loss=False):
    '''
    Coherent sum of one unit phasor per received path

        s[n] = sum_i exp(-j 2 pi (f0 + n delta_f) d_i / c)

    Paths are accumulated in ascending length order.

    :param lengths: Path lengths d_i (m), or path records of one channel
    :param waveform: Waveform
    :param spreading_loss: Weight each path by 1/d_i
    :return: (n_f,) complex128
    '''
    if isinstance(lengths, np.ndarray) and lengths.dtype.names:
        lengths = lengths['length']
    d = np.sort(np.asarray(lengths, dtype=np.float64), kind='stable')
    if not d.size:
        return np.zeros(waveform.n_f, dtype=np.complex128)
    if not np.all(np.isfinite(d)):
        raise ValueError("Path lengths must be finite")

    phase = -2.0 * np.pi * waveform.frequencies[None, :] * d[:, None] / waveform.c
    terms = np.exp(1j * phase)
    if spreading_loss:
        terms /= d[:, None]
    return terms.sum(axis=0)


def synthesize_cube(records, waveform, array, spreading_loss=False, threads=1):
    '''
    Baseband cube from path records

    Channels without records are zero.

    :param records: PATH_RECORD_DTYPE array (any order)
    :param waveform: Waveform
    :param array: ArrayGeometry the records were traced with
    :param spreading_loss: Weight each path by 1/d
    :param threads: Worker threads (joblib)
    :return: BasebandCube
    '''
    samples = np.zeros((array.n_tx, array.n_rx, waveform.n_f), dtype=np.complex128)
    if len(records):
        channels = list(channel_slices(sort_records(records), array.n_tx, array.n_rx))
        values = Parallel(n_jobs=threads, prefer='threads')(
            delayed(synthesize_channel)(rec['length'], waveform, spreading_loss)
            for _, rec in channels)
        for ((tx, rx), _), value in zip(channels, values):
            samples[tx, rx] = value
        log.info("Synthesized %d channels from %d path records", len(channels), len(records))
    return BasebandCube(samples, waveform, array)


def add_noise(cube, power, seed=0):
    '''
    Add complex white Gaussian noise

    :param cube: BasebandCube
    :param power: Noise power per sample (variance of the complex value)
    :param seed: Seed for the noise generator
    :return: New BasebandCube
    '''
    if power < 0:
        raise ValueError("Noise power must be >= 0")
    if power == 0:
        return cube
    rng = np.random.Generator(np.random.Philox(seed))
    sigma = np.sqrt(power / 2.0)
    noise = sigma * (rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape))
    return cube.with_samples(cube.samples + noise)
