from collections import namedtuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT


class WaveformError(ValueError): pass


RadarMetrics = namedtuple('RadarMetrics', [
    'bandwidth',            # Hz
    'center_frequency',     # Hz
    'center_wavelength',    # m
    'range_resolution',     # m, c / 2B
    'lateral_resolution',   # m, wavelength * standoff / (2 * aperture)
    'unambiguous_range',    # m, c / (2 delta_f)
])


class Waveform:
    '''
    Stepped frequency continuous wave (SFCW) grid

    Step n (0 .. n_f-1) transmits at f0 + n * delta_f.
    '''

    c = SPEED_OF_LIGHT

    def __init__(self, f0, delta_f, n_f):
        '''
        :param f0: First carrier frequency (Hz)
        :param delta_f: Frequency step (Hz)
        :param n_f: Number of steps (>= 2)
        '''
        if not f0 > 0:
            raise WaveformError("f0 must be positive")
        if not delta_f > 0:
            raise WaveformError("delta_f must be positive")
        if int(n_f) != n_f or n_f < 2:
            raise WaveformError("n_f must be an integer >= 2")
        self.__f0 = float(f0)
        self.__delta_f = float(delta_f)
        self.__n_f = int(n_f)


    def __repr__(self):
        return "%s(f0=%.6g, delta_f=%.6g, n_f=%d)" % (
            self.__class__.__name__, self.f0, self.delta_f, self.n_f)


    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (self.f0, self.delta_f, self.n_f) == (other.f0, other.delta_f, other.n_f)


    def __hash__(self):
        return hash((self.f0, self.delta_f, self.n_f))


    @property
    def f0(self):
        return self.__f0


    @property
    def delta_f(self):
        return self.__delta_f


    @property
    def n_f(self):
        return self.__n_f


    @property
    def frequencies(self):
        '''(n_f,) carrier frequency per step'''
        return self.__f0 + np.arange(self.__n_f) * self.__delta_f


    @property
    def bandwidth(self):
        return self.__delta_f * (self.__n_f - 1)


    @property
    def center_frequency(self):
        return self.__f0 + 0.5 * self.bandwidth


    @property
    def unambiguous_range(self):
        return self.c / (2.0 * self.__delta_f)


def build_waveform(f_start, f_stop, n_f):
    '''Waveform with n_f steps from f_start to f_stop, both included'''
    if not f_stop > f_start:
        raise WaveformError("f_stop must be greater than f_start")
    if int(n_f) != n_f or n_f < 2:
        raise WaveformError("n_f must be an integer >= 2")
    return Waveform(f_start, (f_stop - f_start) / (n_f - 1), n_f)


def derived_metrics(waveform, standoff, aperture):
    '''
    Resolution figures of a waveform / aperture combination

    :param waveform: Waveform
    :param standoff: Distance from array to target (m)
    :param aperture: Array extent (m)
    :return: RadarMetrics
    '''
    if not standoff > 0 or not aperture > 0:
        raise WaveformError("standoff and aperture must be positive")
    bandwidth = waveform.bandwidth
    wavelength = waveform.c / waveform.center_frequency
    return RadarMetrics(
        bandwidth = bandwidth,
        center_frequency = waveform.center_frequency,
        center_wavelength = wavelength,
        range_resolution = waveform.c / (2.0 * bandwidth),
        lateral_resolution = wavelength * standoff / (2.0 * aperture),
        unambiguous_range = waveform.unambiguous_range,
    )
