import os
import json
import hashlib
import logging
from collections import namedtuple

import numpy as np

from .ArtifactStore import ArtifactStore, file_sha256
from .AccelStructure import build_accel
from .RayTracer import trace_all
from .Baseband import synthesize_cube, add_noise
from .BackProjection import backproject, Volume
from .RadarImage import max_project, finalize_image, image_similarity, EmptyImage
from .Scenario import StageInputMissing, alpha_label
from . import formats

log = logging.getLogger(__name__)


RECORDS_BINARY = 'path_records.bin'
RECORDS_TEXT = 'path_records.txt'
CUBE = 'cube.bin'
VOLUME = 'volume.bin'
VOLUME_COMPLEX = 'volume_complex.npy'
AMPLITUDE = 'amplitude.pgm'
AMPLITUDE_RANGE = 'amplitude.txt'
DEPTH = 'depth.pgm'
DEPTH_RANGE = 'depth.txt'
IMAGE_CSV = 'image.csv'
SWEEP = 'sweep.csv'


SweepRow = namedtuple('SweepRow', ['alpha', 'n_records', 'peak', 'correlation', 'rms_difference'])
RunResult = namedtuple('RunResult', ['output_dir', 'manifest', 'sweep', 'images'])


def stage_key(*parts):
    '''Hash of everything a stage's output depends on'''
    text = json.dumps(parts, sort_keys=True, default=_jsonable)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError("Can't key %r" % (type(value), ))


class Pipeline:
    '''
    Runs the selected stages of a scenario for every alpha value

        trace      scene + array + material  -> path records
        baseband   path records + waveform   -> cube
        image      cube + grid               -> volume, amplitude / depth images

    Each stage's output is skipped when the store already holds it for
    the same stage key.  The scene and its BVH are built once per run.
    '''

    def __init__(self, scenario, threads=1, progress=False):
        '''
        :param scenario: Scenario
        :param threads: Worker threads of every parallel stage
        :param progress: Show progress bars
        '''
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.__scenario = scenario
        self.__threads = int(threads)
        self.__progress = progress
        self.__store = None
        self.__scene = None
        self.__accel = None
        self.__produced = set()


    @property
    def scenario(self):
        return self.__scenario


    @property
    def store(self):
        return self.__store


    def _scene(self):
        if self.__scene is None:
            mesh, source = self.__scenario.load_scene()
            self.__scene = (mesh, source)
            self.__accel = build_accel(mesh)
            log.info("Scene: %d faces from %d mesh(es)", mesh.n_faces, len(self.__scenario.meshes))
        return self.__scene[0], self.__scene[1], self.__accel


    def _name(self, alpha, filename):
        return os.path.join(alpha_label(alpha), filename)


    def _write(self, name, writer, mode='wb', alpha=None, stage=None, key=None, metadata=None):
        with self.__store.get(name) as handle:
            handle.alpha = alpha
            handle.seed = self.__scenario.seed
            handle.stage = stage
            handle.stage_key = key
            handle.metadata = dict(metadata or {})
            with handle.open(mode) as fh:
                writer(fh)
        self.__produced.add(os.path.normpath(name))
        return self.__store.index[os.path.normpath(name)]


    def _current(self, names, key):
        if not all(self.__store.is_current(name, key) for name in names):
            return False
        self.__produced.update(os.path.normpath(name) for name in names)
        return True


    # -- trace ---------------------------------------------------------------

    def _record_names(self, alpha):
        fmt = self.__scenario.record_format
        names = list()
        if fmt in ('binary', 'both'):
            names.append(self._name(alpha, RECORDS_BINARY))
        if fmt in ('text', 'both'):
            names.append(self._name(alpha, RECORDS_TEXT))
        return names


    def _trace_key(self, alpha):
        s = self.__scenario
        meshes = list()
        for spec in s.meshes:
            meshes.append({
                'source': 'phantom:' + spec.phantom if spec.phantom is not None else file_sha256(spec.path),
                'rotation': spec.transform.rotation,
                'translation': spec.transform.translation,
                'scale': spec.transform.scale,
                'alpha': spec.alpha,
            })
        t = s.trace
        return stage_key('trace', meshes, alpha, s.array.tx_positions, s.array.rx_positions, {
            'rays_per_triangle': t.rays_per_triangle,
            'max_bounces': t.max_bounces,
            'rx_radius': t.rx_radius,
            'master_seed': str(t.master_seed),
            'area_weighted': t.area_weighted,
        })


    def run_trace(self, alpha):
        '''
        :return: (records or None when reused, name of the primary record file)
        '''
        s = self.__scenario
        names = self._record_names(alpha)
        key = self._trace_key(alpha)
        if self._current(names, key):
            log.info("alpha=%g: path records are current, skipping trace", alpha)
            return None, names[0]

        mesh, source, accel = self._scene()
        material = s.face_alphas(alpha, source)
        log.info("alpha=%g: tracing %d Tx x %d faces", alpha, s.array.n_tx, mesh.n_faces)
        records = trace_all(accel, s.array, material, s.trace,
                            threads=self.__threads, progress=self.__progress)
        if not len(records):
            log.warning("alpha=%g: no rays reached any Rx antenna", alpha)

        meta = {'n_records': int(len(records))}
        for name in names:
            if name.endswith(RECORDS_TEXT):
                self._write(name, lambda fh: formats.write_records_text(records, fh), 'wt',
                            alpha, 'trace', key, meta)
            else:
                self._write(name, lambda fh: formats.write_records_binary(records, fh), 'wb',
                            alpha, 'trace', key, meta)
        return records, names[0]


    # -- baseband ------------------------------------------------------------

    def _records_source(self, alpha, traced_name):
        if traced_name is not None:
            return os.path.join(self.__store.path, traced_name)
        if self.__scenario.input_records is not None:
            return self.__scenario.input_records
        candidates = self._record_names(alpha) + [self._name(alpha, RECORDS_BINARY), self._name(alpha, RECORDS_TEXT)]
        found = [name for name in candidates if os.path.isfile(os.path.join(self.__store.path, name))]
        if found:
            self.__produced.update(os.path.normpath(name) for name in found)
            return os.path.join(self.__store.path, found[0])
        raise StageInputMissing("alpha=%g: baseband stage needs path records (run the trace stage "
                                "or set input.path_records)" % (alpha))


    @staticmethod
    def read_records(path):
        if path.endswith('.txt'):
            with open(path, 'rt') as fh:
                return formats.read_records_text(fh)
        with open(path, 'rb') as fh:
            return formats.read_records_binary(fh)


    def run_baseband(self, alpha, records=None, traced_name=None):
        '''
        :return: (cube or None when reused, n_records or None if unknown)
        '''
        s = self.__scenario
        source = self._records_source(alpha, traced_name)
        name = self._name(alpha, CUBE)
        key = stage_key('baseband', file_sha256(source), s.waveform.f0, s.waveform.delta_f, s.waveform.n_f,
                        s.array.tx_positions, s.array.rx_positions, s.spreading_loss,
                        s.noise_power, s.noise_seed, s.precision)
        if self._current([name], key):
            log.info("alpha=%g: cube is current, skipping baseband", alpha)
            return None, self.__store.index[name].metadata.get('n_records')

        if records is None:
            records = self.read_records(source)
        cube = synthesize_cube(records, s.waveform, s.array,
                               spreading_loss=s.spreading_loss, threads=self.__threads)
        if s.noise_power > 0:
            cube = add_noise(cube, s.noise_power, seed=s.noise_seed)

        self._write(name, lambda fh: formats.write_cube(cube, fh, s.precision), 'wb',
                    alpha, 'baseband', key, {'n_records': int(len(records))})
        return cube, int(len(records))


    # -- image ---------------------------------------------------------------

    def _cube_source(self, alpha, synthesized):
        path = os.path.join(self.__store.path, self._name(alpha, CUBE))
        if synthesized:
            return path
        if self.__scenario.input_cube is not None:
            return self.__scenario.input_cube
        if os.path.isfile(path):
            self.__produced.add(os.path.normpath(self._name(alpha, CUBE)))
            return path
        raise StageInputMissing("alpha=%g: image stage needs a cube (run the baseband stage "
                                "or set input.cube)" % (alpha))


    def _image_names(self, alpha):
        s = self.__scenario
        names = [VOLUME, AMPLITUDE, AMPLITUDE_RANGE, DEPTH, DEPTH_RANGE]
        if s.export_complex:
            names.append(VOLUME_COMPLEX)
        if s.export_csv:
            names.append(IMAGE_CSV)
        return [self._name(alpha, n) for n in names]


    def _finalize(self, alpha, raw):
        s = self.__scenario
        try:
            return finalize_image(raw, s.floor_db, s.clip_mode)
        except EmptyImage:
            log.warning("alpha=%g: image is all zero, written without normalization", alpha)
            return raw


    def run_image(self, alpha, cube=None, synthesized=True):
        '''
        :return: (finalized RadarImage, peak amplitude before normalization)
        '''
        s = self.__scenario
        source = self._cube_source(alpha, synthesized)
        names = self._image_names(alpha)
        grid = s.grid
        key = stage_key('image', file_sha256(source), grid.min_corner, grid.max_corner, grid.voxel_size,
                        s.array.tx_positions, s.array.rx_positions, s.floor_db, s.clip_mode,
                        s.export_complex, s.export_csv)

        if self._current(names, key):
            log.info("alpha=%g: images are current, skipping back-projection", alpha)
            with open(os.path.join(self.__store.path, self._name(alpha, VOLUME)), 'rb') as fh:
                volume = formats.read_volume(fh)
            raw = max_project(volume)
            return self._finalize(alpha, raw), float(raw.amplitude.max())

        if cube is None:
            with open(source, 'rb') as fh:
                cube = formats.read_cube(fh, s.array)
        volume = backproject(cube, grid, threads=self.__threads, progress=self.__progress)
        # Same float32 magnitudes as volume.bin
        raw = max_project(Volume(grid, volume.magnitude.astype(np.float32)))
        peak = float(raw.amplitude.max())
        image = self._finalize(alpha, raw)

        (amp_lo, amp_hi), (depth_lo, depth_hi) = formats.image_ranges(image)
        meta = {'peak': peak}
        write = lambda filename, writer, mode='wb': self._write(
            self._name(alpha, filename), writer, mode, alpha, 'image', key, meta)

        write(VOLUME, lambda fh: formats.write_volume(volume, fh))
        if s.export_complex:
            write(VOLUME_COMPLEX, lambda fh: formats.write_complex_volume(volume, fh))
        write(AMPLITUDE, lambda fh: formats.write_pgm(image.amplitude, fh, amp_lo, amp_hi))
        write(AMPLITUDE_RANGE, lambda fh: formats.write_range_sidecar(fh, amp_lo, amp_hi, 'normalized'), 'wt')
        write(DEPTH, lambda fh: formats.write_pgm(image.depth_z, fh, depth_lo, depth_hi))
        write(DEPTH_RANGE, lambda fh: formats.write_range_sidecar(fh, depth_lo, depth_hi, 'm'), 'wt')
        if s.export_csv:
            write(IMAGE_CSV, lambda fh: formats.write_image_csv(image, fh), 'wt')
        return image, peak


    # -- whole run -----------------------------------------------------------

    def run(self):
        '''
        Run every selected stage for every alpha

        :return: RunResult
        '''
        s = self.__scenario
        self.__store = ArtifactStore(s.output_dir)
        self.__produced = set()
        try:
            rows = list()
            images = dict()
            reference = None
            for alpha in s.alphas:
                records = traced = cube = None
                n_records = None

                if 'trace' in s.stages:
                    records, traced = self.run_trace(alpha)
                    if records is not None:
                        n_records = int(len(records))
                    else:
                        n_records = self.__store.index[traced].metadata.get('n_records')

                if 'baseband' in s.stages:
                    cube, counted = self.run_baseband(alpha, records, traced)
                    n_records = counted if counted is not None else n_records

                if 'image' in s.stages:
                    image, peak = self.run_image(alpha, cube, synthesized='baseband' in s.stages)
                    images[alpha] = image
                    if reference is None:
                        reference = image
                    similarity = image_similarity(reference, image)
                    rows.append(SweepRow(alpha, n_records, peak, similarity.correlation,
                                         similarity.rms_difference))
                else:
                    rows.append(SweepRow(alpha, n_records, None, None, None))

            self._write(SWEEP, lambda fh: _write_sweep(rows, fh), 'wt', stage='sweep')

            for name in self.__store.prune(self.__produced):
                log.info("Removed %s: not part of this run", name)
            for name in self.__store.verify():
                log.warning("Dropping %s from the index: file missing or changed", name)
                self.__store.index.remove(name)
            manifest = self.__store.write_manifest()
            return RunResult(s.output_dir, manifest, rows, images)
        finally:
            self.__store.close()


def _fmt(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_sweep(rows, fh):
    fh.write("alpha,n_records,peak,correlation,rms_difference\n")
    for row in rows:
        fh.write(','.join(_fmt(v) for v in row) + '\n')


def run_scenario(scenario, threads=1, progress=False):
    '''Run a loaded scenario, see Pipeline'''
    return Pipeline(scenario, threads=threads, progress=progress).run()
