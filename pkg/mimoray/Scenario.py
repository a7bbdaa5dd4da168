'''
Scenario files

A scenario is a YAML document with the sections scene, material, array,
waveform, trace, baseband, imaging, output and input.  All units are SI.
Everything except scene.meshes has a default reproducing the 94/94 array,
72 - 82 GHz / 128 step waveform and 1 mm voxel grid of the reference
system.

Problems are reported as ScenarioError with the file, line and dotted field
they concern.  validate_scenario() collects every problem instead of
stopping at the first.
'''

import os
import math
import logging
from collections import namedtuple

import numpy as np
import yaml

from .ArrayGeometry import ArrayGeometry, build_square_array, ArrayGeometryError
from .Waveform import build_waveform, derived_metrics, WaveformError
from .VoxelGrid import VoxelGrid, GridError
from .RayTracer import TraceConfig, ray_budget
from .TriangleMesh import RigidTransform, MeshError, load_mesh, combine_meshes
from .primitives import make_hand_phantom, HAND_POSES
from .RadarImage import CLIP_MODES, DEFAULT_FLOOR_DB
from .formats import CUBE_MAGIC

log = logging.getLogger(__name__)


STAGES = ('trace', 'baseband', 'image')
STAGE_ALIASES = {'imaging': 'image'}
RECORD_FORMATS = ('binary', 'text', 'both')

DEFAULTS = {
    'array.elements_per_side': 47,
    'array.spacing': 3e-3,
    'array.plane_z': 0.0,
    'waveform.f_start': 72e9,
    'waveform.f_stop': 82e9,
    'waveform.n_f': 128,
    'imaging.grid.min': (-0.10, -0.10, 0.26),
    'imaging.grid.max': (0.10, 0.10, 0.34),
    'imaging.grid.voxel': 1e-3,
}

_MISSING = object()


class ScenarioError(ValueError):

    def __init__(self, message, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        self.message = message
        location = ':'.join(str(p) for p in (path, line) if p is not None)
        parts = [p for p in (location, field, message) if p]
        super().__init__(': '.join(parts))


class StageInputMissing(FileNotFoundError): pass


ValidationReport = namedtuple('ValidationReport', ['violations', 'metrics'])


class MeshSpec:
    '''One entry of scene.meshes'''

    def __init__(self, path=None, phantom=None, transform=None, alpha=None, field=None):
        self.path = path
        self.phantom = phantom
        self.transform = transform or RigidTransform()
        self.alpha = alpha
        self.field = field


    def __repr__(self):
        return "%s(%s)" % (self.__class__.__name__, self.path or 'phantom=' + str(self.phantom))


    def load(self):
        '''
        :return: TriangleMesh
        :raises MeshError: Unreadable or invalid geometry
        '''
        if self.phantom is not None:
            return make_hand_phantom(self.phantom).transformed(self.transform)
        return load_mesh(self.path, transform=self.transform)


def parse_stages(value):
    '''
    Normalize a stage selection

    :param value: 'all', one stage name, or a list of names
    :return: tuple of stage names in pipeline order
    :raises ValueError: Unknown names or a selection with gaps
    '''
    if value is None or value == 'all':
        return STAGES
    names = [value] if isinstance(value, str) else list(value)
    names = [STAGE_ALIASES.get(n, n) for n in names]
    unknown = [n for n in names if n not in STAGES]
    if unknown:
        raise ValueError("unknown stage(s) %s (have %s, all)" % (', '.join(map(str, unknown)), ', '.join(STAGES)))
    idx = sorted(set(STAGES.index(n) for n in names))
    if idx != list(range(idx[0], idx[-1] + 1)):
        raise ValueError("stages must be consecutive, got %s" % (', '.join(STAGES[i] for i in idx)))
    return tuple(STAGES[i] for i in idx)


def alpha_label(alpha):
    '''Directory name of one sweep value'''
    return 'alpha_%g' % (alpha)


class _ConfigReader:
    '''Typed access to the parsed document with file:line error reporting'''

    def __init__(self, path, text):
        self.path = path
        self.violations = list()
        try:
            self.root = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            raise ScenarioError(str(getattr(e, 'problem', None) or e), path=path,
                                line=mark.line + 1 if mark is not None else None)
        if self.data is None:
            self.data = dict()
        if not isinstance(self.data, dict):
            raise ScenarioError("top level must be a mapping", path=path, line=1)


    def line(self, field):
        '''Line of the deepest node along a dotted field path'''
        node = self.root
        if node is None:
            return None
        for part in field.split('.'):
            child = None
            if isinstance(node, yaml.MappingNode):
                for key, value in node.value:
                    if key.value == part:
                        child = value
                        break
            elif isinstance(node, yaml.SequenceNode) and part.isdigit() and int(part) < len(node.value):
                child = node.value[int(part)]
            if child is None:
                break
            node = child
        return node.start_mark.line + 1


    def error(self, field, message):
        self.violations.append(ScenarioError(message, path=self.path, line=self.line(field), field=field))


    def lookup(self, field, default=_MISSING):
        value = self.data
        for part in field.split('.'):
            if isinstance(value, dict) and part in value:
                value = value[part]
            elif isinstance(value, list) and part.isdigit() and int(part) < len(value):
                value = value[int(part)]
            else:
                return DEFAULTS.get(field, default)
        return value


    def section(self, field):
        value = self.lookup(field, dict())
        if not isinstance(value, dict):
            self.error(field, "must be a mapping")
            return dict()
        return value


    def number(self, field, default=_MISSING, integer=False, minimum=None, positive=False, value=_MISSING):
        '''
        Read a number; strings such as "72e9" are accepted

        :return: float or int, or None after recording a violation
        '''
        if value is _MISSING:
            value = self.lookup(field, default)
        if value is _MISSING:
            self.error(field, "required")
            return None
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            self.error(field, "expected a number, got %r" % (value, ))
            return None
        try:
            number = float(value) if not isinstance(value, int) else value
        except ValueError:
            self.error(field, "expected a number, got %r" % (value, ))
            return None
        if not math.isfinite(number):
            self.error(field, "must be finite")
            return None
        if integer:
            if int(number) != number:
                self.error(field, "expected an integer, got %r" % (value, ))
                return None
            number = int(number)
        if positive and not number > 0:
            self.error(field, "must be positive")
            return None
        if minimum is not None and number < minimum:
            self.error(field, "must be >= %s" % (minimum, ))
            return None
        return number


    def vector(self, field, default=_MISSING, length=3):
        value = self.lookup(field, default)
        if value is _MISSING:
            self.error(field, "required")
            return None
        if not isinstance(value, (list, tuple)) or len(value) != length:
            self.error(field, "expected a list of %d numbers" % (length))
            return None
        out = [self.number('%s.%d' % (field, i), value=v) for i, v in enumerate(value)]
        return None if any(v is None for v in out) else out


    def points(self, field):
        value = self.lookup(field)
        if not isinstance(value, list) or not value:
            self.error(field, "expected a non-empty list of [x, y, z]")
            return None
        out = [self.vector('%s.%d' % (field, i), default=p) for i, p in enumerate(value)]
        return None if any(v is None for v in out) else out


    def choice(self, field, options, default):
        value = self.lookup(field, default)
        if value not in options:
            self.error(field, "must be one of %s, got %r" % (', '.join(map(str, options)), value))
            return default
        return value


    def flag(self, field, default=False):
        value = self.lookup(field, default)
        if not isinstance(value, bool):
            self.error(field, "expected true or false")
            return default
        return value


    def existing_path(self, field, base):
        value = self.lookup(field, None)
        if value is None:
            return None
        if not isinstance(value, str):
            self.error(field, "expected a file path")
            return None
        path = os.path.normpath(os.path.join(base, os.path.expanduser(value)))
        if not os.path.isfile(path):
            self.error(field, "file not found: %s" % (path))
        return path


class Scenario:
    '''
    Parsed scenario file

    Construct with load_scenario().  Geometry objects are built eagerly so a
    loaded scenario is known to be runnable.
    '''

    def __init__(self, reader, path, seed=None, output_dir=None, stages=None):
        self.path = path
        self.directory = os.path.dirname(os.path.abspath(path))
        r = reader

        r.section('output')
        try:
            self.stages = parse_stages(stages if stages is not None else r.lookup('output.stages', 'all'))
        except ValueError as e:
            r.error('output.stages', str(e))
            self.stages = STAGES

        self.meshes = self._read_meshes(r)
        self.alphas = self._read_alphas(r)
        self.array = self._read_array(r)

        self.waveform = None
        f_start = r.number('waveform.f_start', positive=True)
        f_stop = r.number('waveform.f_stop', positive=True)
        n_f = r.number('waveform.n_f', integer=True, minimum=2)
        if None not in (f_start, f_stop, n_f):
            try:
                self.waveform = build_waveform(f_start, f_stop, n_f)
            except WaveformError as e:
                r.error('waveform', str(e))

        self.trace = None
        r.section('trace')
        if seed is not None:
            seed = r.number('trace.seed', integer=True, minimum=0, value=seed)
        else:
            seed = r.number('trace.seed', default=0, integer=True, minimum=0)
        trace = dict(
            rays_per_triangle = r.number('trace.rays_per_triangle', default=32, integer=True, minimum=1),
            max_bounces = r.number('trace.max_bounces', default=3, integer=True, minimum=1),
            rx_radius = r.number('trace.rx_radius', default=2e-3, positive=True),
            master_seed = seed,
            area_weighted = r.flag('trace.area_weighted'),
        )
        if seed is not None and seed >= 2 ** 64:
            r.error('trace.seed', "must fit in 64 bits")
        elif None not in trace.values():
            self.trace = TraceConfig(**trace)

        r.section('baseband')
        self.spreading_loss = r.flag('baseband.spreading_loss')
        self.noise_power = r.number('baseband.noise_power', default=0.0, minimum=0.0)
        self.noise_seed = r.number('baseband.noise_seed', default=0, integer=True, minimum=0)
        self.precision = r.choice('baseband.precision', tuple(CUBE_MAGIC), 'binary64')

        self.grid = None
        r.section('imaging')
        lo = r.vector('imaging.grid.min')
        hi = r.vector('imaging.grid.max')
        voxel = r.lookup('imaging.grid.voxel')
        if isinstance(voxel, (list, tuple)):
            voxel = r.vector('imaging.grid.voxel')
        else:
            voxel = r.number('imaging.grid.voxel', positive=True)
        if None not in (lo, hi, voxel):
            try:
                self.grid = VoxelGrid(lo, hi, voxel)
            except GridError as e:
                r.error('imaging.grid', str(e))
        self.floor_db = r.number('imaging.floor_db', default=DEFAULT_FLOOR_DB)
        if self.floor_db is not None and not self.floor_db < 0:
            r.error('imaging.floor_db', "must be negative")
        self.clip_mode = r.choice('imaging.clip_mode', CLIP_MODES, 'floor')
        self.export_complex = r.flag('imaging.export_complex')
        self.export_csv = r.flag('imaging.export_csv')

        if output_dir is None:
            out = r.lookup('output.directory', 'output')
            if not isinstance(out, str):
                r.error('output.directory', "expected a directory path")
                out = 'output'
            self.output_dir = os.path.normpath(os.path.join(self.directory, os.path.expanduser(out)))
        else:
            self.output_dir = os.path.normpath(output_dir)
        self.record_format = r.choice('output.path_records', RECORD_FORMATS, 'binary')

        r.section('input')
        self.input_records = r.existing_path('input.path_records', self.directory)
        self.input_cube = r.existing_path('input.cube', self.directory)
        if self.input_cube is not None and len(self.alphas) > 1 and self.stages[0] == 'image':
            r.error('input.cube', "one input cube can't stand for %d alpha values" % (len(self.alphas)))


    def __repr__(self):
        return "%s('%s', alphas=%s, stages=%s)" % (
            self.__class__.__name__, self.path, self.alphas, ','.join(self.stages))


    @property
    def seed(self):
        return self.trace.master_seed


    def _read_meshes(self, r):
        meshes = list()
        entries = r.lookup('scene.meshes')
        if entries is _MISSING:
            # Only tracing needs geometry
            if 'trace' in self.stages:
                r.error('scene.meshes', "required")
            return meshes
        if not isinstance(entries, list) or not entries:
            r.error('scene.meshes', "expected a non-empty list")
            return meshes

        for i, entry in enumerate(entries):
            field = 'scene.meshes.%d' % (i)
            if not isinstance(entry, dict) or ('path' in entry) == ('phantom' in entry):
                r.error(field, "needs exactly one of 'path' or 'phantom'")
                continue

            path = phantom = None
            if 'phantom' in entry:
                phantom = str(entry['phantom'])
                if phantom not in HAND_POSES:
                    r.error(field + '.phantom', "unknown pose %r (have %s)" % (
                        phantom, ', '.join(sorted(HAND_POSES))))
            else:
                path = r.existing_path(field + '.path', self.directory)

            transform = None
            tf = r.lookup(field + '.transform', dict())
            if not isinstance(tf, dict):
                r.error(field + '.transform', "must be a mapping")
            else:
                translation = r.vector(field + '.transform.translation', default=(0, 0, 0))
                rotation = r.vector(field + '.transform.rotation_deg', default=(0, 0, 0))
                scale = r.number(field + '.transform.scale', default=1.0, positive=True)
                if None not in (translation, rotation, scale):
                    try:
                        transform = RigidTransform.from_euler(rotation, translation, scale)
                    except MeshError as e:
                        r.error(field + '.transform', str(e))

            alpha = None
            if 'alpha' in entry:
                alpha = self._check_alpha(r, field + '.alpha', entry['alpha'])

            meshes.append(MeshSpec(path=path, phantom=phantom, transform=transform, alpha=alpha, field=field))
        return meshes


    def _check_alpha(self, r, field, value):
        alpha = r.number(field, value=value)
        if alpha is not None and not 0.0 <= alpha <= 1.0:
            r.error(field, "alpha must be within [0, 1], got %r" % (alpha, ))
            return None
        return alpha


    def _read_alphas(self, r):
        material = r.section('material')
        given = [k for k in ('alpha', 'alphas', 'alpha_range') if k in material]
        if len(given) > 1:
            r.error('material', "use only one of alpha, alphas, alpha_range")
        if not given:
            return [0.5]

        key = given[0]
        if key == 'alpha':
            values = [self._check_alpha(r, 'material.alpha', material['alpha'])]
        elif key == 'alphas':
            items = material['alphas']
            if not isinstance(items, list) or not items:
                r.error('material.alphas', "expected a non-empty list")
                return [0.5]
            values = [self._check_alpha(r, 'material.alphas.%d' % (i), v) for i, v in enumerate(items)]
        else:
            start = r.number('material.alpha_range.start', default=0.0)
            stop = r.number('material.alpha_range.stop', default=1.0)
            step = r.number('material.alpha_range.step', positive=True)
            if None in (start, stop, step) or stop < start:
                if None not in (start, stop, step):
                    r.error('material.alpha_range', "stop must not be below start")
                return [0.5]
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [self._check_alpha(r, 'material.alpha_range', round(start + i * step, 12))
                      for i in range(count)]

        values = [v for v in values if v is not None]
        if len(set(alpha_label(v) for v in values)) != len(values):
            r.error('material', "duplicate alpha values")
        return values or [0.5]


    def _read_array(self, r):
        array = r.section('array')
        try:
            if 'tx_positions' in array or 'rx_positions' in array:
                tx = r.points('array.tx_positions')
                rx = r.points('array.rx_positions')
                if tx is None or rx is None:
                    return None
                return ArrayGeometry(tx, rx)

            n = r.number('array.elements_per_side', integer=True, minimum=2)
            spacing = r.number('array.spacing', positive=True)
            plane_z = r.number('array.plane_z')
            edge_offset = r.number('array.edge_offset', default=None, minimum=0.0)
            if None in (n, spacing, plane_z):
                return None
            return build_square_array(n, spacing, plane_z, edge_offset)
        except ArrayGeometryError as e:
            r.error('array', str(e))
            return None


    def mesh_alphas(self):
        '''Per mesh alpha override, None where the sweep value applies'''
        return [m.alpha for m in self.meshes]


    def load_scene(self):
        '''
        Load and merge all meshes

        :return: (TriangleMesh, per-face index into self.meshes)
        '''
        meshes = [spec.load() for spec in self.meshes]
        return combine_meshes(meshes, name=os.path.basename(self.path))


    def face_alphas(self, alpha, face_source):
        '''
        Alpha of every face for one sweep value

        :param alpha: Sweep value for faces without a per-mesh override
        :param face_source: Per-face mesh index from load_scene()
        '''
        overrides = np.array([np.nan if a is None else a for a in self.mesh_alphas()], dtype=float)
        if not overrides.size:
            return np.zeros(0)
        per_face = overrides[face_source]
        return np.where(np.isnan(per_face), alpha, per_face)


    def standoff(self):
        '''Distance from the array center to the grid center along z'''
        center = 0.5 * (self.grid.min_corner[2] + self.grid.max_corner[2])
        return abs(center - float(self.array.center[2]))


def _read(path):
    try:
        with open(path, 'rt') as fh:
            return fh.read()
    except OSError as e:
        raise ScenarioError("can't read scenario: %s" % (e.strerror or e), path=path)


def _parse(path, seed=None, output_dir=None, stages=None):
    reader = _ConfigReader(path, _read(path))
    scenario = Scenario(reader, path, seed=seed, output_dir=output_dir, stages=stages)
    return scenario, reader.violations


def load_scenario(path, seed=None, output_dir=None, stages=None):
    '''
    Load a scenario file

    :param path: YAML file
    :param seed: Override of trace.seed
    :param output_dir: Override of output.directory
    :param stages: Override of output.stages
    :return: Scenario
    :raises ScenarioError: On the first problem found
    '''
    scenario, violations = _parse(path, seed=seed, output_dir=output_dir, stages=stages)
    if violations:
        raise violations[0]
    return scenario


def validate_scenario(path):
    '''
    Check a scenario without running it

    Meshes are loaded (not traced) to count faces.  Nothing is written.

    :return: ValidationReport(list of ScenarioError, dict of derived metrics)
    '''
    try:
        scenario, violations = _parse(path)
    except ScenarioError as e:
        return ValidationReport([e], dict())

    metrics = dict()
    metrics['alphas'] = scenario.alphas
    if scenario.array is not None:
        metrics['n_tx'] = scenario.array.n_tx
        metrics['n_rx'] = scenario.array.n_rx
        metrics['aperture'] = scenario.array.aperture
    if scenario.waveform is not None:
        metrics['n_f'] = scenario.waveform.n_f
        metrics['delta_f'] = scenario.waveform.delta_f
        metrics['unambiguous_range'] = scenario.waveform.unambiguous_range
    if scenario.grid is not None:
        metrics['voxel_counts'] = scenario.grid.counts
        metrics['n_voxels'] = scenario.grid.n_voxels
    if None not in (scenario.array, scenario.waveform, scenario.grid):
        rf = derived_metrics(scenario.waveform, scenario.standoff(), scenario.array.aperture)
        metrics['bandwidth'] = rf.bandwidth
        metrics['range_resolution'] = rf.range_resolution
        metrics['lateral_resolution'] = rf.lateral_resolution
        metrics['standoff'] = scenario.standoff()

    if scenario.meshes and not any((e.field or '').startswith('scene') for e in violations):
        try:
            mesh, _ = scenario.load_scene()
        except (MeshError, OSError) as e:
            violations.append(ScenarioError(str(e), path=path, field='scene.meshes'))
        else:
            metrics['n_faces'] = mesh.n_faces
            if scenario.trace is not None and scenario.array is not None:
                primary = int(ray_budget(mesh, scenario.trace).sum()) * scenario.array.n_tx
                metrics['primary_rays_per_alpha'] = primary
                metrics['primary_rays_total'] = primary * len(scenario.alphas)

    return ValidationReport(violations, metrics)
