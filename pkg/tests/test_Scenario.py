import os
import unittest
from unittest import TestCase
from shutil import rmtree
from textwrap import dedent

import numpy as np

from mimoray import ScenarioError, load_scenario, validate_scenario, write_obj
from mimoray.Scenario import parse_stages, alpha_label, STAGES
from mimoray.primitives import make_plate


UNITTEST_TMP_DIR = os.path.join(os.path.abspath(os.path.dirname(__file__)), '.unitest_tmp')
CONFIG_DIR = os.path.join(os.path.abspath(os.path.dirname(__file__)), '..', 'configs')

HAND = dedent("""\
    scene:
      meshes:
        - phantom: open
          transform:
            translation: [0, 0, 0.3]
    """)


class TestScenario(TestCase):


    def setUp(self):
        if os.path.exists(UNITTEST_TMP_DIR):
            rmtree(UNITTEST_TMP_DIR)
        os.mkdir(UNITTEST_TMP_DIR)


    def tearDown(self):
        if os.path.exists(UNITTEST_TMP_DIR):
            rmtree(UNITTEST_TMP_DIR)


    def _write(self, text, name='scenario.yaml'):
        path = os.path.join(UNITTEST_TMP_DIR, name)
        with open(path, 'wt') as fh:
            fh.write(dedent(text))
        return path


    def test_defaults(self):
        scenario = load_scenario(self._write(HAND))
        self.assertEqual(scenario.alphas, [0.5])
        self.assertEqual((scenario.array.n_tx, scenario.array.n_rx), (94, 94))
        self.assertEqual(scenario.waveform.n_f, 128)
        self.assertEqual(scenario.grid.counts, (201, 201, 81))
        self.assertEqual(scenario.stages, STAGES)
        self.assertEqual(scenario.seed, 0)
        self.assertEqual(scenario.floor_db, -15.0)
        self.assertEqual(scenario.clip_mode, 'floor')
        self.assertEqual(scenario.record_format, 'binary')
        self.assertEqual(scenario.output_dir, os.path.join(UNITTEST_TMP_DIR, 'output'))
        self.assertAlmostEqual(scenario.standoff(), 0.3)


    def test_reference_config(self):
        report = validate_scenario(os.path.join(CONFIG_DIR, 'reference_system.yaml'))
        self.assertEqual(report.violations, [])
        m = report.metrics
        self.assertEqual((m['n_tx'], m['n_rx'], m['n_f']), (94, 94, 128))
        self.assertEqual(m['voxel_counts'], (201, 201, 81))
        self.assertEqual(m['alphas'], [0.0, 0.5, 1.0])
        self.assertAlmostEqual(m['delta_f'] / 1e6, 78.740157, places=5)
        self.assertAlmostEqual(m['unambiguous_range'], 1.9037, places=3)
        self.assertAlmostEqual(m['range_resolution'], 0.015, places=4)
        self.assertLess(m['lateral_resolution'], 5e-3)
        self.assertEqual(m['primary_rays_per_alpha'], 94 * 32 * m['n_faces'])
        self.assertEqual(m['primary_rays_total'], 3 * m['primary_rays_per_alpha'])


    def test_sweep_config(self):
        report = validate_scenario(os.path.join(CONFIG_DIR, 'hand_sweep.yaml'))
        self.assertEqual(report.violations, [])
        self.assertEqual(report.metrics['n_tx'], 24)


    def test_alpha_out_of_range(self):
        path = self._write(HAND + "material:\n  alpha: 1.5\n")
        report = validate_scenario(path)
        self.assertEqual(len(report.violations), 1)
        error = report.violations[0]
        self.assertEqual((error.path, error.line, error.field), (path, 7, 'material.alpha'))
        self.assertTrue(str(error).startswith(path + ":7: material.alpha: "))

        with self.assertRaises(ScenarioError) as ctx:
            load_scenario(path)
        self.assertEqual(ctx.exception.line, 7)


    def test_missing_mesh(self):
        path = self._write("""\
            scene:
              meshes:
                - path: missing.obj
            """)
        report = validate_scenario(path)
        self.assertEqual([e.field for e in report.violations], ['scene.meshes.0.path'])
        self.assertEqual(report.violations[0].line, 3)
        self.assertIn('missing.obj', str(report.violations[0]))
        self.assertNotIn('n_faces', report.metrics)


    def test_meshes_required_for_trace(self):
        report = validate_scenario(self._write("material:\n  alpha: 0.2\n"))
        self.assertEqual([e.field for e in report.violations], ['scene.meshes'])


    def test_collects_all_violations(self):
        path = self._write(HAND + dedent("""\
            material:
              alphas: [0.0, -0.5]
            waveform:
              n_f: 1
            imaging:
              clip_mode: mirror
            """))
        fields = [e.field for e in validate_scenario(path).violations]
        self.assertEqual(fields, ['material.alphas.1', 'waveform.n_f', 'imaging.clip_mode'])


    def test_numbers_from_strings(self):
        path = self._write(HAND + dedent("""\
            waveform:
              f_start: "72e9"
              f_stop: 82e9
              n_f: 64
            array:
              elements_per_side: 12
              spacing: 1e-2
            """))
        scenario = load_scenario(path)
        self.assertEqual(scenario.waveform.f0, 72e9)
        self.assertAlmostEqual(scenario.waveform.bandwidth, 10e9, delta=1.0)
        self.assertEqual(scenario.array.n_tx, 24)


    def test_not_a_number(self):
        path = self._write(HAND + "waveform:\n  f_start: fast\n")
        with self.assertRaises(ScenarioError) as ctx:
            load_scenario(path)
        self.assertEqual(ctx.exception.field, 'waveform.f_start')
        self.assertEqual(ctx.exception.line, 7)


    def test_alpha_range(self):
        path = self._write(HAND + dedent("""\
            material:
              alpha_range: {start: 0.0, stop: 1.0, step: 0.25}
            """))
        self.assertEqual(load_scenario(path).alphas, [0.0, 0.25, 0.5, 0.75, 1.0])


    def test_one_alpha_form(self):
        path = self._write(HAND + "material:\n  alpha: 0.5\n  alphas: [0.1]\n")
        self.assertEqual([e.field for e in validate_scenario(path).violations], ['material'])


    def test_duplicate_alphas(self):
        path = self._write(HAND + "material:\n  alphas: [0.5, 0.50]\n")
        self.assertEqual([e.field for e in validate_scenario(path).violations], ['material'])


    def test_per_mesh_alpha(self):
        write_obj(make_plate(0.1, 0.1, center=(0, 0, 0.35)), os.path.join(UNITTEST_TMP_DIR, 'wall.obj'))
        path = self._write("""\
            scene:
              meshes:
                - phantom: f
                  transform: {translation: [0, 0, 0.3]}
                - path: wall.obj
                  alpha: 0.9
            material:
              alphas: [0.0, 1.0]
            """)
        scenario = load_scenario(path)
        self.assertEqual(scenario.mesh_alphas(), [None, 0.9])
        mesh, source = scenario.load_scene()
        alphas = scenario.face_alphas(0.0, source)
        self.assertEqual(len(alphas), mesh.n_faces)
        np.testing.assert_array_equal(alphas[source == 0], 0.0)
        np.testing.assert_array_equal(alphas[source == 1], 0.9)
        self.assertEqual(int((source == 1).sum()), 2)


    def test_mesh_transform(self):
        write_obj(make_plate(0.1, 0.1), os.path.join(UNITTEST_TMP_DIR, 'plate.obj'))
        path = self._write("""\
            scene:
              meshes:
                - path: plate.obj
                  transform:
                    translation: [0.0, 0.0, 0.3]
                    rotation_deg: [180, 0, 0]
                    scale: 2.0
            """)
        mesh, _ = load_scenario(path).load_scene()
        np.testing.assert_allclose(mesh.vertices[:, 2], 0.3, atol=1e-12)
        np.testing.assert_allclose(mesh.face_normals[:, 2], 1.0)
        self.assertAlmostEqual(mesh.face_areas.sum(), 0.04)


    def test_overrides(self):
        path = self._write(HAND + "trace:\n  seed: 3\noutput:\n  directory: results\n")
        scenario = load_scenario(path)
        self.assertEqual(scenario.seed, 3)
        self.assertEqual(scenario.output_dir, os.path.join(UNITTEST_TMP_DIR, 'results'))

        out = os.path.join(UNITTEST_TMP_DIR, 'elsewhere')
        scenario = load_scenario(path, seed=2 ** 64 - 1, output_dir=out, stages='imaging')
        self.assertEqual(scenario.seed, 2 ** 64 - 1)
        self.assertEqual(scenario.output_dir, out)
        self.assertEqual(scenario.stages, ('image', ))


    def test_seed_range(self):
        path = self._write(HAND + "trace:\n  seed: 18446744073709551616\n")
        self.assertEqual([e.field for e in validate_scenario(path).violations], ['trace.seed'])


    def test_image_stage_with_input_cube(self):
        with open(os.path.join(UNITTEST_TMP_DIR, 'input.cube'), 'wb') as fh:
            fh.write(b'MRCUBE64')
        path = self._write("""\
            input:
              cube: input.cube
            output:
              stages: [image]
            """)
        scenario = load_scenario(path)
        self.assertEqual(scenario.meshes, [])
        self.assertEqual(scenario.input_cube, os.path.join(UNITTEST_TMP_DIR, 'input.cube'))

        path = self._write("""\
            material:
              alphas: [0.0, 1.0]
            input:
              cube: input.cube
            output:
              stages: [image]
            """)
        self.assertEqual([e.field for e in validate_scenario(path).violations], ['input.cube'])


    def test_explicit_array(self):
        path = self._write(HAND + dedent("""\
            array:
              tx_positions: [[0, 0, 0], [0.01, 0, 0]]
              rx_positions: [[0, 0.01, 0]]
            """))
        scenario = load_scenario(path)
        self.assertEqual((scenario.array.n_tx, scenario.array.n_rx), (2, 1))


    def test_bad_array(self):
        path = self._write(HAND + "array:\n  elements_per_side: 1\n")
        self.assertEqual([e.field for e in validate_scenario(path).violations], ['array.elements_per_side'])


    def test_yaml_syntax_error(self):
        path = self._write("scene:\n  meshes: [\n    {phantom: open\n")
        with self.assertRaises(ScenarioError) as ctx:
            load_scenario(path)
        self.assertIsNotNone(ctx.exception.line)
        self.assertTrue(str(ctx.exception).startswith(path + ':'))
        self.assertEqual(len(validate_scenario(path).violations), 1)


    def test_missing_file(self):
        with self.assertRaises(ScenarioError):
            load_scenario(os.path.join(UNITTEST_TMP_DIR, 'nope.yaml'))


class TestStages(TestCase):


    def test_parse(self):
        self.assertEqual(parse_stages(None), STAGES)
        self.assertEqual(parse_stages('all'), STAGES)
        self.assertEqual(parse_stages('imaging'), ('image', ))
        self.assertEqual(parse_stages(['baseband', 'trace']), ('trace', 'baseband'))
        with self.assertRaises(ValueError):
            parse_stages(['trace', 'image'])
        with self.assertRaises(ValueError):
            parse_stages('render')


    def test_alpha_label(self):
        self.assertEqual(alpha_label(0.0), 'alpha_0')
        self.assertEqual(alpha_label(0.25), 'alpha_0.25')


if __name__ == '__main__':
    unittest.main()
