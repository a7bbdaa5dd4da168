import os
import unittest
from unittest import TestCase
from shutil import rmtree

import numpy as np
from scipy.stats import kstest

from mimoray import TriangleMesh, RigidTransform, load_mesh, write_obj, combine_meshes
from mimoray import sample_triangle_points, MeshParseError, DegenerateFaces, InvalidTransform, MeshError
from mimoray.TriangleMesh import Ray, parse_obj
from mimoray.primitives import make_hand_phantom, make_box, make_plate


UNITTEST_TMP_DIR = os.path.join(os.path.abspath(os.path.dirname(__file__)), '.unitest_tmp')

CUBE_OBJ = '''\
# unit cube, quads
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
'''


class TestTriangleMesh(TestCase):


    def setUp(self):
        if os.path.exists(UNITTEST_TMP_DIR):
            rmtree(UNITTEST_TMP_DIR)
        os.mkdir(UNITTEST_TMP_DIR)


    def tearDown(self):
        if os.path.exists(UNITTEST_TMP_DIR):
            rmtree(UNITTEST_TMP_DIR)


    def _write(self, text, name='mesh.obj'):
        path = os.path.join(UNITTEST_TMP_DIR, name)
        with open(path, 'wt') as fh:
            fh.write(text)
        return path


    def test_single_triangle(self):
        path = self._write("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        mesh = load_mesh(path)
        self.assertEqual(mesh.n_faces, 1)
        np.testing.assert_allclose(mesh.face_normals[0], [0, 0, 1], atol=1e-12)


    def test_winding_flips_normal(self):
        path = self._write("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 3 2\n")
        np.testing.assert_allclose(load_mesh(path).face_normals[0], [0, 0, -1], atol=1e-12)


    def test_unit_cube(self):
        '''Quads are fan triangulated'''
        mesh = load_mesh(self._write(CUBE_OBJ))
        self.assertEqual(mesh.n_vertices, 8)
        self.assertEqual(mesh.n_faces, 12)
        self.assertAlmostEqual(mesh.face_areas.sum(), 6.0)

        # All normals point away from the cube center
        outward = ((mesh.centroids - 0.5) * mesh.face_normals).sum(axis=1)
        self.assertTrue(np.all(outward > 0))


    def test_degenerate_face(self):
        path = self._write("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 2 4\n")
        with self.assertRaises(DegenerateFaces) as ctx:
            load_mesh(path)
        self.assertEqual(ctx.exception.face_ids, [1])


    def test_parse_errors_carry_line(self):
        scenarios = {
            'bad vertex': ("v 0 0 0\nv 1 x 0\n", ':2:'),
            'short face': ("v 0 0 0\nv 1 0 0\nf 1 2\n", ':3:'),
            'index out of range': ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", ':4:'),
            'zero index': ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", ':4:'),
        }
        for scenario, (text, where) in scenarios.items():
            with self.subTest(scenario=scenario):
                path = self._write(text)
                with self.assertRaises(MeshParseError) as ctx:
                    load_mesh(path)
                self.assertIn(path + where, str(ctx.exception))


    def test_face_token_forms(self):
        '''i, i/t, i//n, i/t/n and negative indices all name the same vertices'''
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\n" \
               "f 1 2 3\nf 1/1 2/1 3/1\nf 1//1 2//1 3//1\nf 1/1/1 2/1/1 3/1/1\nf -3 -2 -1\n"
        vertices, faces = parse_obj(text.splitlines())
        self.assertEqual(len(vertices), 3)
        for row in faces:
            self.assertEqual(list(row), [0, 1, 2])


    def test_other_records_ignored(self):
        text = "o thing\ng group\nusemtl skin\ns 1\nv 0 0 0 1.0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
        vertices, faces = parse_obj(text.splitlines())
        self.assertEqual(vertices.shape, (3, 3))
        self.assertEqual(faces.shape, (1, 3))


    def test_transform_applied_before_normals(self):
        path = self._write("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        transform = RigidTransform.from_euler((180, 0, 0), translation=(0, 0, 0.3), scale=2.0)
        mesh = load_mesh(path, transform=transform)
        np.testing.assert_allclose(mesh.vertices[1], [2, 0, 0.3], atol=1e-12)
        np.testing.assert_allclose(mesh.vertices[2], [0, -2, 0.3], atol=1e-12)
        np.testing.assert_allclose(mesh.face_normals[0], [0, 0, -1], atol=1e-12)


    def test_invalid_transform(self):
        for scale in (0.0, -1.0, float('nan')):
            with self.subTest(scale=scale):
                with self.assertRaises(InvalidTransform):
                    RigidTransform(scale=scale)
        with self.assertRaises(InvalidTransform):
            RigidTransform(rotation=np.diag([1.0, 1.0, -1.0]))


    def test_index_bounds(self):
        with self.assertRaises(MeshError):
            TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])


    def test_normals_unit_and_orthogonal(self):
        mesh = make_hand_phantom('f')
        tri = mesh.triangles
        n = mesh.face_normals
        np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-9)
        for edge in (tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]):
            unit = edge / np.linalg.norm(edge, axis=1)[:, None]
            self.assertLess(np.abs((unit * n).sum(axis=1)).max(), 1e-6)


    def test_arrays_read_only(self):
        mesh = make_box((1, 1, 1))
        with self.assertRaises(ValueError):
            mesh.vertices[0, 0] = 5.0


    def test_write_obj_round_trip(self):
        mesh = make_hand_phantom('open', segments=6)
        path = os.path.join(UNITTEST_TMP_DIR, 'hand.obj')
        write_obj(mesh, path)
        loaded = load_mesh(path)
        np.testing.assert_array_equal(loaded.faces, mesh.faces)
        np.testing.assert_allclose(loaded.vertices, mesh.vertices, atol=1e-8)


    def test_combine_meshes(self):
        a = make_plate(0.1, 0.1)
        b = make_box((1, 1, 1))
        merged, source = combine_meshes([a, b])
        self.assertEqual(merged.n_faces, a.n_faces + b.n_faces)
        self.assertEqual(list(np.bincount(source)), [a.n_faces, b.n_faces])
        np.testing.assert_allclose(merged.triangles[a.n_faces:], b.triangles)


    def test_ray_normalizes_direction(self):
        ray = Ray((0, 0, 0), (0, 0, 2))
        np.testing.assert_allclose(ray.direction, [0, 0, 1])
        np.testing.assert_allclose(ray.at(0.5), [0, 0, 0.5])


class TestSampleTrianglePoints(TestCase):


    def setUp(self):
        self.mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


    def test_single_point_inside(self):
        p = sample_triangle_points(self.mesh, 0, 1, np.random.default_rng(3))
        self.assertEqual(p.shape, (1, 3))
        x, y, z = p[0]
        self.assertTrue(x >= 0 and y >= 0 and x + y <= 1)
        self.assertEqual(z, 0.0)


    def test_centroid(self):
        p = sample_triangle_points(self.mesh, 0, 100000, np.random.default_rng(11))
        np.testing.assert_allclose(p.mean(axis=0), [1 / 3, 1 / 3, 0], atol=0.01)


    def test_points_in_plane(self):
        mesh = make_plate(0.2, 0.1, center=(0.1, 0, 0.3), rotation_deg=(30, 20, 0))
        rng = np.random.default_rng(5)
        for face in range(mesh.n_faces):
            p = sample_triangle_points(mesh, face, 100, rng)
            offset = (p - mesh.triangles[face, 0]) @ mesh.face_normals[face]
            self.assertLess(np.abs(offset).max(), 1e-9)


    def test_uniform_distribution(self):
        '''x = barycentric u here; its CDF on a uniform triangle is 1 - (1 - u)^2'''
        p = sample_triangle_points(self.mesh, 0, 100000, np.random.default_rng(2024))
        result = kstest(p[:, 0], lambda u: 1.0 - (1.0 - np.clip(u, 0, 1)) ** 2)
        self.assertGreater(result.pvalue, 0.01)


    def test_same_seed_same_points(self):
        a = sample_triangle_points(self.mesh, 0, 50, np.random.default_rng(7))
        b = sample_triangle_points(self.mesh, 0, 50, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)


    def test_count_must_be_positive(self):
        with self.assertRaises(ValueError):
            sample_triangle_points(self.mesh, 0, 0, np.random.default_rng(0))


if __name__ == '__main__':
    unittest.main()
