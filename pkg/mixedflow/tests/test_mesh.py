import numpy as np
from django.test import SimpleTestCase

from mixedflow.exceptions import MeshError
from mixedflow.mesh import DIRICHLET, NEUMANN, ChannelMesh, build_channel_mesh, refine, refine_times


class ChannelMeshTest(SimpleTestCase):
    def setUp(self):
        self.mesh = build_channel_mesh(3.0, 1.0, 6, 2)

    def test_counts_and_area(self):
        self.assertEqual(self.mesh.num_vertices, 7 * 3)
        self.assertEqual(self.mesh.num_triangles, 2 * 6 * 2)
        self.assertAlmostEqual(self.mesh.area, 3.0, places=12)
        self.assertTrue(np.all(self.mesh.areas > 0))

    def test_default_tagging(self):
        self.assertAlmostEqual(self.mesh.boundary_length(DIRICHLET), 6.0, places=12)
        self.assertAlmostEqual(self.mesh.boundary_length(NEUMANN), 2.0, places=12)

    def test_corner_points_are_the_rectangle_corners(self):
        corners = self.mesh.vertices[self.mesh.corner_points]
        expected = {(0.0, 0.0), (3.0, 0.0), (3.0, 1.0), (0.0, 1.0)}
        self.assertEqual({tuple(p) for p in corners}, expected)

    def test_all_dirichlet_has_no_corners(self):
        mesh = build_channel_mesh(1.0, 1.0, 2, 2, gamma_spec={'left': DIRICHLET, 'right': DIRICHLET})
        self.assertEqual(len(mesh.corner_points), 0)
        self.assertEqual(mesh.boundary_length(NEUMANN), 0.0)

    def test_partial_side_tagging(self):
        mesh = build_channel_mesh(2.0, 1.0, 4, 2, gamma_spec={'bottom': [(0, 1, DIRICHLET), (1, 2, NEUMANN)]})
        self.assertAlmostEqual(mesh.boundary_length(NEUMANN), 3.0, places=12)

    def test_empty_dirichlet_rejected(self):
        spec = {side: NEUMANN for side in ('bottom', 'right', 'top', 'left')}
        with self.assertRaises(MeshError):
            build_channel_mesh(1.0, 1.0, 2, 2, gamma_spec=spec)

    def test_invalid_resolution_rejected(self):
        with self.assertRaises(MeshError):
            build_channel_mesh(3.0, 1.0, 0, 2)
        with self.assertRaises(MeshError):
            build_channel_mesh(-1.0, 1.0, 2, 2)

    def test_graded_mesh_keeps_extent(self):
        mesh = build_channel_mesh(3.0, 1.0, 6, 4, grading=1.5)
        self.assertAlmostEqual(mesh.vertices[:, 0].max(), 3.0)
        self.assertAlmostEqual(mesh.area, 3.0, places=12)

    def test_refine_halves_h_and_keeps_tags(self):
        fine = refine(self.mesh)
        self.assertEqual(fine.num_triangles, 4 * self.mesh.num_triangles)
        self.assertAlmostEqual(fine.h, self.mesh.h / 2, places=12)
        self.assertAlmostEqual(fine.boundary_length(NEUMANN), 2.0, places=12)
        self.assertEqual(len(fine.corner_points), 4)
        self.assertAlmostEqual(refine_times(self.mesh, 2).area, 3.0, places=12)

    def test_json_roundtrip_and_vtk(self):
        again = ChannelMesh.from_json(self.mesh.to_json())
        np.testing.assert_array_equal(again.triangles, self.mesh.triangles)
        np.testing.assert_array_equal(again.corner_points, self.mesh.corner_points)
        vtk = self.mesh.to_vtk({'speed': np.zeros(self.mesh.num_vertices)})
        self.assertIn(f'POINTS {self.mesh.num_vertices} double', vtk)
        self.assertIn('SCALARS speed double 1', vtk)
        with self.assertRaises(MeshError):
            self.mesh.to_vtk({'bad': np.zeros(3)})
