import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from .generators import UnknownBenchmarkError, generate_benchmark_mesh
from .geometry import MEDIUM, MeshError, PolygonalMesh, body_region, element_geometry, validate
from .io import MeshFormatError, load_mesh, mesh_to_document, save_mesh


def unit_square_document():
    return {
        'vertices': [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        'elements': [[0, 1, 2, 3]],
        'regions': ['body:0'],
        'boundary_sets': {'bottom': {'vertices': [0, 1], 'edges': [[0, 1]]}},
    }


class ElementGeometryTests(SimpleTestCase):
    def test_unit_square(self):
        mesh = PolygonalMesh([[0, 0], [1, 0], [1, 1], [0, 1]], [(0, 1, 2, 3)], [body_region(0)])
        geo = element_geometry(mesh, 0)
        assert_allclose(geo.centroid, [0.5, 0.5])
        self.assertAlmostEqual(geo.area, 1.0)
        self.assertAlmostEqual(geo.diameter, math.sqrt(2))
        self.assertEqual(geo.n_vertices, 4)

    def test_triangle(self):
        mesh = PolygonalMesh([[0, 0], [1, 0], [0, 1]], [(0, 1, 2)], [MEDIUM])
        geo = element_geometry(mesh, 0)
        self.assertAlmostEqual(geo.area, 0.5)
        assert_allclose(geo.centroid, [1 / 3, 1 / 3])

    def test_regular_hexagon(self):
        angles = np.arange(6) * np.pi / 3
        mesh = PolygonalMesh(np.column_stack([np.cos(angles), np.sin(angles)]), [tuple(range(6))], [MEDIUM])
        geo = element_geometry(mesh, 0)
        self.assertAlmostEqual(geo.area, 3 * math.sqrt(3) / 2, delta=1e-12)
        self.assertAlmostEqual(geo.diameter, 2.0)

    def test_index_out_of_range(self):
        mesh = PolygonalMesh([[0, 0], [1, 0], [0, 1]], [(0, 1, 2)], [MEDIUM])
        with self.assertRaises(IndexError):
            element_geometry(mesh, 3)


class ValidateTests(SimpleTestCase):
    def test_negative_orientation(self):
        mesh = PolygonalMesh([[0, 0], [1, 0], [1, 1], [0, 1]], [(0, 3, 2, 1)], [body_region(0)])
        self.assertEqual(validate(mesh), ['negative area, element 0'])

    def test_degenerate_ring(self):
        mesh = PolygonalMesh([[0, 0], [1, 0], [1, 1]], [(0, 1, 1, 2)], [body_region(0)])
        self.assertIn('degenerate ring, element 0', validate(mesh))

    def test_hanging_node_removed_from_ring(self):
        mesh = generate_benchmark_mesh('box-self-contact', 1)
        e = next(e for e, ring in enumerate(mesh.elements) if len(ring) > 4)
        ring = list(mesh.elements[e])
        geometry = mesh.vertices
        # drop one vertex that is collinear with its neighbours
        for a in range(len(ring)):
            p, v, q = geometry[ring[a - 1]], geometry[ring[a]], geometry[ring[(a + 1) % len(ring)]]
            if abs((v - p)[0] * (q - p)[1] - (v - p)[1] * (q - p)[0]) < 1e-12:
                del ring[a]
                break
        elements = list(mesh.elements)
        elements[e] = tuple(ring)
        broken = PolygonalMesh(mesh.vertices, elements, mesh.element_region)
        diagnostics = validate(broken)
        self.assertTrue(any(d.startswith('non-conforming edge') for d in diagnostics), diagnostics)

    def test_disconnected_medium(self):
        vertices = [[0, 0], [1, 0], [1, 1], [0, 1], [3, 0], [4, 0], [4, 1], [3, 1]]
        mesh = PolygonalMesh(vertices, [(0, 1, 2, 3), (4, 5, 6, 7)], [MEDIUM, MEDIUM])
        self.assertIn('medium region disconnected: 2 components', validate(mesh))


class GeneratorTests(SimpleTestCase):
    def test_every_benchmark_validates(self):
        for problem in ('box-self-contact', 'c-box', 'punch', 'multi-object'):
            with self.subTest(problem=problem):
                mesh = generate_benchmark_mesh(problem, 0)
                self.assertEqual(validate(mesh), [])
                self.assertIn(MEDIUM, mesh.regions())

    def test_box_conforming_at_refinement_zero(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        self.assertEqual(max(len(ring) for ring in mesh.elements), 4)
        self.assertAlmostEqual(mesh.total_area(), 1.0, delta=1e-10)

    def test_box_hanging_nodes(self):
        coarse = generate_benchmark_mesh('box-self-contact', 0)
        fine = generate_benchmark_mesh('box-self-contact', 1)
        coarse_medium = len(coarse.elements_in_region(MEDIUM))
        self.assertEqual(len(fine.elements_in_region(MEDIUM)), 4 * coarse_medium)
        body = fine.elements_in_region(body_region(0))
        ring_sizes = [len(fine.elements[e]) for e in body]
        self.assertIn(5, ring_sizes)
        self.assertEqual(max(len(fine.elements[e]) for e in fine.elements_in_region(MEDIUM)), 4)
        self.assertAlmostEqual(fine.total_area(), 1.0, delta=1e-10)

        finest = generate_benchmark_mesh('box-self-contact', 2)
        self.assertEqual(max(len(finest.elements[e]) for e in finest.elements_in_region(body_region(0))), 7)

    def test_c_box_gap(self):
        mesh = generate_benchmark_mesh('c-box', 0)
        upper = mesh.vertices[list(mesh.boundary_set('upper-beam-inner').vertices)]
        lower = mesh.vertices[list(mesh.boundary_set('lower-beam-inner').vertices)]
        self.assertAlmostEqual(upper[:, 1].min() - lower[:, 1].max(), 0.3, delta=1e-12)
        self.assertEqual(len(mesh.boundary_set('right-top-point').vertices), 1)
        self.assertAlmostEqual(mesh.total_area(), 0.55, delta=1e-10)

    def test_c_box_refines_medium_only(self):
        coarse = generate_benchmark_mesh('c-box', 0)
        fine = generate_benchmark_mesh('c-box', 1)
        frame = body_region(0)
        self.assertEqual(len(fine.elements_in_region(frame)), len(coarse.elements_in_region(frame)))
        self.assertEqual(len(fine.elements_in_region(MEDIUM)), 4 * len(coarse.elements_in_region(MEDIUM)))
        self.assertGreater(max(len(fine.elements[e]) for e in fine.elements_in_region(frame)), 4)
        self.assertAlmostEqual(fine.total_area(), 0.55, delta=1e-10)
        # the loaded corner and the clamped wall stay on the coarse frame grid
        self.assertEqual(len(fine.boundary_set('right-top-point').vertices), 1)
        self.assertEqual(
            len(fine.boundary_set('left-wall').vertices), len(coarse.boundary_set('left-wall').vertices)
        )

    def test_punch_area_and_sets(self):
        mesh = generate_benchmark_mesh('punch', 0)
        # disk facets plus surrounding medium tile the box exactly
        self.assertAlmostEqual(mesh.total_area(), 2.0 * 2.25, delta=1e-10)
        arc = mesh.boundary_set('punch-arc')
        top = mesh.boundary_set('punch-top')
        self.assertGreater(len(arc.vertices), 10)
        self.assertGreater(len(top.edges), 0)
        disk = sum(
            element_geometry(mesh, e).area for e in mesh.elements_in_region(body_region(1))
        )
        self.assertLess(disk, math.pi / 4)
        self.assertGreater(disk, 0.95 * math.pi / 4)

    def test_multi_object_regions(self):
        mesh = generate_benchmark_mesh('multi-object', 0)
        self.assertEqual(len([r for r in mesh.regions() if r.startswith('body:')]), 8)
        self.assertAlmostEqual(mesh.total_area(), 8 * 0.2 + 7 * 0.3, delta=1e-10)
        self.assertEqual(len(mesh.boundary_set('beam-left-end').vertices), 3)

    def test_voronoi_solids(self):
        for problem, area, top in (('punch', 2.0, 'block-top'), ('multi-object', 1.6, 'beam-top')):
            with self.subTest(problem=problem):
                mesh = generate_benchmark_mesh(problem, 0, solid='voronoi')
                self.assertEqual(validate(mesh), [])
                solid = mesh.elements_in_region(body_region(0))
                self.assertGreater(max(len(mesh.elements[e]) for e in solid), 4)
                self.assertAlmostEqual(
                    sum(element_geometry(mesh, e).area for e in solid), area, delta=1e-10
                )
                self.assertGreater(len(mesh.boundary_set(top).edges), 0)
                quad = generate_benchmark_mesh(problem, 0)
                # cell corners on the solid's top side coincide with the quad grid
                assert_allclose(
                    np.sort(mesh.vertices[list(mesh.boundary_set(top).vertices), 0]),
                    np.sort(quad.vertices[list(quad.boundary_set(top).vertices), 0]),
                    atol=1e-12,
                )

    def test_voronoi_punch_cells(self):
        mesh = generate_benchmark_mesh('punch', 0, solid='voronoi')
        # six staggered rows of 12 and 11 seeds
        self.assertEqual(len(mesh.elements_in_region(body_region(0))), 3 * 12 + 3 * 11)
        self.assertEqual(max(len(mesh.elements[e]) for e in mesh.elements_in_region(MEDIUM)), 4)
        again = generate_benchmark_mesh('punch', 0, solid='voronoi')
        self.assertTrue(np.array_equal(again.vertices, mesh.vertices))

    def test_voronoi_unsupported(self):
        for problem in ('box-self-contact', 'c-box'):
            with self.subTest(problem=problem):
                with self.assertRaisesMessage(MeshError, 'only quad'):
                    generate_benchmark_mesh(problem, 0, solid='voronoi')
        with self.assertRaisesMessage(MeshError, 'unknown solid mesh'):
            generate_benchmark_mesh('punch', 0, solid='hexagon')

    def test_unknown_benchmark(self):
        with self.assertRaises(UnknownBenchmarkError):
            generate_benchmark_mesh('hertz', 0)


class MeshFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def write(self, name, document):
        path = self.dir / name
        path.write_text(json.dumps(document, indent=1))
        return path

    def test_unit_square(self):
        mesh = load_mesh(self.write('square.json', unit_square_document()))
        self.assertEqual(mesh.n_vertices, 4)
        self.assertEqual(mesh.n_elements, 1)
        self.assertAlmostEqual(element_geometry(mesh, 0).area, 1.0)

    def test_round_trip(self):
        path = self.write('square.json', unit_square_document())
        out = save_mesh(load_mesh(path), self.dir / 'copy.json')
        self.assertEqual(json.loads(out.read_text()), json.loads(path.read_text()))

        mesh = generate_benchmark_mesh('punch', 0)
        again = load_mesh(save_mesh(mesh, self.dir / 'punch.json'))
        self.assertTrue(np.array_equal(again.vertices, mesh.vertices))
        self.assertEqual(again.elements, mesh.elements)
        self.assertEqual(mesh_to_document(again), mesh_to_document(mesh))

    def test_clockwise_ring_is_reoriented(self):
        document = unit_square_document()
        document['elements'] = [[0, 3, 2, 1]]
        mesh = load_mesh(self.write('cw.json', document))
        self.assertGreater(element_geometry(mesh, 0).area, 0.0)

    def test_degenerate_ring(self):
        document = unit_square_document()
        document['elements'] = [[0, 1, 2, 2, 3]]
        with self.assertRaisesMessage(MeshFormatError, 'degenerate ring'):
            load_mesh(self.write('bad.json', document))

    def test_parse_error_reports_line(self):
        path = self.dir / 'broken.json'
        path.write_text('{\n "vertices": [[0, 0],\n ]\n')
        with self.assertRaisesMessage(MeshFormatError, 'line 3'):
            load_mesh(path)

    def test_non_conforming_file(self):
        # vertex 4 sits on the top edge of element 0 without being in its ring
        document = {
            'vertices': [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0], [1.0, 1.0],
                         [2.0, 2.0], [1.0, 2.0], [0.0, 2.0]],
            'elements': [[0, 1, 2, 3], [3, 4, 6, 7], [4, 2, 5, 6]],
            'regions': ['body:0', 'medium', 'medium'],
        }
        with self.assertRaisesMessage(MeshFormatError, 'non-conforming edge'):
            load_mesh(self.write('tjunction.json', document))
