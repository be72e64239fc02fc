import tempfile
from pathlib import Path
from unittest import mock

import meshio
import numpy as np
import pandas as pd
from django.test import SimpleTestCase, override_settings
from numpy.testing import assert_allclose
from openpyxl import load_workbook
from rest_framework import status
from rest_framework.test import APIClient

from material.types import RegularizationKind
from mesh.generators import generate_benchmark_mesh
from mesh.geometry import MEDIUM, BoundarySet, PolygonalMesh, body_region
from solver.loading import COMPLETED, STEP_COLLAPSE, SolveReport, StepRecord
from solver.newton import NewtonResult
from vem.projection import ProjectionError
from vem.quadrature import QuadratureError

from .benchmarks import (
    PRESETS, BenchmarkConfigError, apply_overrides, build_config, load_config, preset_document,
)
from .gap import GapProbe, GapProbeError, measure_gap
from .services import BenchmarkRun, StepCollapseError, grid_points, run_benchmark, sweep
from .writers import REPORT_COLUMNS, to_meshio, write_report_csv, write_sweep, write_vtk


def fake_report(n_steps=2, status_=COMPLETED, message=''):
    steps = [
        StepRecord(i, i / n_steps, 3, [1.0, 1e-4, 1e-10], 0.3 - 0.1 * i, np.array([0.0, -2.0 * i]))
        for i in range(1, n_steps + 1)
    ]
    return SolveReport(steps, np.zeros(8), status_, message=message)


def box_config(**overrides):
    return build_config(apply_overrides(preset_document('box-self-contact'), **overrides))


def accept_prescribed(problem, u0, partition, options=None):
    return NewtonResult(partition.apply(u0), True, 1, [1.0, 0.0], 'converged', None)


def always_fail(problem, u0, partition, options=None):
    return NewtonResult(np.array(u0), False, 25, [1.0] * 26, 'max-iter', None)


class GapTests(SimpleTestCase):
    def test_undeformed_box(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        probe = GapProbe('upper-flange-inner', 'lower-flange-inner')
        self.assertAlmostEqual(measure_gap(mesh, np.zeros(2 * mesh.n_vertices), probe), 0.3, places=12)

    def test_undeformed_c_box(self):
        mesh = generate_benchmark_mesh('c-box', 0)
        probe = GapProbe('upper-beam-inner', 'lower-beam-inner')
        self.assertAlmostEqual(measure_gap(mesh, np.zeros(2 * mesh.n_vertices), probe), 0.3, places=12)

    def test_rigid_shift_of_upper_chain(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        probe = GapProbe('upper-flange-inner', 'lower-flange-inner')
        u = np.zeros(2 * mesh.n_vertices)
        upper = np.asarray(mesh.boundary_set('upper-flange-inner').vertices)
        u[2 * upper + 1] = -0.12
        self.assertAlmostEqual(measure_gap(mesh, u, probe), 0.18, places=12)

        u[2 * upper + 1] = -0.5
        self.assertEqual(measure_gap(mesh, u, probe), 0.0)

    def test_inclined_lower_segment(self):
        mesh = PolygonalMesh(
            [[0, 0], [2, 0.2], [2, 1], [1, 1], [0, 1]],
            [(0, 1, 2, 3, 4)],
            [body_region(0)],
            {'up': BoundarySet((3,)), 'down': BoundarySet((0, 1), ((0, 1),))},
        )
        self.assertAlmostEqual(measure_gap(mesh, np.zeros(10), GapProbe('up', 'down')), 0.9, places=12)

    def test_invalid_probes(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        u = np.zeros(2 * mesh.n_vertices)
        with self.assertRaises(GapProbeError):
            measure_gap(mesh, u, GapProbe('no-such-set', 'lower-flange-inner'))
        with self.assertRaises(GapProbeError):
            measure_gap(mesh, u, GapProbe('lower-flange-inner', 'lower-flange-inner'))
        with self.assertRaises(GapProbeError):
            # a single corner has no segments
            measure_gap(mesh, u, GapProbe('upper-flange-inner', 'bottom-left-corner'))

    def test_chains_must_follow_surfaces(self):
        vertices = [[i, j] for j in range(3) for i in range(3)]
        elements = [(0, 1, 4, 3), (1, 2, 5, 4), (3, 4, 7, 6), (4, 5, 8, 7)]
        sets = {
            'bottom': BoundarySet((0, 1, 2), ((0, 1), (1, 2))),
            'middle': BoundarySet((3, 4, 5), ((3, 4), (4, 5))),
            'top': BoundarySet((6, 7, 8), ((6, 7), (7, 8))),
            'centre': BoundarySet((4,)),
        }
        u = np.zeros(18)
        solid = PolygonalMesh(vertices, elements, [body_region(0)] * 4, sets)
        with self.assertRaisesMessage(GapProbeError, "lower chain 'middle' has 2 segment(s) off the body surfaces"):
            measure_gap(solid, u, GapProbe('top', 'middle'))
        with self.assertRaisesMessage(GapProbeError, "upper chain 'centre' has vertices off the body surfaces [4]"):
            measure_gap(solid, u, GapProbe('centre', 'bottom'))

        # the middle row becomes a body/medium interface
        layered = PolygonalMesh(vertices, elements, [body_region(0)] * 2 + [MEDIUM] * 2, sets)
        self.assertAlmostEqual(measure_gap(layered, u, GapProbe('top', 'middle')), 1.0, places=12)
        self.assertAlmostEqual(measure_gap(layered, u, GapProbe('centre', 'bottom')), 1.0, places=12)

    def test_non_finite_positions(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        u = np.zeros(2 * mesh.n_vertices)
        u[5] = np.nan
        with self.assertRaises(GapProbeError):
            measure_gap(mesh, u, GapProbe('upper-flange-inner', 'lower-flange-inner'))


class BenchmarkConfigTests(SimpleTestCase):
    def test_presets_match_their_meshes(self):
        meshes = {}
        for name in PRESETS:
            config = build_config(preset_document(name))
            if config.problem not in meshes:
                meshes[config.problem] = generate_benchmark_mesh(config.problem, 0)
            config.check_mesh(meshes[config.problem])
            self.assertEqual(config.name, name)
            self.assertIsNone(config.output_dir)

    def test_preset_parameters(self):
        box = build_config(preset_document('box-self-contact'))
        self.assertEqual(box.medium.reg, RegularizationKind.HUHU_DEV)
        self.assertEqual(box.medium.beta, 5.0)
        self.assertEqual(box.program.n_steps, 100)
        self.assertEqual(box.program.targets['top-load-band'], (None, -1.0))
        self.assertEqual(box.program.reaction_target, 'top-load-band')
        self.assertEqual(build_config(preset_document('box-self-contact-table3')).medium.alpha_r, 10.0)

        punch = build_config(preset_document('punch-rigid'))
        self.assertAlmostEqual(punch.bodies[body_region(1)].K, 500.0 / 3.0)
        self.assertTrue(punch.program.auto_adjust.enabled)

    def test_voronoi_solid(self):
        punch = build_config(apply_overrides(preset_document('punch'), solid='voronoi'))
        self.assertEqual(punch.solid, 'voronoi')
        punch.check_mesh(generate_benchmark_mesh(punch.problem, 0, punch.solid))
        self.assertEqual(build_config(preset_document('punch')).solid, 'quad')
        with self.assertRaises(BenchmarkConfigError):
            build_config(apply_overrides(preset_document('punch'), solid='hexagon'))
        self.assertEqual(punch.program.targets['punch-top'], (None, -1.3))

    def test_medium_mu_defaults_to_softest_body(self):
        self.assertAlmostEqual(build_config(preset_document('c-box')).medium.mu, 5.0 / 14.0)
        self.assertAlmostEqual(build_config(preset_document('multi-object')).medium.mu, 10.0)

    def test_sliding_variant_frees_horizontal_motion(self):
        fixed = build_config(preset_document('multi-object')).program.targets
        sliding = build_config(preset_document('multi-object-sliding')).program.targets
        self.assertEqual(fixed['semicircle-tops'], (0.0, -0.4))
        self.assertEqual(sliding['semicircle-tops'], (None, -0.4))
        self.assertEqual(sliding['beam-right-end'], (None, 0.0))

    def test_overrides(self):
        config = box_config(gamma=1e-4, alpha_r=1.0, reg='rot-j', beta=0.0, steps=7, uy=-0.25,
                            refinement=1, tol=1e-6, threads=3)
        self.assertEqual(config.medium.gamma, 1e-4)
        self.assertEqual(config.medium.reg, RegularizationKind.ROT_J)
        self.assertEqual(config.program.n_steps, 7)
        self.assertEqual(config.program.targets['top-load-band'], (None, -0.25))
        self.assertEqual(config.refinement, 1)
        self.assertEqual(config.newton_options.tol_rel, 1e-6)
        self.assertEqual(config.threads, 3)
        # presets are not mutated
        self.assertEqual(PRESETS['box-self-contact']['load']['n_steps'], 100)

    def test_invalid_documents(self):
        with self.assertRaises(BenchmarkConfigError):
            preset_document('no-such-preset')
        with self.assertRaises(BenchmarkConfigError):
            box_config(gamma=0.0)
        with self.assertRaises(BenchmarkConfigError):
            box_config(reg='quadratic')
        with self.assertRaises(BenchmarkConfigError):
            box_config(steps=0)
        document = preset_document('box-self-contact')
        document['problem'] = 'sphere'
        with self.assertRaises(BenchmarkConfigError):
            build_config(document)

    def test_missing_regions_and_sets(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        document = preset_document('box-self-contact')
        document['bodies'][body_region(5)] = {'K': 1.0, 'mu': 1.0}
        with self.assertRaises(BenchmarkConfigError):
            build_config(document).check_mesh(mesh)

        document = preset_document('box-self-contact')
        document['load']['targets']['no-such-set'] = [0.0, 0.0]
        with self.assertRaises(BenchmarkConfigError):
            build_config(document).check_mesh(mesh)

    @override_settings(TMC_BENCH={'OUTPUT_DIR': '/tmp/tmc-results', 'NEWTON_MAX_ITER': 12, 'THREADS': 2})
    def test_settings_defaults(self):
        config = load_config(preset='c-box', steps=5)
        self.assertEqual(config.output_dir, Path('/tmp/tmc-results') / 'c-box')
        self.assertEqual(config.newton_options.max_iter, 12)
        self.assertEqual(config.threads, 2)

        config = load_config(preset='c-box', out='/tmp/elsewhere')
        self.assertEqual(config.output_dir, Path('/tmp/elsewhere'))

    def test_load_config_needs_a_source(self):
        with self.assertRaises(BenchmarkConfigError):
            load_config()


class WriterTests(SimpleTestCase):
    def test_report_csv(self):
        report = fake_report(3)
        report.steps[0].gap = 1.0 / 3.0
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report_csv(report, Path(tmp) / 'report.csv')
            lines = path.read_text().strip().splitlines()
            frame = pd.read_csv(path, float_precision='round_trip')
        self.assertEqual(len(lines), 4)
        self.assertEqual(list(frame.columns), REPORT_COLUMNS)
        self.assertEqual(frame['gap'][0], 1.0 / 3.0)
        assert_allclose(frame['reaction_y'], [-2.0, -4.0, -6.0])

    def test_vtk_snapshot(self):
        mesh = generate_benchmark_mesh('box-self-contact', 1)
        u = np.zeros(2 * mesh.n_vertices + 10)
        u[1:2 * mesh.n_vertices:2] = -0.01
        converted = to_meshio(mesh, u)
        self.assertEqual(sum(len(block.data) for block in converted.cells), mesh.n_elements)
        self.assertTrue(all(block.type == 'polygon' for block in converted.cells))
        self.assertGreater(len(converted.cells), 1)
        assert_allclose(converted.points[:, 1], mesh.vertices[:, 1] - 0.01)
        assert_allclose(converted.point_data['u_y'], -0.01)

        with tempfile.TemporaryDirectory() as tmp:
            path = write_vtk(mesh, u, Path(tmp) / 'step_0001.vtk')
            text = path.read_text()
            loaded = meshio.read(str(path))
        self.assertTrue(text.startswith('# vtk DataFile'))
        self.assertIn('UNSTRUCTURED_GRID', text)
        self.assertIn('displacement', text)
        self.assertEqual(len(loaded.points), mesh.n_vertices)
        assert_allclose(loaded.point_data['displacement'][:, 1], -0.01)

    def test_sweep_files(self):
        rows = [
            {'label': 'a', 'gamma': 1e-4, 'alpha_r': 1.0, 'reg': 'rot-j', 'status': 'completed', 'steps': 4,
             'final_factor': 1.0, 'gap': 1e-3, 'reaction_y': -3.0, 'halvings': 0, 'doublings': 0, 'message': ''},
            {'label': 'b', 'gamma': 1e-5, 'alpha_r': 1.0, 'reg': 'rot-j', 'status': STEP_COLLAPSE, 'steps': 1,
             'final_factor': 0.25, 'gap': float('nan'), 'reaction_y': float('nan'), 'halvings': 6,
             'doublings': 0, 'message': 'step collapse'},
        ]
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_sweep(rows, tmp)
            frame = pd.read_csv(paths['csv'])
            wb = load_workbook(paths['xlsx'])
        self.assertEqual(len(frame), 2)
        self.assertEqual(list(frame['status']), ['completed', STEP_COLLAPSE])
        ws = wb['Sweep']
        self.assertEqual(ws.cell(row=1, column=1).value, 'Run')
        self.assertEqual(ws.freeze_panes, 'A2')
        self.assertIn('Gap Table', wb.sheetnames)


class RunBenchmarkTests(SimpleTestCase):
    def test_artifacts_per_step(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = box_config(steps=2, out=tmp)
            run = run_benchmark(config, newton=accept_prescribed)
            files = sorted(p.name for p in Path(tmp).iterdir())
            frame = pd.read_csv(Path(tmp) / 'report.csv')
        self.assertTrue(run.report.completed)
        self.assertAlmostEqual(run.initial_gap, 0.3, places=12)
        self.assertEqual(files, ['report.csv', 'step_0000.vtk', 'step_0001.vtk', 'step_0002.vtk'])
        self.assertEqual(len(frame), 2)
        assert_allclose(frame['factor'], [0.5, 1.0])
        # only the loaded band moves, the flanges keep their distance
        assert_allclose(frame['gap'], 0.3)

    def test_collapse_still_writes_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            document = apply_overrides(preset_document('box-self-contact'), steps=2, out=tmp)
            document['load']['auto_adjust'] = {'enabled': False}
            with self.assertRaises(StepCollapseError) as ctx:
                run_benchmark(build_config(document), newton=always_fail)
            files = sorted(p.name for p in Path(tmp).iterdir())
        self.assertEqual(ctx.exception.report.status, STEP_COLLAPSE)
        self.assertEqual(ctx.exception.report.steps, [])
        self.assertEqual(files, ['report.csv', 'step_0000.vtk'])


class SweepTests(SimpleTestCase):
    def test_empty_grid_runs_nothing(self):
        with mock.patch('bench.services.run_benchmark') as runner:
            with self.assertRaises(BenchmarkConfigError):
                sweep(box_config(), {})
            with self.assertRaises(BenchmarkConfigError):
                sweep(box_config(), {'gamma': [], 'alpha_r': []})
        runner.assert_not_called()

    def test_grid_points(self):
        template = box_config(out='/tmp/sweep', threads=4)
        points = grid_points(template, {'alpha_r': [10.0, 1.0, 0.1], 'gamma': [1e-4, 1e-5, 1e-6]})
        self.assertEqual(len(points), 9)
        self.assertEqual([p.medium.alpha_r for p in points[:3]], [10.0, 10.0, 10.0])
        self.assertEqual([p.medium.gamma for p in points[:3]], [1e-4, 1e-5, 1e-6])
        self.assertEqual(len({p.output_dir for p in points}), 9)
        self.assertTrue(all(p.threads == 1 for p in points))
        self.assertTrue(all(p.medium.reg == RegularizationKind.HUHU_DEV for p in points))

    def test_failures_become_rows(self):
        template = box_config()

        def fake_run(config):
            if config.medium.reg == RegularizationKind.ROT_J:
                run = BenchmarkRun(config, None, fake_report(1, STEP_COLLAPSE, 'step collapse'), 0.3)
                raise StepCollapseError(run)
            return BenchmarkRun(config, None, fake_report(2), 0.3)

        with mock.patch('bench.services.run_benchmark', side_effect=fake_run):
            rows = sweep(template, {'reg': ['huhu', 'rot-j', 'tan-rot-j']})
        self.assertEqual([row['reg'] for row in rows], ['huhu', 'rot-j', 'tan-rot-j'])
        self.assertEqual([row['status'] for row in rows], [COMPLETED, STEP_COLLAPSE, COMPLETED])
        self.assertAlmostEqual(rows[0]['gap'], 0.1)
        self.assertEqual(rows[0]['reaction_y'], -4.0)

    def test_singular_projector_becomes_error_row(self):
        template = box_config()

        def fake_run(config):
            if config.medium.gamma == 1e-5:
                raise ProjectionError('singular monomial mass matrix on element 3')
            if config.medium.gamma == 1e-6:
                raise QuadratureError('not star-shaped w.r.t. centroid')
            return BenchmarkRun(config, None, fake_report(2), 0.3)

        with mock.patch('bench.services.run_benchmark', side_effect=fake_run):
            rows = sweep(template, {'gamma': [1e-4, 1e-5, 1e-6]})
        self.assertEqual([row['status'] for row in rows], [COMPLETED, 'error', 'error'])
        self.assertIn('singular monomial mass matrix', rows[1]['message'])
        self.assertIn('not star-shaped', rows[2]['message'])

    def test_unknown_axis(self):
        with self.assertRaises(BenchmarkConfigError):
            grid_points(box_config(), {'gamma': [1e-4], 'kappa': [1.0]})


class BenchApiTests(SimpleTestCase):
    def setUp(self):
        self.client = APIClient()

    def test_health(self):
        response = self.client.get('/api/bench/health/')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['status'], 'ok')

    def test_presets(self):
        response = self.client.get('/api/bench/presets/')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertIn('punch-rigid', response.data)

    def test_mesh(self):
        response = self.client.post('/api/bench/mesh/', {'problem': 'c-box'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertGreater(response.data['summary']['elements'], 0)
        self.assertEqual(response.data['diagnostics'], [])
        self.assertIn('left-wall', response.data['boundary_sets'])
        self.assertNotIn('mesh', response.data)

    def test_mesh_voronoi_solid(self):
        response = self.client.post('/api/bench/mesh/', {'problem': 'punch', 'solid': 'voronoi'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['solid'], 'voronoi')
        self.assertEqual(response.data['diagnostics'], [])

        response = self.client.post('/api/bench/mesh/', {'problem': 'c-box', 'solid': 'voronoi'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    def test_mesh_unknown_problem(self):
        response = self.client.post('/api/bench/mesh/', {'problem': 'sphere'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    def test_run_validation(self):
        response = self.client.post('/api/bench/run/', {'preset': 'sphere'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        response = self.client.post('/api/bench/run/', {'preset': 'c-box', 'steps': 0}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    @override_settings(TMC_BENCH={})
    def test_run(self):
        def fake_run(config):
            return BenchmarkRun(config, None, fake_report(2), 0.3)

        with mock.patch('bench.views.run_benchmark', side_effect=fake_run):
            response = self.client.post('/api/bench/run/', {'preset': 'c-box', 'steps': 2}, format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['status'], COMPLETED)
        self.assertEqual(len(response.data['steps']), 2)
        self.assertIsNone(response.data['output_dir'])

    @override_settings(TMC_BENCH={})
    def test_run_step_collapse(self):
        def fake_run(config):
            report = fake_report(1, STEP_COLLAPSE, 'step collapse at factor 0.5')
            report.steps[0].reaction = np.array([np.nan, np.nan])
            raise StepCollapseError(BenchmarkRun(config, None, report, 0.3))

        with mock.patch('bench.views.run_benchmark', side_effect=fake_run):
            response = self.client.post('/api/bench/run/', {'preset': 'c-box'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_409_CONFLICT)
        self.assertEqual(response.data['status'], STEP_COLLAPSE)
        self.assertIsNone(response.data['steps'][0]['reaction_x'])
