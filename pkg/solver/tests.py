import numpy as np
import scipy.linalg
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from material.tensors import medium_tensors
from material.types import Body, RegularizationKind, ThirdMedium
from mesh.generators import generate_benchmark_mesh
from mesh.geometry import MEDIUM, BoundarySet, MeshError, PolygonalMesh, body_region

from .assembly import (
    DirichletConstraints, DiscreteProblem, ElementFailure, assemble, element_energy,
    element_residual, element_tangent, reaction_force,
)
from .loading import STEP_COLLAPSE, AutoAdjust, LoadProgram, run_load_program
from .newton import NewtonOptions, NewtonResult, newton_solve

BODY = Body(K=20.0, mu=10.0)
SQUARE_SETS = {
    'left': BoundarySet((0, 3), ((0, 3),)),
    'right': BoundarySet((1, 2), ((1, 2),)),
    'bottom': BoundarySet((0, 1), ((0, 1),)),
    'top': BoundarySet((2, 3), ((2, 3),)),
    'origin': BoundarySet((0,)),
}
STRETCH = {'left': (0.0, None), 'origin': (None, 0.0), 'right': (0.01, None)}


def medium_model(kind='huhu-dev', beta=5.0, gamma=1.0, alpha_r=1.0):
    return ThirdMedium(gamma=gamma, alpha_r=alpha_r, beta=beta, reg=kind, mu=1.0)


def square_problem(model, region=None):
    region = region or (MEDIUM if isinstance(model, ThirdMedium) else body_region(0))
    mesh = PolygonalMesh([[0, 0], [1, 0], [1, 1], [0, 1]], [(0, 1, 2, 3)], [region], SQUARE_SETS)
    return DiscreteProblem.build(mesh, {region: model})


def two_element_problem():
    mesh = PolygonalMesh(
        [[0, 0], [1, 0], [2, 0], [2, 1], [1, 1], [0, 1]],
        [(0, 1, 4, 5), (1, 2, 3, 4)],
        [body_region(0), MEDIUM],
    )
    return DiscreteProblem.build(mesh, {body_region(0): BODY, MEDIUM: medium_model()})


def all_models():
    return [BODY] + [medium_model(kind) for kind in RegularizationKind]


def fd_gradient(func, u, h):
    grad = np.zeros_like(u)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = h
        grad[i] = (func(u + e) - func(u - e)) / (2.0 * h)
    return grad


def fd_jacobian(func, u, h):
    columns = []
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = h
        columns.append((func(u + e) - func(u - e)) / (2.0 * h))
    return np.column_stack(columns)


class ElementResidualTests(SimpleTestCase):
    def test_zero_at_reference(self):
        for model in all_models():
            ops = square_problem(model).operators[0]
            assert_allclose(element_residual(ops, np.zeros(ops.n_dofs), model), 0.0, atol=1e-13)

    def test_rigid_translation(self):
        for model in all_models():
            ops = square_problem(model).operators[0]
            u = np.zeros(ops.n_dofs)
            u[0::2] = 0.37
            assert_allclose(element_residual(ops, u, model), 0.0, atol=1e-12)

    def test_matches_energy_derivative(self):
        rng = np.random.default_rng(21)
        for model in all_models():
            ops = square_problem(model).operators[0]
            u = 0.02 * rng.uniform(-1.0, 1.0, ops.n_dofs)
            r = element_residual(ops, u, model)
            fd = fd_gradient(lambda v: element_energy(ops, v, model), u, 1e-6)
            self.assertLess(np.max(np.abs(r - fd)) / np.max(np.abs(r)), 1e-7)

    def test_degenerate_state_reports_element(self):
        ops = square_problem(BODY).operators[0]
        u = np.zeros(ops.n_dofs)
        u[1::2] = -2.0 * np.concatenate([ops.frame.coords[:, 1], ops.frame.midpoints[:, 1], [0.5]])
        with self.assertRaises(ElementFailure) as ctx:
            element_residual(ops, u, BODY)
        self.assertEqual(ctx.exception.element, 0)


class ElementTangentTests(SimpleTestCase):
    def test_matches_residual_derivative(self):
        rng = np.random.default_rng(22)
        for model in all_models():
            ops = square_problem(model).operators[0]
            for _ in range(3):
                u = 0.02 * rng.uniform(-1.0, 1.0, ops.n_dofs)
                K = element_tangent(ops, u, model)
                fd = fd_jacobian(lambda v: element_residual(ops, v, model), u, 1e-6)
                self.assertLess(np.linalg.norm(K - fd) / np.linalg.norm(K), 1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(23)
        for model in all_models():
            ops = square_problem(model).operators[0]
            K = element_tangent(ops, 0.02 * rng.uniform(-1.0, 1.0, ops.n_dofs), model)
            assert_allclose(K, K.T, atol=1e-10 * np.max(np.abs(K)))

    def test_body_rigid_modes(self):
        ops = square_problem(BODY).operators[0]
        eigenvalues = np.linalg.eigvalsh(element_tangent(ops, np.zeros(ops.n_dofs), BODY))
        scale = eigenvalues.max()
        self.assertEqual(int(np.sum(np.abs(eigenvalues) < 1e-10 * scale)), 3)
        self.assertTrue(np.all(eigenvalues[3:] > 1e-10 * scale))

    def test_huhu_gradient_block(self):
        model = ThirdMedium(gamma=0.5, alpha_r=3.0, beta=0.0, reg='huhu', mu=1.0)
        ops = square_problem(model).operators[0]
        w = ops.quadrature.weights
        K = element_tangent(ops, np.zeros(ops.n_dofs), model)
        D0 = medium_tensors(np.eye(2), np.zeros((2, 2, 2)), model).D_hat
        first_order = np.einsum('q,qai,ab,qbj->ij', w, ops.B1, D0, ops.B1)
        expected = 1.5 * np.einsum('q,qai,qaj->ij', w, ops.B2, ops.B2)
        assert_allclose(K - first_order, expected, atol=1e-12 * np.max(np.abs(expected)))

    def test_translation_invariance(self):
        rng = np.random.default_rng(24)
        for model in [BODY, medium_model('rot-j', beta=0.0), medium_model('tan-rot-j')]:
            ops = square_problem(model).operators[0]
            u = 0.02 * rng.uniform(-1.0, 1.0, ops.n_dofs)
            shifted = u.copy()
            shifted[0::2] += 0.25
            r, K = element_residual(ops, u, model), element_tangent(ops, u, model)
            assert_allclose(element_residual(ops, shifted, model), r, atol=1e-10 * np.max(np.abs(r)))
            assert_allclose(element_tangent(ops, shifted, model), K, atol=1e-10 * np.max(np.abs(K)))


class AssemblyTests(SimpleTestCase):
    def test_single_element(self):
        problem = square_problem(BODY)
        ops = problem.operators[0]
        u = 0.01 * np.random.default_rng(25).uniform(-1.0, 1.0, problem.n_dofs)
        system = problem.assemble(u)
        order = np.argsort(ops.dofs)
        dofs = ops.dofs[order]
        assert_allclose(system.full_residual[dofs], element_residual(ops, u[ops.dofs], BODY)[order])
        assert_allclose(
            system.tangent.toarray()[np.ix_(dofs, dofs)],
            element_tangent(ops, u[ops.dofs], BODY)[np.ix_(order, order)],
        )

    def test_shared_edge_rows_are_summed(self):
        problem = two_element_problem()
        u = 0.01 * np.random.default_rng(26).uniform(-1.0, 1.0, problem.n_dofs)
        models = [BODY, problem.models[MEDIUM]]
        expected_r = np.zeros(problem.n_dofs)
        expected_K = np.zeros((problem.n_dofs, problem.n_dofs))
        for ops, model in zip(problem.operators, models):
            np.add.at(expected_r, ops.dofs, element_residual(ops, u[ops.dofs], model))
            expected_K[np.ix_(ops.dofs, ops.dofs)] += element_tangent(ops, u[ops.dofs], model)
        system = problem.assemble(u)
        assert_allclose(system.full_residual, expected_r, atol=1e-14)
        assert_allclose(system.tangent.toarray(), expected_K, atol=1e-12)
        shared_vertex = problem.layout.vertex_dof(1, 0)
        self.assertEqual(len([ops for ops in problem.operators if shared_vertex in ops.dofs]), 2)

    def test_elimination_partition(self):
        problem = square_problem(BODY)
        partition = DirichletConstraints.from_targets(problem.mesh, problem.layout, STRETCH).at(0.5)
        system = problem.assemble(np.zeros(problem.n_dofs), partition)
        n_free = problem.n_dofs - len(partition.prescribed)
        self.assertEqual(len(system.residual), n_free)
        self.assertEqual(system.tangent.shape, (n_free, n_free))
        self.assertEqual(system.coupling.shape, (n_free, len(partition.prescribed)))
        # left: 3 x DOFs, origin: 1 y DOF, right: 3 x DOFs
        self.assertEqual(len(partition.prescribed), 7)
        self.assertEqual(sorted(set(partition.values)), [0.0, 0.005])

    def test_thread_count_does_not_change_result(self):
        mesh = generate_benchmark_mesh('c-box', 0)
        models = {body_region(0): BODY, MEDIUM: medium_model('rot-j', gamma=1e-5)}
        problem = DiscreteProblem.build(mesh, models)
        u = 1e-3 * np.random.default_rng(27).uniform(-1.0, 1.0, problem.n_dofs)
        serial = assemble(mesh, problem.operators, models, u, threads=1)
        parallel = assemble(mesh, problem.operators, models, u, threads=3)
        assert_array_equal(serial.full_residual, parallel.full_residual)
        self.assertEqual((serial.tangent != parallel.tangent).nnz, 0)

    def test_box_tangent_has_no_floating_parts(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        models = {
            body_region(0): BODY,
            MEDIUM: ThirdMedium(gamma=1e-6, alpha_r=0.1, beta=5.0, reg='huhu-dev', mu=10.0),
        }
        problem = DiscreteProblem.build(mesh, models)
        targets = {'bottom-left-corner': (0.0, 0.0), 'bottom-right-corner': (None, 0.0)}
        partition = DirichletConstraints.from_targets(mesh, problem.layout, targets).at(1.0)
        system = problem.assemble(np.zeros(problem.n_dofs), partition)
        assert_allclose(system.residual, 0.0, atol=1e-12)
        K = system.tangent.toarray()
        assert_allclose(K, K.T, atol=1e-10 * np.max(np.abs(K)))
        lowest = scipy.linalg.eigh(K, eigvals_only=True, subset_by_index=[0, 2])
        self.assertGreater(lowest[0], 1e-10 * np.max(np.abs(K)))

    def test_conflicting_targets(self):
        problem = square_problem(BODY)
        with self.assertRaises(MeshError):
            DirichletConstraints.from_targets(
                problem.mesh, problem.layout, {'left': (0.0, None), 'bottom': (0.1, None)}
            )


class ReactionForceTests(SimpleTestCase):
    def test_unloaded(self):
        problem = square_problem(BODY)
        system = problem.assemble(np.zeros(problem.n_dofs))
        assert_array_equal(reaction_force(system, problem.mesh, problem.layout, 'right'), [0.0, 0.0])

    def test_force_balance_after_stretch(self):
        problem = square_problem(BODY)
        partition = DirichletConstraints.from_targets(problem.mesh, problem.layout, STRETCH).at(1.0)
        result = newton_solve(problem, np.zeros(problem.n_dofs), partition)
        self.assertTrue(result.converged)
        left = reaction_force(result.system, problem.mesh, problem.layout, 'left')
        right = reaction_force(result.system, problem.mesh, problem.layout, 'right')
        self.assertGreater(right[0], 0.0)
        self.assertAlmostEqual(left[0] + right[0], 0.0, delta=1e-8)
        assert_allclose(result.system.full_residual.reshape(-1, 2).sum(axis=0), 0.0, atol=1e-8)

    def test_empty_set(self):
        problem = square_problem(BODY)
        mesh = PolygonalMesh(problem.mesh.vertices, problem.mesh.elements, problem.mesh.element_region,
                             {'nothing': BoundarySet()})
        system = problem.assemble(np.zeros(problem.n_dofs))
        with self.assertRaises(MeshError):
            reaction_force(system, mesh, problem.layout, 'nothing')


class NewtonTests(SimpleTestCase):
    def setUp(self):
        self.problem = square_problem(BODY)
        self.partition = DirichletConstraints.from_targets(
            self.problem.mesh, self.problem.layout, STRETCH
        ).at(1.0)

    def test_stretch_converges_quadratically(self):
        options = NewtonOptions(tol_rel=1e-12)
        result = newton_solve(self.problem, np.zeros(self.problem.n_dofs), self.partition, options)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.iterations, 5)
        rho = np.array(result.residual_norms) / result.residual_norms[0]
        pairs = [(a, b) for a, b in zip(rho[1:], rho[2:]) if b > 1e-11]
        self.assertGreater(len(pairs), 0)
        for a, b in pairs:
            self.assertLess(b, 10.0 * a * a)
        assert_allclose(result.u[self.partition.prescribed], self.partition.values)

    def test_already_converged(self):
        first = newton_solve(self.problem, np.zeros(self.problem.n_dofs), self.partition)
        again = newton_solve(self.problem, first.u, self.partition)
        self.assertTrue(again.converged)
        self.assertLessEqual(again.iterations, 1)
        assert_allclose(again.u, first.u, atol=1e-9)

    def test_immediate_acceptance_returns_system_at_applied_state(self):
        # loose tolerance: the first increment is accepted at k = 0
        options = NewtonOptions(tol_abs_scale=1e6)
        result = newton_solve(self.problem, np.zeros(self.problem.n_dofs), self.partition, options)
        self.assertTrue(result.converged)
        self.assertEqual(result.iterations, 0)
        assert_allclose(result.u[self.partition.prescribed], self.partition.values)
        fresh = self.problem.assemble(result.u, self.partition)
        assert_allclose(result.system.full_residual, fresh.full_residual, atol=1e-14)
        self.assertGreater(np.abs(result.system.full_residual).max(), 1e-6)

    def test_collapsing_medium_fails_without_nan(self):
        model = medium_model('huhu-dev', gamma=1e-3)
        problem = square_problem(model)
        targets = {'bottom': (0.0, 0.0), 'top': (None, -1.5)}
        partition = DirichletConstraints.from_targets(problem.mesh, problem.layout, targets).at(1.0)
        result = newton_solve(problem, np.zeros(problem.n_dofs), partition)
        self.assertFalse(result.converged)
        self.assertIn('degenerate', result.reason)
        self.assertTrue(np.all(np.isfinite(result.u)))

    def test_options_validation(self):
        with self.assertRaises(ValueError):
            NewtonOptions(max_iter=0)
        self.assertAlmostEqual(NewtonOptions().tol_abs(100), 1e-10)

    def test_options_from_settings(self):
        options = NewtonOptions.from_settings(max_iter=7)
        self.assertEqual(options.max_iter, 7)
        self.assertEqual(options.tol_rel, 1e-8)


class LoadProgramTests(SimpleTestCase):
    def setUp(self):
        self.problem = square_problem(BODY)

    def test_linear_regime(self):
        program = LoadProgram({'left': (0.0, None), 'origin': (None, 0.0), 'right': (1e-4, None)}, n_steps=4)
        report = run_load_program(self.problem, program, gap=lambda u: 0.0)
        self.assertTrue(report.completed)
        self.assertEqual(report.final_factor, 1.0)
        self.assertEqual(report.halvings, 0)
        self.assertEqual(len(report.steps), 4)
        self.assertTrue(all(record.iterations <= 3 for record in report.steps))
        self.assertEqual(list(report.rows()[0]), ['step', 'factor', 'iters', 'gap', 'reaction_x', 'reaction_y'])

    def test_injected_failure_halves_increment(self):
        calls = []

        def flaky_newton(problem, u, partition, options):
            calls.append(partition)
            if len(calls) == 7:
                return NewtonResult(u, False, 0, [], 'injected')
            return newton_solve(problem, u, partition, options)

        program = LoadProgram(STRETCH, n_steps=10, auto_adjust=AutoAdjust(grow_after=3))
        report = run_load_program(self.problem, program, newton=flaky_newton)
        factors = [record.factor for record in report.steps]
        self.assertTrue(report.completed)
        self.assertEqual(report.halvings, 1)
        self.assertEqual(report.doublings, 1)
        self.assertEqual(factors[-1], 1.0)
        self.assertTrue(all(b > a for a, b in zip(factors, factors[1:])))
        self.assertEqual(len(factors), 12)
        assert_allclose(factors[6], 0.65)

    def test_step_collapse_keeps_last_state(self):
        calls = []

        def failing_after_two(problem, u, partition, options):
            calls.append(partition)
            if len(calls) > 2:
                return NewtonResult(u, False, 0, [], 'injected')
            return newton_solve(problem, u, partition, options)

        program = LoadProgram(STRETCH, n_steps=4, auto_adjust=AutoAdjust(min_factor=0.25))
        report = run_load_program(self.problem, program, newton=failing_after_two)
        self.assertEqual(report.status, STEP_COLLAPSE)
        self.assertEqual(report.final_factor, 0.5)
        self.assertEqual(report.halvings, 2)
        assert_allclose(report.u[self.problem.layout.vertex_dof(1, 0)], 0.005)

    def test_collapse_without_auto_adjust(self):
        def always_failing(problem, u, partition, options):
            return NewtonResult(u, False, 0, [], 'injected')

        program = LoadProgram(STRETCH, n_steps=2, auto_adjust=AutoAdjust(enabled=False))
        report = run_load_program(self.problem, program, newton=always_failing)
        self.assertEqual(report.status, STEP_COLLAPSE)
        self.assertEqual(report.steps, [])
        self.assertEqual(report.halvings, 0)

    def test_program_validation(self):
        with self.assertRaises(ValueError):
            LoadProgram(STRETCH, n_steps=0)
        with self.assertRaises(ValueError):
            AutoAdjust(min_factor=0.0)
