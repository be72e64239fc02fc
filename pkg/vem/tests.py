import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from mesh.generators import generate_benchmark_mesh
from mesh.geometry import PolygonalMesh, body_region

from .basis import ScaledMonomialBasis, basis_dimension, derivative_matrix, monomial_eval
from .projection import (
    DofLayout,
    ElementFrame,
    OperatorOptions,
    b1_matrix,
    b2_matrix,
    build_element_operators,
    build_operators,
    choose_l,
    dof_matrix,
    h1_projector,
    interpolate_dofs,
    interpolate_vector_dofs,
    l2_gradient_projector,
)
from .quadrature import QuadratureError, edge_quadrature, polygon_quadrature, triangle_rule

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
PENTAGON = np.column_stack([np.cos(2 * np.pi * np.arange(5) / 5), np.sin(2 * np.pi * np.arange(5) / 5)])
HANGING = np.array([[0, 0], [0.25, 0], [0.5, 0], [0.75, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
OCTAGON = np.column_stack([np.cos(np.pi * np.arange(8) / 4), np.sin(np.pi * np.arange(8) / 4)]) * 0.3 + 2.0
SKEWED = np.array([[0.1, 0.0], [1.3, 0.2], [1.1, 0.9], [0.4, 1.2], [-0.2, 0.6]])


def single_element_operators(coords, **options):
    n = len(coords)
    mesh = PolygonalMesh(coords, [tuple(range(n))], [body_region(0)])
    return build_element_operators(mesh, DofLayout.from_mesh(mesh), 0, OperatorOptions(**options))


def plane_strain_tensor(K=20.0, mu=10.0):
    lam = K - 2.0 * mu / 3.0
    C = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    C[i + 2 * j, k + 2 * l] = (
                        lam * (i == j) * (k == l) + mu * ((i == k) * (j == l) + (i == l) * (j == k))
                    )
    return C


def linear_stiffness(ops, C):
    return np.einsum('q,qai,ab,qbj->ij', ops.quadrature.weights, ops.B1, C, ops.B1)


def gradient_coefficients(frame, l):
    """Exact [P_l]^2 coefficients of grad m_a for the order-2 monomials (columns)."""
    dim = basis_dimension(l)
    basis2 = frame.basis(2)
    expected = np.zeros((2 * dim, basis2.dimension))
    expected[:3] = derivative_matrix(basis2, 0).T
    expected[dim:dim + 3] = derivative_matrix(basis2, 1).T
    return expected


class MonomialTests(SimpleTestCase):
    def setUp(self):
        self.basis = ScaledMonomialBasis(np.array([0.3, -0.2]), 0.7, 3)

    def test_values_at_centroid(self):
        values = monomial_eval(self.basis, self.basis.centroid, 0)
        assert_allclose(values, np.eye(10)[0])

    def test_first_derivative_of_xi(self):
        grads = monomial_eval(self.basis, np.array([[1.0, 2.0], [-0.4, 0.1]]), 1)
        assert_allclose(grads[:, 1], [[1 / 0.7, 0.0], [1 / 0.7, 0.0]])

    def test_second_derivative_of_xi_eta(self):
        hess = monomial_eval(self.basis, np.array([0.9, 0.4]), 2)
        assert_allclose(hess[4], [[0.0, 1 / 0.49], [1 / 0.49, 0.0]])

    def test_hessian_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        step = 1e-5 * self.basis.diameter
        for x in rng.uniform(-1.0, 1.0, size=(5, 2)):
            hess = monomial_eval(self.basis, x, 2)
            for k in range(2):
                dx = np.zeros(2)
                dx[k] = step
                fd = (monomial_eval(self.basis, x + dx, 1) - monomial_eval(self.basis, x - dx, 1)) / (2 * step)
                assert_allclose(hess[:, :, k], fd, rtol=1e-6, atol=1e-6 * np.abs(hess).max())

    def test_bad_derivative_order(self):
        with self.assertRaises(ValueError):
            monomial_eval(self.basis, np.zeros(2), 3)


class QuadratureTests(SimpleTestCase):
    def test_unit_square_monomial(self):
        rule = polygon_quadrature(SQUARE, 4)
        self.assertAlmostEqual(rule.integrate(rule.points[:, 0] ** 2 * rule.points[:, 1] ** 2), 1 / 9, delta=1e-14)
        self.assertAlmostEqual(rule.weights.sum(), 1.0, delta=1e-14)
        self.assertTrue(np.all(rule.weights > 0))

    def test_rectangle_closed_form(self):
        a, b = 1.7, 0.6
        rect = np.array([[0, 0], [a, 0], [a, b], [0, b]], dtype=float)
        for degree in (2, 5, 8, 10):
            rule = polygon_quadrature(rect, degree)
            for p in range(degree + 1):
                q = degree - p
                exact = a ** (p + 1) * b ** (q + 1) / ((p + 1) * (q + 1))
                value = rule.integrate(rule.points[:, 0] ** p * rule.points[:, 1] ** q)
                self.assertAlmostEqual(value / exact, 1.0, delta=1e-12)

    def test_pentagon_against_high_degree_rule(self):
        basis = ElementFrame(PENTAGON).basis(3)
        reference = polygon_quadrature(PENTAGON, 12)
        rule = polygon_quadrature(PENTAGON, 6)
        v_ref = monomial_eval(basis, reference.points, 0)
        v = monomial_eval(basis, rule.points, 0)
        assert_allclose(
            v.T @ (rule.weights[:, None] * v), v_ref.T @ (reference.weights[:, None] * v_ref), atol=1e-12
        )

    def test_not_star_shaped(self):
        u_shape = np.array([[0, 0], [3, 0], [3, 3], [2, 3], [2, 1], [1, 1], [1, 3], [0, 3]], dtype=float)
        with self.assertRaisesMessage(QuadratureError, 'not star-shaped w.r.t. centroid'):
            polygon_quadrature(u_shape, 2)

    def test_triangle_rules_exact_up_to_degree_twelve(self):
        # int over the unit triangle of x^p y^q = p! q! / (p + q + 2)!
        for degree in range(1, 13):
            bary, w = triangle_rule(degree)
            self.assertAlmostEqual(w.sum(), 1.0, delta=1e-14)
            x, y = bary[:, 1], bary[:, 2]
            for p in range(degree + 1):
                for q in range(degree + 1 - p):
                    exact = math.factorial(p) * math.factorial(q) / math.factorial(p + q + 2)
                    self.assertAlmostEqual(0.5 * float(w @ (x ** p * y ** q)), exact, delta=1e-13)
        # collapsed product beyond the symmetric rules
        self.assertEqual(len(triangle_rule(9)[1]), 25)
        self.assertEqual(len(triangle_rule(10)[1]), 36)

    def test_edge_rules(self):
        rule = edge_quadrature([0, 0], [1, 0], 1)
        self.assertAlmostEqual(rule.integrate(rule.points[:, 0]), 0.5)
        rule = edge_quadrature([1, 1], [4, 5], 0)
        self.assertAlmostEqual(rule.weights.sum(), 5.0)
        rule = edge_quadrature([0, 0], [1, 0], 5)
        self.assertAlmostEqual(rule.integrate(rule.points[:, 0] ** 5), 1 / 6, delta=1e-14)

    def test_zero_length_edge(self):
        with self.assertRaises(QuadratureError):
            edge_quadrature([1, 1], [1, 1], 3)


class ChooseLTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(choose_l(4), 3)
        self.assertEqual(choose_l(7), 3)
        self.assertEqual(choose_l(8), 4)
        self.assertEqual(choose_l(3), 3)
        self.assertEqual(choose_l(10), 5)


class ProjectorTests(SimpleTestCase):
    def test_h1_reproduces_quadratics(self):
        for coords in (SQUARE, PENTAGON, HANGING, OCTAGON, SKEWED):
            frame = ElementFrame(coords)
            Pi = h1_projector(frame)
            assert_allclose(Pi @ dof_matrix(frame), np.eye(6), atol=1e-10)

    def test_h1_constant(self):
        frame = ElementFrame(SKEWED)
        dofs = interpolate_dofs(frame, lambda x: np.ones(len(x)))
        assert_allclose(h1_projector(frame) @ dofs, np.eye(6)[0], atol=1e-12)

    def test_h1_matches_dense_projection_with_bubble(self):
        # quadratic plus an interior bubble: boundary traces stay quadratic
        def v(x):
            X, Y = x[..., 0], x[..., 1]
            return 0.3 + X - 2 * X * Y + Y ** 2 + 5.0 * X * (1 - X) * Y * (1 - Y)

        def grad_v(x):
            X, Y = x[..., 0], x[..., 1]
            gx = 1 - 2 * Y + 5.0 * (1 - 2 * X) * Y * (1 - Y)
            gy = -2 * X + 2 * Y + 5.0 * X * (1 - X) * (1 - 2 * Y)
            return np.stack([gx, gy], axis=-1)

        frame = ElementFrame(SQUARE)
        basis = frame.basis(2)
        rule = polygon_quadrature(SQUARE, 12)
        grads = monomial_eval(basis, rule.points, 1)
        G = np.einsum('q,qai,qbi->ab', rule.weights, grads, grads)
        G[0] = rule.integrate(monomial_eval(basis, rule.points, 0))
        rhs = np.einsum('q,qai,qi->a', rule.weights, grads, grad_v(rule.points))
        rhs[0] = rule.integrate(v(rule.points))
        expected = np.linalg.solve(G, rhs)

        computed = h1_projector(frame) @ interpolate_dofs(frame, v, degree=12)
        assert_allclose(computed, expected, atol=1e-10)

    def test_gradient_reproduction(self):
        for coords in (SQUARE, PENTAGON, HANGING, OCTAGON, SKEWED):
            frame = ElementFrame(coords)
            l = choose_l(len(coords))
            Pi_m = l2_gradient_projector(frame, h1_projector(frame), l)
            expected = gradient_coefficients(frame, l)
            assert_allclose(Pi_m @ dof_matrix(frame), expected, atol=1e-10 * np.abs(expected).max())

    def test_gradient_of_global_x(self):
        frame = ElementFrame(PENTAGON)
        Pi_m = l2_gradient_projector(frame, h1_projector(frame), 3)
        coefficients = Pi_m @ interpolate_dofs(frame, lambda x: x[:, 0])
        expected = np.zeros(20)
        expected[0] = 1.0
        assert_allclose(coefficients, expected, atol=1e-12)

    def test_gradient_projection_of_smooth_function(self):
        """sin(x) e^y on shrinking skewed pentagons against a brute-force L2 projection of its gradient."""
        def v(x):
            return np.sin(x[..., 0]) * np.exp(x[..., 1])

        def grad_v(x):
            X, Y = x[..., 0], x[..., 1]
            return np.stack([np.cos(X) * np.exp(Y), np.sin(X) * np.exp(Y)], axis=-1)

        centre = np.array([0.4, -0.3])
        errors = []
        for h in (0.4, 0.2, 0.1, 0.05):
            coords = centre + h * (SKEWED - SKEWED.mean(axis=0))
            frame = ElementFrame(coords)
            l = choose_l(len(coords))
            rule = polygon_quadrature(coords, 20)
            values = monomial_eval(frame.basis(l), rule.points, 0)
            M = values.T @ (rule.weights[:, None] * values)
            rhs = values.T @ (rule.weights[:, None] * grad_v(rule.points))
            expected = np.linalg.solve(M, rhs).T.ravel()

            Pi_m = l2_gradient_projector(frame, h1_projector(frame), l)
            computed = Pi_m @ interpolate_dofs(frame, v, degree=20)
            errors.append(np.abs(computed - expected).max())

        rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        self.assertTrue(np.all(rates > 1.5), f"errors {errors}, rates {rates}")

    def test_projector_consistency_on_quadratics(self):
        frame = ElementFrame(SKEWED)
        Pi_nabla = h1_projector(frame)
        Pi_m = l2_gradient_projector(frame, Pi_nabla, 3)
        basis = frame.basis(2)
        dofs = interpolate_dofs(frame, lambda x: 1 + x[:, 0] * x[:, 1] - 3 * x[:, 1] ** 2)
        projected = interpolate_dofs(frame, lambda x: monomial_eval(basis, x, 0) @ (Pi_nabla @ dofs))
        assert_allclose(Pi_m @ projected, Pi_m @ dofs, atol=1e-10)

    def test_order_one_volume_term_keeps_linear_gradients(self):
        frame = ElementFrame(SKEWED)
        Pi_m = l2_gradient_projector(frame, h1_projector(frame), 3, volume_term='1')
        coefficients = Pi_m @ interpolate_dofs(frame, lambda x: 2 * x[:, 0] - x[:, 1])
        expected = np.zeros(20)
        expected[0], expected[10] = 2.0, -1.0
        assert_allclose(coefficients, expected, atol=1e-10)

    def test_unknown_volume_term(self):
        with self.assertRaises(ValueError):
            OperatorOptions(volume_term='2')


class OperatorMatrixTests(SimpleTestCase):
    def setUp(self):
        self.ops = single_element_operators(SKEWED)
        self.frame = self.ops.frame

    def apply(self, field, which='B1'):
        dofs = interpolate_vector_dofs(self.frame, field)
        B = self.ops.B1 if which == 'B1' else self.ops.B2
        return B @ dofs

    def test_shapes(self):
        n = len(SKEWED)
        self.assertEqual(self.ops.B1.shape[1:], (4, 4 * n + 2))
        self.assertEqual(self.ops.B2.shape[1:], (8, 4 * n + 2))
        self.assertEqual(b1_matrix(self.ops, self.frame.geometry.centroid).shape, (4, 4 * n + 2))
        self.assertEqual(b2_matrix(self.ops, self.frame.geometry.centroid).shape, (8, 4 * n + 2))

    def test_b1_ordering(self):
        cases = [
            (lambda x: np.column_stack([x[:, 0], 0 * x[:, 0]]), [1, 0, 0, 0]),
            (lambda x: np.column_stack([0 * x[:, 0], x[:, 1]]), [0, 0, 0, 1]),
            (lambda x: np.column_stack([x[:, 1], 0 * x[:, 0]]), [0, 0, 1, 0]),
            (lambda x: np.column_stack([0 * x[:, 0], x[:, 0]]), [0, 1, 0, 0]),
        ]
        for field, expected in cases:
            result = self.apply(field)
            assert_allclose(result, np.tile(expected, (len(result), 1)), atol=1e-11)

    def test_b2_quadratic(self):
        result = self.apply(lambda x: np.column_stack([x[:, 0] ** 2, 0 * x[:, 0]]), 'B2')
        expected = np.zeros(8)
        expected[0] = 2.0
        assert_allclose(result, np.tile(expected, (len(result), 1)), atol=1e-9)

    def test_b2_affine_vanishes(self):
        result = self.apply(lambda x: np.column_stack([1 + 2 * x[:, 0] - x[:, 1], 3 * x[:, 1] + 0.5 * x[:, 0]]), 'B2')
        assert_allclose(result, 0.0, atol=1e-9)

    def test_b2_mixed_symmetry(self):
        result = self.apply(lambda x: np.column_stack([x[:, 0] * x[:, 1], 0 * x[:, 0]]), 'B2')
        expected = np.zeros(8)
        expected[2] = expected[4] = 1.0
        assert_allclose(result, np.tile(expected, (len(result), 1)), atol=1e-9)

        result = self.apply(lambda x: np.column_stack([x[:, 1] ** 2 - x[:, 0] * x[:, 1], 2 * x[:, 0] * x[:, 1]]), 'B2')
        assert_allclose(result[:, 2:4], result[:, 4:6], atol=1e-9)

    def test_point_evaluation_matches_stored(self):
        x = self.ops.quadrature.points[3]
        assert_allclose(b1_matrix(self.ops, x), self.ops.B1[3])
        assert_allclose(b2_matrix(self.ops, x), self.ops.B2[3])


class StabilizationFreeRankTests(SimpleTestCase):
    def assert_three_rigid_modes(self, ops, C):
        eigenvalues = np.linalg.eigvalsh(linear_stiffness(ops, C))
        zero = np.abs(eigenvalues) < 1e-10 * eigenvalues.max()
        self.assertEqual(int(zero.sum()), 3, f"element {ops.element}: {eigenvalues[:5]}")
        self.assertTrue(np.all(eigenvalues[~zero] > 0))

    def test_single_polygons(self):
        C = plane_strain_tensor()
        for coords in (SQUARE, PENTAGON, HANGING, OCTAGON, SKEWED, SQUARE[:3]):
            self.assert_three_rigid_modes(single_element_operators(coords), C)

    def test_benchmark_meshes(self):
        C = plane_strain_tensor()
        cases = (
            ('box-self-contact', 2, 'quad'),
            ('c-box', 1, 'quad'),
            ('punch', 0, 'quad'),
            ('punch', 0, 'voronoi'),
            ('multi-object', 0, 'quad'),
            ('multi-object', 0, 'voronoi'),
        )
        for problem, refinement, solid in cases:
            with self.subTest(problem=problem, solid=solid):
                mesh = generate_benchmark_mesh(problem, refinement, solid)
                layout = DofLayout.from_mesh(mesh)
                checked = 0
                for ops in build_operators(mesh, layout, OperatorOptions(threads=2)):
                    self.assert_three_rigid_modes(ops, C)
                    checked += 1
                self.assertEqual(checked, mesh.n_elements)


class BenchmarkReproductionTests(SimpleTestCase):
    def test_every_element_reproduces_polynomials(self):
        for problem in ('box-self-contact', 'c-box', 'punch', 'multi-object'):
            mesh = generate_benchmark_mesh(problem, 1 if problem == 'box-self-contact' else 0)
            layout = DofLayout.from_mesh(mesh)
            for ops in build_operators(mesh, layout, OperatorOptions(threads=2)):
                D = dof_matrix(ops.frame)
                worst = np.abs(ops.Pi_nabla @ D - np.eye(6)).max()
                self.assertLess(worst, 1e-10, f"{problem} element {ops.element}")
                expected = gradient_coefficients(ops.frame, ops.l)
                error = np.abs(ops.Pi_m @ D - expected).max() / np.abs(expected).max()
                self.assertLess(error, 1e-10, f"{problem} element {ops.element}")

    def test_layout_counts(self):
        mesh = generate_benchmark_mesh('c-box', 0)
        layout = DofLayout.from_mesh(mesh)
        self.assertEqual(layout.n_dofs, 2 * (mesh.n_vertices + mesh.n_edges + mesh.n_elements))
        for e in (0, mesh.n_elements - 1):
            n = len(mesh.elements[e])
            self.assertEqual(len(layout.scalar_dofs(e)), 2 * n + 1)
            self.assertEqual(len(layout.element_dofs(e)), 4 * n + 2)
            ring = layout.rings[e]
            self.assertEqual(ring[0], min(ring))

    def test_shared_edge_dofs(self):
        mesh = generate_benchmark_mesh('box-self-contact', 0)
        layout = DofLayout.from_mesh(mesh)
        k = next(k for k, inc in enumerate(mesh.edge_elements) if len(inc) == 2)
        a, b = mesh.edge_elements[k]
        edge_dof = mesh.n_vertices + k
        self.assertIn(edge_dof, layout.scalar_dofs(a))
        self.assertIn(edge_dof, layout.scalar_dofs(b))
