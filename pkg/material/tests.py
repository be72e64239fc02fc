import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal
from scipy.linalg import polar

from . import dual
from .dual import Dual2
from .flatten import flatten_F, flatten_gradF, grad_index, state_vector, unflatten_F, unflatten_gradF
from .hyperelastic import constitutive_body, embed_plane_strain, pk2_stress, psi_body, right_cauchy_green
from .medium import grad_J, regularization, regularization_energy, rotation_angle, rotation_gradient
from .oracle import fd_tensor_oracle
from .tensors import body_tensors, energy_density, medium_tensors, state_tensors
from .types import (
    Body, DegenerateStateError, MaterialError, NonFiniteEnergyError, RegularizationKind,
    SingularRotationError, ThirdMedium,
)

ALL_KINDS = list(RegularizationKind)
# random admissible states per kind and beta in the finite-difference checks
N_STATES = 100
BETAS = (0.0, 5.0)


def random_state(rng, f_scale=0.2, g_scale=0.5):
    F = np.eye(2) + f_scale * rng.uniform(-1.0, 1.0, (2, 2))
    gradF = g_scale * rng.uniform(-1.0, 1.0, (2, 2, 2))
    return F, gradF


def quadratic_field(rng):
    """u(X) = a X + 1/2 X^T H_i X per component: F = I + grad u, dF_ij/dX_k = H_i[j, k]."""
    a = 0.2 * rng.uniform(-1.0, 1.0, (2, 2))
    H = rng.uniform(-1.0, 1.0, (2, 2, 2))
    H = 0.5 * (H + np.swapaxes(H, -1, -2))

    def F_at(X):
        return np.eye(2) + a + np.einsum('ijk,k->ij', H, X)

    return F_at, H


def sinusoidal_field(rng):
    """F = Q (I + grad u) with u_i = A_i sin(w_i . X + p_i) and a fixed rotation Q."""
    A = rng.uniform(0.05, 0.2, 2)
    w = rng.uniform(-1.5, 1.5, (2, 2))
    p = rng.uniform(0.0, 2.0 * np.pi, 2)
    angle = rng.uniform(-0.5, 0.5)
    Q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])

    def F_at(X):
        return Q @ (np.eye(2) + (A * np.cos(w @ X + p))[:, None] * w)

    def gradF_at(X):
        second = -(A * np.sin(w @ X + p))[:, None, None] * np.einsum('ij,ik->ijk', w, w)
        return np.einsum('ab,bjk->ajk', Q, second)

    return F_at, gradF_at


def ad_energy_of_C(C, K, mu):
    """Psi over the 9 independent entries of C, as duals."""
    c = Dual2.variables(np.asarray(C, dtype=float).ravel())
    m = [[c[3 * i + j] for j in range(3)] for i in range(3)]
    det = (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )
    J = dual.sqrt(det)
    lnJ = dual.log(J)
    trC = m[0][0] + m[1][1] + m[2][2]
    return 0.5 * K * lnJ * lnJ + 0.5 * mu * (J ** (-2.0 / 3.0) * trC - 3.0)


def plane_strain_tensor(K, mu):
    lam = K - 2.0 * mu / 3.0
    D = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    D[i + 2 * j, k + 2 * l] = (
                        lam * (i == j) * (k == l) + mu * ((i == k) * (j == l) + (i == l) * (j == k))
                    )
    return D


def assert_blocks_close(test, ad, fd, rtol):
    for name in ('P_hat', 'T_hat', 'D_hat', 'A_hat', 'B_hat'):
        a, f = getattr(ad, name), getattr(fd, name)
        scale = max(1.0, float(np.max(np.abs(a))))
        test.assertLess(float(np.max(np.abs(a - f))) / scale, rtol, msg=name)


class FlattenTests(SimpleTestCase):
    def test_F_ordering(self):
        F = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert_array_equal(flatten_F(F), [1.0, 3.0, 2.0, 4.0])
        assert_array_equal(unflatten_F(flatten_F(F)), F)

    def test_gradF_ordering(self):
        G = np.arange(8.0).reshape(2, 2, 2)
        flat = flatten_gradF(G)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    self.assertEqual(flat[grad_index(i, j, k)], G[i, j, k])
        assert_array_equal(unflatten_gradF(flat), G)

    def test_batched_state_vector(self):
        F = np.broadcast_to(np.eye(2), (3, 2, 2))
        G = np.zeros((3, 2, 2, 2))
        G[1, 0, 1, 1] = 2.0
        x = state_vector(F, G)
        self.assertEqual(x.shape, (3, 12))
        self.assertEqual(x[1, 4 + grad_index(0, 1, 1)], 2.0)


class DualTests(SimpleTestCase):
    def test_product_and_exp(self):
        x, y = Dual2.variables(np.array([1.0, 2.0]))
        f = x * y + dual.exp(x)
        e = math.e
        self.assertAlmostEqual(float(f.val), 2.0 + e)
        assert_allclose(f.grad, [2.0 + e, 1.0])
        assert_allclose(f.hess, [[e, 1.0], [1.0, 0.0]])

    def test_quotient_log_arctan(self):
        x, y = Dual2.variables(np.array([0.5, 2.0]))
        f = dual.arctan(x / y) + dual.log(y)
        # d/dx arctan(x/y) = y / (x^2 + y^2)
        assert_allclose(f.grad, [2.0 / 4.25, -0.5 / 4.25 + 0.5])
        self.assertAlmostEqual(float(f.hess[0, 0]), -2.0 * 0.5 * 2.0 / 4.25 ** 2)

    def test_fractional_power_batch(self):
        (x,) = Dual2.variables(np.array([[1.0], [8.0]]))
        f = x ** (-2.0 / 3.0)
        assert_allclose(f.val, [1.0, 0.25])
        assert_allclose(f.grad[:, 0], [-2.0 / 3.0, -2.0 / 3.0 * 8.0 ** (-5.0 / 3.0)])

    def test_numpy_scalar_on_the_left(self):
        (x,) = Dual2.variables(np.array([3.0]))
        f = np.float64(2.0) * x - np.float64(1.0)
        self.assertIsInstance(f, Dual2)
        self.assertAlmostEqual(float(f.val), 5.0)


class MaterialModelTests(SimpleTestCase):
    def test_body_moduli_must_be_positive(self):
        with self.assertRaises(MaterialError):
            Body(K=0.0, mu=1.0)

    def test_medium_parameters(self):
        with self.assertRaises(MaterialError):
            ThirdMedium(gamma=0.0, alpha_r=1.0)
        with self.assertRaises(MaterialError):
            ThirdMedium(gamma=1e-6, alpha_r=-1.0)
        medium = ThirdMedium(gamma=1e-6, alpha_r=0.1, beta=5.0, reg='rot-j')
        self.assertIs(medium.reg, RegularizationKind.ROT_J)
        self.assertTrue(medium.reg.uses_rotation)
        self.assertFalse(RegularizationKind.HUHU_DEV.uses_rotation)


class BodyEnergyTests(SimpleTestCase):
    K, MU = 20.0, 10.0

    def test_zero_at_identity(self):
        self.assertEqual(float(psi_body(np.eye(3), self.K, self.MU)), 0.0)
        assert_allclose(pk2_stress(np.eye(3), self.K, self.MU), np.zeros((3, 3)), atol=1e-14)

    def test_uniaxial_value(self):
        C = np.diag([4.0, 1.0, 1.0])
        expected = 10.0 * math.log(2.0) ** 2 + 5.0 * (2.0 ** (-2.0 / 3.0) * 6.0 - 3.0)
        self.assertAlmostEqual(float(psi_body(C, self.K, self.MU)), expected, places=12)

    def test_isochoric_state_has_no_volumetric_part(self):
        for a in (0.3, 1.7, 4.0):
            C = np.diag([a, 1.0 / a, 1.0])
            expected = 0.5 * self.MU * (a + 1.0 / a + 1.0 - 3.0)
            self.assertAlmostEqual(float(psi_body(C, self.K, self.MU)), expected, places=12)

    def test_uniaxial_stress(self):
        S = pk2_stress(np.diag([4.0, 1.0, 1.0]), self.K, self.MU)
        m = 2.0 ** (-2.0 / 3.0)
        expected = self.K * math.log(2.0) / 4.0 - self.MU / 12.0 * m * 6.0 + self.MU * m
        self.assertAlmostEqual(float(S[0, 0]), expected, places=12)

    def test_non_positive_determinant(self):
        with self.assertRaises(DegenerateStateError):
            psi_body(np.diag([1.0, -1.0, 1.0]), self.K, self.MU)

    def test_stress_matches_energy_derivative(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            F, _ = random_state(rng, f_scale=0.3)
            C = right_cauchy_green(F)
            psi = ad_energy_of_C(C, self.K, self.MU)
            assert_allclose(pk2_stress(C, self.K, self.MU), 2.0 * psi.grad.reshape(3, 3), atol=1e-12)

    def test_tangent_matches_second_derivative(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            F, _ = random_state(rng, f_scale=0.3)
            C = right_cauchy_green(F)
            hess = 4.0 * ad_energy_of_C(C, self.K, self.MU).hess.reshape(3, 3, 3, 3)
            expected = 0.5 * (hess + np.swapaxes(hess, 2, 3))
            assert_allclose(constitutive_body(C, self.K, self.MU), expected, atol=1e-10)

    def test_tangent_at_identity(self):
        D = constitutive_body(np.eye(3), self.K, self.MU)
        self.assertAlmostEqual(float(D[0, 0, 0, 0]), self.K + 4.0 * self.MU / 3.0, places=12)
        self.assertAlmostEqual(float(D[0, 0, 1, 1]), self.K - 2.0 * self.MU / 3.0, places=12)
        self.assertAlmostEqual(float(D[0, 1, 0, 1]), self.MU, places=12)

    def test_tangent_symmetries(self):
        rng = np.random.default_rng(5)
        F, _ = random_state(rng, f_scale=0.3)
        D = constitutive_body(right_cauchy_green(F), self.K, self.MU)
        assert_allclose(D, np.transpose(D, (2, 3, 0, 1)), atol=1e-12)
        assert_allclose(D, np.transpose(D, (1, 0, 2, 3)), atol=1e-12)
        assert_allclose(D, np.transpose(D, (0, 1, 3, 2)), atol=1e-12)


class RotationAndJacobianTests(SimpleTestCase):
    def test_rotation_angle_examples(self):
        self.assertEqual(float(rotation_angle(np.eye(2))), 0.0)
        c, s = math.cos(0.1), math.sin(0.1)
        self.assertAlmostEqual(float(rotation_angle(np.array([[c, -s], [s, c]]))), -0.1, places=14)
        self.assertAlmostEqual(float(rotation_angle(np.array([[1.0, 0.2], [0.0, 1.0]]))), math.atan(0.1), places=14)

    def test_rotation_angle_trace_zero(self):
        with self.assertRaises(SingularRotationError):
            rotation_angle(np.array([[1.0, 2.0], [-2.0, -1.0]]))

    def test_grad_J_simple(self):
        G = np.zeros((2, 2, 2))
        G[0, 0, 0] = 0.7
        assert_allclose(grad_J(np.eye(2), G), [0.7, 0.0])
        assert_allclose(grad_J(np.eye(2), np.zeros((2, 2, 2))), [0.0, 0.0])

    def test_grad_J_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        h = 1e-6
        for _ in range(N_STATES):
            F_at, H = quadratic_field(rng)
            X = rng.uniform(-0.3, 0.3, 2)
            fd = [
                (np.linalg.det(F_at(X + h * e)) - np.linalg.det(F_at(X - h * e))) / (2.0 * h)
                for e in np.eye(2)
            ]
            assert_allclose(grad_J(F_at(X), H), fd, atol=1e-7)

    def test_rotation_gradient_matches_polar_rotation(self):
        """dR/dX_k of the polar split F = R U equals R W dtheta/dX_k, theta = -phi."""
        rng = np.random.default_rng(12)
        W = np.array([[0.0, -1.0], [1.0, 0.0]])
        h = 1e-6

        def rotation(F):
            R, _ = polar(F)
            return R

        for _ in range(N_STATES):
            F_at, gradF_at = sinusoidal_field(rng)
            X = rng.uniform(-1.0, 1.0, 2)
            dR = np.stack(
                [(rotation(F_at(X + h * e)) - rotation(F_at(X - h * e))) / (2.0 * h) for e in np.eye(2)],
                axis=-1,
            )
            grad_phi = rotation_gradient(F_at(X), gradF_at(X))
            assert_allclose(dR, -np.einsum('ij,k->ijk', rotation(F_at(X)) @ W, grad_phi), atol=1e-7)
            self.assertAlmostEqual(float(np.sum(dR ** 2)), 2.0 * float(grad_phi @ grad_phi), delta=1e-7)


class RegularizationTests(SimpleTestCase):
    F = np.array([[1.1, 0.2], [-0.1, 0.9]])

    def test_zero_gradient(self):
        for kind in ALL_KINDS:
            self.assertEqual(float(regularization(self.F, np.zeros((2, 2, 2)), kind, beta=5.0)), 0.0)

    def test_huhu_single_entry(self):
        G = np.zeros((2, 2, 2))
        G[0, 0, 0] = 0.6
        self.assertAlmostEqual(float(regularization(self.F, G, 'huhu')), 0.18, places=14)

    def test_huhu_exponential_scaling(self):
        G = np.zeros((2, 2, 2))
        G[0, 0, 0] = 0.6
        scaled = float(regularization(self.F, G, 'huhu', beta=5.0))
        self.assertAlmostEqual(scaled, 0.18 * math.exp(-5.0 * np.linalg.det(self.F)), places=14)

    def test_huhu_deviatoric_cancels_pure_laplacian_field(self):
        # u = (x^2 + y^2, 0): d2u_x/dx2 = d2u_x/dy2 = 2
        G = np.zeros((2, 2, 2))
        G[0, 0, 0] = 2.0
        G[0, 1, 1] = 2.0
        self.assertAlmostEqual(float(regularization(np.eye(2), G, 'huhu-dev')), 0.0, places=14)

    def test_gradient_terms_ignore_F_without_scaling(self):
        rng = np.random.default_rng(2)
        _, G = random_state(rng)
        for kind in ('huhu', 'huhu-dev'):
            a = regularization(np.eye(2), G, kind)
            b = regularization(self.F + 0.3, G, kind)
            self.assertAlmostEqual(float(a), float(b), places=14)

    def test_rotation_kind_requires_nonzero_trace(self):
        G = np.ones((2, 2, 2))
        with self.assertRaises(SingularRotationError):
            regularization(np.array([[0.0, 1.0], [-1.0, 0.0]]), G, 'rot-j')


class MaterialTensorTests(SimpleTestCase):
    def test_huhu_blocks(self):
        rng = np.random.default_rng(7)
        F, G = random_state(rng)
        state = medium_tensors(F, G, ThirdMedium(gamma=1.0, alpha_r=1.0, beta=0.0, reg='huhu'))
        assert_allclose(state.T_hat, flatten_gradF(G), atol=1e-14)
        assert_allclose(state.B_hat, np.eye(8), atol=1e-14)
        assert_allclose(state.A_hat, np.zeros((8, 4)), atol=1e-14)

    def test_stationary_at_identity(self):
        for kind in ALL_KINDS:
            model = ThirdMedium(gamma=1.0, alpha_r=1.0, beta=5.0, reg=kind)
            state = medium_tensors(np.eye(2), np.zeros((2, 2, 2)), model)
            self.assertAlmostEqual(float(state.psi), 0.0, places=14)
            assert_allclose(state.P_hat, np.zeros(4), atol=1e-14)
            assert_allclose(state.T_hat, np.zeros(8), atol=1e-14)

    def test_hessian_symmetry(self):
        rng = np.random.default_rng(8)
        for kind in ALL_KINDS:
            for beta in BETAS:
                model = ThirdMedium(gamma=1.0, alpha_r=1.0, beta=beta, reg=kind)
                for _ in range(N_STATES):
                    state = medium_tensors(*random_state(rng), model)
                    assert_array_equal(state.D_hat, state.D_hat.T)
                    assert_array_equal(state.B_hat, state.B_hat.T)
                    assert_array_equal(state.hessian, state.hessian.T)

    def test_body_at_identity(self):
        state = body_tensors(np.eye(2), Body(K=20.0, mu=10.0))
        assert_allclose(state.P_hat, np.zeros(4), atol=1e-14)
        assert_allclose(state.D_hat, plane_strain_tensor(20.0, 10.0), atol=1e-12)
        assert_array_equal(state.T_hat, np.zeros(8))
        assert_array_equal(state.B_hat, np.zeros((8, 8)))

    def test_body_stress_is_F_times_S(self):
        rng = np.random.default_rng(9)
        model = Body(K=20.0, mu=10.0)
        for _ in range(5):
            F, _ = random_state(rng, f_scale=0.3)
            S = pk2_stress(right_cauchy_green(F), model.K, model.mu)
            P = embed_plane_strain(F) @ S
            assert_allclose(unflatten_F(body_tensors(F, model).P_hat), P[:2, :2], atol=1e-12)

    def test_body_against_finite_differences(self):
        rng = np.random.default_rng(10)
        model = Body(K=20.0, mu=10.0)
        for _ in range(N_STATES):
            F, G = random_state(rng, f_scale=0.3)
            ad = body_tensors(F, model)
            fd = fd_tensor_oracle(energy_density(model), F, G)
            assert_blocks_close(self, ad, fd, 1e-6)

    def test_medium_against_finite_differences(self):
        rng = np.random.default_rng(13)
        for kind in ALL_KINDS:
            for beta in BETAS:
                model = ThirdMedium(gamma=1.0, alpha_r=1.0, beta=beta, reg=kind, mu=1.0)
                with self.subTest(kind=kind.value, beta=beta):
                    for _ in range(N_STATES):
                        F, G = random_state(rng)
                        ad = medium_tensors(F, G, model)
                        fd = fd_tensor_oracle(energy_density(model), F, G)
                        assert_blocks_close(self, ad, fd, 1e-6)

    def test_batch_matches_pointwise(self):
        rng = np.random.default_rng(14)
        states = [random_state(rng) for _ in range(3)]
        F = np.stack([s[0] for s in states])
        G = np.stack([s[1] for s in states])
        model = ThirdMedium(gamma=1e-3, alpha_r=2.0, beta=5.0, reg='tan-rot-j')
        batch = state_tensors(model, F, G)
        for q in range(3):
            single = state_tensors(model, F[q], G[q])
            assert_allclose(batch.B_hat[q], single.B_hat, rtol=1e-13, atol=1e-16)
            assert_allclose(batch.P_hat[q], single.P_hat, rtol=1e-13, atol=1e-16)

    def test_degenerate_states(self):
        medium = ThirdMedium(gamma=1.0, alpha_r=1.0, reg='rot-j')
        with self.assertRaises(DegenerateStateError):
            body_tensors(np.array([[1.0, 0.0], [0.0, -0.5]]), Body(K=1.0, mu=1.0))
        with self.assertRaises(DegenerateStateError):
            medium_tensors(np.array([[1.0, 0.0], [0.0, 1e-14]]), np.zeros((2, 2, 2)), medium)
        with self.assertRaises(SingularRotationError):
            medium_tensors(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.zeros((2, 2, 2)), medium)


class OracleTests(SimpleTestCase):
    def test_quadratic_energy(self):
        def energy(x):
            return 0.5 * sum(v * v for v in x[:4])

        fd = fd_tensor_oracle(energy, np.eye(2), np.zeros((2, 2, 2)))
        assert_allclose(fd.D_hat, np.eye(4), atol=1e-6)
        assert_allclose(fd.P_hat, [1.0, 0.0, 0.0, 1.0], atol=1e-9)

    def test_huhu_energy(self):
        F, G = random_state(np.random.default_rng(1))
        fd = fd_tensor_oracle(lambda x: regularization_energy(x, RegularizationKind.HUHU), F, G)
        assert_allclose(fd.B_hat, np.eye(8), atol=1e-6)

    def test_non_finite_probe(self):
        def energy(x):
            return float('nan') if x[0] > 1.0 else x[0]

        with self.assertRaises(NonFiniteEnergyError):
            fd_tensor_oracle(energy, np.eye(2), np.zeros((2, 2, 2)))

    def test_step_must_be_positive(self):
        with self.assertRaises(ValueError):
            fd_tensor_oracle(lambda x: 0.0, np.eye(2), np.zeros((2, 2, 2)), step=0.0)