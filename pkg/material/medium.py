"""
Third-medium energy: gamma * (Psi_m + alpha_r * Psi_r), Psi_m being the
isochoric Neo-Hooke part only. The four regularization terms use the in-plane
F and its gradient; rotation-based ones go through the ratio
t = (F12 - F21) / (F11 + F22) = tan(phi).
"""

import numpy as np

from . import dual
from .flatten import N_F, state_vector
from .hyperelastic import DET_TOL, isochoric_energy, jacobian
from .types import DegenerateStateError, RegularizationKind, SingularRotationError, ThirdMedium

TRACE_TOL = 1e-12


def _g(x, i: int, j: int, k: int):
    return x[N_F + i + 2 * j + 4 * k]


def _sum_squares(values):
    total = values[0] * values[0]
    for v in values[1:]:
        total = total + v * v
    return total


def grad_J_components(x):
    """(dJ/dX1, dJ/dX2) = cof(F) : dF/dX_k."""
    return [
        x[3] * _g(x, 0, 0, k) - x[2] * _g(x, 1, 0, k) - x[1] * _g(x, 0, 1, k) + x[0] * _g(x, 1, 1, k)
        for k in range(2)
    ]


def ratio_gradient_components(x):
    """Gradient of t = (F12 - F21) / (F11 + F22) with respect to X."""
    s = x[0] + x[3]
    skew = x[2] - x[1]
    inv_s2 = 1.0 / (s * s)
    return [
        ((_g(x, 0, 1, k) - _g(x, 1, 0, k)) * s - skew * (_g(x, 0, 0, k) + _g(x, 1, 1, k))) * inv_s2
        for k in range(2)
    ]


def angle_gradient_components(x):
    t = (x[2] - x[1]) / (x[0] + x[3])
    factor = 1.0 / (1.0 + t * t)
    return [factor * dt for dt in ratio_gradient_components(x)]


def regularization_energy(x, kind: RegularizationKind, beta: float = 0.0):
    kind = RegularizationKind(kind)
    gradients = [x[N_F + n] for n in range(8)]

    if kind is RegularizationKind.HUHU:
        psi = 0.5 * _sum_squares(gradients)
    elif kind is RegularizationKind.HUHU_DEV:
        # Div(grad u)_i = dF_i1/dX1 + dF_i2/dX2, n_dim = 2
        div = [_g(x, i, 0, 0) + _g(x, i, 1, 1) for i in range(2)]
        psi = 0.5 * (_sum_squares(gradients) - 0.5 * _sum_squares(div))
    elif kind is RegularizationKind.ROT_J:
        psi = 0.5 * (_sum_squares(angle_gradient_components(x)) + _sum_squares(grad_J_components(x)))
    else:
        psi = 0.5 * (_sum_squares(ratio_gradient_components(x)) + _sum_squares(grad_J_components(x)))

    if beta > 0.0:
        psi = psi * dual.exp(-beta * jacobian(x))
    return psi


def medium_energy(x, model: ThirdMedium):
    return model.gamma * (
        isochoric_energy(x, model.mu) + model.alpha_r * regularization_energy(x, model.reg, model.beta)
    )


# -------------------------------------------------------
# ARRAY ENTRY POINTS
# -------------------------------------------------------
def _components(F, gradF=None):
    F = np.asarray(F, dtype=float)
    if gradF is None:
        gradF = np.zeros(F.shape[:-2] + (2, 2, 2))
    x = state_vector(F, gradF)
    return [x[..., n] for n in range(x.shape[-1])]


def _check_det(x):
    J = np.asarray(jacobian(x))
    if np.any(J <= DET_TOL):
        raise DegenerateStateError(f"det F = {np.min(J):.3e} below {DET_TOL:g}")


def _check_trace(x):
    s = np.asarray(x[0] + x[3])
    if np.any(np.abs(s) <= TRACE_TOL):
        raise SingularRotationError(f"F11 + F22 = {s.ravel()[np.argmin(np.abs(s))]:.3e}, rotation undefined")


def rotation_angle(F: np.ndarray) -> np.ndarray:
    """phi = arctan((F12 - F21) / (F11 + F22)), principal branch."""
    x = _components(F)
    _check_trace(x)
    return np.arctan((x[2] - x[1]) / (x[0] + x[3]))


def rotation_gradient(F: np.ndarray, gradF: np.ndarray) -> np.ndarray:
    x = _components(F, gradF)
    _check_trace(x)
    return np.stack(angle_gradient_components(x), axis=-1)


def grad_J(F: np.ndarray, gradF: np.ndarray) -> np.ndarray:
    x = _components(F, gradF)
    _check_det(x)
    return np.stack(grad_J_components(x), axis=-1)


def regularization(F: np.ndarray, gradF: np.ndarray, kind, beta: float = 0.0) -> np.ndarray:
    kind = RegularizationKind(kind)
    x = _components(F, gradF)
    _check_det(x)
    if kind.uses_rotation:
        _check_trace(x)
    return np.asarray(regularization_energy(x, kind, beta))
