"""
Stress and constitutive blocks by forward-mode differentiation of the
scalar energy density.
"""

import logging
from typing import Callable, Optional

import numpy as np

from .dual import Dual2
from .flatten import N_F, N_STATE, state_vector
from .hyperelastic import DET_TOL, body_energy, jacobian
from .medium import TRACE_TOL, medium_energy
from .types import (
    Body, DegenerateStateError, MaterialModel, MaterialPointState, SingularRotationError,
    ThirdMedium,
)

logger = logging.getLogger(__name__)


def energy_density(model: MaterialModel) -> Callable:
    """Energy as a function of the 12 flattened state components."""
    if isinstance(model, ThirdMedium):
        return lambda x: medium_energy(x, model)
    if isinstance(model, Body):
        return lambda x: body_energy(x, model.K, model.mu)
    raise TypeError(f"unsupported material model {type(model).__name__}")


def check_admissible(x: np.ndarray, model: MaterialModel) -> None:
    """Raise a recoverable error when any point of x (..., 12) is degenerate."""
    J = jacobian([x[..., n] for n in range(N_F)])
    if np.any(J <= DET_TOL):
        raise DegenerateStateError(f"det F = {np.min(J):.3e} below {DET_TOL:g}")
    if isinstance(model, ThirdMedium) and model.reg.uses_rotation:
        s = x[..., 0] + x[..., 3]
        if np.any(np.abs(s) <= TRACE_TOL):
            raise SingularRotationError(f"F11 + F22 = {np.min(np.abs(s)):.3e}, rotation undefined")


def state_tensors(model: MaterialModel, F: np.ndarray,
                  gradF: Optional[np.ndarray] = None) -> MaterialPointState:
    """
    Energy, first derivatives (P_hat, T_hat) and second derivatives
    (D_hat, A_hat, B_hat) at one point or a batch of points. For bodies only
    the four F components are seeded; the gradient blocks stay zero.
    """
    F = np.asarray(F, dtype=float)
    batch = F.shape[:-2]
    if gradF is None:
        gradF = np.zeros(batch + (2, 2, 2))
    x = state_vector(F, gradF)
    check_admissible(x, model)

    n_seed = N_STATE if isinstance(model, ThirdMedium) else N_F
    components = Dual2.variables(x[..., :n_seed]) + [x[..., n] for n in range(n_seed, N_STATE)]
    psi = energy_density(model)(components)

    grad = np.zeros(batch + (N_STATE,))
    hess = np.zeros(batch + (N_STATE, N_STATE))
    grad[..., :n_seed] = psi.grad
    hess[..., :n_seed, :n_seed] = psi.hess
    value = np.asarray(psi.val, dtype=float)

    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise DegenerateStateError('non-finite material response')

    return MaterialPointState(
        F=F,
        gradF=np.asarray(gradF, dtype=float),
        psi=value,
        P_hat=grad[..., :N_F],
        T_hat=grad[..., N_F:],
        D_hat=hess[..., :N_F, :N_F],
        A_hat=hess[..., N_F:, :N_F],
        B_hat=hess[..., N_F:, N_F:],
    )


def body_tensors(F: np.ndarray, model: Body) -> MaterialPointState:
    return state_tensors(model, F)


def medium_tensors(F: np.ndarray, gradF: np.ndarray, model: ThirdMedium) -> MaterialPointState:
    return state_tensors(model, F, gradF)


def material_energy(model: MaterialModel, F: np.ndarray, gradF: Optional[np.ndarray] = None) -> np.ndarray:
    """Energy density only, plain float arithmetic."""
    F = np.asarray(F, dtype=float)
    if gradF is None:
        gradF = np.zeros(F.shape[:-2] + (2, 2, 2))
    x = state_vector(F, gradF)
    check_admissible(x, model)
    psi = np.asarray(energy_density(model)([x[..., n] for n in range(N_STATE)]), dtype=float)
    if not np.all(np.isfinite(psi)):
        raise DegenerateStateError('non-finite energy density')
    return psi
