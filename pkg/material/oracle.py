"""Central-difference counterpart of `material.tensors.state_tensors`, for tests."""

from typing import Callable

import numpy as np

from .flatten import N_F, N_STATE, state_vector
from .types import MaterialPointState, NonFiniteEnergyError


def fd_tensor_oracle(energy: Callable, F: np.ndarray, gradF: np.ndarray,
                     step: float = 1e-5, hessian_step: float = 1e-4) -> MaterialPointState:
    """
    First derivatives by central differences with `step`, second derivatives
    by the four-point mixed stencil with `hessian_step`.
    """
    if step <= 0 or hessian_step <= 0:
        raise ValueError('finite-difference steps must be positive')
    x0 = state_vector(F, gradF)

    def f(x):
        value = float(energy(list(x)))
        if not np.isfinite(value):
            raise NonFiniteEnergyError(f"energy is {value} at probe {x.tolist()}")
        return value

    def shifted(*moves):
        x = x0.copy()
        for index, delta in moves:
            x[index] += delta
        return f(x)

    psi = f(x0)
    grad = np.array([
        (shifted((i, step)) - shifted((i, -step))) / (2.0 * step) for i in range(N_STATE)
    ])

    h = hessian_step
    hess = np.zeros((N_STATE, N_STATE))
    for i in range(N_STATE):
        hess[i, i] = (shifted((i, h)) - 2.0 * psi + shifted((i, -h))) / h ** 2
        for j in range(i + 1, N_STATE):
            hess[i, j] = hess[j, i] = (
                shifted((i, h), (j, h)) - shifted((i, h), (j, -h))
                - shifted((i, -h), (j, h)) + shifted((i, -h), (j, -h))
            ) / (4.0 * h ** 2)

    return MaterialPointState(
        F=np.asarray(F, dtype=float),
        gradF=np.asarray(gradF, dtype=float),
        psi=np.asarray(psi),
        P_hat=grad[:N_F],
        T_hat=grad[N_F:],
        D_hat=hess[:N_F, :N_F],
        A_hat=hess[N_F:, :N_F],
        B_hat=hess[N_F:, N_F:],
    )
