"""
Compressible Neo-Hooke solid on the plane-strain embedding (F33 = 1):

    Psi = K/2 (ln J)^2 + mu/2 (J^(-2/3) tr C - 3)

Closed-form stress and tangent work on 3 x 3 right Cauchy-Green tensors;
`body_energy` is the same density written on the flattened components of
the in-plane F so it can be differentiated by `material.dual`.
"""

import numpy as np

from . import dual
from .types import DegenerateStateError

DET_TOL = 1e-12


def embed_plane_strain(F: np.ndarray) -> np.ndarray:
    """3 x 3 deformation gradient with F33 = 1 from an in-plane 2 x 2 one."""
    F = np.asarray(F, dtype=float)
    F3 = np.zeros(F.shape[:-2] + (3, 3))
    F3[..., :2, :2] = F
    F3[..., 2, 2] = 1.0
    return F3


def right_cauchy_green(F: np.ndarray) -> np.ndarray:
    F3 = embed_plane_strain(F) if np.shape(F)[-1] == 2 else np.asarray(F, dtype=float)
    return np.swapaxes(F3, -1, -2) @ F3


def _invariants(C: np.ndarray):
    C = np.asarray(C, dtype=float)
    det = np.linalg.det(C)
    if np.any(det <= DET_TOL ** 2):
        raise DegenerateStateError(f"non-positive det C ({np.min(det):.3e})")
    J = np.sqrt(det)
    return C, J, np.trace(C, axis1=-2, axis2=-1), np.linalg.inv(C)


def psi_body(C: np.ndarray, K: float, mu: float) -> np.ndarray:
    _, J, trC, _ = _invariants(C)
    return 0.5 * K * np.log(J) ** 2 + 0.5 * mu * (J ** (-2.0 / 3.0) * trC - 3.0)


def pk2_stress(C: np.ndarray, K: float, mu: float) -> np.ndarray:
    """Second Piola-Kirchhoff stress S = 2 dPsi/dC."""
    C, J, trC, Cinv = _invariants(C)
    lnJ = np.log(J)[..., None, None]
    Jm = (J ** (-2.0 / 3.0))[..., None, None]
    trC = trC[..., None, None]
    return K * lnJ * Cinv - (mu / 3.0) * Jm * trC * Cinv + mu * Jm * np.eye(3)


def _sym_product(Cinv: np.ndarray) -> np.ndarray:
    """I_ijkl = 1/2 (Cinv_ik Cinv_jl + Cinv_il Cinv_jk)."""
    return 0.5 * (
        np.einsum('...ik,...jl->...ijkl', Cinv, Cinv)
        + np.einsum('...il,...jk->...ijkl', Cinv, Cinv)
    )


def constitutive_body(C: np.ndarray, K: float, mu: float) -> np.ndarray:
    """Material tangent D = 2 dS/dC = 4 d^2 Psi / dC dC, shape (..., 3, 3, 3, 3)."""
    C, J, trC, Cinv = _invariants(C)
    I = np.broadcast_to(np.eye(3), Cinv.shape)
    lnJ = np.log(J)[..., None, None, None, None]
    Jm = (J ** (-2.0 / 3.0))[..., None, None, None, None]
    trC = trC[..., None, None, None, None]

    def dyad(a, b):
        return np.einsum('...ij,...kl->...ijkl', a, b)

    sym = _sym_product(Cinv)
    iso = -dyad(I, Cinv) - dyad(Cinv, I) + trC / 3.0 * dyad(Cinv, Cinv) + trC * sym
    return K * dyad(Cinv, Cinv) - 2.0 * K * lnJ * sym + (2.0 * mu / 3.0) * Jm * iso


# -------------------------------------------------------
# DENSITIES ON FLATTENED COMPONENTS (x0..x3 = F11, F21, F12, F22)
# -------------------------------------------------------
def jacobian(x):
    return x[0] * x[3] - x[2] * x[1]


def trace_C(x):
    return x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] + 1.0


def isochoric_energy(x, mu: float):
    return 0.5 * mu * (jacobian(x) ** (-2.0 / 3.0) * trace_C(x) - 3.0)


def body_energy(x, K: float, mu: float):
    lnJ = dual.log(jacobian(x))
    return 0.5 * K * lnJ * lnJ + isochoric_energy(x, mu)
