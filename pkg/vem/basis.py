"""
Scaled monomial basis m_a(x) = ((x - x_E) / h_E)**a1 * ((y - y_E) / h_E)**a2,
ordered by total degree then by decreasing a1: 1, xi, eta, xi^2, xi*eta, eta^2, ...
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def monomial_exponents(order: int) -> np.ndarray:
    rows = [(d - j, j) for d in range(order + 1) for j in range(d + 1)]
    exponents = np.array(rows, dtype=int).reshape(-1, 2)
    exponents.setflags(write=False)
    return exponents


def basis_dimension(order: int) -> int:
    return (order + 1) * (order + 2) // 2


@dataclass(frozen=True)
class ScaledMonomialBasis:
    centroid: np.ndarray
    diameter: float
    order: int

    @property
    def dimension(self) -> int:
        return basis_dimension(self.order)

    @property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.order)

    def scaled(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.centroid) / self.diameter


def _powers(base: np.ndarray, exponent: np.ndarray, drop: int) -> np.ndarray:
    """Coefficient and power of d^drop/dbase^drop applied to base**exponent."""
    coef = np.ones_like(exponent, dtype=float)
    for k in range(drop):
        coef = coef * (exponent - k)
    power = np.maximum(exponent - drop, 0)
    return coef * base[..., None] ** power


def monomial_eval(basis: ScaledMonomialBasis, x, deriv: int = 0) -> np.ndarray:
    """
    Evaluate all basis members at one point (shape (2,)) or many (shape (n, 2)).

    deriv 0 -> (..., dim); deriv 1 -> (..., dim, 2) gradients;
    deriv 2 -> (..., dim, 2, 2) Hessians.
    """
    if deriv not in (0, 1, 2):
        raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")
    z = basis.scaled(x)
    xi, eta = z[..., 0], z[..., 1]
    a1, a2 = basis.exponents[:, 0], basis.exponents[:, 1]
    h = basis.diameter

    if deriv == 0:
        return _powers(xi, a1, 0) * _powers(eta, a2, 0)

    if deriv == 1:
        dx = _powers(xi, a1, 1) * _powers(eta, a2, 0) / h
        dy = _powers(xi, a1, 0) * _powers(eta, a2, 1) / h
        return np.stack([dx, dy], axis=-1)

    dxx = _powers(xi, a1, 2) * _powers(eta, a2, 0) / h ** 2
    dxy = _powers(xi, a1, 1) * _powers(eta, a2, 1) / h ** 2
    dyy = _powers(xi, a1, 0) * _powers(eta, a2, 2) / h ** 2
    return np.stack([np.stack([dxx, dxy], axis=-1), np.stack([dxy, dyy], axis=-1)], axis=-2)


@lru_cache(maxsize=None)
def _derivative_pattern(order: int, direction: int):
    exps = monomial_exponents(order)
    index = {tuple(e): i for i, e in enumerate(monomial_exponents(max(order - 1, 0)))}
    pattern = []
    for alpha, e in enumerate(exps):
        if e[direction] == 0:
            continue
        lower = list(e)
        lower[direction] -= 1
        pattern.append((alpha, index[tuple(lower)], int(e[direction])))
    return tuple(pattern)


def derivative_matrix(basis: ScaledMonomialBasis, direction: int) -> np.ndarray:
    """
    D with d m_a / dx_direction = sum_g D[a, g] m_g, g running over the
    basis of one order lower (same centroid and diameter).
    """
    D = np.zeros((basis.dimension, basis_dimension(max(basis.order - 1, 0))))
    for alpha, gamma, coef in _derivative_pattern(basis.order, direction):
        D[alpha, gamma] = coef / basis.diameter
    return D
