"""
Quadrature on polygons (centroid fan of symmetric triangle rules) and on edges
(Gauss-Legendre).
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from mesh.geometry import polygon_geometry


class QuadratureError(ValueError):
    """Raised when a rule cannot be built on the given geometry."""


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int
    # parameter s in [0, 1] along the edge, edge rules only
    params: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


# -------------------------------------------------------
# TRIANGLE RULES (barycentric points, weights summing to 1)
# -------------------------------------------------------
def _orbit_aab(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit_abc(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _assemble(orbits):
    points, weights = [], []
    for pts, w in orbits:
        points.extend(pts)
        weights.extend([w] * len(pts))
    return np.array(points), np.array(weights)


def _radon_7():
    s = math.sqrt(15.0)
    return _assemble([
        ([(1 / 3, 1 / 3, 1 / 3)], 9 / 40),
        (_orbit_aab((6 - s) / 21), (155 - s) / 1200),
        (_orbit_aab((6 + s) / 21), (155 + s) / 1200),
    ])


def _dunavant_16():
    return _assemble([
        ([(1 / 3, 1 / 3, 1 / 3)], 0.144315607677787),
        (_orbit_aab(0.459292588292723), 0.095091634267285),
        (_orbit_aab(0.170569307751760), 0.103217370534718),
        (_orbit_aab(0.050547228317031), 0.032458497623198),
        (_orbit_abc(0.008394777409958, 0.263112829634638), 0.027230314174435),
    ])


def _collapsed(degree: int):
    """Conical product rule: Gauss-Jacobi(1, 0) in t times Gauss-Legendre in s."""
    n = int(math.ceil((degree + 1) / 2))
    a, wa = roots_jacobi(n, 1.0, 0.0)
    s, ws = leggauss(n)
    t = 0.5 * (1.0 + a)
    u = 0.5 * (1.0 + s)
    T, U = np.meshgrid(t, u, indexing='ij')
    W = np.outer(wa, ws) / 4.0
    x = U * (1.0 - T)
    y = T
    bary = np.column_stack([1.0 - x.ravel() - y.ravel(), x.ravel(), y.ravel()])
    return bary, W.ravel()


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """
    Barycentric points and weights (summing to 1) exact to `degree`.

    Symmetric rules cover degrees up to 8 (centroid, 3-point, Radon 7-point,
    Dunavant 16-point). Higher degrees fall back to the collapsed Gauss-Jacobi
    product of `_collapsed`, ceil((degree + 1) / 2)**2 points, which is exact
    but neither symmetric nor minimal.
    """
    if degree <= 1:
        bary, w = np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    elif degree == 2:
        bary, w = _assemble([(_orbit_aab(1 / 6), 1 / 3)])
    elif degree <= 5:
        bary, w = _radon_7()
    elif degree <= 8:
        bary, w = _dunavant_16()
    else:
        bary, w = _collapsed(degree)
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def polygon_quadrature(coords: np.ndarray, degree: int) -> QuadratureRule:
    """
    Fan the polygon from its centroid into triangles and apply a symmetric
    rule exact to `degree` on each.
    """
    coords = np.asarray(coords, dtype=float)
    centroid = polygon_geometry(coords).centroid
    nxt = np.roll(coords, -1, axis=0)
    d1, d2 = coords - centroid, nxt - centroid
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(areas <= 0.0):
        raise QuadratureError('not star-shaped w.r.t. centroid')

    bary, w = triangle_rule(degree)
    # (triangles, points, 2)
    points = (
        bary[None, :, 0, None] * centroid[None, None, :]
        + bary[None, :, 1, None] * coords[:, None, :]
        + bary[None, :, 2, None] * nxt[:, None, :]
    )
    weights = areas[:, None] * w[None, :]
    return QuadratureRule(points.reshape(-1, 2), weights.ravel(), degree)


@lru_cache(maxsize=None)
def gauss_legendre_unit(degree: int):
    """Gauss-Legendre points and weights on [0, 1], exact to `degree`."""
    n = max(1, int(math.ceil((degree + 1) / 2)))
    s, w = leggauss(n)
    s, w = 0.5 * (s + 1.0), 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def edge_quadrature(p0, p1, degree: int) -> QuadratureRule:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.hypot(*(p1 - p0)))
    if length == 0.0:
        raise QuadratureError('zero-length edge')
    s, w = gauss_legendre_unit(degree)
    points = p0[None, :] + s[:, None] * (p1 - p0)[None, :]
    return QuadratureRule(points, length * w, degree, params=s)
