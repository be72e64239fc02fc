"""
Element projectors for the second-order stabilization-free virtual element
space.

Scalar DOFs of an element with N vertices, in local order:
    0 .. N-1    vertex values (ring starting at the lowest global vertex id)
    N .. 2N-1   edge-midpoint values, edge a joining vertices a and a+1
    2N          mean value over the element
Vector DOFs interleave components: local vector DOF 2*slot + c.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from mesh.geometry import ElementGeometry, PolygonalMesh, polygon_geometry

from .basis import ScaledMonomialBasis, basis_dimension, derivative_matrix, monomial_eval
from .quadrature import QuadratureRule, edge_quadrature, polygon_quadrature

logger = logging.getLogger(__name__)

ORDER = 2
VOLUME_TERMS = ('k', '1')


class ProjectionError(ValueError):
    """Raised when a projector system is singular."""


@dataclass(frozen=True)
class OperatorOptions:
    quadrature_extra_degree: int = 2
    # 'k': order-k projection plus exact mean in the volume term; '1': order-1 projection
    volume_term: str = 'k'
    threads: int = 1

    def __post_init__(self):
        if self.volume_term not in VOLUME_TERMS:
            raise ValueError(f"volume_term must be one of {VOLUME_TERMS}, got '{self.volume_term}'")
        if self.quadrature_extra_degree < 0:
            raise ValueError('quadrature_extra_degree must be >= 0')

    @classmethod
    def from_settings(cls, **overrides) -> 'OperatorOptions':
        from django.conf import settings

        config = getattr(settings, 'TMC_BENCH', {})
        values = {
            'quadrature_extra_degree': config.get('QUADRATURE_EXTRA_DEGREE', 2),
            'volume_term': config.get('PROJECTOR_VOLUME_TERM', 'k'),
            'threads': config.get('THREADS', 1),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def canonical_ring(ring) -> Tuple[int, ...]:
    start = ring.index(min(ring))
    return tuple(ring[start:]) + tuple(ring[:start])


@dataclass(frozen=True)
class DofLayout:
    """Global numbering: vertices, then edges, then element moments; 2 components each."""

    n_vertices: int
    n_edges: int
    n_elements: int
    rings: Tuple[Tuple[int, ...], ...]
    edge_ids: Tuple[Tuple[int, ...], ...]
    order: int = ORDER

    @classmethod
    def from_mesh(cls, mesh: PolygonalMesh) -> 'DofLayout':
        rings, edge_ids = [], []
        for ring in mesh.elements:
            ring = canonical_ring(ring)
            rings.append(ring)
            edge_ids.append(tuple(
                mesh.edge_id(ring[a], ring[(a + 1) % len(ring)]) for a in range(len(ring))
            ))
        return cls(mesh.n_vertices, mesh.n_edges, mesh.n_elements, tuple(rings), tuple(edge_ids))

    @property
    def n_scalar(self) -> int:
        return self.n_vertices + self.n_edges + self.n_elements

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_scalar

    def scalar_dofs(self, e: int) -> np.ndarray:
        return np.concatenate([
            np.asarray(self.rings[e], dtype=np.int64),
            self.n_vertices + np.asarray(self.edge_ids[e], dtype=np.int64),
            [self.n_vertices + self.n_edges + e],
        ])

    def element_dofs(self, e: int) -> np.ndarray:
        scalar = self.scalar_dofs(e)
        return np.column_stack([2 * scalar, 2 * scalar + 1]).ravel()

    def vertex_dof(self, v: int, component: int) -> int:
        return 2 * v + component

    def edge_dof(self, edge: int, component: int) -> int:
        return 2 * (self.n_vertices + edge) + component

    def moment_dof(self, e: int, component: int) -> int:
        return 2 * (self.n_vertices + self.n_edges + e) + component


def edge_shape_functions(s: np.ndarray) -> np.ndarray:
    """Quadratic Lagrange functions on [0, 1] for (start, midpoint, end)."""
    return np.column_stack([(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)])


@dataclass(frozen=True)
class ElementFrame:
    """Geometry of one element in canonical ring order."""

    coords: np.ndarray
    index: int = -1
    _rules: Dict[int, QuadratureRule] = field(default_factory=dict, repr=False, compare=False)

    @cached_property
    def geometry(self) -> ElementGeometry:
        return polygon_geometry(self.coords)

    @property
    def n_vertices(self) -> int:
        return len(self.coords)

    @property
    def n_scalar(self) -> int:
        return 2 * self.n_vertices + 1

    @cached_property
    def normals(self) -> np.ndarray:
        """Outward unit normals, one per edge."""
        d = np.roll(self.coords, -1, axis=0) - self.coords
        lengths = np.hypot(d[:, 0], d[:, 1])
        return np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.coords + np.roll(self.coords, -1, axis=0))

    def basis(self, order: int) -> ScaledMonomialBasis:
        return ScaledMonomialBasis(self.geometry.centroid, self.geometry.diameter, order)

    def volume_rule(self, degree: int) -> QuadratureRule:
        rule = self._rules.get(degree)
        if rule is None:
            rule = polygon_quadrature(self.coords, degree)
            self._rules[degree] = rule
        return rule

    def edge_rules(self, degree: int) -> List[QuadratureRule]:
        nxt = np.roll(self.coords, -1, axis=0)
        return [edge_quadrature(p, q, degree) for p, q in zip(self.coords, nxt)]

    def edge_columns(self, a: int) -> Tuple[int, int, int]:
        n = self.n_vertices
        return a, n + a, (a + 1) % n

    @property
    def moment_column(self) -> int:
        return 2 * self.n_vertices


def element_frame(mesh: PolygonalMesh, layout: DofLayout, e: int) -> ElementFrame:
    return ElementFrame(mesh.vertices[list(layout.rings[e])], index=e)


def choose_l(n_vertices: int, k: int = ORDER) -> int:
    """Smallest l >= k + 1 with n_vertices <= 2l - 2k + 5."""
    if n_vertices < 3:
        raise ValueError(f"an element needs at least 3 vertices, got {n_vertices}")
    return max(k + 1, math.ceil((n_vertices + 2 * k - 5) / 2))


def interpolate_dofs(frame: ElementFrame, func: Callable[[np.ndarray], np.ndarray],
                     degree: int = 8) -> np.ndarray:
    """
    Scalar DOF functionals of `func`: vertex values, edge-midpoint values and
    the element mean (quadrature of `degree`). Extra trailing output axes of
    `func` are carried through.
    """
    rule = frame.volume_rule(degree)
    mean = rule.integrate(np.asarray(func(rule.points))) / frame.geometry.area
    return np.concatenate([
        np.asarray(func(frame.coords)),
        np.asarray(func(frame.midpoints)),
        np.asarray(mean)[None, ...],
    ])


def interpolate_vector_dofs(frame: ElementFrame, func: Callable[[np.ndarray], np.ndarray],
                            degree: int = 8) -> np.ndarray:
    """Interleaved element vector DOFs of a field returning (n, 2) values."""
    return interpolate_dofs(frame, func, degree).reshape(-1)


def dof_matrix(frame: ElementFrame, order: int = ORDER) -> np.ndarray:
    """Column a holds the scalar DOFs of monomial m_a."""
    basis = frame.basis(order)
    return interpolate_dofs(frame, lambda x: monomial_eval(basis, x, 0), degree=2 * order)


def h1_projector(frame: ElementFrame) -> np.ndarray:
    """
    Pi_nabla (6 x (2N+1)) from  int grad(Pi v).grad m_a = int grad v.grad m_a
    for a >= 1 plus the mean-value condition for the constant mode.
    """
    basis = frame.basis(ORDER)
    geo = frame.geometry
    n = frame.n_vertices

    rule = frame.volume_rule(2 * ORDER)
    grads = monomial_eval(basis, rule.points, 1)
    G = np.einsum('q,qai,qbi->ab', rule.weights, grads, grads)
    G[0] = rule.integrate(monomial_eval(basis, rule.points, 0)) / geo.area

    B = np.zeros((basis.dimension, frame.n_scalar))
    for a, edge in enumerate(frame.edge_rules(ORDER + 1)):
        flux = monomial_eval(basis, edge.points, 1) @ frame.normals[a]
        phi = edge_shape_functions(edge.params)
        cols = frame.edge_columns(a)
        B[:, cols] += flux.T @ (edge.weights[:, None] * phi)

    hessians = monomial_eval(basis, geo.centroid, 2)
    laplacian = hessians[:, 0, 0] + hessians[:, 1, 1]
    B[:, frame.moment_column] -= laplacian * geo.area
    B[0] = 0.0
    B[0, frame.moment_column] = 1.0

    try:
        return np.linalg.solve(G, B)
    except np.linalg.LinAlgError as exc:
        raise ProjectionError(f"singular monomial stiffness on element {frame.index}") from exc


def order_one_projector(frame: ElementFrame) -> np.ndarray:
    """Linear projection mean(v) + h * (mean boundary gradient) . (xi, eta), 3 x (2N+1)."""
    geo = frame.geometry
    P = np.zeros((3, frame.n_scalar))
    P[0, frame.moment_column] = 1.0
    for a, edge in enumerate(frame.edge_rules(ORDER)):
        weights = edge.weights @ edge_shape_functions(edge.params)
        cols = frame.edge_columns(a)
        for c in range(2):
            P[1 + c, cols] += frame.normals[a, c] * weights
    P[1:] *= geo.diameter / geo.area
    return P


def l2_gradient_projector(frame: ElementFrame, Pi_nabla: np.ndarray, l: int,
                          volume_term: str = 'k') -> np.ndarray:
    """
    Pi_m (2 dim_l x (2N+1)): coefficients of the L2 projection of grad v onto
    [P_l]^2, x-component block first.
    """
    basis = frame.basis(l)
    geo = frame.geometry
    dim = basis.dimension
    lower = basis_dimension(l - 1)

    rule = frame.volume_rule(2 * l)
    values = monomial_eval(basis, rule.points, 0)
    M = values.T @ (rule.weights[:, None] * values)

    b = np.zeros((2, dim, frame.n_scalar))
    for a, edge in enumerate(frame.edge_rules(l + ORDER)):
        trace = monomial_eval(basis, edge.points, 0).T @ (
            edge.weights[:, None] * edge_shape_functions(edge.params)
        )
        cols = frame.edge_columns(a)
        for c in range(2):
            b[c][:, cols] += frame.normals[a, c] * trace

    # int m_g v over E for g of degree <= l - 1
    if volume_term == 'k':
        V = M[:lower, :basis_dimension(ORDER)] @ Pi_nabla
        V[0] = 0.0
        V[0, frame.moment_column] = geo.area
    elif volume_term == '1':
        V = M[:lower, :3] @ order_one_projector(frame)
    else:
        raise ValueError(f"unknown volume term '{volume_term}'")

    for c in range(2):
        b[c] -= derivative_matrix(basis, c) @ V

    try:
        return np.vstack([np.linalg.solve(M, b[0]), np.linalg.solve(M, b[1])])
    except np.linalg.LinAlgError as exc:
        raise ProjectionError(f"singular monomial mass matrix on element {frame.index}") from exc


# -------------------------------------------------------
# B1 / B2 OPERATORS
# -------------------------------------------------------
def _scatter(rows: int, grads: Dict[Tuple[int, ...], np.ndarray], n_scalar: int) -> np.ndarray:
    """Place scalar gradient rows onto the interleaved vector DOF columns."""
    lead = next(iter(grads.values())).shape[:-1]
    B = np.zeros(lead + (rows, 2 * n_scalar))
    for (row, component), values in grads.items():
        B[..., row, component::2] = values
    return B


def b1_from(basis: ScaledMonomialBasis, Pi_m: np.ndarray, x: np.ndarray) -> np.ndarray:
    dim = basis.dimension
    values = monomial_eval(basis, x, 0)
    n_scalar = Pi_m.shape[1]
    Gx, Gy = values @ Pi_m[:dim], values @ Pi_m[dim:]
    # row i + 2j: d u_i / d X_j
    return _scatter(4, {(0, 0): Gx, (1, 1): Gx, (2, 0): Gy, (3, 1): Gy}, n_scalar)


def b2_from(basis: ScaledMonomialBasis, Pi_m: np.ndarray, x: np.ndarray) -> np.ndarray:
    dim = basis.dimension
    grads = monomial_eval(basis, x, 1)
    n_scalar = Pi_m.shape[1]
    blocks = {}
    for j in range(2):
        block = Pi_m[j * dim:(j + 1) * dim]
        for k in range(2):
            dG = grads[..., k] @ block
            for i in range(2):
                # row i + 2j + 4k: d^2 u_i / dX_j dX_k
                blocks[(i + 2 * j + 4 * k, i)] = dG
    return _scatter(8, blocks, n_scalar)


@dataclass(frozen=True)
class ElementOperators:
    element: int
    frame: ElementFrame
    dofs: np.ndarray
    l: int
    Pi_nabla: np.ndarray
    Pi_m: np.ndarray
    quadrature: QuadratureRule
    B1: np.ndarray
    B2: np.ndarray

    @property
    def basis_l(self) -> ScaledMonomialBasis:
        return self.frame.basis(self.l)

    @property
    def n_dofs(self) -> int:
        return len(self.dofs)

    def B1_at(self, x) -> np.ndarray:
        return b1_from(self.basis_l, self.Pi_m, np.asarray(x, dtype=float))

    def B2_at(self, x) -> np.ndarray:
        return b2_from(self.basis_l, self.Pi_m, np.asarray(x, dtype=float))


def b1_matrix(ops: ElementOperators, x) -> np.ndarray:
    """4 x (4N+2) map from element DOFs to the flattened displacement gradient at x."""
    return ops.B1_at(x)


def b2_matrix(ops: ElementOperators, x) -> np.ndarray:
    """8 x (4N+2) map from element DOFs to the flattened second derivatives at x."""
    return ops.B2_at(x)


def build_element_operators(mesh: PolygonalMesh, layout: DofLayout, e: int,
                            options: Optional[OperatorOptions] = None) -> ElementOperators:
    options = options or OperatorOptions()
    frame = element_frame(mesh, layout, e)
    l = choose_l(frame.n_vertices)
    Pi_nabla = h1_projector(frame)
    Pi_m = l2_gradient_projector(frame, Pi_nabla, l, options.volume_term)
    rule = frame.volume_rule(2 * l + options.quadrature_extra_degree)
    basis = frame.basis(l)
    return ElementOperators(
        element=e,
        frame=frame,
        dofs=layout.element_dofs(e),
        l=l,
        Pi_nabla=Pi_nabla,
        Pi_m=Pi_m,
        quadrature=rule,
        B1=b1_from(basis, Pi_m, rule.points),
        B2=b2_from(basis, Pi_m, rule.points),
    )


def build_operators(mesh: PolygonalMesh, layout: DofLayout,
                    options: Optional[OperatorOptions] = None) -> List[ElementOperators]:
    options = options or OperatorOptions()

    def build(e):
        return build_element_operators(mesh, layout, e, options)

    if options.threads > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            operators = list(pool.map(build, range(mesh.n_elements)))
    else:
        operators = [build(e) for e in range(mesh.n_elements)]

    ls = [ops.l for ops in operators]
    logger.info(
        f"Built operators for {len(operators)} elements "
        f"(l in [{min(ls)}, {max(ls)}], volume term '{options.volume_term}')"
    )
    return operators


def interpolate_field(mesh: PolygonalMesh, layout: DofLayout,
                      func: Callable[[np.ndarray], np.ndarray], degree: int = 8) -> np.ndarray:
    """Global DOF vector of a vector field func: (n, 2) -> (n, 2)."""
    u = np.zeros((layout.n_scalar, 2))
    u[:layout.n_vertices] = func(mesh.vertices)
    edges = np.array(mesh.edges).reshape(-1, 2)
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    u[layout.n_vertices:layout.n_vertices + layout.n_edges] = func(midpoints)
    offset = layout.n_vertices + layout.n_edges
    for e in range(mesh.n_elements):
        frame = element_frame(mesh, layout, e)
        rule = frame.volume_rule(degree)
        u[offset + e] = rule.integrate(func(rule.points)) / frame.geometry.area
    return u.reshape(-1)
