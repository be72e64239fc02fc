"""
Element residual and tangent of the virtual element discretization, global
sparse assembly and elimination of prescribed DOFs.

Element vectors use the interleaved local DOF order of `vem.projection`;
the residual is  sum_q w_q (B1^T P_hat + B2^T T_hat)  and the tangent
sum_q w_q (B1^T D B1 + B2^T A B1 + B1^T A^T B2 + B2^T B B2).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from material.flatten import unflatten_F, unflatten_gradF
from material.tensors import material_energy, state_tensors
from material.types import DegenerateStateError, MaterialError, MaterialModel, MaterialPointState, ThirdMedium
from mesh.geometry import MeshError, PolygonalMesh
from vem.projection import DofLayout, ElementOperators, OperatorOptions, build_operators

logger = logging.getLogger(__name__)

# target displacement per boundary set, None leaves a component free
Target = Tuple[Optional[float], Optional[float]]


class ElementFailure(DegenerateStateError):
    """A degenerate material state inside one element."""

    def __init__(self, element: int, cause: Exception):
        super().__init__(f"element {element}: {cause}", element=element)
        self.cause = cause


# -------------------------------------------------------
# ELEMENT LEVEL
# -------------------------------------------------------
def element_kinematics(ops: ElementOperators, u_e: np.ndarray):
    """F = I + grad u and grad F at every quadrature point of the element."""
    grad_u = ops.B1 @ u_e
    F = np.eye(2) + unflatten_F(grad_u)
    gradF = unflatten_gradF(ops.B2 @ u_e)
    return F, gradF


def element_state(ops: ElementOperators, u_e: np.ndarray, model: MaterialModel) -> MaterialPointState:
    u_e = np.asarray(u_e, dtype=float)
    if not np.all(np.isfinite(u_e)):
        raise ElementFailure(ops.element, ValueError('non-finite element DOFs'))
    F, gradF = element_kinematics(ops, u_e)
    try:
        return state_tensors(model, F, gradF)
    except DegenerateStateError as exc:
        raise ElementFailure(ops.element, exc) from exc


def _residual(ops: ElementOperators, state: MaterialPointState, model: MaterialModel) -> np.ndarray:
    w = ops.quadrature.weights
    r = np.einsum('q,qai,qa->i', w, ops.B1, state.P_hat)
    if isinstance(model, ThirdMedium):
        r = r + np.einsum('q,qai,qa->i', w, ops.B2, state.T_hat)
    return r


def _tangent(ops: ElementOperators, state: MaterialPointState, model: MaterialModel) -> np.ndarray:
    w = ops.quadrature.weights
    K = np.einsum('q,qai,qab,qbj->ij', w, ops.B1, state.D_hat, ops.B1, optimize=True)
    if isinstance(model, ThirdMedium):
        cross = np.einsum('q,qai,qab,qbj->ij', w, ops.B2, state.A_hat, ops.B1, optimize=True)
        K = K + cross + cross.T
        K = K + np.einsum('q,qai,qab,qbj->ij', w, ops.B2, state.B_hat, ops.B2, optimize=True)
    return K


def element_residual(ops: ElementOperators, u_e: np.ndarray, model: MaterialModel) -> np.ndarray:
    return _residual(ops, element_state(ops, u_e, model), model)


def element_tangent(ops: ElementOperators, u_e: np.ndarray, model: MaterialModel) -> np.ndarray:
    return _tangent(ops, element_state(ops, u_e, model), model)


def element_system(ops: ElementOperators, u_e: np.ndarray,
                   model: MaterialModel) -> Tuple[np.ndarray, np.ndarray]:
    state = element_state(ops, u_e, model)
    return _residual(ops, state, model), _tangent(ops, state, model)


def element_energy(ops: ElementOperators, u_e: np.ndarray, model: MaterialModel) -> float:
    """Quadrature sum of the energy density over the element."""
    F, gradF = element_kinematics(ops, np.asarray(u_e, dtype=float))
    try:
        psi = material_energy(model, F, gradF)
    except DegenerateStateError as exc:
        raise ElementFailure(ops.element, exc) from exc
    return float(ops.quadrature.weights @ psi)


# -------------------------------------------------------
# DIRICHLET CONSTRAINTS
# -------------------------------------------------------
def boundary_slots(mesh: PolygonalMesh, layout: DofLayout, name: str) -> np.ndarray:
    """Scalar DOF slots (vertices, then edge midpoints) of a boundary set."""
    bset = mesh.boundary_set(name)
    if bset.is_empty:
        raise MeshError(f"boundary set '{name}' is empty")
    edges = [layout.n_vertices + mesh.edge_id(a, b) for a, b in bset.edges]
    return np.unique(np.concatenate([np.asarray(bset.vertices, dtype=np.int64),
                                     np.asarray(edges, dtype=np.int64)]))


@dataclass(frozen=True)
class DofPartition:
    """Free and prescribed global DOFs with the prescribed values."""

    n_dofs: int
    prescribed: np.ndarray
    values: np.ndarray

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.prescribed] = False
        return np.flatnonzero(mask)

    @property
    def n_free(self) -> int:
        return self.n_dofs - len(self.prescribed)

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.array(u, dtype=float)
        u[self.prescribed] = self.values
        return u


@dataclass(frozen=True)
class DirichletConstraints:
    """Prescribed DOFs at full load; values ramp linearly with the load factor."""

    n_dofs: int
    dofs: np.ndarray
    full_values: np.ndarray

    @classmethod
    def from_targets(cls, mesh: PolygonalMesh, layout: DofLayout,
                     targets: Mapping[str, Target]) -> 'DirichletConstraints':
        prescribed: Dict[int, float] = {}
        for name, target in targets.items():
            slots = boundary_slots(mesh, layout, name)
            for component, value in enumerate(target):
                if value is None:
                    continue
                for dof in 2 * slots + component:
                    previous = prescribed.get(int(dof))
                    if previous is not None and previous != value:
                        raise MeshError(
                            f"conflicting prescribed values on DOF {dof} ({previous} vs {value}, set '{name}')"
                        )
                    prescribed[int(dof)] = float(value)
        dofs = np.array(sorted(prescribed), dtype=np.int64)
        values = np.array([prescribed[d] for d in dofs], dtype=float)
        return cls(layout.n_dofs, dofs, values)

    def at(self, factor: float) -> DofPartition:
        return DofPartition(self.n_dofs, self.dofs, factor * self.full_values)


# -------------------------------------------------------
# GLOBAL SYSTEM
# -------------------------------------------------------
@dataclass
class GlobalSystem:
    residual: np.ndarray
    tangent: sparse.csr_matrix
    # free rows x prescribed columns, multiplies increments of prescribed values
    coupling: sparse.csr_matrix
    full_residual: np.ndarray
    partition: DofPartition

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))


def resolve_models(mesh: PolygonalMesh, models: Mapping[str, MaterialModel]) -> List[MaterialModel]:
    missing = sorted(set(mesh.element_region) - set(models))
    if missing:
        raise MaterialError(f"no material model for region(s) {missing}")
    return [models[tag] for tag in mesh.element_region]


def assemble(mesh: PolygonalMesh, operators: Sequence[ElementOperators],
             models: Mapping[str, MaterialModel], u: np.ndarray,
             partition: Optional[DofPartition] = None, threads: int = 1) -> GlobalSystem:
    """
    Scatter-add element residuals and tangents. Elements may be evaluated in
    parallel; contributions are merged in element order.
    """
    u = np.asarray(u, dtype=float)
    n = len(u)
    if partition is None:
        partition = DofPartition(n, np.zeros(0, dtype=np.int64), np.zeros(0))
    element_models = resolve_models(mesh, models)

    def evaluate(e):
        ops = operators[e]
        return element_system(ops, u[ops.dofs], element_models[e])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, range(len(operators))))
    else:
        results = [evaluate(e) for e in range(len(operators))]

    full_residual = np.zeros(n)
    rows, cols, data = [], [], []
    for ops, (r_e, K_e) in zip(operators, results):
        np.add.at(full_residual, ops.dofs, r_e)
        rows.append(np.repeat(ops.dofs, ops.n_dofs))
        cols.append(np.tile(ops.dofs, ops.n_dofs))
        data.append(K_e.ravel())

    K = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    free = partition.free
    return GlobalSystem(
        residual=full_residual[free],
        tangent=K[free][:, free],
        coupling=K[free][:, partition.prescribed],
        full_residual=full_residual,
        partition=partition,
    )


def reaction_force(system: GlobalSystem, mesh: PolygonalMesh, layout: DofLayout, name: str) -> np.ndarray:
    """Sum of the internal force over the DOFs of a boundary set, per component."""
    slots = boundary_slots(mesh, layout, name)
    return np.array([system.full_residual[2 * slots + c].sum() for c in range(2)])


@dataclass(frozen=True)
class DiscreteProblem:
    """Everything a load step needs: mesh, DOF layout, element operators and materials."""

    mesh: PolygonalMesh
    layout: DofLayout
    operators: Tuple[ElementOperators, ...]
    models: Mapping[str, MaterialModel]
    threads: int = 1

    @classmethod
    def build(cls, mesh: PolygonalMesh, models: Mapping[str, MaterialModel],
              options: Optional[OperatorOptions] = None) -> 'DiscreteProblem':
        options = options or OperatorOptions()
        resolve_models(mesh, models)
        layout = DofLayout.from_mesh(mesh)
        operators = tuple(build_operators(mesh, layout, options))
        logger.info(f"Discrete problem: {layout.n_dofs} DOFs, {mesh.n_elements} elements")
        return cls(mesh, layout, operators, dict(models), options.threads)

    @property
    def n_dofs(self) -> int:
        return self.layout.n_dofs

    def assemble(self, u: np.ndarray, partition: Optional[DofPartition] = None) -> GlobalSystem:
        return assemble(self.mesh, self.operators, self.models, u, partition, self.threads)

    def energy(self, u: np.ndarray) -> float:
        element_models = resolve_models(self.mesh, self.models)
        return sum(
            element_energy(ops, u[ops.dofs], element_models[ops.element]) for ops in self.operators
        )
