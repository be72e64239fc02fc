import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import DiscreteProblem, DofPartition, ElementFailure, GlobalSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonOptions:
    tol_rel: float = 1e-8
    # absolute tolerance is tol_abs_scale * sqrt(number of free DOFs)
    tol_abs_scale: float = 1e-11
    max_iter: int = 25
    line_search: bool = False
    max_halvings: int = 4

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol_rel <= 0 or self.tol_abs_scale < 0:
            raise ValueError('Newton tolerances must be positive')

    @classmethod
    def from_settings(cls, **overrides) -> 'NewtonOptions':
        from django.conf import settings

        config = getattr(settings, 'TMC_BENCH', {})
        values = {
            'tol_rel': config.get('NEWTON_TOL_REL', 1e-8),
            'tol_abs_scale': config.get('NEWTON_TOL_ABS_SCALE', 1e-11),
            'max_iter': config.get('NEWTON_MAX_ITER', 25),
            'line_search': config.get('LINE_SEARCH', False),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def tol_abs(self, n_free: int) -> float:
        return self.tol_abs_scale * math.sqrt(max(n_free, 1))


@dataclass
class NewtonResult:
    u: np.ndarray
    converged: bool
    iterations: int
    residual_norms: List[float] = field(default_factory=list)
    reason: str = ''
    # system assembled at u, when available
    system: Optional[GlobalSystem] = None

    @property
    def strictly_decreasing(self) -> bool:
        return strictly_decreasing(self.residual_norms)


def strictly_decreasing(norms: List[float]) -> bool:
    """True when the norms after the first iteration decrease strictly."""
    tail = norms[1:]
    return all(b < a for a, b in zip(tail, tail[1:]))


def _solve(system: GlobalSystem, rhs: np.ndarray) -> Optional[np.ndarray]:
    try:
        du = splu(system.tangent.tocsc()).solve(rhs)
    except RuntimeError as exc:
        logger.debug(f"Factorization failed: {exc}")
        return None
    return du if np.all(np.isfinite(du)) else None


def newton_solve(problem: DiscreteProblem, u0: np.ndarray, partition: DofPartition,
                 options: Optional[NewtonOptions] = None) -> NewtonResult:
    """
    Newton iterations from u0 towards equilibrium with the prescribed values
    of `partition`. The first right-hand side carries the increment of the
    prescribed values through the free/prescribed coupling block. Failures are
    returned, never raised.
    """
    options = options or NewtonOptions()
    u = np.array(u0, dtype=float)
    free = partition.free
    tol_abs = options.tol_abs(partition.n_free)

    def failure(reason, iterations, norms, system=None):
        logger.warning(f"Newton failed after {iterations} iteration(s): {reason}")
        return NewtonResult(u, False, iterations, norms, reason, system)

    if not np.all(np.isfinite(u)):
        return failure('non-finite initial state', 0, [])

    try:
        system = problem.assemble(u, partition)
    except ElementFailure as exc:
        return failure(f"degenerate state: {exc}", 0, [])

    increment = partition.values - u[partition.prescribed]
    rhs = -system.residual - system.coupling @ increment
    first = True
    norms: List[float] = []
    r0 = None

    for k in range(options.max_iter + 1):
        norm = float(np.linalg.norm(rhs))
        norms.append(norm)
        logger.debug(f"  iteration {k}: |R| = {norm:.6e}")
        if r0 is None:
            r0 = norm
        if norm < tol_abs or (k > 0 and norm < options.tol_rel * r0):
            if first and np.any(increment != 0.0):
                # accepted without a solve: the system must describe the applied state
                u = partition.apply(u)
                try:
                    system = problem.assemble(u, partition)
                except ElementFailure as exc:
                    return failure(f"degenerate state: {exc}", k, norms)
            return NewtonResult(u, True, k, norms, 'converged', system)
        if k == options.max_iter:
            return failure('max-iter', k, norms, system)

        du = _solve(system, rhs)
        if du is None:
            return failure('singular or non-finite factorization', k, norms, system)

        step = 1.0
        halvings = options.max_halvings if options.line_search else 0
        while True:
            trial = u.copy()
            trial[free] += step * du
            if first:
                trial = partition.apply(trial)
            try:
                trial_system = problem.assemble(trial, partition)
            except ElementFailure as exc:
                if halvings == 0:
                    return failure(f"degenerate state: {exc}", k + 1, norms, system)
                trial_system = None
            if trial_system is not None and (halvings == 0 or trial_system.residual_norm <= norm):
                break
            halvings -= 1
            step *= 0.5
            logger.debug(f"  line search: step {step:g}")

        u, system, first = trial, trial_system, False
        rhs = -system.residual

    return failure('max-iter', options.max_iter, norms, system)
