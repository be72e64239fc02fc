"""
Incremental load program: prescribed displacements ramp linearly with the
load factor, one Newton solve per increment, with automatic halving and
regrowth of the increment.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Mapping, Optional

import numpy as np

from .assembly import DirichletConstraints, DiscreteProblem, Target, reaction_force
from .newton import NewtonOptions, NewtonResult, newton_solve, strictly_decreasing

logger = logging.getLogger(__name__)

COMPLETED = 'completed'
STEP_COLLAPSE = 'step-collapse'
FACTOR_EPS = 1e-12


@dataclass(frozen=True)
class AutoAdjust:
    enabled: bool = True
    min_factor: float = 1.0 / 64.0
    grow_after: int = 3

    def __post_init__(self):
        if not 0.0 < self.min_factor <= 1.0:
            raise ValueError(f"min_factor must lie in (0, 1], got {self.min_factor}")
        if self.grow_after < 1:
            raise ValueError(f"grow_after must be >= 1, got {self.grow_after}")


@dataclass(frozen=True)
class LoadProgram:
    targets: Mapping[str, Target]
    n_steps: int = 1
    auto_adjust: AutoAdjust = field(default_factory=AutoAdjust)
    # boundary set whose reaction is recorded, defaults to the first target
    reaction_set: Optional[str] = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.targets:
            raise ValueError('a load program needs at least one target')

    @property
    def base_increment(self) -> float:
        return 1.0 / self.n_steps

    @property
    def reaction_target(self) -> str:
        return self.reaction_set or next(iter(self.targets))


@dataclass
class StepRecord:
    step: int
    factor: float
    iterations: int
    residual_norms: List[float]
    gap: float
    reaction: np.ndarray

    def as_row(self) -> dict:
        return {
            'step': self.step,
            'factor': self.factor,
            'iters': self.iterations,
            'gap': self.gap,
            'reaction_x': float(self.reaction[0]),
            'reaction_y': float(self.reaction[1]),
        }


@dataclass
class SolveReport:
    steps: List[StepRecord]
    u: np.ndarray
    status: str
    halvings: int = 0
    doublings: int = 0
    message: str = ''

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    @property
    def final_factor(self) -> float:
        return self.steps[-1].factor if self.steps else 0.0

    @property
    def final_gap(self) -> float:
        return self.steps[-1].gap if self.steps else float('nan')

    def rows(self) -> List[dict]:
        return [record.as_row() for record in self.steps]


NewtonCallable = Callable[..., NewtonResult]
GapCallable = Callable[[np.ndarray], float]
StepCallback = Callable[[StepRecord, np.ndarray], None]


def run_load_program(problem: DiscreteProblem, program: LoadProgram,
                     options: Optional[NewtonOptions] = None,
                     gap: Optional[GapCallable] = None,
                     on_step: Optional[StepCallback] = None,
                     newton: NewtonCallable = newton_solve) -> SolveReport:
    options = options or NewtonOptions()
    constraints = DirichletConstraints.from_targets(problem.mesh, problem.layout, program.targets)
    adjust = program.auto_adjust
    base = program.base_increment
    floor = adjust.min_factor * base

    u = np.zeros(problem.n_dofs)
    factor, increment = 0.0, base
    successes = halvings = doublings = 0
    records: List[StepRecord] = []
    status, message = COMPLETED, ''

    while factor < 1.0 - FACTOR_EPS:
        trial = min(1.0, factor + increment)
        if 1.0 - trial < FACTOR_EPS:
            trial = 1.0
        result = newton(problem, u, constraints.at(trial), options)

        if not result.converged:
            logger.warning(f"Load factor {trial:.6f} failed ({result.reason}), increment {increment:.3e}")
            if not adjust.enabled or increment * 0.5 < floor * (1.0 - FACTOR_EPS):
                status = STEP_COLLAPSE
                message = f"step collapse at factor {factor:.6f} ({result.reason})"
                logger.warning(message)
                break
            increment *= 0.5
            halvings += 1
            successes = 0
            logger.info(f"Halving load increment to {increment:.3e}")
            continue

        factor, u = trial, result.u
        reaction = (
            reaction_force(result.system, problem.mesh, problem.layout, program.reaction_target)
            if result.system is not None else np.full(2, np.nan)
        )
        record = StepRecord(
            step=len(records) + 1,
            factor=factor,
            iterations=result.iterations,
            residual_norms=list(result.residual_norms),
            gap=float(gap(u)) if gap is not None else float('nan'),
            reaction=reaction,
        )
        records.append(record)
        logger.info(
            f"Step {record.step}: factor {factor:.6f}, {record.iterations} iteration(s), "
            f"|R| = {record.residual_norms[-1]:.3e}, gap {record.gap:.6e}"
        )
        if on_step is not None:
            on_step(record, u)

        successes += 1
        if adjust.enabled and increment < base and successes >= adjust.grow_after:
            increment = min(base, 2.0 * increment)
            doublings += 1
            successes = 0
            logger.info(f"Doubling load increment to {increment:.3e}")

    if records:
        decreasing = sum(strictly_decreasing(r.residual_norms) for r in records)
        logger.info(
            f"Strictly decreasing convergence histories: {decreasing}/{len(records)} "
            f"({100.0 * decreasing / len(records):.1f}%)"
        )
    return SolveReport(records, u, status, halvings, doublings, message)
