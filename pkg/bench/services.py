"""
Benchmark runs and parameter sweeps.
"""

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from material.types import DegenerateStateError, MaterialError
from mesh.generators import generate_benchmark_mesh
from mesh.geometry import MeshError, PolygonalMesh
from solver.assembly import DiscreteProblem
from solver.loading import STEP_COLLAPSE, SolveReport, StepRecord, run_load_program
from solver.newton import newton_solve
from vem.projection import ProjectionError
from vem.quadrature import QuadratureError

from .benchmarks import BenchmarkConfig, BenchmarkConfigError
from .gap import GapProbeError, measure_gap
from .writers import vtk_filename, write_report_csv, write_sweep, write_vtk

logger = logging.getLogger(__name__)

GRID_AXES = ('gamma', 'alpha_r', 'reg')


@dataclass
class BenchmarkRun:
    config: BenchmarkConfig
    mesh: PolygonalMesh
    report: SolveReport
    initial_gap: float
    artifacts: List[Path] = field(default_factory=list)


class StepCollapseError(RuntimeError):
    """The load program stopped before reaching the full load."""

    def __init__(self, run: BenchmarkRun):
        super().__init__(run.report.message or 'step collapse')
        self.run = run

    @property
    def report(self) -> SolveReport:
        return self.run.report


def run_benchmark(config: BenchmarkConfig, newton=newton_solve) -> BenchmarkRun:
    """
    Build the benchmark mesh and discrete problem, run the load program and
    write report.csv plus one VTK snapshot per converged step. Artifacts up
    to the last converged step are written before a collapse is raised.
    """
    mesh = generate_benchmark_mesh(config.problem, config.refinement, config.solid)
    config.check_mesh(mesh)
    problem = DiscreteProblem.build(mesh, config.models, config.operator_options)

    initial_gap = measure_gap(mesh, np.zeros(problem.n_dofs), config.probe)
    logger.info(f"Initial gap {initial_gap:.6e} between '{config.probe.upper}' and '{config.probe.lower}'")

    out = config.output_dir
    artifacts: List[Path] = []
    if out is not None and config.write_vtk:
        artifacts.append(write_vtk(mesh, np.zeros(problem.n_dofs), out / vtk_filename(0)))

    def on_step(record: StepRecord, u: np.ndarray) -> None:
        if out is not None and config.write_vtk:
            artifacts.append(write_vtk(mesh, u, out / vtk_filename(record.step)))

    report = run_load_program(
        problem,
        config.program,
        config.newton_options,
        gap=lambda u: measure_gap(mesh, u, config.probe),
        on_step=on_step,
        newton=newton,
    )
    if out is not None:
        artifacts.append(write_report_csv(report, out / 'report.csv'))
        logger.info(f"Artifacts written to {out}")

    run = BenchmarkRun(config, mesh, report, initial_gap, artifacts)
    if report.status == STEP_COLLAPSE:
        raise StepCollapseError(run)
    logger.info(
        f"Benchmark '{config.name}' completed: {len(report.steps)} step(s), final gap {report.final_gap:.6e}"
    )
    return run


# -------------------------------------------------------
# SWEEP
# -------------------------------------------------------
def grid_points(template: BenchmarkConfig, grid: Mapping[str, Sequence]) -> List[BenchmarkConfig]:
    """One configuration per combination of the grid axes; missing axes keep the template value."""
    if not any(grid.get(axis) for axis in GRID_AXES):
        raise BenchmarkConfigError('sweep grid is empty')
    unknown = sorted(set(grid) - set(GRID_AXES))
    if unknown:
        raise BenchmarkConfigError(f"unknown sweep axes {unknown}, expected {list(GRID_AXES)}")

    medium = template.medium
    regs = list(grid.get('reg') or [medium.reg.value])
    alphas = list(grid.get('alpha_r') or [medium.alpha_r])
    gammas = list(grid.get('gamma') or [medium.gamma])
    base_dir = template.output_dir

    points = []
    for reg, alpha_r, gamma in itertools.product(regs, alphas, gammas):
        label = f"{reg}_a{alpha_r:g}_g{gamma:g}"
        try:
            point_medium = replace(medium, gamma=float(gamma), alpha_r=float(alpha_r), reg=reg)
        except (MaterialError, ValueError) as exc:
            raise BenchmarkConfigError(f"sweep point {label}: {exc}") from exc
        points.append(replace(
            template,
            name=f"{template.name}/{label}",
            medium=point_medium,
            output_dir=base_dir / label if base_dir is not None else None,
            operator_options=replace(template.operator_options, threads=1),
        ))
    return points


def _row(config: BenchmarkConfig, status: str, report: Optional[SolveReport], message: str = '') -> Dict:
    steps = report.steps if report is not None else []
    return {
        'label': config.output_dir.name if config.output_dir is not None else config.name,
        'gamma': config.medium.gamma,
        'alpha_r': config.medium.alpha_r,
        'reg': config.medium.reg.value,
        'status': status,
        'steps': len(steps),
        'final_factor': report.final_factor if report is not None else 0.0,
        'gap': report.final_gap if report is not None else float('nan'),
        'reaction_y': float(steps[-1].reaction[1]) if steps else float('nan'),
        'halvings': report.halvings if report is not None else 0,
        'doublings': report.doublings if report is not None else 0,
        'message': message or (report.message if report is not None else ''),
    }


def run_point(config: BenchmarkConfig) -> Dict:
    """Run one sweep point; failures become a row with their status."""
    try:
        run = run_benchmark(config)
    except StepCollapseError as exc:
        logger.warning(f"Sweep point {config.name}: {exc}")
        return _row(config, STEP_COLLAPSE, exc.report)
    except (
        BenchmarkConfigError, GapProbeError, MeshError, DegenerateStateError, ProjectionError, QuadratureError,
    ) as exc:
        logger.warning(f"Sweep point {config.name} failed: {exc}")
        return _row(config, 'error', None, str(exc))
    return _row(config, run.report.status, run.report)


def sweep(template: BenchmarkConfig, grid: Mapping[str, Sequence], threads: int = 1) -> List[Dict]:
    """
    Run the template once per grid point. Points are independent jobs, at
    most `threads` at a time; rows come back in grid order.
    """
    points = grid_points(template, grid)
    logger.info(f"Sweep '{template.name}': {len(points)} point(s), {threads} worker(s)")

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_point, points))
    else:
        rows = [run_point(config) for config in points]

    failed = sum(row['status'] != 'completed' for row in rows)
    if failed:
        logger.warning(f"Sweep '{template.name}': {failed}/{len(rows)} point(s) did not complete")
    if template.output_dir is not None:
        write_sweep(rows, template.output_dir)
    return rows
