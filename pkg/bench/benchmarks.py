"""
Benchmark presets and the validated run configuration.

A configuration is a JSON document mirroring `BenchmarkConfig`; presets are
such documents, and CLI flags or request fields override single values
before validation.
"""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from django.conf import settings

from material.types import Body, MaterialError, MaterialModel, ThirdMedium
from mesh.geometry import MEDIUM, MeshError, PolygonalMesh, body_region
from solver.assembly import resolve_models
from solver.loading import AutoAdjust, LoadProgram
from solver.newton import NewtonOptions
from vem.projection import OperatorOptions

from .gap import GapProbe
from .serializers import BenchmarkConfigSerializer

logger = logging.getLogger(__name__)


class BenchmarkConfigError(ValueError):
    """Raised for invalid benchmark configurations."""


# -------------------------------------------------------
# PRESETS
# -------------------------------------------------------
def _box(alpha_r: float) -> dict:
    return {
        'problem': 'box-self-contact',
        'refinement': 0,
        'bodies': {body_region(0): {'K': 20.0, 'mu': 10.0}},
        'medium': {'gamma': 1e-6, 'alpha_r': alpha_r, 'beta': 5.0, 'reg': 'huhu-dev'},
        'load': {
            'targets': {
                'bottom-left-corner': [0.0, 0.0],
                'bottom-right-corner': [None, 0.0],
                'top-load-band': [None, -1.0],
            },
            'load_set': 'top-load-band',
            'n_steps': 100,
        },
        'gap_probe': {'upper': 'upper-flange-inner', 'lower': 'lower-flange-inner'},
    }


def _c_box(uy: float, alpha_r: float, n_steps: int) -> dict:
    return {
        'problem': 'c-box',
        'refinement': 0,
        'bodies': {body_region(0): {'K': 5.0 / 3.0, 'mu': 5.0 / 14.0}},
        'medium': {'gamma': 1e-5, 'alpha_r': alpha_r, 'beta': 0.0, 'reg': 'rot-j'},
        'load': {
            'targets': {'left-wall': [0.0, 0.0], 'right-top-point': [None, uy]},
            'load_set': 'right-top-point',
            'n_steps': n_steps,
        },
        'gap_probe': {'upper': 'upper-beam-inner', 'lower': 'lower-beam-inner'},
    }


def _punch(punch_K: float, punch_mu: float) -> dict:
    return {
        'problem': 'punch',
        'refinement': 0,
        'bodies': {
            body_region(0): {'K': 5.0 / 3.0, 'mu': 5.0 / 14.0},
            body_region(1): {'K': punch_K, 'mu': punch_mu},
        },
        'medium': {'gamma': 1e-4, 'alpha_r': 1.0, 'beta': 0.0, 'reg': 'rot-j'},
        'load': {
            'targets': {
                'block-bottom': [None, 0.0],
                'symmetry-axis': [0.0, None],
                'punch-top': [None, -1.3],
            },
            'load_set': 'punch-top',
            'n_steps': 130,
            'auto_adjust': {'enabled': True},
        },
        'gap_probe': {'upper': 'punch-arc', 'lower': 'block-top'},
    }


def _multi_object(sliding: bool) -> dict:
    bodies = {body_region(0): {'K': 50.0, 'mu': 10.0}}
    bodies.update({body_region(i): {'K': 50000.0, 'mu': 10000.0} for i in range(1, 8)})
    if sliding:
        targets = {
            'beam-left-end': [0.0, 0.0],
            'beam-right-end': [None, 0.0],
            'semicircle-tops': [None, -0.4],
        }
    else:
        targets = {
            'beam-left-end': [0.0, 0.0],
            'beam-right-end': [0.0, 0.0],
            'semicircle-tops': [0.0, -0.4],
        }
    return {
        'problem': 'multi-object',
        'refinement': 0,
        'bodies': bodies,
        'medium': {'gamma': 1e-4, 'alpha_r': 10.0, 'beta': 0.0, 'reg': 'rot-j'},
        'load': {'targets': targets, 'load_set': 'semicircle-tops', 'n_steps': 40},
        'gap_probe': {'upper': 'semicircle-arcs', 'lower': 'beam-top'},
    }


PRESETS = {
    'box-self-contact': _box(0.1),
    'box-self-contact-table3': _box(10.0),
    'c-box': _c_box(-0.5, 1.0, 50),
    'c-box-large': _c_box(-1.0, 20.0, 100),
    'punch': _punch(5.0 / 3.0, 5.0 / 14.0),
    'punch-rigid': _punch(500.0 / 3.0, 500.0 / 14.0),
    'multi-object': _multi_object(sliding=False),
    'multi-object-sliding': _multi_object(sliding=True),
}


def preset_document(name: str) -> dict:
    try:
        document = copy.deepcopy(PRESETS[name])
    except KeyError:
        raise BenchmarkConfigError(
            f"unknown preset '{name}', expected one of {sorted(PRESETS)}"
        ) from None
    document['name'] = name
    return document


def apply_overrides(document: dict, **overrides) -> dict:
    """
    Return a copy of `document` with single values replaced; keys are the
    CLI flag names (gamma, alpha_r, beta, reg, steps, uy, refinement, solid,
    tol, out, threads). None leaves the value alone.
    """
    doc = copy.deepcopy(document)
    medium = doc.setdefault('medium', {})
    load = doc.setdefault('load', {})
    for key in ('gamma', 'alpha_r', 'beta', 'reg'):
        if overrides.get(key) is not None:
            medium[key] = overrides[key]
    if overrides.get('steps') is not None:
        load['n_steps'] = overrides['steps']
    if overrides.get('uy') is not None:
        load_set = load.get('load_set')
        if not load_set or load_set not in load.get('targets', {}):
            raise BenchmarkConfigError('uy override needs a load_set among the load targets')
        load['targets'][load_set] = [load['targets'][load_set][0], overrides['uy']]
    for key in ('refinement', 'solid'):
        if overrides.get(key) is not None:
            doc[key] = overrides[key]
    if overrides.get('tol') is not None:
        doc.setdefault('newton', {})['tol_rel'] = overrides['tol']
    if overrides.get('out') is not None:
        doc['output_dir'] = str(overrides['out'])
    if overrides.get('threads') is not None:
        doc['threads'] = overrides['threads']
    return doc


# -------------------------------------------------------
# VALIDATED CONFIGURATION
# -------------------------------------------------------
@dataclass(frozen=True)
class BenchmarkConfig:
    name: str
    problem: str
    refinement: int
    solid: str
    bodies: Dict[str, Body]
    medium: ThirdMedium
    program: LoadProgram
    probe: GapProbe
    operator_options: OperatorOptions = field(default_factory=OperatorOptions)
    newton_options: NewtonOptions = field(default_factory=NewtonOptions)
    output_dir: Optional[Path] = None
    write_vtk: bool = True

    @property
    def models(self) -> Dict[str, MaterialModel]:
        return {**self.bodies, MEDIUM: self.medium}

    @property
    def threads(self) -> int:
        return self.operator_options.threads

    def check_mesh(self, mesh: PolygonalMesh) -> None:
        """Regions and boundary sets referenced by the configuration must exist in the mesh."""
        unknown = sorted(set(self.bodies) - set(mesh.element_region))
        if unknown:
            raise BenchmarkConfigError(f"regions {unknown} do not exist in the {self.problem} mesh")
        try:
            resolve_models(mesh, self.models)
            for name in list(self.program.targets) + [self.probe.upper, self.probe.lower]:
                mesh.boundary_set(name)
        except (MaterialError, MeshError) as exc:
            raise BenchmarkConfigError(str(exc)) from exc


def build_config(document: dict, defaults: Optional[dict] = None) -> BenchmarkConfig:
    """Validate a configuration document and build the typed configuration."""
    serializer = BenchmarkConfigSerializer(data=document)
    if not serializer.is_valid():
        raise BenchmarkConfigError(f"invalid benchmark configuration: {serializer.errors}")
    data = serializer.validated_data
    defaults = defaults or {}

    try:
        bodies = {tag: Body(K=p['K'], mu=p['mu']) for tag, p in data['bodies'].items()}
        medium_doc = dict(data['medium'])
        if medium_doc.get('mu') is None:
            # softest body sets the medium shear modulus
            medium_doc['mu'] = min(body.mu for body in bodies.values())
        medium = ThirdMedium(**medium_doc)

        load = data['load']
        adjust_doc = load.get('auto_adjust') or {}
        auto_adjust = AutoAdjust(
            enabled=adjust_doc.get('enabled', True),
            min_factor=adjust_doc.get('min_factor', defaults.get('MIN_STEP_FACTOR', 1.0 / 64.0)),
            grow_after=adjust_doc.get('grow_after', defaults.get('GROW_AFTER', 3)),
        )
        program = LoadProgram(
            targets={name: tuple(values) for name, values in load['targets'].items()},
            n_steps=load['n_steps'],
            auto_adjust=auto_adjust,
            reaction_set=load.get('load_set'),
        )

        newton_doc = {k: v for k, v in (data.get('newton') or {}).items() if v is not None}
        newton = NewtonOptions(
            tol_rel=newton_doc.get('tol_rel', defaults.get('NEWTON_TOL_REL', 1e-8)),
            tol_abs_scale=newton_doc.get('tol_abs_scale', defaults.get('NEWTON_TOL_ABS_SCALE', 1e-11)),
            max_iter=newton_doc.get('max_iter', defaults.get('NEWTON_MAX_ITER', 25)),
            line_search=newton_doc.get('line_search', defaults.get('LINE_SEARCH', False)),
        )
        operators = OperatorOptions(
            quadrature_extra_degree=data.get(
                'quadrature_extra_degree', defaults.get('QUADRATURE_EXTRA_DEGREE', 2)
            ),
            volume_term=data.get('volume_term', defaults.get('PROJECTOR_VOLUME_TERM', 'k')),
            threads=data.get('threads', defaults.get('THREADS', 1)),
        )
    except (MaterialError, ValueError) as exc:
        raise BenchmarkConfigError(str(exc)) from exc

    name = data.get('name') or data['problem']
    output_dir = data.get('output_dir')
    if not output_dir and defaults.get('OUTPUT_DIR'):
        output_dir = Path(defaults['OUTPUT_DIR']) / name
    probe = data['gap_probe']
    return BenchmarkConfig(
        name=name,
        problem=data['problem'],
        refinement=data['refinement'],
        solid=data['solid'],
        bodies=bodies,
        medium=medium,
        program=program,
        probe=GapProbe(probe['upper'], probe['lower']),
        operator_options=operators,
        newton_options=newton,
        output_dir=Path(output_dir) if output_dir else None,
        write_vtk=data.get('write_vtk', defaults.get('WRITE_VTK', True)),
    )


def settings_defaults() -> dict:
    return dict(getattr(settings, 'TMC_BENCH', {}))


def load_config(preset: Optional[str] = None, document: Optional[dict] = None, **overrides) -> BenchmarkConfig:
    """Preset and/or file document, then flag overrides, validated against the settings defaults."""
    if document is None and preset is None:
        raise BenchmarkConfigError('either a preset or a configuration document is required')
    base = preset_document(preset) if preset else {}
    if document:
        base.update(copy.deepcopy(document))
    config = build_config(apply_overrides(base, **overrides), settings_defaults())
    logger.info(
        f"Benchmark '{config.name}': {config.problem} r={config.refinement} ({config.solid} solid), "
        f"gamma={config.medium.gamma:g}, alpha_r={config.medium.alpha_r:g}, beta={config.medium.beta:g}, "
        f"reg={config.medium.reg.value}, {config.program.n_steps} steps"
    )
    return config
