import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from material.types import RegularizationKind
from mesh.generators import SOLID_MESHES
from mesh.geometry import MeshError
from vem.projection import ProjectionError
from vem.quadrature import QuadratureError

from bench.benchmarks import PRESETS, BenchmarkConfigError, load_config
from bench.gap import GapProbeError
from bench.serializers import SweepGridSerializer
from bench.services import StepCollapseError, run_benchmark, sweep

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_COLLAPSE = 2


def _read_json(path: str, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise CommandError(f"cannot read {what} {path}: {exc}", returncode=EXIT_CONFIG)
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: parse error at line {exc.lineno}: {exc.msg}", returncode=EXIT_CONFIG)


class Command(BaseCommand):
    help = 'Run a third-medium contact benchmark or a parameter sweep'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON benchmark configuration')
        parser.add_argument('--problem', help=f"preset name, one of {', '.join(sorted(PRESETS))}")
        parser.add_argument('--refinement', type=int)
        parser.add_argument('--solid', choices=list(SOLID_MESHES), help='solid mesh of the punch block or the beam')
        parser.add_argument('--gamma', type=float)
        parser.add_argument('--alpha-r', dest='alpha_r', type=float)
        parser.add_argument('--beta', type=float)
        parser.add_argument('--reg', choices=[kind.value for kind in RegularizationKind])
        parser.add_argument('--steps', type=int)
        parser.add_argument('--uy', type=float, help='vertical displacement of the loaded set at full load')
        parser.add_argument('--tol', type=float, help='relative Newton tolerance')
        parser.add_argument('--out', help='output directory')
        parser.add_argument('--sweep', help='JSON grid over gamma, alpha_r and reg')
        parser.add_argument('--threads', type=int)

    def handle(self, *args, **options):
        if options['verbosity'] >= 2:
            logging.getLogger().setLevel(logging.DEBUG)
            for name in ('bench', 'solver', 'material', 'mesh', 'vem'):
                logging.getLogger(name).setLevel(logging.DEBUG)

        if not options['config'] and not options['problem']:
            raise CommandError('either --config or --problem is required', returncode=EXIT_CONFIG)

        document = _read_json(options['config'], 'configuration') if options['config'] else None
        overrides = {
            key: options[key]
            for key in (
                'gamma', 'alpha_r', 'beta', 'reg', 'steps', 'uy', 'refinement', 'solid', 'tol', 'out', 'threads'
            )
        }

        try:
            config = load_config(preset=options['problem'], document=document, **overrides)
            if options['sweep']:
                return self._sweep(config, options)
            result = run_benchmark(config)
        except StepCollapseError as exc:
            raise CommandError(f"{exc} after {len(exc.report.steps)} step(s)", returncode=EXIT_COLLAPSE)
        except (BenchmarkConfigError, GapProbeError, MeshError, ProjectionError, QuadratureError) as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG)

        report = result.report
        self.stdout.write(self.style.SUCCESS(
            f"{config.name}: {len(report.steps)} step(s), final gap {report.final_gap:.6e}, "
            f"{report.halvings} halving(s), {report.doublings} doubling(s)"
        ))
        if config.output_dir is not None:
            self.stdout.write(f"Results in {config.output_dir}")

    def _sweep(self, config, options):
        serializer = SweepGridSerializer(data=_read_json(options['sweep'], 'sweep grid'))
        if not serializer.is_valid():
            raise CommandError(f"invalid sweep grid: {serializer.errors}", returncode=EXIT_CONFIG)
        rows = sweep(config, serializer.validated_data, threads=config.threads)
        completed = sum(row['status'] == 'completed' for row in rows)
        self.stdout.write(self.style.SUCCESS(f"Sweep finished: {completed}/{len(rows)} point(s) completed"))
        for row in rows:
            self.stdout.write(f"  {row['label']}: {row['status']}, gap {row['gap']:.6e}")
