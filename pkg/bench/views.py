import logging
import math

from rest_framework import status
from rest_framework.decorators import api_view
from rest_framework.response import Response

from mesh.generators import generate_benchmark_mesh
from mesh.geometry import MeshError, validate
from mesh.io import mesh_to_document
from mesh.serializers import MeshRequestSerializer

from .benchmarks import PRESETS, BenchmarkConfigError, load_config
from .gap import GapProbeError
from .serializers import RunRequestSerializer
from .services import StepCollapseError, run_benchmark

logger = logging.getLogger(__name__)


@api_view(['GET'])
def health(request):
    return Response({'status': 'ok'})


@api_view(['GET'])
def list_presets(request):
    """Benchmark presets with their problem, material and load parameters"""
    return Response(PRESETS)


@api_view(['POST'])
def generate_mesh(request):
    """Generate a benchmark mesh, validate it and return its summary"""
    serializer = MeshRequestSerializer(data=request.data)
    if not serializer.is_valid():
        return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)
    data = serializer.validated_data

    try:
        mesh = generate_benchmark_mesh(data['problem'], data['refinement'], data['solid'])
    except MeshError as e:
        return Response({'error': str(e)}, status=status.HTTP_400_BAD_REQUEST)

    body = {
        'problem': data['problem'],
        'refinement': data['refinement'],
        'solid': data['solid'],
        'summary': mesh.summary(),
        'diagnostics': validate(mesh),
        'boundary_sets': {name: len(bset.vertices) for name, bset in mesh.boundary_sets.items()},
    }
    if data['include_mesh']:
        body['mesh'] = mesh_to_document(mesh)
    return Response(body)


def _finite(value):
    # strict JSON has no NaN
    return value if isinstance(value, (int, str)) or math.isfinite(value) else None


def _report_body(report):
    return {
        'status': report.status,
        'steps': [{key: _finite(v) for key, v in row.items()} for row in report.rows()],
        'final_factor': report.final_factor,
        'final_gap': _finite(report.final_gap),
        'halvings': report.halvings,
        'doublings': report.doublings,
    }


@api_view(['POST'])
def run(request):
    """Run a benchmark preset synchronously and return the per-step table"""
    serializer = RunRequestSerializer(data=request.data)
    if not serializer.is_valid():
        return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)
    data = dict(serializer.validated_data)
    preset = data.pop('preset')

    try:
        config = load_config(preset=preset, **data)
        result = run_benchmark(config)
    except (BenchmarkConfigError, GapProbeError, MeshError) as e:
        return Response({'error': str(e)}, status=status.HTTP_400_BAD_REQUEST)
    except StepCollapseError as e:
        return Response({'error': str(e), **_report_body(e.report)}, status=status.HTTP_409_CONFLICT)
    except Exception as e:
        logger.error(f"Error running benchmark '{preset}': {str(e)}")
        return Response({'error': str(e)}, status=status.HTTP_500_INTERNAL_SERVER_ERROR)

    return Response({
        'preset': preset,
        'initial_gap': _finite(result.initial_gap),
        'output_dir': str(config.output_dir) if config.output_dir else None,
        **_report_body(result.report),
    })
