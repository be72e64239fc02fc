"""
JSON mesh files.

Format: {"vertices": [[x, y], ...], "elements": [[i, j, k, ...], ...],
"regions": ["body:0" | "medium", ...],
"boundary_sets": {name: {"vertices": [...], "edges": [[i, j], ...]}}}
"""

import json
import logging
from pathlib import Path
from typing import Union

from .geometry import BoundarySet, MeshError, PolygonalMesh, counter_clockwise, validate
from .serializers import MeshDocumentSerializer

logger = logging.getLogger(__name__)


class MeshFormatError(MeshError):
    """Raised when a mesh file cannot be parsed or describes an invalid mesh."""


def mesh_from_document(document: dict) -> PolygonalMesh:
    """Build a mesh from a parsed JSON document, normalizing orientation."""
    serializer = MeshDocumentSerializer(data=document)
    if not serializer.is_valid():
        raise MeshFormatError(f"invalid mesh document: {serializer.errors}")
    data = serializer.validated_data

    for e, ring in enumerate(data['elements']):
        if len(ring) < 3 or len(set(ring)) != len(ring):
            raise MeshFormatError(f"degenerate ring, element {e}")

    raw = PolygonalMesh(data['vertices'], data['elements'], data['regions'])
    rings = [counter_clockwise(ring, raw.vertices) for ring in raw.elements]
    sets = {
        name: BoundarySet(vertices=entry['vertices'], edges=[tuple(pair) for pair in entry['edges']])
        for name, entry in data['boundary_sets'].items()
    }
    mesh = PolygonalMesh(raw.vertices, rings, data['regions'], sets)

    diagnostics = validate(mesh)
    if diagnostics:
        raise MeshFormatError('; '.join(diagnostics))
    return mesh


def mesh_to_document(mesh: PolygonalMesh) -> dict:
    return {
        'vertices': [[float(x), float(y)] for x, y in mesh.vertices],
        'elements': [list(ring) for ring in mesh.elements],
        'regions': list(mesh.element_region),
        'boundary_sets': {
            name: {'vertices': list(bset.vertices), 'edges': [list(edge) for edge in bset.edges]}
            for name, bset in mesh.boundary_sets.items()
        },
    }


def load_mesh(path: Union[str, Path]) -> PolygonalMesh:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshFormatError(f"cannot read mesh file {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc

    mesh = mesh_from_document(document)
    logger.info(f"Loaded mesh {path}: {mesh.summary()}")
    return mesh


def save_mesh(mesh: PolygonalMesh, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # repr-precision floats keep coordinates bit-identical on reload
    path.write_text(json.dumps(mesh_to_document(mesh), indent=1))
    return path
