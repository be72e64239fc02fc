"""
Gap between two boundary chains in the deformed configuration.

The gap is the smallest vertical distance from a vertex of the upper chain
down to the piecewise-linear lower chain, clipped at zero.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from mesh.geometry import MeshError, PolygonalMesh

logger = logging.getLogger(__name__)


class GapProbeError(ValueError):
    """Raised when a probe does not describe two usable surface chains."""


@dataclass(frozen=True)
class GapProbe:
    upper: str
    lower: str

    def chains(self, mesh: PolygonalMesh) -> Tuple[np.ndarray, np.ndarray]:
        """Upper chain vertex ids and lower chain segments as (n, 2) vertex pairs."""
        try:
            upper = mesh.boundary_set(self.upper)
            lower = mesh.boundary_set(self.lower)
        except MeshError as exc:
            raise GapProbeError(str(exc)) from exc
        if not upper.vertices:
            raise GapProbeError(f"upper chain '{self.upper}' has no vertices")
        if not lower.edges:
            raise GapProbeError(f"lower chain '{self.lower}' has no segments")
        shared = set(upper.vertices) & {v for edge in lower.edges for v in edge}
        if shared:
            raise GapProbeError(
                f"chains '{self.upper}' and '{self.lower}' share vertices {sorted(shared)[:5]}"
            )

        # chains must follow the outer boundary or a region interface
        surface = {mesh.edges[k] for k in mesh.surface_edges()}
        interior = [edge for edge in lower.edges if (min(edge), max(edge)) not in surface]
        if interior:
            raise GapProbeError(
                f"lower chain '{self.lower}' has {len(interior)} segment(s) off the body surfaces, "
                f"first {tuple(interior[0])}"
            )
        on_surface = {v for edge in surface for v in edge}
        stray = sorted(set(upper.vertices) - on_surface)
        if stray:
            raise GapProbeError(
                f"upper chain '{self.upper}' has vertices off the body surfaces {stray[:5]}"
            )
        return np.asarray(upper.vertices, dtype=np.int64), np.asarray(lower.edges, dtype=np.int64)


def deformed_vertices(mesh: PolygonalMesh, u: np.ndarray) -> np.ndarray:
    """Vertex positions after applying the global DOF vector (vertex DOFs come first)."""
    n = mesh.n_vertices
    displacement = np.asarray(u, dtype=float)[:2 * n].reshape(n, 2)
    return mesh.vertices + displacement


def measure_gap(mesh: PolygonalMesh, u: np.ndarray, probe: GapProbe) -> float:
    upper, segments = probe.chains(mesh)
    x = deformed_vertices(mesh, u)
    if not np.all(np.isfinite(x)):
        raise GapProbeError('deformed positions are not finite')

    a, b = x[segments[:, 0]], x[segments[:, 1]]
    x0 = np.minimum(a[:, 0], b[:, 0])
    x1 = np.maximum(a[:, 0], b[:, 0])
    dx = b[:, 0] - a[:, 0]

    px, py = x[upper, 0], x[upper, 1]
    # points x segments: vertical line through each upper vertex against each lower segment
    covers = (px[:, None] >= x0[None, :] - 1e-12) & (px[:, None] <= x1[None, :] + 1e-12)
    with np.errstate(divide='ignore', invalid='ignore'):
        s = np.where(np.abs(dx) > 1e-14, (px[:, None] - a[None, :, 0]) / dx[None, :], 0.0)
    s = np.clip(s, 0.0, 1.0)
    lower_y = a[None, :, 1] + s * (b[None, :, 1] - a[None, :, 1])
    distance = np.where(covers, py[:, None] - lower_y, np.inf)

    if not np.any(np.isfinite(distance)):
        raise GapProbeError(
            f"no vertex of '{probe.upper}' lies above the lower chain '{probe.lower}'"
        )
    return max(float(distance.min()), 0.0)
