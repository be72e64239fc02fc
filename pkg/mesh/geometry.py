"""
Polygonal mesh data model.

Elements are rings of vertex indices, counter-clockwise. Hanging nodes are
ordinary ring vertices of the coarser polygon, so the edge table of a valid
mesh is conforming without any constraint equations.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

logger = logging.getLogger(__name__)

MEDIUM = 'medium'
BODY_PREFIX = 'body:'

# Relative tolerance for "vertex lies on an edge" checks
ON_EDGE_TOL = 1e-9


class MeshError(ValueError):
    """Raised for invalid mesh input."""


def body_region(body_id: int) -> str:
    return f"{BODY_PREFIX}{body_id}"


def parse_region(tag: str) -> Tuple[str, Optional[int]]:
    """Split a region tag into ('body', id) or ('medium', None)."""
    if tag == MEDIUM:
        return MEDIUM, None
    if tag.startswith(BODY_PREFIX):
        suffix = tag[len(BODY_PREFIX):]
        if suffix.isdigit():
            return 'body', int(suffix)
    raise MeshError(f"unknown region tag '{tag}'")


def is_medium(tag: str) -> bool:
    return tag == MEDIUM


def signed_area(coords: np.ndarray) -> float:
    """Shoelace area, positive for counter-clockwise rings."""
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class BoundarySet:
    vertices: Tuple[int, ...] = ()
    edges: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'vertices', tuple(int(v) for v in self.vertices))
        object.__setattr__(
            self, 'edges', tuple((int(a), int(b)) for a, b in self.edges)
        )

    @property
    def is_empty(self) -> bool:
        return not self.vertices and not self.edges


@dataclass(frozen=True)
class ElementGeometry:
    centroid: np.ndarray
    area: float
    diameter: float
    n_vertices: int


@dataclass(frozen=True)
class PolygonalMesh:
    """Immutable polygonal mesh with region tags and named boundary sets."""

    vertices: np.ndarray
    elements: Tuple[Tuple[int, ...], ...]
    element_region: Tuple[str, ...]
    boundary_sets: Dict[str, BoundarySet] = field(default_factory=dict)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 2)
        vertices.setflags(write=False)
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(
            self, 'elements', tuple(tuple(int(v) for v in ring) for ring in self.elements)
        )
        object.__setattr__(self, 'element_region', tuple(self.element_region))
        object.__setattr__(self, 'boundary_sets', dict(self.boundary_sets))
        if len(self.element_region) != len(self.elements):
            raise MeshError(
                f"{len(self.element_region)} region tags for {len(self.elements)} elements"
            )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def element_coords(self, e: int) -> np.ndarray:
        return self.vertices[list(self.elements[e])]

    @cached_property
    def _edge_table(self):
        edges: List[Tuple[int, int]] = []
        index: Dict[Tuple[int, int], int] = {}
        incident: List[List[int]] = []
        element_edges = []
        for e, ring in enumerate(self.elements):
            ids = []
            for a in range(len(ring)):
                i, j = ring[a], ring[(a + 1) % len(ring)]
                key = (min(i, j), max(i, j))
                k = index.get(key)
                if k is None:
                    k = len(edges)
                    index[key] = k
                    edges.append(key)
                    incident.append([])
                incident[k].append(e)
                ids.append(k)
            element_edges.append(tuple(ids))
        return tuple(edges), index, tuple(tuple(x) for x in incident), tuple(element_edges)

    @property
    def edges(self) -> Tuple[Tuple[int, int], ...]:
        """Unique undirected edges (i < j) in order of first appearance."""
        return self._edge_table[0]

    @property
    def edge_elements(self) -> Tuple[Tuple[int, ...], ...]:
        return self._edge_table[2]

    @property
    def element_edges(self) -> Tuple[Tuple[int, ...], ...]:
        """Global edge ids per element, edge a joining ring[a] and ring[a+1]."""
        return self._edge_table[3]

    def edge_id(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        try:
            return self._edge_table[1][key]
        except KeyError:
            raise MeshError(f"no edge ({i}, {j}) in mesh") from None

    def boundary_edges(self) -> List[int]:
        return [k for k, inc in enumerate(self.edge_elements) if len(inc) == 1]

    def surface_edges(self) -> List[int]:
        """Outer boundary edges plus edges between elements of different regions."""
        return [
            k for k, inc in enumerate(self.edge_elements)
            if len(inc) == 1 or len({self.element_region[e] for e in inc}) > 1
        ]

    def regions(self) -> List[str]:
        return sorted(set(self.element_region))

    def elements_in_region(self, tag: str) -> List[int]:
        return [e for e, r in enumerate(self.element_region) if r == tag]

    def boundary_set(self, name: str) -> BoundarySet:
        try:
            return self.boundary_sets[name]
        except KeyError:
            raise MeshError(f"unknown boundary set '{name}'") from None

    def total_area(self) -> float:
        return sum(signed_area(self.element_coords(e)) for e in range(self.n_elements))

    def summary(self) -> Dict[str, int]:
        counts = {tag: len(self.elements_in_region(tag)) for tag in self.regions()}
        return {
            'vertices': self.n_vertices,
            'elements': self.n_elements,
            'edges': self.n_edges,
            'max_ring': max((len(r) for r in self.elements), default=0),
            **{f"elements[{tag}]": n for tag, n in counts.items()},
        }


def polygon_geometry(coords: np.ndarray) -> ElementGeometry:
    """Centroid, area and diameter of a counter-clockwise polygon."""
    x, y = coords[:, 0], coords[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return ElementGeometry(
        centroid=np.array([cx, cy]),
        area=float(area),
        diameter=float(pdist(coords).max()),
        n_vertices=len(coords),
    )


def element_geometry(mesh: PolygonalMesh, e: int) -> ElementGeometry:
    if not 0 <= e < mesh.n_elements:
        raise IndexError(f"element {e} out of range (0..{mesh.n_elements - 1})")
    return polygon_geometry(mesh.element_coords(e))


def vertices_on_segment(
    tree: cKDTree, vertices: np.ndarray, p: int, q: int, scale: float
) -> List[Tuple[float, int]]:
    """Vertices lying strictly inside segment p-q, as (parameter, index) pairs."""
    a, b = vertices[p], vertices[q]
    d = b - a
    length = float(np.hypot(*d))
    if length == 0.0:
        return []
    tol = ON_EDGE_TOL * scale
    hits = []
    for v in tree.query_ball_point(0.5 * (a + b), 0.5 * length + tol):
        if v in (p, q):
            continue
        r = vertices[v] - a
        t = float(np.dot(r, d)) / length ** 2
        dist = abs(d[0] * r[1] - d[1] * r[0]) / length
        if dist <= tol and tol / length < t < 1.0 - tol / length:
            hits.append((t, v))
    return sorted(hits)


def validate(mesh: PolygonalMesh) -> List[str]:
    """Return one diagnostic string per violated mesh invariant."""
    diagnostics: List[str] = []
    nv = mesh.n_vertices
    rings_ok = True

    for e, ring in enumerate(mesh.elements):
        if len(ring) < 3 or len(set(ring)) != len(ring):
            diagnostics.append(f"degenerate ring, element {e}")
            rings_ok = False
            continue
        if min(ring) < 0 or max(ring) >= nv:
            diagnostics.append(f"vertex index out of range, element {e}")
            rings_ok = False
            continue
        if signed_area(mesh.element_coords(e)) <= 0.0:
            diagnostics.append(f"negative area, element {e}")

    for e, tag in enumerate(mesh.element_region):
        try:
            parse_region(tag)
        except MeshError:
            diagnostics.append(f"unknown region '{tag}', element {e}")

    if not rings_ok:
        return diagnostics

    used = np.zeros(nv, dtype=bool)
    for ring in mesh.elements:
        used[list(ring)] = True
    for v in np.flatnonzero(~used):
        diagnostics.append(f"unreferenced vertex {v}")

    # Conformity: no edge shared by more than two elements and no vertex in
    # the interior of a boundary edge (an unrepresented T-junction).
    scale = float(np.ptp(mesh.vertices, axis=0).max()) if nv else 1.0
    tree = cKDTree(mesh.vertices)
    for k, (i, j) in enumerate(mesh.edges):
        incident = mesh.edge_elements[k]
        if len(incident) > 2:
            diagnostics.append(
                f"non-conforming edge ({i}, {j}): {len(incident)} incident elements"
            )
        elif len(incident) == 1:
            hits = vertices_on_segment(tree, mesh.vertices, i, j, scale)
            if hits:
                diagnostics.append(
                    f"non-conforming edge ({i}, {j}): vertex {hits[0][1]} lies on it"
                )

    medium = [e for e, tag in enumerate(mesh.element_region) if is_medium(tag)]
    if len(medium) > 1:
        position = {e: n for n, e in enumerate(medium)}
        rows, cols = [], []
        for inc in mesh.edge_elements:
            if len(inc) == 2 and inc[0] in position and inc[1] in position:
                rows.append(position[inc[0]])
                cols.append(position[inc[1]])
        graph = coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(medium), len(medium))
        )
        n_components, _ = connected_components(graph, directed=False)
        if n_components > 1:
            diagnostics.append(f"medium region disconnected: {n_components} components")

    for name, bset in mesh.boundary_sets.items():
        bad = [v for v in bset.vertices if not 0 <= v < nv]
        if bad:
            diagnostics.append(f"boundary set '{name}' references missing vertex {bad[0]}")
        for i, j in bset.edges:
            if (min(i, j), max(i, j)) not in mesh._edge_table[1]:
                diagnostics.append(f"boundary set '{name}' references missing edge ({i}, {j})")
                break

    return diagnostics


def counter_clockwise(ring: Sequence[int], vertices: np.ndarray) -> Tuple[int, ...]:
    """Return the ring reversed if it is clockwise."""
    ring = tuple(ring)
    if signed_area(vertices[list(ring)]) < 0.0:
        return ring[::-1]
    return ring
