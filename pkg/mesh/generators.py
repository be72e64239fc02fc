"""
Benchmark mesh generators.

Each generator lays down structured quad blocks, polar blocks (disks, half
disks and the medium around them) and, for some solids, Voronoi blocks
through MeshBuilder. Coincident vertices are merged, and a final conform
pass inserts every vertex that lies inside an element edge into that
element's ring, which turns density transitions into hanging-node polygons.
"""

import logging
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .geometry import (
    MEDIUM,
    BoundarySet,
    MeshError,
    PolygonalMesh,
    body_region,
    counter_clockwise,
    validate,
    vertices_on_segment,
)

logger = logging.getLogger(__name__)


class UnknownBenchmarkError(MeshError):
    """Raised for a benchmark id with no generator."""


# -------------------------------------------------------
# GEOMETRY PARAMETERS
# -------------------------------------------------------
BOX = {'L': 2.0, 'H': 0.5, 'T': 0.1, 'cell': 0.05}
C_BOX = {'L': 1.0, 'H': 0.5, 't': 0.1, 'column': 0.1, 'cell': 0.05}
PUNCH = {'L': 2.0, 'H': 1.0, 'R': 1.0, 'clearance': 0.25}
MULTI_OBJECT = {
    'L': 8.0, 'H': 0.2, 'R': 0.2, 'clearance': 0.1, 'count': 7, 'cell_width': 1.0,
}

VORONOI = {'jitter': 0.15, 'seed': 0}
SOLID_MESHES = ('quad', 'voronoi')

KEY_DIGITS = 9

Predicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


class MeshBuilder:
    """Accumulates polygons with merged vertices and named vertex predicates."""

    def __init__(self):
        self._coords: List[Tuple[float, float]] = []
        self._lookup: Dict[Tuple[float, float], int] = {}
        self._rings: List[List[int]] = []
        self._regions: List[str] = []
        self._sets: List[Tuple[str, Predicate]] = []

    def vertex(self, x: float, y: float) -> int:
        key = (round(float(x), KEY_DIGITS) + 0.0, round(float(y), KEY_DIGITS) + 0.0)
        v = self._lookup.get(key)
        if v is None:
            v = len(self._coords)
            self._lookup[key] = v
            self._coords.append((float(x), float(y)))
        return v

    def polygon(self, points: Sequence[Sequence[float]], region: str) -> None:
        ring = []
        for x, y in points:
            v = self.vertex(x, y)
            if not ring or ring[-1] != v:
                ring.append(v)
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring.pop()
        if len(ring) >= 3:
            self._rings.append(ring)
            self._regions.append(region)

    def grid(self, xs: Sequence[float], ys: Sequence[float], region: str,
             skip: Callable[[float, float], bool] = None) -> None:
        """Quads on the tensor grid xs x ys, optionally skipping cells by centre."""
        for i in range(len(xs) - 1):
            for j in range(len(ys) - 1):
                if skip is not None and skip(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])):
                    continue
                self.polygon(
                    [(xs[i], ys[j]), (xs[i + 1], ys[j]), (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1])],
                    region,
                )

    def polar_block(self, center: Sequence[float], radius: float, path: np.ndarray,
                    n_rings: int, n_layers: int, disk_region: str) -> np.ndarray:
        """
        Disk sector meshed by rays from `center` through the points of `path`,
        with the medium filling the space between the arc and the path.

        Returns the arc points (polygonal approximation of the circle).
        """
        c = np.asarray(center, dtype=float)
        path = np.asarray(path, dtype=float)
        rays = path - c
        unit = rays / np.linalg.norm(rays, axis=1)[:, None]
        arc = c + radius * unit

        for k in range(n_rings):
            r0, r1 = radius * k / n_rings, radius * (k + 1) / n_rings
            for j in range(len(path) - 1):
                if k == 0:
                    pts = [c, c + r1 * unit[j], c + r1 * unit[j + 1]]
                else:
                    pts = [c + r0 * unit[j], c + r1 * unit[j], c + r1 * unit[j + 1], c + r0 * unit[j + 1]]
                self.polygon(pts, disk_region)

        for k in range(n_layers):
            s0, s1 = k / n_layers, (k + 1) / n_layers
            for j in range(len(path) - 1):
                a0 = arc[j] + s0 * (path[j] - arc[j])
                a1 = arc[j] + s1 * (path[j] - arc[j])
                b0 = arc[j + 1] + s0 * (path[j + 1] - arc[j + 1])
                b1 = arc[j + 1] + s1 * (path[j + 1] - arc[j + 1])
                self.polygon([a0, a1, b1, b0], MEDIUM)
        return arc

    def voronoi_block(self, x0: float, x1: float, y0: float, y1: float, nx: int, ny: int,
                      region: str, jitter: float = VORONOI['jitter'], seed: int = VORONOI['seed']) -> None:
        """
        Rectangle tiled by the Voronoi cells of a staggered, jittered seed
        lattice, clipped by mirroring the seeds across the four sides.

        The top row of seeds is left in place, so the cell corners on the top
        side are exactly x0 + i (x1 - x0) / nx and meet an nx-cell grid there.
        """
        dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
        rng = np.random.default_rng(seed)
        rows = []
        for r in range(ny):
            if r % 2 == 0:
                xs = x0 + (np.arange(nx) + 0.5) * dx
            else:
                xs = x0 + np.arange(1, nx) * dx
            row = np.column_stack([xs, np.full(len(xs), y1 - (r + 0.5) * dy)])
            if r > 0:
                row += rng.uniform(-jitter, jitter, row.shape) * (dx, dy)
            rows.append(row)
        seeds = np.vstack(rows)

        x, y = seeds[:, 0], seeds[:, 1]
        mirrored = np.vstack([
            seeds,
            np.column_stack([2 * x0 - x, y]),
            np.column_stack([2 * x1 - x, y]),
            np.column_stack([x, 2 * y0 - y]),
            np.column_stack([x, 2 * y1 - y]),
        ])
        diagram = Voronoi(mirrored)
        for i in range(len(seeds)):
            cell = diagram.regions[diagram.point_region[i]]
            if not cell or -1 in cell:
                raise MeshError(f"unbounded Voronoi cell for seed {i} in {region} block")
            pts = diagram.vertices[cell].copy()
            pts[:, 0] = np.clip(pts[:, 0], x0, x1)
            pts[:, 1] = np.clip(pts[:, 1], y0, y1)
            self.polygon(pts, region)

    def boundary_set(self, name: str, predicate: Predicate) -> None:
        self._sets.append((name, predicate))

    def build(self) -> PolygonalMesh:
        vertices = np.array(self._coords, dtype=float)
        rings = [counter_clockwise(r, vertices) for r in self._rings]
        rings = _conform(rings, vertices)

        used = sorted({v for ring in rings for v in ring})
        renumber = {old: new for new, old in enumerate(used)}
        vertices = vertices[used]
        rings = [tuple(renumber[v] for v in ring) for ring in rings]

        skeleton = PolygonalMesh(vertices, rings, self._regions)
        sets = {}
        for name, predicate in self._sets:
            mask = np.asarray(predicate(vertices[:, 0], vertices[:, 1]), dtype=bool)
            members = set(np.flatnonzero(mask).tolist())
            edges = tuple(e for e in skeleton.edges if e[0] in members and e[1] in members)
            sets[name] = BoundarySet(vertices=tuple(sorted(members)), edges=edges)
        return PolygonalMesh(vertices, rings, self._regions, sets)


def _conform(rings: List[Tuple[int, ...]], vertices: np.ndarray) -> List[Tuple[int, ...]]:
    """Insert every vertex lying strictly inside a ring edge into that ring."""
    tree = cKDTree(vertices)
    scale = float(np.ptp(vertices, axis=0).max())
    out = []
    inserted = 0
    for ring in rings:
        new_ring = []
        for a in range(len(ring)):
            p, q = ring[a], ring[(a + 1) % len(ring)]
            new_ring.append(p)
            hits = vertices_on_segment(tree, vertices, p, q, scale)
            new_ring.extend(v for _, v in hits)
            inserted += len(hits)
        out.append(tuple(new_ring))
    if inserted:
        logger.debug(f"Conform pass inserted {inserted} hanging-node ring vertices")
    return out


def _near(a, b, tol=1e-9):
    return np.abs(a - b) <= tol


def _line(x0: float, x1: float, n: int) -> np.ndarray:
    return np.linspace(x0, x1, n + 1)


def _cells(length: float, cell: float) -> int:
    return max(1, int(round(length / cell)))


def _quad_only(problem: str, solid: str) -> None:
    if solid != 'quad':
        raise MeshError(f"{problem} supports only quad solid meshes, got '{solid}'")


def _solid_block(builder: MeshBuilder, solid: str, xs: np.ndarray, ys: np.ndarray) -> None:
    """body:0 rectangle on evenly spaced xs x ys, as quads or Voronoi cells."""
    if solid == 'quad':
        builder.grid(xs, ys, body_region(0))
    elif solid == 'voronoi':
        builder.voronoi_block(xs[0], xs[-1], ys[0], ys[-1], len(xs) - 1, len(ys) - 1, body_region(0))
    else:
        raise MeshError(f"unknown solid mesh '{solid}', expected one of {list(SOLID_MESHES)}")


# -------------------------------------------------------
# BOX WITH SELF-CONTACT
# -------------------------------------------------------
def box_self_contact(refinement: int, solid: str = 'quad') -> PolygonalMesh:
    """
    Hollow box L x H with wall thickness T, cavity filled with medium.

    The walls keep the base cell size; the medium is subdivided 2**refinement
    times, so refinement >= 1 leaves hanging nodes on the inner wall faces.
    """
    _quad_only('box-self-contact', solid)
    L, H, T, h = BOX['L'], BOX['H'], BOX['T'], BOX['cell']
    builder = MeshBuilder()

    def in_cavity(x, y):
        return T < x < L - T and T < y < H - T

    builder.grid(_line(0.0, L, _cells(L, h)), _line(0.0, H, _cells(H, h)), body_region(0), skip=in_cavity)

    hm = h / 2 ** refinement
    builder.grid(
        _line(T, L - T, _cells(L - 2 * T, hm)), _line(T, H - T, _cells(H - 2 * T, hm)), MEDIUM
    )

    builder.boundary_set('bottom-left-corner', lambda x, y: _near(x, 0.0) & _near(y, 0.0))
    builder.boundary_set('bottom-right-corner', lambda x, y: _near(x, L) & _near(y, 0.0))
    builder.boundary_set('top-load-band', lambda x, y: _near(y, H) & (np.abs(x - 0.5 * L) <= h + 1e-9))
    builder.boundary_set('upper-flange-inner', lambda x, y: _near(y, H - T) & (x >= T - 1e-9) & (x <= L - T + 1e-9))
    builder.boundary_set('lower-flange-inner', lambda x, y: _near(y, T) & (x >= T - 1e-9) & (x <= L - T + 1e-9))
    return builder.build()


# -------------------------------------------------------
# C-BOX
# -------------------------------------------------------
def c_box(refinement: int, solid: str = 'quad') -> PolygonalMesh:
    """
    C-shaped frame open to the right: left wall plus upper and lower beams,
    medium in the opening and in one column of cells right of the beams.

    As in the hollow box only the medium is subdivided by refinement; the
    frame keeps the base cell size.
    """
    _quad_only('c-box', solid)
    L, H, t, w, h = C_BOX['L'], C_BOX['H'], C_BOX['t'], C_BOX['column'], C_BOX['cell']
    builder = MeshBuilder()

    def in_opening(x, y):
        return x > t and t < y < H - t

    builder.grid(_line(0.0, L, _cells(L, h)), _line(0.0, H, _cells(H, h)), body_region(0), skip=in_opening)

    hm = h / 2 ** refinement
    builder.grid(_line(t, L, _cells(L - t, hm)), _line(t, H - t, _cells(H - 2 * t, hm)), MEDIUM)
    builder.grid(_line(L, L + w, _cells(w, hm)), _line(0.0, H, _cells(H, hm)), MEDIUM)

    builder.boundary_set('left-wall', lambda x, y: _near(x, 0.0))
    builder.boundary_set('right-top-point', lambda x, y: _near(x, L) & _near(y, H))
    builder.boundary_set('upper-beam-inner', lambda x, y: _near(y, H - t) & (x >= t - 1e-9) & (x <= L + 1e-9))
    builder.boundary_set('lower-beam-inner', lambda x, y: _near(y, t) & (x >= t - 1e-9) & (x <= L + 1e-9))
    return builder.build()


# -------------------------------------------------------
# PUNCH (HALF MODEL)
# -------------------------------------------------------
def punch(refinement: int, solid: str = 'quad') -> PolygonalMesh:
    """
    Quarter-disk punch above a 2 x 1 block, symmetric about x = 0.

    Rays from the disk centre through evenly spaced points on the medium's
    bottom and right sides define the disk sectors, the medium cells and
    the block columns, so every interface is conforming. With
    solid='voronoi' the block is a clipped Voronoi tiling whose top-side
    corners still meet the ray points.
    """
    L, H, R, g = PUNCH['L'], PUNCH['H'], PUNCH['R'], PUNCH['clearance']
    f = 2 ** refinement
    yc = H + g + R
    n_bottom, n_side = 12 * f, 6 * f
    n_rings, n_layers, n_rows = 4 * f, 3 * f, 6 * f

    bottom = np.column_stack([_line(0.0, L, n_bottom), np.full(n_bottom + 1, H)])
    side = np.column_stack([np.full(n_side, L), _line(H, yc, n_side)[1:]])
    path = np.vstack([bottom, side])

    builder = MeshBuilder()
    builder.polar_block((0.0, yc), R, path, n_rings, n_layers, body_region(1))
    _solid_block(builder, solid, _line(0.0, L, n_bottom), _line(0.0, H, n_rows))

    builder.boundary_set('block-bottom', lambda x, y: _near(y, 0.0))
    builder.boundary_set('symmetry-axis', lambda x, y: _near(x, 0.0))
    builder.boundary_set('punch-top', lambda x, y: _near(y, yc) & (x <= R + 1e-9))
    builder.boundary_set('block-top', lambda x, y: _near(y, H))
    builder.boundary_set(
        'punch-arc',
        lambda x, y: _near(np.hypot(x, y - yc), R, 1e-7) & (y < yc + 1e-9),
    )
    return builder.build()


# -------------------------------------------------------
# MULTIPLE OBJECTS
# -------------------------------------------------------
def multi_object(refinement: int, solid: str = 'quad') -> PolygonalMesh:
    """
    Thin beam with a row of hard semicircles (flat side up) above it; each
    semicircle sits in its own medium cell and the cells abut along shared
    vertical sides. solid='voronoi' tiles the beam with Voronoi cells.
    """
    p = MULTI_OBJECT
    L, H, R, g = p['L'], p['H'], p['R'], p['clearance']
    width = p['cell_width']
    f = 2 ** refinement
    yc = H + g + R
    n_side, n_bottom = 3 * f, 8 * f
    n_rings, n_layers, n_rows = 2 * f, 2 * f, 2 * f
    centres = [float(i) for i in range(1, p['count'] + 1)]

    builder = MeshBuilder()
    for body_id, xc in enumerate(centres, start=1):
        x0, x1 = xc - 0.5 * width, xc + 0.5 * width
        left = np.column_stack([np.full(n_side, x0), _line(yc, H, n_side)[:-1]])
        bottom = np.column_stack([_line(x0, x1, n_bottom), np.full(n_bottom + 1, H)])
        right = np.column_stack([np.full(n_side, x1), _line(H, yc, n_side)[1:]])
        path = np.vstack([left, bottom, right])
        builder.polar_block((xc, yc), R, path, n_rings, n_layers, body_region(body_id))

    x_first, x_last = centres[0] - 0.5 * width, centres[-1] + 0.5 * width
    xs = np.concatenate([
        _line(0.0, x_first, _cells(x_first, width / n_bottom)),
        _line(x_first, x_last, n_bottom * len(centres))[1:],
        _line(x_last, L, _cells(L - x_last, width / n_bottom))[1:],
    ])
    _solid_block(builder, solid, xs, _line(0.0, H, n_rows))

    def on_top(x, y):
        mask = np.zeros_like(x, dtype=bool)
        for xc in centres:
            mask |= np.abs(x - xc) <= R + 1e-9
        return _near(y, yc) & mask

    def on_arc(x, y):
        mask = np.zeros_like(x, dtype=bool)
        for xc in centres:
            mask |= _near(np.hypot(x - xc, y - yc), R, 1e-7)
        return mask & (y < yc + 1e-9)

    builder.boundary_set('beam-left-end', lambda x, y: _near(x, 0.0))
    builder.boundary_set('beam-right-end', lambda x, y: _near(x, L))
    builder.boundary_set('semicircle-tops', on_top)
    builder.boundary_set('semicircle-arcs', on_arc)
    builder.boundary_set('beam-top', lambda x, y: _near(y, H))
    return builder.build()


GENERATORS = {
    'box-self-contact': box_self_contact,
    'c-box': c_box,
    'punch': punch,
    'multi-object': multi_object,
}


def generate_benchmark_mesh(problem: str, refinement: int = 0, solid: str = 'quad') -> PolygonalMesh:
    try:
        generator = GENERATORS[problem]
    except KeyError:
        raise UnknownBenchmarkError(
            f"unknown benchmark '{problem}', expected one of {sorted(GENERATORS)}"
        ) from None
    if refinement < 0:
        raise MeshError(f"refinement must be >= 0, got {refinement}")
    if solid not in SOLID_MESHES:
        raise MeshError(f"unknown solid mesh '{solid}', expected one of {list(SOLID_MESHES)}")

    mesh = generator(refinement, solid)
    diagnostics = validate(mesh)
    if diagnostics:
        raise MeshError(f"generated {problem} mesh is invalid: {diagnostics[:5]}")
    logger.info(f"Generated {problem} mesh (refinement {refinement}, {solid} solid): {mesh.summary()}")
    return mesh
