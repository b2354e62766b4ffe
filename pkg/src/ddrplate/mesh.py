"""Polygonal meshes: loading, validation, refinement.

Conventions fixed here and relied on everywhere else:

* each edge stores its vertices as the sorted pair (a, b) with a < b, the unit
  tangent t_E pointing from a to b, and the unit normal n_E obtained by
  rotating t_E by -pi/2, i.e. n_E = (t_y, -t_x);
* for an element T and one of its edges E, omega_TE = +1 when the
  counterclockwise traversal of the element boundary runs along +t_E, so that
  omega_TE * n_E is always the outward normal;
* edges are numbered lexicographically by their sorted vertex pair, which
  makes DOF numbering reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParseError, TopologyError

_LENGTH_TOL = 1e-14


@dataclass(frozen=True)
class Vertex:
    id: int
    x: np.ndarray  # shape (2,)


@dataclass(frozen=True)
class Edge:
    id: int
    vertices: tuple[int, int]  # sorted pair (a, b), a < b
    tangent: np.ndarray        # unit vector from a to b
    normal: np.ndarray         # tangent rotated by -pi/2
    length: float
    boundary: bool
    elements: tuple[int, ...] = ()


@dataclass(frozen=True)
class Element:
    id: int
    vertices: tuple[int, ...]        # boundary loop, counterclockwise
    edges: tuple[int, ...]           # edges[j] joins vertices[j], vertices[j+1]
    orientations: tuple[int, ...]    # omega_TE per local edge
    diameter: float
    area: float
    center: np.ndarray               # x_T
    inradius_ratio: float            # measured min dist(x_T, edges) / h_T


@dataclass
class PolygonalMesh:
    vertex_coords: np.ndarray        # (n_vertices, 2)
    vertices: list[Vertex]
    edges: list[Edge]
    elements: list[Element]
    boundary_edges: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    interior_edges: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    boundary_vertices: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    h: float = 0.0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def edge_endpoints(self, edge: Edge) -> tuple[np.ndarray, np.ndarray]:
        a, b = edge.vertices
        return self.vertex_coords[a], self.vertex_coords[b]

    def edge_midpoint(self, edge: Edge) -> np.ndarray:
        a, b = self.edge_endpoints(edge)
        return 0.5 * (a + b)

    def domain_area(self) -> float:
        return float(sum(el.area for el in self.elements))

    def element_vertex_coords(self, element: Element) -> np.ndarray:
        return self.vertex_coords[list(element.vertices)]


def _polygon_area_center(coords: np.ndarray) -> tuple[float, np.ndarray]:
    """Signed shoelace area and centroid of a closed polygon loop."""
    x, y = coords[:, 0], coords[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(np.sum(cross))
    if abs(area) < 1e-300:
        raise GeometryError("zero-area polygon")
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return area, np.array([cx, cy])


def _fan_is_positive(coords: np.ndarray, center: np.ndarray, tol: float = 1e-12) -> bool:
    """Every fan triangle (center, v_i, v_{i+1}) of a ccw loop has positive area."""
    a = coords - center
    b = np.roll(coords, -1, axis=0) - center
    areas = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    scale = np.max(np.abs(coords)) + 1.0
    return bool(np.all(areas > tol * scale**2))


def _point_in_polygon(coords: np.ndarray, p: np.ndarray) -> bool:
    x, y = p
    xs, ys = coords[:, 0], coords[:, 1]
    xn, yn = np.roll(xs, -1), np.roll(ys, -1)
    inside = False
    for x0, y0, x1, y1 in zip(xs, ys, xn, yn):
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * (x1 - x0):
                inside = not inside
    return inside


def _min_dist_to_boundary(coords: np.ndarray, p: np.ndarray) -> float:
    a = coords
    b = np.roll(coords, -1, axis=0)
    ab = b - a
    ap = p[None, :] - a
    t = np.clip(np.einsum("ij,ij->i", ap, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(proj - p[None, :], axis=1)))


def _star_center(coords: np.ndarray) -> np.ndarray:
    """Centroid when the cell is star-shaped w.r.t. it, else the best inner
    point found by sampling (largest inscribed-ball center estimate)."""
    _, centroid = _polygon_area_center(coords)
    if _fan_is_positive(coords, centroid):
        return centroid
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    best, best_r = None, -1.0
    n = 24
    for i in range(1, n):
        for j in range(1, n):
            p = lo + np.array([i, j]) / n * (hi - lo)
            if not _point_in_polygon(coords, p):
                continue
            if not _fan_is_positive(coords, p):
                continue
            r = _min_dist_to_boundary(coords, p)
            if r > best_r:
                best, best_r = p, r
    if best is None:
        raise GeometryError("cell is not star-shaped w.r.t. any sampled interior point")
    return best


def build_mesh(vertex_coords: np.ndarray, cell_loops: list[list[int]]) -> PolygonalMesh:
    """Assemble a validated mesh from vertex coordinates and ccw cell loops.

    Edges are derived from consecutive loop pairs, deduplicated by sorted
    vertex pair and numbered lexicographically.
    """
    coords = np.asarray(vertex_coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ParseError("vertices must be an (n, 2) array")
    n_v = coords.shape[0]
    used = {v for loop in cell_loops for v in loop}
    if len(used) != n_v:
        raise TopologyError("every vertex must belong to at least one cell")
    vertices = [Vertex(i, coords[i]) for i in range(n_v)]

    loops: list[list[int]] = []
    for c, loop in enumerate(cell_loops):
        loop = [int(v) for v in loop]
        if len(loop) < 3:
            raise TopologyError(f"cell {c} has fewer than 3 vertices")
        if any(v < 0 or v >= n_v for v in loop):
            raise ParseError(f"cell {c} references an unknown vertex")
        if len(set(loop)) != len(loop):
            raise TopologyError(f"cell {c} repeats a vertex in its loop")
        pts = coords[loop]
        area, _ = _polygon_area_center(pts)
        if area < 0:
            loop = loop[::-1]
        loops.append(loop)

    pair_cells: dict[tuple[int, int], list[int]] = {}
    for c, loop in enumerate(loops):
        for j in range(len(loop)):
            a, b = loop[j], loop[(j + 1) % len(loop)]
            key = (min(a, b), max(a, b))
            pair_cells.setdefault(key, []).append(c)

    edge_ids: dict[tuple[int, int], int] = {}
    edges: list[Edge] = []
    for eid, key in enumerate(sorted(pair_cells)):
        cells = pair_cells[key]
        if len(cells) > 2:
            raise TopologyError(f"edge {key} referenced by {len(cells)} cells")
        a, b = key
        vec = coords[b] - coords[a]
        length = float(np.linalg.norm(vec))
        if length < _LENGTH_TOL:
            raise GeometryError(f"edge {key} has zero length")
        t = vec / length
        n = np.array([t[1], -t[0]])
        edge_ids[key] = eid
        edges.append(Edge(eid, key, t, n, length, len(cells) == 1, tuple(cells)))

    elements: list[Element] = []
    for c, loop in enumerate(loops):
        pts = coords[loop]
        area, _ = _polygon_area_center(pts)
        center = _star_center(pts)
        diam = float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)))
        eids, omegas = [], []
        for j in range(len(loop)):
            a, b = loop[j], loop[(j + 1) % len(loop)]
            eid = edge_ids[(min(a, b), max(a, b))]
            eids.append(eid)
            # ccw traversal a->b agrees with t_E iff a is the lower vertex id
            omegas.append(1 if a < b else -1)
        rho = _min_dist_to_boundary(pts, center) / diam
        elements.append(Element(c, tuple(loop), tuple(eids), tuple(omegas),
                                diam, area, center, rho))

    boundary = np.array([e.id for e in edges if e.boundary], dtype=int)
    interior = np.array([e.id for e in edges if not e.boundary], dtype=int)
    bverts = sorted({v for e in edges if e.boundary for v in e.vertices})
    mesh = PolygonalMesh(
        vertex_coords=coords,
        vertices=vertices,
        edges=edges,
        elements=elements,
        boundary_edges=boundary,
        interior_edges=interior,
        boundary_vertices=np.array(bverts, dtype=int),
        h=max(el.diameter for el in elements),
    )
    _validate(mesh)
    return mesh


def _validate(mesh: PolygonalMesh) -> None:
    for el in mesh.elements:
        if el.area <= 0:
            raise GeometryError(f"element {el.id} has non-positive area")
        for eid, om in zip(el.edges, el.orientations):
            edge = mesh.edges[eid]
            out = (mesh.edge_midpoint(edge) - el.center) @ (om * edge.normal)
            if out <= 0:
                raise GeometryError(
                    f"element {el.id}, edge {eid}: omega*n_E is not outward")
    for edge in mesh.edges:
        n_inc = len(edge.elements)
        if edge.boundary and n_inc != 1:
            raise TopologyError(f"boundary edge {edge.id} has {n_inc} elements")
        if not edge.boundary:
            if n_inc != 2:
                raise TopologyError(f"interior edge {edge.id} has {n_inc} elements")
            oms = [mesh.elements[c].orientations[mesh.elements[c].edges.index(edge.id)]
                   for c in edge.elements]
            if oms[0] + oms[1] != 0:
                raise TopologyError(
                    f"interior edge {edge.id}: incident orientations do not cancel")


def load_mesh(path: str, fmt: str = "json") -> PolygonalMesh:
    """Load a mesh from file; ``fmt`` is 'json' (canonical) or 'typ2'."""
    if fmt == "json":
        return _load_json(path)
    if fmt == "typ2":
        return _load_typ2(path)
    raise ParseError(f"unknown mesh format {fmt!r}")


def _load_json(path: str) -> PolygonalMesh:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ParseError(f"cannot read mesh file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON mesh {path}: {exc}") from exc
    try:
        verts = np.asarray(data["vertices"], dtype=float)
        cells = [list(c) for c in data["cells"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"mesh {path} missing 'vertices'/'cells': {exc}") from exc
    return build_mesh(verts, cells)


def _load_typ2(path: str) -> PolygonalMesh:
    """FVCA-style text meshes: vertex count, coordinate lines, cell count, then
    one line per cell as 'm v_1 ... v_m' with 1-based vertex indices. Header
    words ('Vertices', 'cells', ...) are skipped."""
    try:
        with open(path) as f:
            tokens = []
            for line in f:
                line = line.split("#", 1)[0]
                tokens.extend(line.split())
    except OSError as exc:
        raise ParseError(f"cannot read mesh file {path}: {exc}") from exc
    nums = []
    for tok in tokens:
        try:
            nums.append(float(tok))
        except ValueError:
            continue
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(nums):
            raise ParseError(f"truncated typ2 mesh {path}")
        out = nums[pos:pos + n]
        pos += n
        return out

    n_v = int(take(1)[0])
    if n_v <= 0:
        raise ParseError(f"typ2 mesh {path}: invalid vertex count")
    verts = np.array(take(2 * n_v)).reshape(n_v, 2)
    n_c = int(take(1)[0])
    cells = []
    for _ in range(n_c):
        m = int(take(1)[0])
        cells.append([int(v) - 1 for v in take(m)])
    return build_mesh(verts, cells)


def save_mesh(mesh: PolygonalMesh, path: str) -> None:
    data = {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertex_coords],
        "cells": [list(el.vertices) for el in mesh.elements],
    }
    with open(path, "w") as f:
        json.dump(data, f)


def uniform_refine(mesh: PolygonalMesh) -> PolygonalMesh:
    """Split every element into its fan of triangles from x_T to each edge."""
    coords = [tuple(p) for p in mesh.vertex_coords]
    cells: list[list[int]] = []
    for el in mesh.elements:
        pts = mesh.element_vertex_coords(el)
        if not _fan_is_positive(pts, el.center):
            raise GeometryError(f"element {el.id} not star-shaped w.r.t. its center")
        cid = len(coords)
        coords.append((float(el.center[0]), float(el.center[1])))
        loop = el.vertices
        for j in range(len(loop)):
            cells.append([loop[j], loop[(j + 1) % len(loop)], cid])
    return build_mesh(np.array(coords), cells)


def triangular_mesh(n: int) -> PolygonalMesh:
    """Structured triangulation of (0,1)^2: n x n squares, each cut along the
    (i,j)->(i+1,j+1) diagonal. Mesh size h = sqrt(2)/n."""
    if n < 1:
        raise ParseError("triangular_mesh requires n >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    verts = np.array([[x, y] for y in xs for x in xs])
    vid = lambda i, j: j * (n + 1) + i
    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append([v00, v10, v11])
            cells.append([v00, v11, v01])
    return build_mesh(verts, cells)
