"""Polygonal meshes of the unit square.

A :class:`Mesh` is built from a vertex array and a list of counterclockwise
vertex loops. The edge table is derived: every edge is stored once, oriented
as it is first traversed (so its normal points out of the first adjacent
cell), together with the one or two adjacent cells.

Four mesh families are generated at ``n`` partitions per direction:

``m1``
    hexagonal mesh, dual to a uniform ``n x n`` grid split into triangles,
    closed by half cells on the boundary;
``m2``
    the same construction applied after remapping the grid nodes with
    ``x + 0.1 sin(2 pi x) sin(2 pi y)`` in both coordinates;
``m3``
    skewed quadrilaterals from a smooth boundary-preserving distortion of
    the grid with seeded phases;
``m4``
    interlocking non-convex octagons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from vemsupg.poly import polygon_centroid, signed_area

FAMILIES = ("m1", "m2", "m3", "m4")
M3_SEED = 20170503


class MeshError(ValueError):
    """Invalid mesh geometry or topology."""


class MeshParseError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Cell:
    vertex_ids: tuple[int, ...]
    edge_ids: tuple[int, ...]
    # +1 when the cell traverses the edge in its stored orientation
    edge_signs: tuple[int, ...]
    area: float
    centroid: np.ndarray
    diameter: float

    @property
    def n_edges(self) -> int:
        return len(self.vertex_ids)


@dataclass
class QualityReport:
    min_edge_ratio: float
    edge_ratio: np.ndarray
    star_shaped_ok: np.ndarray
    kernel_radius: np.ndarray
    max_vertices_per_cell: int
    rho: float

    @property
    def ok(self) -> bool:
        return bool(self.min_edge_ratio >= self.rho and self.star_shaped_ok.all())


class Mesh:
    """Immutable polygonal mesh.

    Parameters
    ----------
    vertices : (N, 2) array_like
    cells : sequence of sequences of vertex indices, counterclockwise
    family, n : optional provenance tags
    check : bool
        Reject cells that are clockwise, degenerate or self-intersecting.
    """

    def __init__(self, vertices, cells, family=None, n=None, check=True):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 2)
        self.vertices.setflags(write=False)
        self.family = family
        self.n = n
        loops = [tuple(int(v) for v in c) for c in cells]
        for ci, loop in enumerate(loops):
            if len(loop) < 3:
                raise MeshError(f"cell {ci} has fewer than 3 vertices")
            for v in loop:
                if v < 0 or v >= len(self.vertices):
                    raise MeshError(f"cell {ci} references missing vertex {v}")
            if check:
                _check_polygon(self.vertices[list(loop)], ci)
        self._build(loops)

    def _build(self, loops):
        edge_index: dict[tuple[int, int], int] = {}
        ev: list[tuple[int, int]] = []
        ec: list[list[int]] = []
        cells = []
        for ci, loop in enumerate(loops):
            eids, signs = [], []
            m = len(loop)
            for j in range(m):
                a, b = loop[j], loop[(j + 1) % m]
                key = (min(a, b), max(a, b))
                e = edge_index.get(key)
                if e is None:
                    e = len(ev)
                    edge_index[key] = e
                    ev.append((a, b))
                    ec.append([ci])
                    signs.append(1)
                else:
                    if len(ec[e]) >= 2:
                        raise MeshError(f"edge {key} shared by more than two cells (cell {ci})")
                    if ev[e] == (a, b):
                        raise MeshError(f"cell {ci} traverses edge {key} with the same "
                                        "orientation as its neighbour")
                    ec[e].append(ci)
                    signs.append(-1)
                eids.append(e)
            xy = self.vertices[list(loop)]
            diam = _diameter(xy)
            cells.append(Cell(loop, tuple(eids), tuple(signs), signed_area(xy),
                              polygon_centroid(xy) if signed_area(xy) > 0 else xy.mean(0),
                              diam))
        self.cells = cells
        self.edge_vertices = np.array(ev, dtype=np.int64).reshape(-1, 2)
        self.edge_cells = np.full((len(ev), 2), -1, dtype=np.int64)
        for e, cs in enumerate(ec):
            self.edge_cells[e, : len(cs)] = cs
        p0 = self.vertices[self.edge_vertices[:, 0]]
        p1 = self.vertices[self.edge_vertices[:, 1]]
        d = p1 - p0
        self.edge_lengths = np.hypot(d[:, 0], d[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            nrm = np.stack([d[:, 1], -d[:, 0]], axis=1) / self.edge_lengths[:, None]
        self.edge_normals = np.nan_to_num(nrm)
        self.edge_midpoints = 0.5 * (p0 + p1)
        self.is_boundary = self.edge_cells[:, 1] < 0
        for arr in (self.edge_vertices, self.edge_cells, self.edge_lengths,
                    self.edge_normals, self.edge_midpoints, self.is_boundary):
            arr.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)

    @property
    def h_max(self) -> float:
        return max(c.diameter for c in self.cells)

    def cell_xy(self, ci: int) -> np.ndarray:
        return self.vertices[list(self.cells[ci].vertex_ids)]

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.is_boundary)

    def total_area(self) -> float:
        return float(sum(c.area for c in self.cells))

    def __repr__(self):
        tag = f"{self.family}, n={self.n}, " if self.family else ""
        return f"Mesh({tag}{self.n_cells} cells, {self.n_edges} edges)"


def _diameter(xy: np.ndarray) -> float:
    d = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def _segments_cross(p, q, r, s) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    o1, o2 = orient(p, q, r), orient(p, q, s)
    o3, o4 = orient(r, s, p), orient(r, s, q)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def _check_polygon(xy: np.ndarray, ci: int) -> None:
    area = signed_area(xy)
    if not np.all(np.isfinite(xy)):
        raise MeshError(f"cell {ci} has non-finite coordinates")
    if area <= 0:
        raise MeshError(f"cell {ci} is not counterclockwise (signed area {area:.3e})")
    m = len(xy)
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_cross(xy[i], xy[(i + 1) % m], xy[j], xy[(j + 1) % m]):
                raise MeshError(f"cell {ci} is not a simple polygon")


# ---------------------------------------------------------------- generators


def generate(family: str, n: int) -> Mesh:
    """Build a mesh of (0,1)^2 from family ``m1``..``m4`` at resolution ``n``."""
    family = family.lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown mesh family {family!r}")
    if int(n) != n or n < 2:
        raise ValueError(f"resolution n must be an integer >= 2, got {n}")
    n = int(n)
    if family == "m1":
        return _dual_hexagonal(n, remap=False)
    if family == "m2":
        return _dual_hexagonal(n, remap=True)
    if family == "m3":
        return _skewed_quads(n)
    return _octagons(n)


def remap_m2(x, y):
    s = 0.1 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    return x + s, y + s


def _dual_hexagonal(n: int, remap: bool) -> Mesh:
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    gx, gy = ii.ravel() / n, jj.ravel() / n
    if remap:
        gx, gy = remap_m2(gx, gy)
    nodes = np.stack([gx, gy], axis=1)

    def nid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris.append((a, b, d))
            tris.append((b, c, d))
    tris = np.array(tris)
    bary = nodes[tris].mean(axis=1)

    incident: list[list[int]] = [[] for _ in range(len(nodes))]
    for t, tri in enumerate(tris):
        for v in tri:
            incident[v].append(t)

    verts = [tuple(p) for p in bary]
    vid_node: dict[int, int] = {}
    vid_mid: dict[tuple[int, int], int] = {}

    def node_vertex(v):
        if v not in vid_node:
            vid_node[v] = len(verts)
            verts.append(tuple(nodes[v]))
        return vid_node[v]

    def mid_vertex(a, b):
        key = (min(a, b), max(a, b))
        if key not in vid_mid:
            vid_mid[key] = len(verts)
            verts.append(tuple(0.5 * (nodes[a] + nodes[b])))
        return vid_mid[key]

    cells = []
    for i in range(n + 1):
        for j in range(n + 1):
            v = nid(i, j)
            p = nodes[v]
            on_b = i in (0, n) or j in (0, n)
            ts = incident[v]
            if not on_b:
                ang = [math.atan2(bary[t][1] - p[1], bary[t][0] - p[0]) for t in ts]
                cells.append([ts[k] for k in np.argsort(ang)])
                continue
            # inward direction of the boundary vertex
            inward = np.array([(i == 0) - (i == n), (j == 0) - (j == n)], dtype=float)
            nbrs = []
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a <= n and 0 <= b <= n:
                    along_boundary = (i in (0, n) and a == i) or (j in (0, n) and b == j)
                    if along_boundary:
                        nbrs.append(nid(a, b))
            pts = [(t, bary[t]) for t in ts] + [(("m", w), 0.5 * (p + nodes[w])) for w in nbrs]

            def key(item):
                d = item[1] - p
                return math.atan2(inward[0] * d[1] - inward[1] * d[0], inward @ d)

            pts.sort(key=key)
            loop = [node_vertex(v)]
            for tag, _ in pts:
                if isinstance(tag, tuple):
                    loop.append(mid_vertex(v, tag[1]))
                else:
                    loop.append(tag)
            cells.append(loop)
    return Mesh(np.array(verts), cells, family="m2" if remap else "m1", n=n)


def _m3_map(x, y, amplitude=0.06):
    ph = np.random.default_rng(M3_SEED).uniform(0.0, 2 * np.pi, size=2)
    xn = x + amplitude * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y + ph[0])
    yn = y + amplitude * np.sin(2 * np.pi * y) * np.sin(2 * np.pi * x + ph[1])
    return xn, yn


def _skewed_quads(n: int) -> Mesh:
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    x, y = _m3_map(ii.ravel() / n, jj.ravel() / n)
    # alternate-row skew: interior nodes of odd rows slide along x
    slide = 0.3 / n * np.where((jj.ravel() % 2 == 1) & (ii.ravel() > 0) & (ii.ravel() < n), 1.0, 0.0)
    x = x + slide
    verts = np.stack([x, y], axis=1)

    def nid(i, j):
        return i * (n + 1) + j

    cells = [[nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)]
             for j in range(n) for i in range(n)]
    return Mesh(verts, cells, family="m3", n=n)


def _octagons(n: int, dent: float = 0.2) -> Mesh:
    w = 1.0 / n
    d = dent * w
    verts: list[tuple[float, float]] = []
    corner = {}
    for i in range(n + 1):
        for j in range(n + 1):
            corner[i, j] = len(verts)
            verts.append((i * w, j * w))
    hmid = {}
    for i in range(n):
        for j in range(n + 1):
            off = d if 0 < j < n else 0.0
            hmid[i, j] = len(verts)
            verts.append(((i + 0.5) * w, j * w + off))
    vmid = {}
    for i in range(n + 1):
        for j in range(n):
            off = d if 0 < i < n else 0.0
            vmid[i, j] = len(verts)
            verts.append((i * w + off, (j + 0.5) * w))
    cells = []
    for j in range(n):
        for i in range(n):
            cells.append([corner[i, j], hmid[i, j], corner[i + 1, j], vmid[i + 1, j],
                          corner[i + 1, j + 1], hmid[i, j + 1], corner[i, j + 1], vmid[i, j]])
    return Mesh(np.array(verts), cells, family="m4", n=n)


# ---------------------------------------------------------------- quality


def kernel_radius(xy: np.ndarray) -> float:
    """Radius of the largest disk inside the kernel of a CCW polygon.

    The kernel is the intersection of the inner half-planes of all sides;
    the Chebyshev centre is found by linear programming.
    """
    nxt = np.roll(xy, -1, axis=0)
    d = nxt - xy
    length = np.hypot(d[:, 0], d[:, 1])
    keep = length > 0
    # inner half-plane of side i: n_i . (x - p_i) <= 0, n_i outward
    nrm = np.stack([d[keep, 1], -d[keep, 0]], axis=1) / length[keep, None]
    b = np.einsum("ij,ij->i", nrm, xy[keep])
    A = np.hstack([nrm, np.ones((nrm.shape[0], 1))])
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=A, b_ub=b,
                  bounds=[(None, None), (None, None), (0, None)], method="highs")
    if res.status != 0:
        return 0.0
    return float(res.x[2])


def validate(mesh: Mesh, rho: float = 0.1) -> QualityReport:
    """Check the regularity assumptions on every cell (report only)."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    ratios = np.empty(mesh.n_cells)
    radii = np.empty(mesh.n_cells)
    for ci, cell in enumerate(mesh.cells):
        lengths = mesh.edge_lengths[list(cell.edge_ids)]
        ratios[ci] = lengths.min() / cell.diameter if cell.diameter > 0 else 0.0
        radii[ci] = kernel_radius(mesh.cell_xy(ci))
    diam = np.array([c.diameter for c in mesh.cells])
    return QualityReport(
        min_edge_ratio=float(ratios.min()),
        edge_ratio=ratios,
        star_shaped_ok=radii >= rho * diam,
        kernel_radius=radii,
        max_vertices_per_cell=max(c.n_edges for c in mesh.cells),
        rho=rho,
    )


# ---------------------------------------------------------------- file format


def write_mesh(mesh: Mesh, path) -> None:
    lines = ["vem-mesh 1", f"vertices {len(mesh.vertices)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"cells {mesh.n_cells}")
    lines += [" ".join(map(str, c.vertex_ids)) for c in mesh.cells]
    bnd = mesh.boundary_edges()
    lines.append(f"boundary {len(bnd)}")
    lines += [f"{a} {b}" for a, b in mesh.edge_vertices[bnd].tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path) -> Mesh:
    text = Path(path).read_text(encoding="utf-8")
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, ln) for i, ln in rows if ln]
    if not rows:
        raise MeshParseError("empty mesh file", 1)
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(rows):
            last = rows[-1][0] if rows else 0
            raise MeshParseError("unexpected end of file", last + 1)
        row = rows[pos]
        pos += 1
        return row

    lineno, header = take()
    if header != "vem-mesh 1":
        raise MeshParseError(f"expected header 'vem-mesh 1', got {header!r}", lineno)

    def section(name):
        lineno, ln = take()
        parts = ln.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshParseError(f"expected '{name} <count>'", lineno)
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshParseError(f"bad count {parts[1]!r}", lineno) from None
        if count < 0:
            raise MeshParseError("negative count", lineno)
        return count

    nv = section("vertices")
    verts = []
    for _ in range(nv):
        lineno, ln = take()
        parts = ln.split()
        if len(parts) != 2:
            raise MeshParseError("vertex line needs two coordinates", lineno)
        try:
            verts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise MeshParseError(f"bad coordinate in {ln!r}", lineno) from None
    nc = section("cells")
    cells = []
    for ci in range(nc):
        lineno, ln = take()
        try:
            ids = [int(t) for t in ln.split()]
        except ValueError:
            raise MeshParseError(f"bad vertex index in {ln!r}", lineno) from None
        for v in ids:
            if not 0 <= v < nv:
                raise MeshError(f"cell {ci} references missing vertex {v} (line {lineno})")
        cells.append(ids)
    nb = section("boundary")
    bnd = set()
    for _ in range(nb):
        lineno, ln = take()
        try:
            a, b = (int(t) for t in ln.split())
        except ValueError:
            raise MeshParseError(f"boundary line needs two vertex indices: {ln!r}", lineno) from None
        bnd.add((min(a, b), max(a, b)))
    if pos != len(rows):
        raise MeshParseError("trailing content after boundary section", rows[pos][0])
    mesh = Mesh(np.array(verts), cells)
    found = {tuple(sorted(ev)) for ev in mesh.edge_vertices[mesh.is_boundary].tolist()}
    if found != bnd:
        raise MeshError("boundary section does not match the edges with a single cell")
    return mesh
