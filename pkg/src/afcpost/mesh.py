"""Conforming triangulations: storage, geometry metrics, Delaunay check and
red-green refinement."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

DIRICHLET = "D"
NEUMANN = "N"

# local edge k is opposite local vertex k
_EDGE_LOCAL = np.array([[1, 2], [2, 0], [0, 1]])

# prefactor of the 2d edge-trace constant: 4*sqrt(2)*(1+sqrt(2))
_TRACE_FACTOR = 4.0 * np.sqrt(2.0) * (1.0 + np.sqrt(2.0))


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Admissible triangulation of a polygonal domain.

    ``boundary`` holds boundary edges as vertex pairs with one marker each
    (``"D"`` or ``"N"``). ``green_parent`` holds, for every cell produced by
    green bisection, the vertex triple of the cell it was cut from; regular
    cells carry ``-1``.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray
    boundary_markers: np.ndarray
    green_parent: np.ndarray = field(default=None)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        cells = np.ascontiguousarray(self.cells, dtype=np.int64).reshape(-1, 3)
        boundary = np.ascontiguousarray(self.boundary, dtype=np.int64).reshape(-1, 2)
        markers = np.asarray(self.boundary_markers, dtype="<U1").reshape(-1)
        if self.green_parent is None:
            green = -np.ones_like(cells)
        else:
            green = np.ascontiguousarray(self.green_parent, dtype=np.int64).reshape(-1, 3)
        if markers.shape[0] != boundary.shape[0]:
            raise MeshError("one marker per boundary edge required")
        if not np.isin(markers, (DIRICHLET, NEUMANN)).all():
            raise MeshError("boundary markers must be 'D' or 'N'")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise MeshError("cell references a vertex out of range")
        for name, arr in (("vertices", vertices), ("cells", cells), ("boundary", boundary),
                          ("boundary_markers", markers), ("green_parent", green)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    # -- topology -----------------------------------------------------------

    def _edge_keys(self, pairs: np.ndarray) -> np.ndarray:
        lo = np.minimum(pairs[..., 0], pairs[..., 1])
        hi = np.maximum(pairs[..., 0], pairs[..., 1])
        return lo * self.n_vertices + hi

    @cached_property
    def _edge_data(self):
        local = self.cells[:, _EDGE_LOCAL]  # (M, 3, 2)
        keys = self._edge_keys(local).ravel()
        ukeys, inv = np.unique(keys, return_inverse=True)
        edges = np.stack([ukeys // self.n_vertices, ukeys % self.n_vertices], axis=1)
        cell_edges = inv.reshape(-1, 3)

        order = np.argsort(inv, kind="stable")
        counts = np.bincount(inv, minlength=len(ukeys))
        if counts.max(initial=0) > 2:
            raise MeshError("edge shared by more than two cells")
        first = np.zeros(len(ukeys), dtype=np.int64)
        first[1:] = np.cumsum(counts)[:-1]
        edge_cells = -np.ones((len(ukeys), 2), dtype=np.int64)
        owners = order // 3
        edge_cells[:, 0] = owners[first]
        two = counts == 2
        edge_cells[two, 1] = owners[first[two] + 1]
        return ukeys, edges, cell_edges, edge_cells

    @property
    def edges(self) -> np.ndarray:
        """Edges as vertex pairs ``(lo, hi)``, sorted by key."""
        return self._edge_data[1]

    @property
    def cell_edges(self) -> np.ndarray:
        """Edge index of local edge ``k`` (opposite local vertex ``k``)."""
        return self._edge_data[2]

    @property
    def edge_cells(self) -> np.ndarray:
        """The one or two cells adjacent to each edge; ``-1`` pads boundary edges."""
        return self._edge_data[3]

    def edge_index(self, a, b) -> np.ndarray:
        """Indices of edges with endpoints ``(a, b)``; raises if one is missing."""
        keys = self._edge_keys(np.stack([np.asarray(a), np.asarray(b)], axis=-1))
        ukeys = self._edge_data[0]
        pos = np.searchsorted(ukeys, keys)
        pos = np.minimum(pos, len(ukeys) - 1)
        if not np.all(ukeys[pos] == keys):
            raise MeshError("requested edge is not in the mesh")
        return pos

    @cached_property
    def cell_neighbors(self) -> np.ndarray:
        """Neighbour across local edge ``k``; ``-1`` on the boundary."""
        ec = self.edge_cells[self.cell_edges]  # (M, 3, 2)
        me = np.arange(self.n_cells)[:, None]
        return np.where(ec[:, :, 0] == me, ec[:, :, 1], ec[:, :, 0])

    @cached_property
    def edge_markers(self) -> np.ndarray:
        """Per-edge marker: ``""`` interior, ``"D"`` or ``"N"`` on the boundary."""
        out = np.full(self.n_edges, "", dtype="<U1")
        if len(self.boundary):
            out[self.edge_index(self.boundary[:, 0], self.boundary[:, 1])] = self.boundary_markers
        return out

    @cached_property
    def dirichlet_vertices(self) -> np.ndarray:
        """Boolean mask of vertices lying on a Dirichlet edge."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        sel = self.boundary_markers == DIRICHLET
        mask[self.boundary[sel].ravel()] = True
        return mask

    # -- edge geometry --------------------------------------------------------

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def edge_tangents(self) -> np.ndarray:
        """Unit tangents oriented from the lower to the higher vertex index."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return d / self.edge_lengths[:, None]

    # -- cell geometry --------------------------------------------------------

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def gradients(self) -> np.ndarray:
        """Gradients of the three P1 basis functions on every cell, shape (M, 3, 2)."""
        p = self.vertices[self.cells]
        two_area = 2.0 * self.areas
        # grad(lambda_k) = rot90(p_{k+2} - p_{k+1}) / (2|K|)
        d = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
        return np.stack([-d[:, :, 1], d[:, :, 0]], axis=-1) / two_area[:, None, None]

    @cached_property
    def local_edge_lengths(self) -> np.ndarray:
        """Length of the edge opposite each local vertex, shape (M, 3)."""
        return self.edge_lengths[self.cell_edges]

    @cached_property
    def diameters(self) -> np.ndarray:
        return self.local_edge_lengths.max(axis=1)

    @property
    def h_max(self) -> float:
        return float(self.diameters.max())


@dataclass(frozen=True)
class CellGeometry:
    """Per-cell shape metrics (arrays of length ``n_cells``).

    ``rho`` is the inscribed-circle diameter; ``c_edge`` (units 1/length)
    bounds ``sum_E ||grad(phi).t_E||_E^2 <= c_edge ||grad(phi)||_K^2`` for
    linear ``phi``.
    """

    h: np.ndarray
    rho: np.ndarray
    area: np.ndarray
    max_cos: np.ndarray
    c_edge: np.ndarray

    @property
    def c_edge_max(self) -> float:
        return float(self.c_edge.max())

    @property
    def c_shrg(self) -> float:
        """Smallest ratio rho_K / h_K over the mesh."""
        return float((self.rho / self.h).min())

    @property
    def c_cos(self) -> float:
        return float(self.max_cos.max())


def cosines(mesh: Mesh) -> np.ndarray:
    """Cosine of the interior angle at each local vertex, shape (M, 3)."""
    lengths = mesh.local_edge_lengths
    l0, l1, l2 = lengths[:, 0], lengths[:, 1], lengths[:, 2]
    c0 = (l1**2 + l2**2 - l0**2) / (2 * l1 * l2)
    c1 = (l2**2 + l0**2 - l1**2) / (2 * l2 * l0)
    c2 = (l0**2 + l1**2 - l2**2) / (2 * l0 * l1)
    return np.clip(np.stack([c0, c1, c2], axis=1), -1.0, 1.0)


def compute_cell_geometry(mesh: Mesh) -> CellGeometry:
    area = mesh.areas
    if np.any(area <= 0):
        bad = int(np.flatnonzero(area <= 0)[0])
        raise MeshError(f"cell {bad} is degenerate or clockwise (area {area[bad]:.3e})")
    lengths = mesh.local_edge_lengths
    # rho is the diameter of the inscribed circle, 2 * (2|K| / perimeter)
    rho = 4.0 * area / lengths.sum(axis=1)
    max_cos = cosines(mesh).max(axis=1)
    c_edge = _TRACE_FACTOR * area / ((1.0 - max_cos) * rho**3)
    return CellGeometry(h=lengths.max(axis=1), rho=rho, area=area, max_cos=max_cos, c_edge=c_edge)


def is_delaunay(mesh: Mesh, tol: float = 1e-12) -> tuple[bool, np.ndarray]:
    """Check the opposite-angle criterion on all interior edges.

    Returns the verdict and the indices of the violating edges.
    """
    angles = np.arccos(cosines(mesh))
    ec = mesh.edge_cells
    interior = np.flatnonzero(ec[:, 1] >= 0)
    total = np.zeros(len(interior))
    for side in (0, 1):
        c = ec[interior, side]
        k = np.argmax(mesh.cell_edges[c] == interior[:, None], axis=1)
        total += angles[c, k]
    bad = interior[total > np.pi + tol]
    return bad.size == 0, bad


def min_angle(mesh: Mesh) -> float:
    return float(np.arccos(cosines(mesh).max()))


def check_admissible(mesh: Mesh) -> None:
    """Raise :class:`MeshError` unless the mesh is conforming and consistent."""
    if np.any(mesh.areas <= 0):
        raise MeshError("non-positive cell area or clockwise orientation")
    ec = mesh.edge_cells
    on_boundary = ec[:, 1] < 0
    if len(mesh.boundary):
        bidx = mesh.edge_index(mesh.boundary[:, 0], mesh.boundary[:, 1])
    else:
        bidx = np.zeros(0, dtype=np.int64)
    if len(np.unique(bidx)) != len(bidx):
        raise MeshError("boundary edge listed twice")
    listed = np.zeros(mesh.n_edges, dtype=bool)
    listed[bidx] = True
    if np.any(listed != on_boundary):
        raise MeshError("hanging node or unmarked boundary edge")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.cells.ravel()] = True
    if not used.all():
        raise MeshError("vertex not referenced by any cell")


# -- construction ---------------------------------------------------------------


def unit_square_macro(marker=None) -> Mesh:
    """Unit square cut into two triangles along the diagonal (0,0)-(1,1).

    ``marker(x, y)`` may return ``"D"`` or ``"N"`` for each boundary edge
    midpoint; by default the whole boundary is Dirichlet.
    """
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    cells = np.array([[0, 1, 2], [0, 2, 3]])
    boundary = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    mesh = Mesh(vertices, cells, boundary, [DIRICHLET] * 4)
    return remark_boundary(mesh, marker) if marker is not None else mesh


def remark_boundary(mesh: Mesh, marker) -> Mesh:
    """Return a copy with boundary markers taken from ``marker(x, y)`` at edge midpoints."""
    mid = 0.5 * (mesh.vertices[mesh.boundary[:, 0]] + mesh.vertices[mesh.boundary[:, 1]])
    markers = [marker(x, y) for x, y in mid]
    return Mesh(mesh.vertices, mesh.cells, mesh.boundary, markers, mesh.green_parent)


def refine_uniform(mesh: Mesh, times: int = 1) -> Mesh:
    """Red refinement of every cell, ``times`` times."""
    for _ in range(times):
        mesh = _subdivide(mesh, mesh.cells, np.ones(mesh.n_cells, dtype=bool), {})
    return mesh


class _VertexIndex:
    """Exact coordinate lookup for a growing vertex set.

    Midpoints are always computed as ``0.5 * (p + q)``, so repeated
    computations give bitwise identical coordinates.
    """

    def __init__(self, vertices: np.ndarray):
        self.vertices = np.array(vertices, dtype=float)
        self._rebuild()

    def _rebuild(self):
        z = self.vertices[:, 0] + 1j * self.vertices[:, 1]
        self._order = np.argsort(z, kind="stable")
        self._sorted = z[self._order]

    def find(self, points: np.ndarray) -> np.ndarray:
        """Vertex index of each point, ``-1`` where absent."""
        if len(points) == 0:
            return np.zeros(0, dtype=np.int64)
        z = points[:, 0] + 1j * points[:, 1]
        pos = np.minimum(np.searchsorted(self._sorted, z), len(self._sorted) - 1)
        hit = self._sorted[pos] == z
        return np.where(hit, self._order[pos], -1)

    def add(self, points: np.ndarray) -> np.ndarray:
        """Indices of ``points``, appending the missing ones in order of first appearance."""
        idx = self.find(points)
        miss = np.flatnonzero(idx < 0)
        if miss.size:
            z = points[miss, 0] + 1j * points[miss, 1]
            _, first, inv = np.unique(z, return_index=True, return_inverse=True)
            rank = np.empty(len(first), dtype=np.int64)
            rank[np.argsort(first, kind="stable")] = np.arange(len(first))
            new_ids = len(self.vertices) + rank
            idx[miss] = new_ids[inv.ravel()]
            fresh = np.empty((len(first), 2))
            fresh[rank] = points[miss[first]]
            self.vertices = np.vstack([self.vertices, fresh])
            self._rebuild()
        return idx


def _edge_midpoints(V: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Midpoint coordinates of the local edges, shape (M, 3, 2); edge k is opposite vertex k."""
    a = V[cells[:, _EDGE_LOCAL[:, 0]]]
    b = V[cells[:, _EDGE_LOCAL[:, 1]]]
    return 0.5 * (a + b)


def _split_state(index: _VertexIndex, cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Existing midpoint per local edge (-1 if none) and whether a half is split again."""
    V = index.vertices
    mids = index.find(_edge_midpoints(V, cells).reshape(-1, 2)).reshape(-1, 3)
    deep = np.zeros(len(cells), dtype=bool)
    r, k = np.nonzero(mids >= 0)
    if r.size:
        a = cells[r, _EDGE_LOCAL[k, 0]]
        b = cells[r, _EDGE_LOCAL[k, 1]]
        m = mids[r, k]
        h1 = index.find(0.5 * (V[a] + V[m]))
        h2 = index.find(0.5 * (V[m] + V[b]))
        np.logical_or.at(deep, r, (h1 >= 0) | (h2 >= 0))
    return mids, deep


def refine_adaptive(mesh: Mesh, marked) -> Mesh:
    """Red refinement of the marked cells with green closure.

    Green cells are never refined further: green pairs are first merged
    back into their parents, and a marked green cell marks its parent.
    The red closure refines every cell with two or more split edges or with
    a split edge whose half is split again; cells with exactly one split
    edge are finally bisected (green).
    """
    marked = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked,
                                  dtype=np.int64).ravel())
    if marked.size == 0:
        raise ValueError("no cells marked")
    if marked.min() < 0 or marked.max() >= mesh.n_cells:
        raise ValueError("marked cell index out of range")
    flag = np.zeros(mesh.n_cells, dtype=bool)
    flag[marked] = True

    green = mesh.green_parent[:, 0] >= 0
    regular = np.flatnonzero(~green)
    leaves = [mesh.cells[regular]]
    leaf_flag = [flag[regular]]
    if green.any():
        gidx = np.flatnonzero(green)
        parents, inv = np.unique(mesh.green_parent[gidx], axis=0, return_inverse=True)
        inv = inv.ravel()
        if np.any(np.bincount(inv) != 2):
            raise MeshError("green cells must come in sibling pairs")
        pflag = np.zeros(len(parents), dtype=bool)
        np.logical_or.at(pflag, inv, flag[gidx])
        leaves.append(parents)
        leaf_flag.append(pflag)
    cells = np.concatenate(leaves)
    red = np.concatenate(leaf_flag)

    index = _VertexIndex(mesh.vertices)
    bmark = {(min(a, b), max(a, b)): m for (a, b), m in
             zip(mesh.boundary.tolist(), mesh.boundary_markers.tolist())}
    while red.any():
        rc = cells[red]
        n_before = len(index.vertices)
        m = index.add(_edge_midpoints(index.vertices, rc).reshape(-1, 2)).reshape(-1, 3)
        # boundary edges split for the first time pass their marker on
        new_r, new_k = np.nonzero(m >= n_before)
        for a, b, v in zip(rc[new_r, _EDGE_LOCAL[new_k, 0]].tolist(),
                           rc[new_r, _EDGE_LOCAL[new_k, 1]].tolist(), m[new_r, new_k].tolist()):
            mk = bmark.get((min(a, b), max(a, b)))
            if mk is not None:
                bmark[(min(a, v), max(a, v))] = mk
                bmark[(min(v, b), max(v, b))] = mk
        v0, v1, v2 = rc[:, 0], rc[:, 1], rc[:, 2]
        m0, m1, m2 = m[:, 0], m[:, 1], m[:, 2]
        children = np.stack([
            np.stack([v0, m2, m1], axis=1), np.stack([m2, v1, m0], axis=1),
            np.stack([m1, m0, v2], axis=1), np.stack([m0, m1, m2], axis=1)], axis=1).reshape(-1, 3)
        # keep children next to where their parent was
        pieces = np.where(red, 4, 1)
        out = np.empty((pieces.sum(), 3), dtype=np.int64)
        start = np.concatenate([[0], np.cumsum(pieces)[:-1]])
        out[start[~red]] = cells[~red]
        child_pos = (start[red][:, None] + np.arange(4)).ravel()
        out[child_pos] = children
        cells = out
        mids, deep = _split_state(index, cells)
        red = ((mids >= 0).sum(axis=1) >= 2) | deep

    mids, _ = _split_state(index, cells)
    nsplit = (mids >= 0).sum(axis=1)
    g = np.flatnonzero(nsplit == 1)
    k = np.argmax(mids[g] >= 0, axis=1)
    a = cells[g, k]
    b = cells[g, (k + 1) % 3]
    c = cells[g, (k + 2) % 3]
    mm = mids[g, k]
    pieces = np.where(nsplit == 1, 2, 1)
    start = np.concatenate([[0], np.cumsum(pieces)[:-1]])
    out = np.empty((pieces.sum(), 3), dtype=np.int64)
    parent = -np.ones_like(out)
    keep = nsplit == 0
    out[start[keep]] = cells[keep]
    out[start[g]] = np.stack([a, b, mm], axis=1)
    out[start[g] + 1] = np.stack([a, mm, c], axis=1)
    parent[start[g]] = cells[g]
    parent[start[g] + 1] = cells[g]

    vertices = index.vertices
    probe = Mesh(vertices, out, np.zeros((0, 2), dtype=np.int64), [])
    bedges = probe.edges[probe.edge_cells[:, 1] < 0]
    try:
        markers = [bmark[(int(p), int(q))] for p, q in bedges]
    except KeyError:
        raise MeshError("refinement produced a boundary edge without a marker") from None
    return Mesh(vertices, out, bedges, markers, parent)


def _subdivide(mesh: Mesh, cells: np.ndarray, red: np.ndarray, midpoints: dict) -> Mesh:
    """Refine ``cells`` (the unrefined base level) with the given red flags,
    closing with green bisection. ``midpoints`` maps already existing edge
    midpoints that must be kept."""
    n = mesh.n_vertices
    local = cells[:, _EDGE_LOCAL]
    keys = np.minimum(local[..., 0], local[..., 1]) * n + np.maximum(local[..., 0], local[..., 1])
    ukeys, inv = np.unique(keys.ravel(), return_inverse=True)
    cedge = inv.reshape(-1, 3)
    split = np.zeros(len(ukeys), dtype=bool)
    if midpoints:
        pre = np.array([a * n + b for a, b in midpoints], dtype=np.int64)
        split[np.searchsorted(ukeys, pre)] = True
    red = red.copy()
    while True:
        split[cedge[red].ravel()] = True
        nsplit = split[cedge].sum(axis=1)
        new_red = red | (nsplit >= 2)
        if np.array_equal(new_red, red):
            break
        red = new_red
    nsplit = split[cedge].sum(axis=1)

    # midpoint vertex of every split edge, new ones appended in edge order
    mid = -np.ones(len(ukeys), dtype=np.int64)
    for (a, b), v in midpoints.items():
        mid[np.searchsorted(ukeys, a * n + b)] = v
    new = np.flatnonzero(split & (mid < 0))
    mid[new] = n + np.arange(len(new))
    ea, eb = ukeys[new] // n, ukeys[new] % n
    vertices = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[ea] + mesh.vertices[eb])])

    out_cells = []
    out_green = []
    m = mid[cedge]  # (M, 3) midpoint opposite each local vertex, -1 if not split
    for idx in range(len(cells)):
        v0, v1, v2 = cells[idx]
        if red[idx]:
            m0, m1, m2 = m[idx]
            out_cells += [(v0, m2, m1), (m2, v1, m0), (m1, m0, v2), (m0, m1, m2)]
            out_green += [(-1, -1, -1)] * 4
        elif nsplit[idx] == 1:
            k = int(np.flatnonzero(m[idx] >= 0)[0])
            a, b, c = cells[idx][[k, (k + 1) % 3, (k + 2) % 3]]
            mm = m[idx, k]
            out_cells += [(a, b, mm), (a, mm, c)]
            out_green += [(v0, v1, v2)] * 2
        else:
            out_cells.append((v0, v1, v2))
            out_green.append((-1, -1, -1))

    bnd = []
    bmark = []
    if len(mesh.boundary):
        bkeys = np.minimum(mesh.boundary[:, 0], mesh.boundary[:, 1]) * n + np.maximum(
            mesh.boundary[:, 0], mesh.boundary[:, 1])
        pos = np.minimum(np.searchsorted(ukeys, bkeys), len(ukeys) - 1)
        # halves of a restored green parent edge are not base edges; they stay as they are
        is_base = ukeys[pos] == bkeys
        for (a, b), mk, p, base in zip(mesh.boundary, mesh.boundary_markers, pos, is_base):
            if base and split[p]:
                bnd += [(a, mid[p]), (mid[p], b)]
                bmark += [mk, mk]
            else:
                bnd.append((a, b))
                bmark.append(mk)
    return Mesh(vertices, np.array(out_cells, dtype=np.int64), np.array(bnd, dtype=np.int64),
                bmark, np.array(out_green, dtype=np.int64))


# -- ASCII I/O ----------------------------------------------------------------------


def write_mesh(mesh: Mesh, path) -> None:
    lines = ["$Nodes", str(mesh.n_vertices)]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.vertices.tolist())]
    lines += ["$Cells", str(mesh.n_cells)]
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.cells.tolist())]
    lines += ["$Boundary", str(len(mesh.boundary))]
    lines += [f"{i} {a} {b} {m}" for i, ((a, b), m) in
              enumerate(zip(mesh.boundary.tolist(), mesh.boundary_markers.tolist()))]
    green = np.flatnonzero(mesh.green_parent[:, 0] >= 0)
    if green.size:
        lines += ["$Green", str(green.size)]
        lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in zip(green.tolist(), mesh.green_parent[green].tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    tokens = Path(path).read_text().split("\n")
    tokens = [t.strip() for t in tokens if t.strip()]
    sections = {}
    i = 0
    while i < len(tokens):
        head = tokens[i]
        if not head.startswith("$"):
            raise MeshError(f"expected section header, got {head!r}")
        count = int(tokens[i + 1])
        sections[head] = [t.split() for t in tokens[i + 2:i + 2 + count]]
        i += 2 + count
    try:
        nodes = sections["$Nodes"]
        cells = sections["$Cells"]
        bnd = sections.get("$Boundary", [])
    except KeyError as exc:
        raise MeshError(f"missing section {exc}") from None
    vertices = np.zeros((len(nodes), 2))
    for row in nodes:
        vertices[int(row[0])] = float(row[1]), float(row[2])
    cell_arr = np.zeros((len(cells), 3), dtype=np.int64)
    for row in cells:
        cell_arr[int(row[0])] = [int(v) for v in row[1:4]]
    b_arr = np.zeros((len(bnd), 2), dtype=np.int64)
    markers = [""] * len(bnd)
    for row in bnd:
        b_arr[int(row[0])] = int(row[1]), int(row[2])
        markers[int(row[0])] = row[3]
    green = -np.ones_like(cell_arr)
    for row in sections.get("$Green", []):
        green[int(row[0])] = [int(v) for v in row[1:4]]
    return Mesh(vertices, cell_arr, b_arr, markers, green)
