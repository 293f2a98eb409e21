"""Simplex meshes: equidistant 1D grids and conforming triangulations.

Both mesh kinds expose the same topology arrays so the HDG assembly can be
written once for intervals and triangles:

``cells``        (nel, d+1) vertex indices per element
``facets``       (nf, d) sorted vertex indices per facet (nodes in 1D, edges in 2D)
``cell_facets``  (nel, d+1) facet opposite local vertex ``j``
``facet_cells``  (nf, 2) adjacent elements, ``-1`` marks the missing side
``facet_local``  (nf, 2) local index of the facet in each adjacent element
``boundary``     (nf,) True on facets with a single adjacent element
"""
from __future__ import annotations

from functools import cached_property
from pathlib import Path

import numpy as np

from .basis import simplex_geometry


class MeshError(ValueError):
    """Invalid mesh construction arguments."""


class MeshTopologyError(MeshError):
    """Non-conforming input: a facet is shared by more than two elements."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class SimplexMesh:
    """Common geometry/topology for straight-sided simplex meshes."""

    dim: int

    def __init__(self, vertices: np.ndarray, cells: np.ndarray):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        cells = np.asarray(cells, dtype=np.int64)
        if "dim" not in type(self).__dict__:
            self.dim = vertices.shape[1]
        if cells.ndim != 2 or cells.shape[1] != self.dim + 1:
            raise MeshError(f"cells must have {self.dim + 1} vertices each, got shape {cells.shape}")
        self.vertices = _readonly(vertices)
        self.cells = _readonly(cells)
        facets, facet_cells, facet_local, cell_facets = _facet_topology(cells, self.dim)
        self.facets = _readonly(facets)
        self.facet_cells = _readonly(facet_cells)
        self.facet_local = _readonly(facet_local)
        self.cell_facets = _readonly(cell_facets)
        self.boundary = _readonly(facet_cells[:, 1] < 0)

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def n_trace_dofs(self) -> int:
        """One P1 trace value per facet vertex: ``d`` per facet."""
        return self.n_facets * self.dim

    @cached_property
    def cell_coords(self) -> np.ndarray:
        """Vertex coordinates per cell, shape (nel, d+1, d)."""
        return _readonly(self.vertices[self.cells])

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        X = self.cell_coords
        if self.dim == 1:
            return _readonly(X[:, 1, 0] - X[:, 0, 0])
        e1 = X[:, 1] - X[:, 0]
        e2 = X[:, 2] - X[:, 0]
        return _readonly((e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) / 2)

    @cached_property
    def geometry(self) -> dict[str, np.ndarray]:
        """Volumes, barycentric gradients, facet normals and measures per cell."""
        vol = self.signed_volumes
        if np.any(np.abs(vol) < 1e-300) or np.any(vol < 0):
            bad = int(np.argmin(vol))
            raise MeshError(f"degenerate or inverted element {bad} (measure {vol[bad]:.3e})")
        geom = simplex_geometry(self.cell_coords)
        return {key: _readonly(val) for key, val in geom.items()}

    @property
    def volumes(self) -> np.ndarray:
        return self.geometry["volume"]

    @property
    def bary_grads(self) -> np.ndarray:
        """Gradients of the barycentric coordinates, shape (nel, d+1, d)."""
        return self.geometry["grads"]

    @property
    def normals(self) -> np.ndarray:
        """Outward unit normal of the facet opposite local vertex j, (nel, d+1, d)."""
        return self.geometry["normals"]

    @property
    def cell_facet_measures(self) -> np.ndarray:
        """Measure of the facet opposite local vertex j, (nel, d+1); 1 for points."""
        return self.geometry["facet_measures"]

    @cached_property
    def facet_measures(self) -> np.ndarray:
        if self.dim == 1:
            return _readonly(np.ones(self.n_facets))
        P = self.vertices[self.facets]
        return _readonly(np.linalg.norm(P[:, 1] - P[:, 0], axis=1))

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        X = self.cell_coords
        d = np.zeros(self.n_cells)
        for i in range(self.dim + 1):
            for j in range(i + 1, self.dim + 1):
                d = np.maximum(d, np.linalg.norm(X[:, i] - X[:, j], axis=1))
        return _readonly(d)

    @cached_property
    def facet_sizes(self) -> np.ndarray:
        """Length scale used by h-dependent penalties on each facet.

        Edge length in 2D. A node has no diameter, so 1D uses the largest
        adjacent element length.
        """
        if self.dim == 2:
            return self.facet_measures
        h = np.zeros(self.n_facets)
        for side in range(2):
            c = self.facet_cells[:, side]
            ok = c >= 0
            h[ok] = np.maximum(h[ok], self.cell_diameters[c[ok]])
        return _readonly(h)

    @property
    def h(self) -> float:
        return float(self.cell_diameters.max())

    def facet_local_vertices(self, j: int) -> list[int]:
        """Local vertex indices (in local order) spanning facet ``j``."""
        return [i for i in range(self.dim + 1) if i != j]

    @cached_property
    def trace_dof_map(self) -> np.ndarray:
        """Global trace dof for each (cell, facet j, facet vertex a), shape (nel, (d+1)*d).

        Facet dofs sit at the facet's vertices in the facet's canonical
        (sorted) order, so both neighbours address the same unknowns.
        """
        d = self.dim
        out = np.empty((self.n_cells, (d + 1) * d), dtype=np.int64)
        for j in range(d + 1):
            f = self.cell_facets[:, j]
            loc = self.facet_local_vertices(j)
            gv = self.cells[:, loc]  # (nel, d)
            if d == 1:
                out[:, j] = f
            else:
                lo_first = gv[:, 0] < gv[:, 1]
                out[:, 2 * j] = 2 * f + np.where(lo_first, 0, 1)
                out[:, 2 * j + 1] = 2 * f + np.where(lo_first, 1, 0)
        return _readonly(out)


def _facet_topology(cells: np.ndarray, dim: int):
    nel = cells.shape[0]
    keys = []
    for j in range(dim + 1):
        loc = [i for i in range(dim + 1) if i != j]
        keys.append(np.sort(cells[:, loc], axis=1))
    allf = np.concatenate(keys, axis=0)  # ordered by (j, cell)
    facets, inv, counts = np.unique(allf, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    if np.any(counts > 2):
        bad = facets[int(np.argmax(counts))]
        raise MeshTopologyError(f"facet {bad.tolist()} shared by {counts.max()} elements")
    cell_facets = inv.reshape(dim + 1, nel).T.copy()
    owner = np.tile(np.arange(nel), dim + 1)
    local = np.repeat(np.arange(dim + 1), nel)
    nf = facets.shape[0]
    facet_cells = -np.ones((nf, 2), dtype=np.int64)
    facet_local = -np.ones((nf, 2), dtype=np.int64)
    # stable sort keeps the lower (j, cell) occurrence first
    order = np.argsort(inv, kind="stable")
    sinv = inv[order]
    first = np.ones(len(sinv), dtype=bool)
    first[1:] = sinv[1:] != sinv[:-1]
    facet_cells[sinv[first], 0] = owner[order][first]
    facet_local[sinv[first], 0] = local[order][first]
    facet_cells[sinv[~first], 1] = owner[order][~first]
    facet_local[sinv[~first], 1] = local[order][~first]
    return facets, facet_cells, facet_local, cell_facets


class Mesh1D(SimplexMesh):
    """Equidistant grid ``x_i = a + i h`` on ``[a, b]`` with ``n`` elements."""

    dim = 1

    def __init__(self, a: float, b: float, n: int):
        a, b = float(a), float(b)
        if not b > a:
            raise MeshError(f"need b > a, got a={a}, b={b}")
        if int(n) != n or n < 2:
            raise MeshError(f"need an integer n >= 2, got {n}")
        n = int(n)
        self.a, self.b, self.n = a, b, n
        nodes = a + (b - a) * (np.arange(n + 1) / n)
        nodes[-1] = b
        self.nodes = _readonly(nodes)
        cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        super().__init__(nodes, cells)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    def __repr__(self) -> str:
        return f"Mesh1D(a={self.a}, b={self.b}, n={self.n})"


def build_uniform_1d(a: float, b: float, n: int) -> Mesh1D:
    return Mesh1D(a, b, n)


class TriMesh(SimplexMesh):
    """Conforming triangulation with edge topology and outward normals."""

    dim = 2

    def __init__(self, vertices, triangles):
        super().__init__(vertices, triangles)
        self.geometry  # orientation / degeneracy check

    @property
    def triangles(self) -> np.ndarray:
        return self.cells

    @property
    def edges(self) -> np.ndarray:
        return self.facets

    def __repr__(self) -> str:
        return f"TriMesh(V={len(self.vertices)}, E={self.n_facets}, T={self.n_cells})"


def extract_edges(triangles: np.ndarray) -> dict[str, np.ndarray]:
    """Edge list with adjacency and interior/boundary classification.

    Edges are stored with the lower vertex index first. Raises
    :class:`MeshTopologyError` if an edge has more than two neighbours.
    """
    tri = np.asarray(triangles, dtype=np.int64)
    edges, edge_cells, edge_local, cell_edges = _facet_topology(tri, 2)
    return {
        "edges": edges,
        "edge_cells": edge_cells,
        "edge_local": edge_local,
        "cell_edges": cell_edges,
        "boundary": edge_cells[:, 1] < 0,
    }


def build_hexagon_equilateral(m: int) -> TriMesh:
    """Unit hexagon (side 1, centred at the origin) split into 6 m^2 equilateral triangles.

    Two hexagon corners lie on the x-axis at (+-1, 0); element edge length is 1/m.
    """
    if int(m) != m or m < 1:
        raise MeshError(f"need an integer m >= 1, got {m}")
    m = int(m)
    a1 = np.array([1.0, 0.0]) / m
    a2 = np.array([0.5, np.sqrt(3.0) / 2.0]) / m
    index = {}
    pts = []
    for i in range(-m, m + 1):
        for j in range(-m, m + 1):
            if max(abs(i), abs(j), abs(i + j)) <= m:
                index[(i, j)] = len(pts)
                pts.append(i * a1 + j * a2)
    tris = []
    for i in range(-m - 1, m + 1):
        for j in range(-m - 1, m + 1):
            p, q, r, s = (i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)
            if p in index and q in index and r in index:
                tris.append((index[p], index[q], index[r]))
            if q in index and s in index and r in index:
                tris.append((index[q], index[s], index[r]))
    return TriMesh(np.array(pts), np.array(tris, dtype=np.int64))


def dump_mesh(mesh: SimplexMesh, path) -> None:
    """Plain-text dump: ``V E T`` header, vertex coordinates, 0-based cell indices.

    For 1D grids the "edges" are the facet nodes and the cells are index pairs.
    """
    path = Path(path)
    lines = [f"{len(mesh.vertices)} {mesh.n_facets} {mesh.n_cells}"]
    lines += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in c) for c in mesh.cells]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh(path) -> SimplexMesh:
    rows = Path(path).read_text(encoding="utf-8").split("\n")
    nv, _ne, nt = (int(x) for x in rows[0].split())
    verts = np.array([[float(x) for x in r.split()] for r in rows[1:1 + nv]])
    cells = np.array([[int(x) for x in r.split()] for r in rows[1 + nv:1 + nv + nt]], dtype=np.int64)
    if verts.shape[1] == 1:
        x = verts[:, 0]
        mesh = Mesh1D(x[0], x[-1], len(x) - 1)
        if not np.allclose(mesh.nodes, x, rtol=0, atol=1e-14 * (x[-1] - x[0])):
            raise MeshError("only equidistant 1D grids can be loaded")
        return mesh
    return TriMesh(verts, cells)
