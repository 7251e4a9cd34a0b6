"""Conforming triangulations with uniform red refinement and P1 bookkeeping.

Meshes are immutable after construction.  Red refinement splits every
triangle into four congruent children through the edge midpoints, so the
P1 space of a parent mesh is contained exactly in that of the child; the
parent nodes keep their indices, midpoints are appended.

Homogeneous Dirichlet conditions are built in: a nodal function carries
coefficients on interior nodes only and vanishes on the boundary.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-12


class TriMesh:
    """Triangulation given by node coordinates and counterclockwise cells.

    Attributes
    ----------
    nodes : (N, 2) float array
    cells : (M, 3) int array, counterclockwise vertex triples
    boundary_node : (N,) bool array
    level : refinement generation (0 for a freshly built mesh)
    parent : the mesh this one was refined from, or None
    parent_map : (N_parent,) indices of the parent nodes among this mesh's
        nodes (the identity injection), or None at level 0
    """

    def __init__(self, nodes, cells, level=0, parent=None, parent_map=None,
                 midpoint_edges=None):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise ValueError("nodes must be an (N, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise ValueError("cells must be an (M, 3) array")
        self.level = int(level)
        self.parent = parent
        self.parent_map = parent_map
        self.midpoint_edges = midpoint_edges  # (N - N_parent, 2) parent edge ends
        self._cache = {}

        v0 = self.nodes[self.cells[:, 0]]
        v1 = self.nodes[self.cells[:, 1]]
        v2 = self.nodes[self.cells[:, 2]]
        cross = ((v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1])
                 - (v1[:, 1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0]))
        if np.any(cross <= 0.0):
            raise ValueError("cells must be counterclockwise with positive area")
        self.areas = 0.5 * cross

        edges = self.cells[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        edges = np.sort(edges, axis=1)
        self.edges, counts = np.unique(edges, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("mesh is not conforming: an edge meets > 2 cells")
        self.boundary_edges = self.edges[counts == 1]
        self.boundary_node = np.zeros(len(self.nodes), dtype=bool)
        self.boundary_node[self.boundary_edges.ravel()] = True
        self.interior = np.flatnonzero(~self.boundary_node)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def h(self):
        """Mesh size: the longest edge."""
        d = self.nodes[self.edges[:, 0]] - self.nodes[self.edges[:, 1]]
        return float(np.max(np.sqrt(np.sum(d * d, axis=1))))

    def hat_gradients(self):
        """Per-cell constant gradients of the three local hats, (M, 3, 2)."""
        key = "hat_gradients"
        if key not in self._cache:
            v = self.nodes[self.cells]  # (M, 3, 2)
            grads = np.empty_like(v)
            two_a = (2.0 * self.areas)[:, None]
            for i in range(3):
                b = v[:, (i + 1) % 3]
                c = v[:, (i + 2) % 3]
                grads[:, i, 0] = (b[:, 1] - c[:, 1])
                grads[:, i, 1] = (c[:, 0] - b[:, 0])
            grads /= two_a[..., None]
            self._cache[key] = grads
        return self._cache[key]

    def shape_regularity(self):
        """Max ratio of circumradius to inradius over all cells."""
        v = self.nodes[self.cells]
        e = np.stack([np.linalg.norm(v[:, (i + 2) % 3] - v[:, (i + 1) % 3], axis=1)
                      for i in range(3)], axis=1)
        a, b, c = e[:, 0], e[:, 1], e[:, 2]
        s = 0.5 * (a + b + c)
        inradius = self.areas / s
        circumradius = a * b * c / (4.0 * self.areas)
        return float(np.max(circumradius / inradius))


@dataclass
class FemFunction:
    """P1 function vanishing on the boundary, given by interior nodal values."""

    mesh: TriMesh
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.n_interior,):
            raise ValueError(
                f"expected {self.mesh.n_interior} interior coefficients, "
                f"got shape {self.coeffs.shape}")

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n_interior))

    @classmethod
    def from_full(cls, mesh, values):
        values = np.asarray(values, dtype=float)
        return cls(mesh, values[mesh.interior])

    def full_values(self):
        """Nodal values on all nodes, zeros on the boundary."""
        full = np.zeros(self.mesh.n_nodes)
        full[self.mesh.interior] = self.coeffs
        return full

    def copy(self):
        return FemFunction(self.mesh, self.coeffs.copy())


def unit_square_mesh(n):
    """Structured triangulation of (0,1)^2: n x n squares, each split along
    its lower-left/upper-right diagonal; (n+1)^2 nodes, 2 n^2 cells.

    This pattern is reproduced exactly by red refinement, which is what makes
    the refinement hierarchy nested.
    """
    if n < 1:
        raise ValueError("need at least one cell per side")
    n = int(n)
    coords = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def idx(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10 = idx(i, j), idx(i + 1, j)
            v01, v11 = idx(i, j + 1), idx(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return TriMesh(nodes, np.asarray(cells), level=0)


def refine_red(m):
    """Uniform red refinement: every triangle split into 4 via edge midpoints."""
    n_old = m.n_nodes
    midpoint_id = {}
    midpoint_edges = []
    new_nodes = [m.nodes]

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in midpoint_id:
            midpoint_id[key] = n_old + len(midpoint_edges)
            midpoint_edges.append(key)
        return midpoint_id[key]

    new_cells = []
    for a, b, c in m.cells:
        mab = midpoint(a, b)
        mbc = midpoint(b, c)
        mca = midpoint(c, a)
        new_cells.extend([(a, mab, mca), (mab, b, mbc),
                          (mca, mbc, c), (mab, mbc, mca)])

    midpoint_edges = np.asarray(midpoint_edges, dtype=np.int64)
    new_nodes.append(0.5 * (m.nodes[midpoint_edges[:, 0]]
                            + m.nodes[midpoint_edges[:, 1]]))
    return TriMesh(np.vstack(new_nodes), np.asarray(new_cells),
                   level=m.level + 1, parent=m,
                   parent_map=np.arange(n_old, dtype=np.int64),
                   midpoint_edges=midpoint_edges)


def prolong(u, target):
    """Exact injection of a P1 function into the red-refined mesh.

    The prolonged function agrees with u pointwise everywhere, since parent
    nodes keep their values and midpoints take the edge average.
    """
    if target.parent is not u.mesh:
        raise ValueError("target mesh is not the red refinement of the source mesh")
    full = u.full_values()
    child = np.empty(target.n_nodes)
    child[target.parent_map] = full
    mids = target.midpoint_edges
    child[u.mesh.n_nodes:] = 0.5 * (full[mids[:, 0]] + full[mids[:, 1]])
    return FemFunction.from_full(target, child)


def interpolate_nodal(expr, m):
    """Nodal interpolant of an analytic field; boundary values must vanish.

    Nonzero boundary values beyond 1e-12 are discarded with a warning, the
    interpolant keeps homogeneous boundary data either way.
    """
    vals = np.asarray(expr(m.nodes[:, 0], m.nodes[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (m.n_nodes,))
    worst = float(np.max(np.abs(vals[m.boundary_node]))) if np.any(m.boundary_node) else 0.0
    if worst > BOUNDARY_TOL:
        warnings.warn(f"discarding nonzero boundary values (max {worst:.3e})",
                      stacklevel=2)
    return FemFunction(m, vals[m.interior].copy())


def export_vtk(m, path, point_data=None):
    """Write the mesh (and optional nodal scalar fields) as legacy ASCII VTK."""
    lines = ["# vtk DataFile Version 3.0", "plapflow mesh", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {m.n_nodes} double"]
    for x, y in m.nodes:
        lines.append(f"{float(x)!r} {float(y)!r} 0.0")
    lines.append(f"CELLS {m.n_cells} {4 * m.n_cells}")
    for a, b, c in m.cells:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {m.n_cells}")
    lines.extend(["5"] * m.n_cells)
    if point_data:
        lines.append(f"POINT_DATA {m.n_nodes}")
        for name, values in point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{float(v)!r}" for v in values)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def export_csv(u, path):
    """Write a nodal function as CSV rows (node_x, node_y, value)."""
    full = u.full_values()
    lines = ["node_x,node_y,value"]
    for (x, y), v in zip(u.mesh.nodes, full):
        lines.append(f"{float(x)!r},{float(y)!r},{float(v)!r}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
