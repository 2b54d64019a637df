"""Degree-p Lagrange interpolation on triangle meshes.

Nodes are the barycentric lattice {(i + j + k = p)} of each leaf.  Vertex and
edge nodes are shared between neighbouring elements through a global numbering
keyed on vertex ids and (sorted) edge ids, so the interpolant of a continuous
function is continuous and every node carries a single global value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Mesh

__all__ = ["ReferenceElement", "reference_element", "GlobalNodes", "interpolate"]


class ReferenceElement:
    """Lagrange basis of degree p on the reference triangle (0,0)-(1,0)-(0,1).

    Basis values/gradients are evaluated through the inverse Vandermonde in
    the monomial basis, which is well conditioned on the lattice for the
    moderate degrees used here.
    """

    def __init__(self, p: int):
        if p < 1:
            raise ValueError("polynomial degree must be >= 1")
        self.p = p
        # local nodes as barycentric integer triples (n0, n1, n2), n0+n1+n2 = p
        bary = []
        for i in range(p + 1):
            for j in range(p + 1 - i):
                bary.append((p - i - j, i, j))
        self.bary = tuple(bary)
        self.n_nodes = len(bary)
        self.nodes = np.array([(i / p, j / p) for (_, i, j) in bary])
        self.powers = [(a, b) for a in range(p + 1) for b in range(p + 1 - a)]
        V = np.empty((self.n_nodes, self.n_nodes))
        for col, (a, b) in enumerate(self.powers):
            V[:, col] = self.nodes[:, 0] ** a * self.nodes[:, 1] ** b
        self._coeff = np.linalg.inv(V)  # basis_i = sum_m coeff[m, i] * x**a_m * y**b_m

    def basis_values(self, points: np.ndarray) -> np.ndarray:
        """Shape (n_points, n_nodes)."""
        points = np.atleast_2d(points)
        M = np.empty((len(points), self.n_nodes))
        for col, (a, b) in enumerate(self.powers):
            M[:, col] = points[:, 0] ** a * points[:, 1] ** b
        return M @ self._coeff

    def basis_gradients(self, points: np.ndarray) -> np.ndarray:
        """Shape (n_points, n_nodes, 2), gradients in reference coordinates."""
        points = np.atleast_2d(points)
        Dx = np.zeros((len(points), self.n_nodes))
        Dy = np.zeros((len(points), self.n_nodes))
        for col, (a, b) in enumerate(self.powers):
            if a > 0:
                Dx[:, col] = a * points[:, 0] ** (a - 1) * points[:, 1] ** b
            if b > 0:
                Dy[:, col] = b * points[:, 0] ** a * points[:, 1] ** (b - 1)
        return np.stack([Dx @ self._coeff, Dy @ self._coeff], axis=-1)


@lru_cache(maxsize=None)
def reference_element(p: int) -> ReferenceElement:
    return ReferenceElement(p)


@dataclass
class GlobalNodes:
    """Global Lagrange nodes of the leaf set: coordinates plus connectivity."""

    p: int
    coords: np.ndarray  # (n_global, 2)
    conn: np.ndarray  # (n_leaves, n_local), rows follow mesh.leaf_ids() order
    leaf_ids: np.ndarray

    @property
    def count(self) -> int:
        return len(self.coords)


def global_nodes(mesh: Mesh, p: int) -> GlobalNodes:
    ref = reference_element(p)
    leaves = mesh.leaf_ids()
    tv = mesh.tri_vertices()[leaves]
    vx = mesh.vertex_coords()
    coords: list = []
    conn = np.empty((len(leaves), ref.n_nodes), dtype=np.int64)
    vertex_node: dict[int, int] = {}
    edge_node: dict[tuple[int, int, int], int] = {}

    def new_node(x: float, y: float) -> int:
        coords.append((x, y))
        return len(coords) - 1

    for row, tri in enumerate(tv):
        verts = tuple(int(v) for v in tri)
        for local, (n0, n1, n2) in enumerate(ref.bary):
            weights = (n0, n1, n2)
            nz = [k for k in range(3) if weights[k] > 0]
            if len(nz) == 1:  # vertex node
                vid = verts[nz[0]]
                node = vertex_node.get(vid)
                if node is None:
                    node = new_node(*vx[vid])
                    vertex_node[vid] = node
            elif len(nz) == 2:  # edge node, canonical coords from sorted ids
                va, vb = verts[nz[0]], verts[nz[1]]
                wa, wb = weights[nz[0]], weights[nz[1]]
                if va > vb:
                    va, vb = vb, va
                    wa, wb = wb, wa
                key = (va, vb, wb)
                node = edge_node.get(key)
                if node is None:
                    node = new_node(
                        (wa * vx[va, 0] + wb * vx[vb, 0]) / p,
                        (wa * vx[va, 1] + wb * vx[vb, 1]) / p,
                    )
                    edge_node[key] = node
            else:  # interior node
                node = new_node(
                    (n0 * vx[verts[0], 0] + n1 * vx[verts[1], 0] + n2 * vx[verts[2], 0]) / p,
                    (n0 * vx[verts[0], 1] + n1 * vx[verts[1], 1] + n2 * vx[verts[2], 1]) / p,
                )
            conn[row, local] = node
    return GlobalNodes(p=p, coords=np.asarray(coords, dtype=float), conn=conn, leaf_ids=leaves)


def interpolate(mesh: Mesh, p: int, f, nodes: GlobalNodes | None = None) -> np.ndarray:
    """Nodal values of the degree-p Lagrange interpolant of ``f``.

    ``f`` is either a callable ``f(x, y)`` accepting arrays or an object with
    a vectorized ``value(x, y)`` method.  Returns one value per global node,
    aligned with ``global_nodes(mesh, p)``.
    """
    if nodes is None:
        nodes = global_nodes(mesh, p)
    value = getattr(f, "value", f)
    return np.asarray(value(nodes.coords[:, 0], nodes.coords[:, 1]), dtype=float)
