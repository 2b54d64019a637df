"""Simplicial 2D meshes refined by newest-vertex bisection (NVB).

A mesh is stored as a forest: bisected triangles are kept (``alive=False``)
so that generation counts and refinement ledgers remain auditable; the leaf
set is the current triangulation.  Each triangle stores its vertices as
``(v0, v1, v2)`` where ``(v0, v1)`` is the refinement edge and ``v2`` is the
newest vertex.  Bisecting splits the refinement edge at its midpoint ``m``
and produces the children ``(v2, v0, m)`` and ``(v1, v2, m)``; both children
have ``m`` as newest vertex and their refinement edge opposite ``m``.

``refine`` bisects a set of marked leaves once each (the leaf count grows by
exactly the number of marks).  ``complete`` removes hanging nodes with the
minimal number of additional newest-vertex bisections; it terminates whenever
the initial flags are compatible (every interior edge that is a refinement
edge is the refinement edge of both triangles sharing it).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import MeshError

__all__ = [
    "Vertex",
    "Triangle",
    "Mesh",
    "initial_mesh",
    "sector_fan_mesh",
    "PRESETS",
]


@dataclass(frozen=True, slots=True)
class Vertex:
    x: float
    y: float


@dataclass(frozen=True, slots=True)
class Triangle:
    """Snapshot of one forest entry; ``v = (v0, v1, v2)`` with refinement edge ``(v0, v1)``."""

    v: tuple[int, int, int]
    generation: int
    alive: bool


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class _Rows:
    """Append-only array with doubling capacity; exposes a zero-copy view."""

    def __init__(self, width: int | None, dtype):
        shape = (16,) if width is None else (16, width)
        self._data = np.empty(shape, dtype=dtype)
        self._n = 0

    def append(self, row) -> int:
        if self._n == len(self._data):
            grown = np.empty((2 * self._n,) + self._data.shape[1:], dtype=self._data.dtype)
            grown[: self._n] = self._data
            self._data = grown
        self._data[self._n] = row
        self._n += 1
        return self._n - 1

    def __len__(self) -> int:
        return self._n

    @property
    def view(self) -> np.ndarray:
        return self._data[: self._n]


def _signed_area(ax, ay, bx, by, cx, cy) -> float:
    return 0.5 * ((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))


class Mesh:
    """Triangle forest with newest-vertex bisection and conforming completion.

    Mutation (``bisect``/``refine``/``complete``) is single-writer; read-only
    queries are safe from concurrent readers once mutation is quiescent.
    Array accessors (``vertex_coords``, ``areas``, ...) return live views that
    are invalidated by the next mutation; take copies to keep them.
    """

    def __init__(self):
        self._vx = _Rows(2, np.float64)
        self._tv = _Rows(3, np.int64)
        self._gen = _Rows(None, np.int64)
        self._alive = _Rows(None, np.bool_)
        self._area = _Rows(None, np.float64)
        # undirected edge (a, b) -> ids of leaves having that full edge
        self._edge_leaves: dict[tuple[int, int], list[int]] = {}
        # undirected edge -> vertex id of its midpoint, once split
        self._midpoint: dict[tuple[int, int], int] = {}
        self._hanging: set[int] = set()
        self._hqueue: deque[int] = deque()
        self._n_leaves = 0
        self.initial_leaf_count = 0
        self.initial_area = 0.0

    # -- construction ---------------------------------------------------

    @classmethod
    def from_arrays(
        cls,
        vertices,
        triangles,
        generations=None,
        alive=None,
        *,
        validate: bool = True,
        normalize_orientation: bool = True,
    ) -> "Mesh":
        """Build a mesh from raw vertex/triangle lists.

        With default arguments this constructs an initial (generation-0)
        triangulation: the input must be conforming, non-degenerate and
        flag-compatible.  ``generations``/``alive`` are used by the file
        reader to restore a full forest; in that case orientation is kept
        as stored and per-triangle validation is skipped.
        """
        m = cls()
        for x, y in vertices:
            m._add_vertex(float(x), float(y))
        restoring = generations is not None
        triangles = list(triangles)
        gens = list(generations) if restoring else [0] * len(triangles)
        live = list(alive) if alive is not None else [True] * len(triangles)
        for tid, tri in enumerate(triangles):
            a, b, c = (int(v) for v in tri)
            n = len(m._vx)
            if not (0 <= a < n and 0 <= b < n and 0 <= c < n):
                raise MeshError(f"triangle {tid} references vertex out of range")
            if len({a, b, c}) != 3:
                raise MeshError(f"triangle {tid} has repeated vertices")
            sa = m._signed_area_of(a, b, c)
            if sa == 0.0:
                raise MeshError(f"triangle {tid} is degenerate (zero area)")
            if sa < 0.0 and normalize_orientation and not restoring:
                a, b = b, a  # keep the refinement edge, flip orientation to CCW
                sa = -sa
            m._tv.append((a, b, c))
            m._gen.append(gens[tid])
            m._alive.append(bool(live[tid]))
            m._area.append(abs(sa))
        if restoring:
            m._restore_forest_structure()
        else:
            m._n_leaves = len(m._tv)
            for tid in range(len(m._tv)):
                m._register_leaf_edges(tid)
        # the generation-0 set is the initial triangulation, also after a
        # forest is restored from file
        m.initial_leaf_count = int(np.count_nonzero(m._gen.view == 0))
        m.initial_area = float(np.sum(m._area.view[m._alive.view]))
        if validate and not restoring:
            m._validate_initial()
        return m

    def _validate_initial(self):
        for key, tids in self._edge_leaves.items():
            if len(tids) > 2:
                raise MeshError(f"edge {key} is shared by {len(tids)} triangles")
        # geometric hanging-node check: no vertex may sit strictly inside a
        # leaf edge (the midpoint table is empty before any bisection)
        vx = self._vx.view
        for (a, b), tids in self._edge_leaves.items():
            if len(tids) != 1:
                continue
            pa, pb = vx[a], vx[b]
            d = pb - pa
            L2 = float(d @ d)
            rel = vx - pa
            t = (rel @ d) / L2
            cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
            tol = 1e-12 * math.sqrt(L2)
            on_seg = (np.abs(cross) <= tol * math.sqrt(L2)) & (t > 1e-12) & (t < 1.0 - 1e-12)
            if np.any(on_seg):
                vid = int(np.nonzero(on_seg)[0][0])
                raise MeshError(
                    f"input triangulation has a hanging node: vertex {vid} lies "
                    f"inside edge ({a}, {b})"
                )
        if not self.check_flag_compatibility():
            raise MeshError(
                "incompatible refinement-edge flags: an interior edge is the "
                "refinement edge of only one of its two triangles"
            )

    def _restore_forest_structure(self):
        # Children of (a, b, c) are (c, a, m) and (b, c, m).  With a
        # consistently oriented forest the directed refinement edge (v0, v1)
        # identifies a triangle uniquely, which recovers midpoints.
        tv = self._tv.view
        directed: dict[tuple[int, int], int] = {}
        for tid in range(len(tv)):
            key = (int(tv[tid, 0]), int(tv[tid, 1]))
            if key in directed:
                raise MeshError(
                    f"forest is not consistently oriented: duplicate directed refinement edge {key}"
                )
            directed[key] = tid
        alive = self._alive.view
        for tid in range(len(tv)):
            if alive[tid]:
                continue
            a, b, c = (int(v) for v in tv[tid])
            c1 = directed.get((c, a))
            c2 = directed.get((b, c))
            if c1 is None or c2 is None:
                raise MeshError(f"bisected triangle {tid} has no children in the forest")
            m1 = int(tv[c1, 2])
            m2 = int(tv[c2, 2])
            if m1 != m2:
                raise MeshError(f"children of triangle {tid} disagree on the midpoint vertex")
            self._midpoint[_edge_key(a, b)] = m1
        self._n_leaves = int(np.count_nonzero(alive))
        for tid in range(len(tv)):
            if alive[tid]:
                self._register_leaf_edges(tid)
                if self._has_hanging_edge(tid):
                    self._set_hanging(tid)

    # -- basic accessors -------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self._vx)

    @property
    def num_triangles(self) -> int:
        """Total forest size, bisected parents included."""
        return len(self._tv)

    @property
    def num_leaves(self) -> int:
        return self._n_leaves

    @property
    def edge_map(self) -> dict[tuple[int, int], list[int]]:
        """Live map from undirected edge to incident leaf ids (do not mutate)."""
        return self._edge_leaves

    def vertex(self, vid: int) -> Vertex:
        x, y = self._vx.view[vid]
        return Vertex(float(x), float(y))

    def triangle(self, tid: int) -> Triangle:
        a, b, c = (int(v) for v in self._tv.view[tid])
        return Triangle((a, b, c), int(self._gen.view[tid]), bool(self._alive.view[tid]))

    def vertex_coords(self) -> np.ndarray:
        return self._vx.view

    def tri_vertices(self) -> np.ndarray:
        return self._tv.view

    def generations(self) -> np.ndarray:
        return self._gen.view

    def alive_mask(self) -> np.ndarray:
        return self._alive.view

    def areas(self) -> np.ndarray:
        return self._area.view

    def leaf_ids(self) -> np.ndarray:
        return np.nonzero(self._alive.view)[0]

    def corner_coords(self, tids=None):
        """Vertex coordinates ``(A, B, C)`` for the given triangles (leaves by default)."""
        if tids is None:
            tids = self.leaf_ids()
        tv = self._tv.view[tids]
        vx = self._vx.view
        return vx[tv[:, 0]], vx[tv[:, 1]], vx[tv[:, 2]]

    def domain_area(self) -> float:
        return float(np.sum(self._area.view[self._alive.view]))

    def element_size(self, tid: int) -> float:
        """h_T = |T|**(1/2) for this planar mesh."""
        return math.sqrt(float(self._area.view[tid]))

    def element_sizes(self, tids=None) -> np.ndarray:
        if tids is None:
            tids = self.leaf_ids()
        return np.sqrt(self._area.view[tids])

    def min_angle(self, tids=None) -> float:
        """Smallest interior angle over the given triangles (leaves by default), radians."""
        A, B, C = self.corner_coords(tids)
        return float(np.min(triangle_min_angles(A, B, C)))

    # -- mutation ---------------------------------------------------------

    def bisect(self, tid: int) -> tuple[int, int]:
        """Bisect leaf ``tid`` along its refinement edge; return the child ids."""
        if not (0 <= tid < len(self._tv)) or not self._alive.view[tid]:
            raise MeshError(f"cannot bisect triangle {tid}: not a current leaf")
        a, b, c = (int(v) for v in self._tv.view[tid])
        key = _edge_key(a, b)
        m = self._midpoint.get(key)
        if m is None:
            vx = self._vx.view
            m = self._add_vertex(0.5 * (vx[a, 0] + vx[b, 0]), 0.5 * (vx[a, 1] + vx[b, 1]))
            self._midpoint[key] = m
            for nb in self._edge_leaves.get(key, ()):
                if nb != tid:
                    self._set_hanging(nb)
        self._drop_leaf_edges(tid)
        self._alive.view[tid] = False
        self._hanging.discard(tid)
        gen = int(self._gen.view[tid]) + 1
        c1 = self._add_triangle((c, a, m), gen)
        c2 = self._add_triangle((b, c, m), gen)
        self._n_leaves += 1
        return c1, c2

    def refine(self, marks) -> int:
        """Bisect each marked leaf exactly once; returns the number of marks.

        The leaf count grows by exactly ``len(marks)``.  The result may have
        hanging nodes; call :meth:`complete` to restore conformity.
        """
        marks = list(dict.fromkeys(int(m) for m in marks))
        for tid in marks:
            if not (0 <= tid < len(self._tv)) or not self._alive.view[tid]:
                raise MeshError(f"mark {tid} is not a current leaf")
        for tid in sorted(marks):
            self.bisect(tid)
        return len(marks)

    def complete(self) -> int:
        """Bisect until no hanging nodes remain; returns the bisection count.

        Every performed bisection is forced (the element has a hanging node
        on one of its edges), so the completion is minimal.  A cap of
        64x the entry leaf count guards against incompatible initial flags.
        """
        count = 0
        cap = 64 * max(self._n_leaves, 1)
        while self._hqueue:
            tid = self._hqueue.popleft()
            if tid not in self._hanging:
                continue
            if count >= cap:
                raise MeshError(
                    "completion did not terminate within 64x the leaf count; "
                    "initial refinement-edge flags are likely incompatible"
                )
            self.bisect(tid)
            count += 1
        assert not self._hanging
        return count

    # -- predicates --------------------------------------------------------

    def is_conforming(self) -> bool:
        """True iff no leaf edge carries a hanging node (full edge-map audit)."""
        for key, tids in self._edge_leaves.items():
            if len(tids) > 2:
                return False
            if key in self._midpoint:
                return False
        return True

    def check_flag_compatibility(self) -> bool:
        """True iff every shared leaf edge that is a refinement edge is one for both leaves."""
        tv = self._tv.view
        for key, tids in self._edge_leaves.items():
            if len(tids) != 2:
                continue
            flags = [_edge_key(int(tv[t, 0]), int(tv[t, 1])) == key for t in tids]
            if flags[0] != flags[1]:
                return False
        return True

    # -- internals ----------------------------------------------------------

    def _add_vertex(self, x: float, y: float) -> int:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MeshError(f"vertex coordinates must be finite, got ({x}, {y})")
        return self._vx.append((x, y))

    def _signed_area_of(self, a: int, b: int, c: int) -> float:
        vx = self._vx.view
        return _signed_area(vx[a, 0], vx[a, 1], vx[b, 0], vx[b, 1], vx[c, 0], vx[c, 1])

    def _add_triangle(self, verts: tuple[int, int, int], gen: int) -> int:
        area = self._signed_area_of(*verts)
        if area == 0.0:
            raise MeshError(f"refusing to create degenerate triangle {verts}")
        tid = self._tv.append(verts)
        self._gen.append(gen)
        self._alive.append(True)
        self._area.append(abs(area))
        self._register_leaf_edges(tid)
        if self._has_hanging_edge(tid):
            self._set_hanging(tid)
        return tid

    def _edges_of(self, tid: int):
        a, b, c = (int(v) for v in self._tv.view[tid])
        return _edge_key(a, b), _edge_key(b, c), _edge_key(c, a)

    def _register_leaf_edges(self, tid: int):
        for key in self._edges_of(tid):
            self._edge_leaves.setdefault(key, []).append(tid)

    def _drop_leaf_edges(self, tid: int):
        for key in self._edges_of(tid):
            tids = self._edge_leaves[key]
            tids.remove(tid)
            if not tids:
                del self._edge_leaves[key]

    def _has_hanging_edge(self, tid: int) -> bool:
        return any(key in self._midpoint for key in self._edges_of(tid))

    def _set_hanging(self, tid: int):
        if tid not in self._hanging:
            self._hanging.add(tid)
            self._hqueue.append(tid)


def triangle_min_angles(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Minimum interior angle (radians) of each triangle given corner arrays (n, 2)."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    C = np.atleast_2d(C)
    out = np.full(len(A), np.inf)
    for P, Q, R in ((A, B, C), (B, C, A), (C, A, B)):
        u = Q - P
        v = R - P
        cosang = np.einsum("ij,ij->i", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        )
        out = np.minimum(out, np.arccos(np.clip(cosang, -1.0, 1.0)))
    return out


# -- initial triangulations ---------------------------------------------------


def _square_data():
    # (0,1)^2, shared diagonal (0,0)-(1,1) as the common refinement edge
    vertices = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    triangles = [(0, 2, 3), (2, 0, 1)]
    return vertices, triangles


def _l_shape_data():
    # (-1,1)^2 minus the quadrant [0,1)x(-1,0); the reentrant corner (0,0) is
    # vertex 0.  Each unit square is split by the diagonal through the corner,
    # and the diagonals are the (mutual) refinement edges.
    vertices = [
        (0.0, 0.0),  # 0 reentrant corner
        (1.0, 0.0),  # 1
        (1.0, 1.0),  # 2
        (0.0, 1.0),  # 3
        (-1.0, 1.0),  # 4
        (-1.0, 0.0),  # 5
        (-1.0, -1.0),  # 6
        (0.0, -1.0),  # 7
    ]
    triangles = [
        (2, 0, 1),  # diag (0,0)-(1,1)
        (0, 2, 3),
        (4, 0, 3),  # diag (0,0)-(-1,1)
        (0, 4, 5),
        (6, 0, 5),  # diag (0,0)-(-1,-1)
        (0, 6, 7),
    ]
    return vertices, triangles


def _slit_data():
    # (-1,1)^2 slit along [0,1)x{0}; the slit tip (0,0) is vertex 0.  Vertices
    # on the slit (other than the tip) are duplicated so both sides of the cut
    # are boundary.  Diagonal hypotenuses are the refinement edges.
    vertices = [
        (0.0, 0.0),  # 0 slit tip
        (1.0, 0.0),  # 1 upper side of the slit
        (1.0, 1.0),  # 2
        (0.0, 1.0),  # 3
        (-1.0, 1.0),  # 4
        (-1.0, 0.0),  # 5
        (-1.0, -1.0),  # 6
        (0.0, -1.0),  # 7
        (1.0, -1.0),  # 8
        (1.0, 0.0),  # 9 lower side of the slit
    ]
    triangles = [
        (2, 0, 1),  # diag (0,0)-(1,1)
        (0, 2, 3),
        (4, 0, 3),  # diag (0,0)-(-1,1)
        (0, 4, 5),
        (6, 0, 5),  # diag (0,0)-(-1,-1)
        (0, 6, 7),
        (8, 0, 7),  # diag (0,0)-(1,-1)
        (0, 8, 9),
    ]
    return vertices, triangles


PRESETS = {
    "square": _square_data,
    "l_shape": _l_shape_data,
    "slit": _slit_data,
}


def initial_mesh(preset: str = "l_shape", *, vertices=None, triangles=None) -> Mesh:
    """Build an initial triangulation.

    ``preset`` is one of ``square``, ``l_shape``, ``slit`` or ``custom``.  For
    ``custom``, pass ``vertices`` (list of (x, y)) and ``triangles`` (list of
    (v0, v1, v2) with refinement edge (v0, v1)).  Custom input must be a valid
    conforming triangulation with compatible refinement-edge flags; degenerate
    triangles and incompatible flags are rejected.
    """
    if preset == "custom":
        if vertices is None or triangles is None:
            raise MeshError("custom meshes require vertices= and triangles=")
        return Mesh.from_arrays(vertices, triangles)
    try:
        data = PRESETS[preset]
    except KeyError:
        raise MeshError(f"unknown domain preset {preset!r}; expected one of "
                        f"{sorted(PRESETS)} or 'custom'") from None
    if vertices is not None or triangles is not None:
        raise MeshError("vertices/triangles are only accepted with preset='custom'")
    return Mesh.from_arrays(*data())


def sector_fan_mesh(omega: float, radius: float = 1.0, n: int = 64) -> Mesh:
    """Fan of ``n`` triangles inscribed in the sector r<=radius, theta in [0, omega].

    The outer vertices lie on the arc, so the covered polygon converges to the
    sector as ``n`` grows; useful to validate quadrature against closed-form
    sector integrals.  Chords are the refinement edges (spokes are shared legs,
    so the flags are trivially compatible).
    """
    if not (0.0 < omega <= 2.0 * math.pi):
        raise MeshError("sector angle must lie in (0, 2*pi]")
    if n < 1:
        raise MeshError("a fan needs at least one triangle")
    vertices = [(0.0, 0.0)]
    for k in range(n + 1):
        t = omega * k / n
        vertices.append((radius * math.cos(t), radius * math.sin(t)))
    triangles = [(k + 1, k + 2, 0) for k in range(n)]
    return Mesh.from_arrays(vertices, triangles)
