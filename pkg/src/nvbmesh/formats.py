"""Plain-text mesh files and legacy VTK ASCII export.

Text format (version 1)::

    nvb-mesh 1 <nv> <nt>
    <x> <y>                                  # nv vertex lines, 17 significant digits
    <v0> <v1> <v2> <generation> <alive>      # nt triangle lines, 0-based indices

The whole forest is stored (parents with ``alive=0``), so a written mesh
reloads into an equivalent forest and write(read(text)) == text.
"""

from __future__ import annotations

import os

from .exceptions import MeshFormatError
from .mesh import Mesh

__all__ = [
    "mesh_to_text",
    "mesh_from_text",
    "write_mesh",
    "read_mesh",
    "mesh_to_vtk",
    "write_vtk",
]

_MAGIC = "nvb-mesh"
_VERSION = 1


def mesh_to_text(mesh: Mesh) -> str:
    vx = mesh.vertex_coords()
    tv = mesh.tri_vertices()
    gen = mesh.generations()
    alive = mesh.alive_mask()
    lines = [f"{_MAGIC} {_VERSION} {mesh.num_vertices} {mesh.num_triangles}"]
    for x, y in vx:
        lines.append(f"{x:.17g} {y:.17g}")
    for i in range(len(tv)):
        a, b, c = tv[i]
        lines.append(f"{a} {b} {c} {gen[i]} {int(alive[i])}")
    return "\n".join(lines) + "\n"


def mesh_from_text(text: str) -> Mesh:
    lines = text.splitlines()
    if not lines:
        raise MeshFormatError("empty file", line=1)
    head = lines[0].split()
    if len(head) != 4 or head[0] != _MAGIC:
        raise MeshFormatError(f"expected header '{_MAGIC} <version> <nv> <nt>'", line=1)
    try:
        version, nv, nt = (int(tok) for tok in head[1:])
    except ValueError:
        raise MeshFormatError("header counts must be integers", line=1) from None
    if version != _VERSION:
        raise MeshFormatError(f"unsupported format version {version}", line=1)
    if nv < 0 or nt < 0:
        raise MeshFormatError("negative counts in header", line=1)
    if len(lines) < 1 + nv + nt:
        raise MeshFormatError(
            f"truncated file: expected {1 + nv + nt} lines, found {len(lines)}",
            line=len(lines) + 1,
        )
    vertices = []
    for i in range(nv):
        ln = 2 + i
        toks = lines[1 + i].split()
        if len(toks) != 2:
            raise MeshFormatError("expected '<x> <y>'", line=ln)
        try:
            vertices.append((float(toks[0]), float(toks[1])))
        except ValueError:
            raise MeshFormatError(f"bad vertex coordinates {lines[1 + i]!r}", line=ln) from None
    triangles, gens, alive = [], [], []
    for i in range(nt):
        ln = 2 + nv + i
        toks = lines[1 + nv + i].split()
        if len(toks) != 5:
            raise MeshFormatError("expected '<v0> <v1> <v2> <generation> <alive>'", line=ln)
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"bad triangle record {lines[1 + nv + i]!r}", line=ln) from None
        if vals[3] < 0:
            raise MeshFormatError("generation must be nonnegative", line=ln)
        if vals[4] not in (0, 1):
            raise MeshFormatError("alive flag must be 0 or 1", line=ln)
        triangles.append(tuple(vals[:3]))
        gens.append(vals[3])
        alive.append(bool(vals[4]))
    try:
        return Mesh.from_arrays(vertices, triangles, gens, alive, validate=False)
    except Exception as exc:
        raise MeshFormatError(f"inconsistent forest: {exc}") from exc


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(mesh_to_text(mesh))


def read_mesh(path) -> Mesh:
    if not os.path.exists(path):
        raise MeshFormatError(f"no such mesh file: {path}")
    with open(path) as fh:
        return mesh_from_text(fh.read())


def mesh_to_vtk(mesh: Mesh, title: str = "nvb mesh") -> str:
    """Legacy ASCII UNSTRUCTURED_GRID (cell type 5) of the leaf set."""
    vx = mesh.vertex_coords()
    tv = mesh.tri_vertices()
    gen = mesh.generations()
    leaves = mesh.leaf_ids()
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    for x, y in vx:
        lines.append(f"{x:.17g} {y:.17g} 0")
    lines.append(f"CELLS {len(leaves)} {4 * len(leaves)}")
    for t in leaves:
        a, b, c = tv[t]
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {len(leaves)}")
    lines.extend("5" for _ in leaves)
    lines.append(f"CELL_DATA {len(leaves)}")
    lines.append("SCALARS generation int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(gen[t])) for t in leaves)
    return "\n".join(lines) + "\n"


def write_vtk(mesh: Mesh, path, title: str = "nvb mesh") -> None:
    with open(path, "w") as fh:
        fh.write(mesh_to_vtk(mesh, title))
