"""ASCII VTK unstructured-grid output.

The bulk file stores each cell with its own copy of its vertices so the
cellwise affine reconstruction can be discontinuous; the fracture file stores
fracture faces (segments in 2D, polygons in 3D) with face-wise data.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .generators import cell_loop
from .mesh import PolytopalMesh

VTK_LINE, VTK_POLYGON, VTK_POLYHEDRON = 3, 7, 42


def _ints(a) -> str:
    return " ".join(str(int(x)) for x in np.ravel(a))


def _floats(a) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(a))


def _data_array(name, values, n_items) -> str:
    values = np.asarray(values, dtype=float).reshape(n_items, -1)
    comps = values.shape[1]
    if comps == 2:  # ParaView expects 3-vectors
        values = np.column_stack([values, np.zeros(n_items)])
        comps = 3
    return (f'<DataArray type="Float64" Name="{name}" NumberOfComponents="{comps}" format="ascii">\n'
            f"{_floats(values)}\n</DataArray>\n")


def _write(path, points, connectivity, offsets, types, cell_data=None, point_data=None,
           faces=None, faceoffsets=None):
    n_pts, n_cells = len(points), len(types)
    pts = np.column_stack([points, np.zeros(n_pts)]) if points.shape[1] == 2 else points
    parts = ['<?xml version="1.0"?>\n<VTKFile type="UnstructuredGrid" version="1.0" byte_order="LittleEndian">\n',
             f'<UnstructuredGrid>\n<Piece NumberOfPoints="{n_pts}" NumberOfCells="{n_cells}">\n',
             '<Points>\n<DataArray type="Float64" NumberOfComponents="3" format="ascii">\n',
             _floats(pts), "\n</DataArray>\n</Points>\n<Cells>\n",
             f'<DataArray type="Int64" Name="connectivity" format="ascii">\n{_ints(connectivity)}\n</DataArray>\n',
             f'<DataArray type="Int64" Name="offsets" format="ascii">\n{_ints(offsets)}\n</DataArray>\n',
             f'<DataArray type="UInt8" Name="types" format="ascii">\n{_ints(types)}\n</DataArray>\n']
    if faces is not None:
        parts.append(f'<DataArray type="Int64" Name="faces" format="ascii">\n{_ints(faces)}\n</DataArray>\n')
        parts.append(f'<DataArray type="Int64" Name="faceoffsets" format="ascii">\n{_ints(faceoffsets)}\n</DataArray>\n')
    parts.append("</Cells>\n")
    if point_data:
        parts.append("<PointData>\n")
        parts += [_data_array(k, v, n_pts) for k, v in point_data.items()]
        parts.append("</PointData>\n")
    if cell_data:
        parts.append("<CellData>\n")
        parts += [_data_array(k, v, n_cells) for k, v in cell_data.items()]
        parts.append("</CellData>\n")
    parts.append("</Piece>\n</UnstructuredGrid>\n</VTKFile>\n")
    Path(path).write_text("".join(parts))


def write_bulk(mesh: PolytopalMesh, path, cache=None, u_full=None, cell_data=None) -> None:
    """Cells with exploded vertices; ``u`` is Π^D u sampled at the vertices."""
    conn, offsets, owner, local_vertex = [], [], [], []
    faces, faceoffsets = ([], []) if mesh.dim == 3 else (None, None)
    start = 0
    for K in range(mesh.n_cells):
        if mesh.dim == 2:
            verts = list(cell_loop(mesh, K))
        else:
            verts = list(mesh.cell_vertices[K])
        index = {v: start + i for i, v in enumerate(verts)}
        conn += [index[v] for v in verts]
        owner += [K] * len(verts)
        local_vertex += verts
        start += len(verts)
        offsets.append(start)
        if mesh.dim == 3:
            fl = [len(mesh.cell_faces[K])]
            for f in mesh.cell_faces[K]:
                fl += [len(mesh.faces[f])] + [index[v] for v in mesh.faces[f]]
            faces += fl
            faceoffsets.append(len(faces))
    owner, local_vertex = np.array(owner), np.array(local_vertex)
    points = mesh.vertices[local_vertex]
    types = np.full(mesh.n_cells, VTK_POLYGON if mesh.dim == 2 else VTK_POLYHEDRON)
    point_data = None
    if cache is not None and u_full is not None:
        point_data = {"u": cache.cell_reconstruction(u_full, points, owner)}
    _write(path, points, conn, offsets, types, cell_data=cell_data, point_data=point_data,
           faces=faces, faceoffsets=faceoffsets)


def write_fracture(mesh: PolytopalMesh, path, face_data=None) -> None:
    """Fracture faces with face-wise data (e.g. jump and multiplier)."""
    fr = mesh.fracture_faces
    used = np.unique(np.concatenate([np.asarray(mesh.faces[f]) for f in fr])) if len(fr) else np.zeros(0, int)
    remap = {int(v): i for i, v in enumerate(used)}
    conn, offsets = [], []
    for f in fr:
        conn += [remap[int(v)] for v in mesh.faces[f]]
        offsets.append(len(conn))
    types = np.full(len(fr), VTK_LINE if mesh.dim == 2 else VTK_POLYGON)
    _write(path, mesh.vertices[used], conn, offsets, types, cell_data=face_data)


def export_vtu(mesh: PolytopalMesh, fields: dict, path) -> list:
    """Write ``<path>_bulk.vtu`` and, with a fracture, ``<path>_fracture.vtu``.

    ``fields`` may contain ``cache`` and ``u`` (full displacement vector) for
    the bulk reconstruction and ``jump`` / ``lambda`` (face-wise arrays).
    """
    base = str(path)
    written = [base + "_bulk.vtu"]
    write_bulk(mesh, written[0], fields.get("cache"), fields.get("u"))
    if len(mesh.fracture_faces):
        data = {k: fields[k] for k in ("jump", "lambda") if fields.get(k) is not None}
        written.append(base + "_fracture.vtu")
        write_fracture(mesh, written[1], data)
    return written
