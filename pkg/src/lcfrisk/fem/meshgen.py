"""Structured mesh generators used for fixtures and tests."""

from __future__ import annotations

import itertools

import numpy as np

from .elements import HEX8, TET4
from .mesh import DEFAULT_TAG, VolumeMesh, promote_quadratic


def _grid_nodes(nx, ny, nz):
    i, j, k = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    ijk = np.column_stack([i.ravel(), j.ravel(), k.ravel()])
    index = np.arange(len(ijk)).reshape(nx + 1, ny + 1, nz + 1)
    return ijk.astype(float), index


def _hex_cells(nx, ny, nz, index):
    cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = [
                    index[i, j, k], index[i + 1, j, k], index[i + 1, j + 1, k], index[i, j + 1, k],
                    index[i, j, k + 1], index[i + 1, j, k + 1], index[i + 1, j + 1, k + 1], index[i, j + 1, k + 1],
                ]
                cells.append(c)
    return np.array(cells, dtype=np.int64)


def _kuhn_tets(hexes, nodes):
    # Freudenthal split of each cube along the (0, 6) diagonal; conforming on grids
    corner = {(0, 0, 0): 0, (1, 0, 0): 1, (1, 1, 0): 2, (0, 1, 0): 3,
              (0, 0, 1): 4, (1, 0, 1): 5, (1, 1, 1): 6, (0, 1, 1): 7}
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [(0, 0, 0)]
        p = [0, 0, 0]
        for ax in perm:
            p[ax] = 1
            path.append(tuple(p))
        tets.append([corner[q] for q in path])
    out = hexes[:, tets].reshape(-1, 4)
    X = nodes[out]
    vol = np.einsum("ij,ij->i", np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]), X[:, 3] - X[:, 0])
    flip = vol < 0
    out[flip] = out[flip][:, [0, 2, 1, 3]]
    return out


def _tag_box_faces(mesh, param_nodes, shape, tagger):
    """Tag boundary faces from their centroid in grid-index coordinates."""
    elem, lface, _ = mesh.boundary
    fn = mesh.face_nodes()[:, : mesh.kind.n_face_corners]
    cent = param_nodes[fn].mean(axis=1)
    tags = {}
    for f, (e, lf) in enumerate(zip(elem, lface)):
        t = tagger(cent[f] / np.asarray(shape, float))
        if t != DEFAULT_TAG:
            tags[(int(e), int(lf))] = t
    return tags


def _side_tag(u):
    for ax, name in enumerate("xyz"):
        if abs(u[ax]) < 1e-9:
            return f"{name}0"
        if abs(u[ax] - 1) < 1e-9:
            return f"{name}1"
    return DEFAULT_TAG


def structured(kind, divisions, mapping, tagger=_side_tag):
    """Mesh of the unit cube in index space pushed through ``mapping``.

    Parameters
    ----------
    kind : str
        ``tet4``, ``tet10``, ``hex8`` or ``hex20``.
    divisions : tuple of int
        Cells per direction.
    mapping : callable
        ``(u: (n, 3) in [0, 1]^3) -> (n, 3)`` physical coordinates; applied
        after mid-nodes are inserted, so quadratic elements follow curved
        geometry.
    tagger : callable
        ``(u_centroid) -> tag`` for boundary faces.
    """
    nx, ny, nz = divisions
    ijk, index = _grid_nodes(nx, ny, nz)
    hexes = _hex_cells(nx, ny, nz, index)
    if kind in ("tet4", "tet10"):
        mesh = VolumeMesh(ijk, _kuhn_tets(hexes, ijk), TET4)
    else:
        mesh = VolumeMesh(ijk, hexes, HEX8)
    tags = _tag_box_faces(mesh, ijk, divisions, tagger)
    mesh = VolumeMesh(ijk, mesh.elements, mesh.kind, tags)
    if kind in ("tet10", "hex20"):
        mesh = promote_quadratic(mesh)
    u = mesh.nodes / np.asarray(divisions, float)
    return VolumeMesh(mapping(u), mesh.elements, mesh.kind, dict(mesh.face_tags)).validate()


def box_mesh(kind, divisions, lengths=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """Axis-aligned box; faces tagged ``x0, x1, y0, y1, z0, z1``."""
    L = np.asarray(lengths, float)
    o = np.asarray(origin, float)
    return structured(kind, divisions, lambda u: o + u * L)


def notched_bar(kind="hex8", divisions=(12, 4, 3), length=10.0, height=2.0,
                thickness=1.5, depth=0.5, width=1.0):
    """Bar with a smooth notch in its top face at mid-length.

    The top surface is ``y = height - depth * exp(-((x - L/2) / width)**2)``.
    Tags: ``fixed`` (x = 0), ``load`` (x = L), ``notch`` (top faces within
    1.5 widths of the notch root), ``top``, ``bottom``, ``side``. The mesh is
    mirror-symmetric about the plane ``z = thickness / 2``.
    """

    def mapping(u):
        x = u[:, 0] * length
        top = height - depth * np.exp(-(((x - length / 2) / width) ** 2))
        return np.column_stack([x, u[:, 1] * top, u[:, 2] * thickness])

    def tagger(u):
        if abs(u[0]) < 1e-9:
            return "fixed"
        if abs(u[0] - 1) < 1e-9:
            return "load"
        if abs(u[1] - 1) < 1e-9:
            return "notch" if abs(u[0] * length - length / 2) < 1.5 * width else "top"
        if abs(u[1]) < 1e-9:
            return "bottom"
        return "side"

    return structured(kind, divisions, mapping, tagger)


def ball_mesh(kind="tet4", n=4, radius=1.0):
    """Ball meshed by radially projecting a cube grid; boundary tag ``surface``."""

    def mapping(u):
        p = 2.0 * u - 1.0
        inf = np.abs(p).max(axis=1)
        two = np.linalg.norm(p, axis=1)
        scale = np.divide(inf, two, out=np.ones_like(inf), where=two > 0)
        return radius * p * scale[:, None]

    return structured(kind, (n, n, n), mapping, lambda u: "surface")


def facet_area(mesh):
    """Exact area of the straight-sided boundary facets (linear meshes).

    Triangles use the cross product; bilinear quads are split into two
    triangles, which is exact only for planar quads.
    """
    fn = mesh.face_nodes()[:, : mesh.kind.n_face_corners]
    X = mesh.nodes[fn]
    if fn.shape[1] == 3:
        return float(0.5 * np.linalg.norm(np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]), axis=1).sum())
    a = 0.5 * np.linalg.norm(np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]), axis=1)
    b = 0.5 * np.linalg.norm(np.cross(X[:, 2] - X[:, 0], X[:, 3] - X[:, 0]), axis=1)
    return float((a + b).sum())
