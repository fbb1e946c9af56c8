"""Element-level geometry: mapped gradients and surface quadrature data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import VolumeMesh


def mapped_gradients(X, dN):
    """Physical shape-function gradients.

    Parameters
    ----------
    X : ndarray, shape (..., n_nodes, 3)
        Element node coordinates (real or complex).
    dN : ndarray, shape (..., n_nodes, 3)
        Reference gradients at the evaluation point(s), broadcastable
        against ``X``.

    Returns
    -------
    G : ndarray, shape (..., n_nodes, 3)
    detJ : ndarray, shape (...)
    J : ndarray, shape (..., 3, 3)
    """
    J = np.einsum("...na,...nb->...ab", X, dN)
    Jinv = np.linalg.inv(J)
    G = np.einsum("...nb,...ba->...na", dN, Jinv)
    return G, np.linalg.det(J), J


@dataclass
class SurfaceQuadrature:
    """Quadrature data on every boundary face of a mesh.

    Arrays are indexed ``[face, point, ...]``; the face axis follows the
    mesh's boundary face ids.
    """

    face_ids: np.ndarray
    elem: np.ndarray
    lface: np.ndarray
    tags: np.ndarray
    ref_weights: np.ndarray  # (nq,)
    xi: np.ndarray  # (nf, nq, 3) element reference coords
    N: np.ndarray  # (nf, nq, nn)
    dN: np.ndarray  # (nf, nq, nn, 3) reference gradients
    dxi_ds: np.ndarray  # (nf, 3, 2)
    points: np.ndarray  # (nf, nq, 3)
    weights: np.ndarray  # (nf, nq)
    normals: np.ndarray  # (nf, nq, 3)
    G: np.ndarray  # (nf, nq, nn, 3) physical gradients

    @property
    def n_faces(self):
        return len(self.face_ids)

    def subset(self, face_ids):
        idx = np.asarray(face_ids)
        return SurfaceQuadrature(
            self.face_ids[idx], self.elem[idx], self.lface[idx], self.tags[idx],
            self.ref_weights, self.xi[idx], self.N[idx], self.dN[idx],
            self.dxi_ds[idx], self.points[idx], self.weights[idx],
            self.normals[idx], self.G[idx],
        )


def face_reference_data(kind, n=None):
    """Per local face: (xi, N, dN, dxi_ds, ref_weights)."""
    rule = kind.face_rule(n)
    out = []
    for lf in range(len(kind.faces)):
        xi, T = kind.face_map(lf, rule.points)
        out.append((xi, kind.shape(xi), kind.shape_grad(xi), T, rule.weights))
    return out


def face_geometry(X, dN, dxi_ds, ref_w, N):
    """Physical points, weights, unit normals and gradients on faces.

    Works for complex ``X`` as well (complex-step differentiation); the
    normals are then not normalised by a complex-safe norm and should not
    be used.
    """
    G, _, J = mapped_gradients(X[:, None], dN)
    T = np.einsum("fqab,fbc->fqac", J, dxi_ds)  # (nf, nq, 3, 2)
    t1, t2 = T[..., 0], T[..., 1]
    gram = (
        np.einsum("...a,...a->...", t1, t1) * np.einsum("...a,...a->...", t2, t2)
        - np.einsum("...a,...a->...", t1, t2) ** 2
    )
    w = ref_w[None, :] * np.sqrt(gram)
    pts = np.einsum("fqn,fna->fqa", N, X)
    nrm = np.cross(t1, t2)
    return pts, w, nrm, G


def surface_quadrature(mesh: VolumeMesh, n=None, faces=None) -> SurfaceQuadrature:
    """Quadrature on boundary faces (default 4x4 on quads, 25-point on triangles)."""
    elem, lface, tags = mesh.boundary
    fids = np.arange(len(elem)) if faces is None else np.asarray(faces, dtype=np.int64)
    elem, lface, tags = elem[fids], lface[fids], tags[fids]
    ref = face_reference_data(mesh.kind, n)
    xi = np.stack([ref[lf][0] for lf in lface]) if len(fids) else np.zeros((0, 0, 3))
    N = np.stack([ref[lf][1] for lf in lface]) if len(fids) else None
    dN = np.stack([ref[lf][2] for lf in lface]) if len(fids) else None
    T = np.stack([ref[lf][3] for lf in lface]) if len(fids) else None
    ref_w = ref[0][4]
    X = mesh.nodes[mesh.elements[elem]]
    pts, w, nrm, G = face_geometry(X, dN, T, ref_w, N)
    nrm = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
    return SurfaceQuadrature(fids, elem, lface, tags, ref_w, xi, N, dN, T, pts, w, nrm, G)
