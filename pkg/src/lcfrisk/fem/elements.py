"""Lagrange reference elements: tet4, tet10, hex8, hex20.

Shape functions are built by inverting the Vandermonde matrix of each
element's monomial basis at its nodes, so every kind shares one evaluation
path. Node numbering follows the VTK convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import QuadratureRule, gauss_cube, gauss_square, gauss_tetrahedron, gauss_triangle

_TET_CORNERS = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
_TET_EDGES = [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)]
_TET_FACES = [(0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)]

_HEX_CORNERS = np.array(
    [
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ],
    dtype=float,
)
_HEX_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
]
_HEX_FACES = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (0, 4, 7, 3)]

_P1 = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
_P2 = _P1 + [(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1)]
_Q1 = [(i, j, k) for k in (0, 1) for j in (0, 1) for i in (0, 1)]
_S2 = _Q1 + [
    (2, 0, 0), (0, 2, 0), (0, 0, 2),
    (2, 1, 0), (2, 0, 1), (1, 2, 0), (0, 2, 1), (1, 0, 2), (0, 1, 2),
    (2, 1, 1), (1, 2, 1), (1, 1, 2),
]


def _monomials(exps, x):
    x = np.atleast_2d(x)
    e = np.asarray(exps)
    return np.prod(x[:, None, :] ** e[None, :, :], axis=2)


def _monomial_grads(exps, x):
    x = np.atleast_2d(x)
    e = np.asarray(exps, dtype=float)
    out = np.empty((x.shape[0], len(exps), 3))
    for d in range(3):
        ed = e.copy()
        coef = ed[:, d].copy()
        ed[:, d] = np.maximum(ed[:, d] - 1, 0)
        out[:, :, d] = coef[None, :] * np.prod(x[:, None, :] ** ed[None, :, :], axis=2)
    return out


@dataclass(frozen=True)
class ElementKind:
    """Reference element description.

    Attributes
    ----------
    faces : list of tuple
        Local node indices of each face, corners first (outward orientation)
        then mid-edge nodes for quadratic kinds.
    face_shape : str
        ``"tri"`` or ``"quad"``.
    """

    name: str
    ref_nodes: np.ndarray
    exponents: tuple
    faces: tuple
    face_shape: str
    n_corners: int
    order: int
    edges: tuple
    volume_rule: QuadratureRule
    coeffs: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        V = _monomials(self.exponents, self.ref_nodes)
        object.__setattr__(self, "coeffs", np.linalg.inv(V))

    @property
    def n_nodes(self):
        return len(self.ref_nodes)

    @property
    def n_face_corners(self):
        return 3 if self.face_shape == "tri" else 4

    def shape(self, xi):
        """Shape function values, shape (npts, n_nodes)."""
        return _monomials(self.exponents, xi) @ self.coeffs

    def shape_grad(self, xi):
        """Reference gradients, shape (npts, n_nodes, 3)."""
        g = _monomial_grads(self.exponents, xi)
        return np.einsum("pkd,kn->pnd", g, self.coeffs)

    def face_rule(self, n=None):
        """Reference rule on a face: 2D points and weights."""
        if self.face_shape == "tri":
            return gauss_triangle(5 if n is None else n)
        return gauss_square(4 if n is None else n)

    def face_map(self, lf, pts2d):
        """Map face reference points into element reference coordinates.

        Returns ``(xi, dxi_ds)`` with ``xi`` of shape (npts, 3) and the
        constant (3, 2) derivative of the (affine) face map.
        """
        corners = self.ref_nodes[list(self.faces[lf][: self.n_face_corners])]
        s = np.atleast_2d(pts2d)
        if self.face_shape == "tri":
            a, b, c = corners
            T = np.column_stack([b - a, c - a])
            return a + s @ T.T, T
        a, b, c, d = corners
        # bilinear on [-1,1]^2, affine because reference faces are squares
        centre = 0.25 * (a + b + c + d)
        T = np.column_stack([0.5 * (b - a), 0.5 * (d - a)])
        return centre + s @ T.T, T


def _quadratic_nodes(corners, edges):
    mids = [(corners[i] + corners[j]) / 2 for i, j in edges]
    return np.vstack([corners, mids])


def _face_with_mids(faces, edges, offset):
    lookup = {frozenset(e): offset + k for k, e in enumerate(edges)}
    out = []
    for f in faces:
        n = len(f)
        mids = [lookup[frozenset((f[i], f[(i + 1) % n]))] for i in range(n)]
        out.append(tuple(f) + tuple(mids))
    return tuple(out)


TET4 = ElementKind(
    "tet4", _TET_CORNERS, tuple(_P1), tuple(_TET_FACES), "tri", 4, 1,
    tuple(_TET_EDGES), gauss_tetrahedron(2),
)
TET10 = ElementKind(
    "tet10", _quadratic_nodes(_TET_CORNERS, _TET_EDGES), tuple(_P2),
    _face_with_mids(_TET_FACES, _TET_EDGES, 4), "tri", 4, 2,
    tuple(_TET_EDGES), gauss_tetrahedron(2),
)
HEX8 = ElementKind(
    "hex8", _HEX_CORNERS, tuple(_Q1), tuple(_HEX_FACES), "quad", 8, 1,
    tuple(_HEX_EDGES), gauss_cube(2),
)
# reduced 2x2x2 volume integration for the serendipity brick
HEX20 = ElementKind(
    "hex20", _quadratic_nodes(_HEX_CORNERS, _HEX_EDGES), tuple(_S2),
    _face_with_mids(_HEX_FACES, _HEX_EDGES, 8), "quad", 8, 2,
    tuple(_HEX_EDGES), gauss_cube(2),
)

KINDS = {k.name: k for k in (TET4, TET10, HEX8, HEX20)}


def get_kind(name):
    try:
        return KINDS[name]
    except KeyError:
        raise ValueError(f"unknown element kind {name!r}; expected one of {sorted(KINDS)}") from None


def quadratic_partner(kind):
    return {"tet4": TET10, "hex8": HEX20}[kind.name]
