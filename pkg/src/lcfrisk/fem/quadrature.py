"""Gauss rules on reference lines, squares, cubes, triangles and tetrahedra.

Simplex rules are collapsed (Duffy) products of Gauss-Jacobi and
Gauss-Legendre rules; with ``n`` points per direction they integrate
polynomials of total degree ``2n - 1`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights on a reference domain.

    ``degree`` is the polynomial degree integrated exactly; ``measure`` is
    the measure of the reference domain (the weight sum).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int
    domain: str

    @property
    def measure(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_line(n):
    """n-point Gauss-Legendre on [-1, 1]."""
    x, w = roots_legendre(n)
    return QuadratureRule(x[:, None], w, 2 * n - 1, "line")


@lru_cache(maxsize=None)
def gauss_square(n):
    """Tensor Gauss rule on [-1, 1]^2."""
    x, w = roots_legendre(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), 2 * n - 1, "square")


@lru_cache(maxsize=None)
def gauss_cube(n):
    """Tensor Gauss rule on [-1, 1]^3."""
    x, w = roots_legendre(n)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    W = np.einsum("i,j,k->ijk", w, w, w)
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    return QuadratureRule(pts, W.ravel(), 2 * n - 1, "cube")


def _jacobi01(n, alpha):
    # Gauss-Jacobi mapped to [0, 1] for weight (1 - u)**alpha
    x, w = roots_jacobi(n, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def gauss_triangle(n):
    """Collapsed rule with n*n points on the triangle (0,0), (1,0), (0,1)."""
    u, wu = _jacobi01(n, 1.0)
    v, wv = _jacobi01(n, 0.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    return QuadratureRule(pts, np.outer(wu, wv).ravel(), 2 * n - 1, "triangle")


@lru_cache(maxsize=None)
def gauss_tetrahedron(n):
    """Collapsed rule with n**3 points on the unit reference tetrahedron."""
    u, wu = _jacobi01(n, 2.0)
    v, wv = _jacobi01(n, 1.0)
    s, ws = _jacobi01(n, 0.0)
    U, V, S = np.meshgrid(u, v, s, indexing="ij")
    pts = np.column_stack(
        [U.ravel(), (V * (1 - U)).ravel(), (S * (1 - U) * (1 - V)).ravel()]
    )
    W = np.einsum("i,j,k->ijk", wu, wv, ws)
    return QuadratureRule(pts, W.ravel(), 2 * n - 1, "tetrahedron")


def triangle_rule_for_degree(degree):
    return gauss_triangle(max(1, (degree + 2) // 2))


def square_rule_for_degree(degree):
    return gauss_square(max(1, (degree + 2) // 2))
