"""Per-quadrature-point data living on the boundary of a mesh."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ScalarSurfaceField:
    """Scalar values at surface quadrature points.

    Attributes
    ----------
    face_ids : ndarray of int, shape (nf,)
        Boundary-face identifiers; reductions run in ascending id order.
    values : ndarray, shape (nf, nq)
    weights : ndarray, shape (nf, nq)
        Physical quadrature weights (reference weight times the square root
        of the Gram determinant).
    points : ndarray, shape (nf, nq, 3), optional
    flags : ndarray of bool, shape (nf, nq), optional
        Per-point flags, e.g. runout.
    """

    face_ids: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    points: np.ndarray | None = None
    flags: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        fid = np.asarray(self.face_ids, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if w.ndim == 1:
            w = w[:, None]
        if vals.shape != w.shape or vals.shape[0] != fid.shape[0]:
            raise ValueError(
                f"shape mismatch: ids {fid.shape}, values {vals.shape}, weights {w.shape}"
            )
        order = np.argsort(fid, kind="stable")
        object.__setattr__(self, "face_ids", fid[order])
        object.__setattr__(self, "values", vals[order])
        object.__setattr__(self, "weights", w[order])
        if self.points is not None:
            object.__setattr__(self, "points", np.asarray(self.points, float)[order])
        if self.flags is not None:
            object.__setattr__(self, "flags", np.asarray(self.flags, bool)[order])

    @classmethod
    def constant(cls, value, weights, face_ids=None):
        w = np.asarray(weights, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        ids = np.arange(w.shape[0]) if face_ids is None else face_ids
        return cls(ids, np.full(w.shape, float(value)), w)

    def with_values(self, values, flags=None):
        return replace(self, values=np.asarray(values, float), flags=flags)

    @property
    def n_points(self):
        return self.values.size

    @property
    def area(self):
        return math.fsum(self.weights.ravel())

    def subset(self, face_mask):
        """Restrict to the faces selected by a boolean mask over ``face_ids``."""
        m = np.asarray(face_mask, dtype=bool)
        return replace(
            self,
            face_ids=self.face_ids[m],
            values=self.values[m],
            weights=self.weights[m],
            points=None if self.points is None else self.points[m],
            flags=None if self.flags is None else self.flags[m],
        )


@dataclass(frozen=True)
class TensorField:
    """Symmetric 3x3 tensors (stress) at surface quadrature points."""

    face_ids: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    normals: np.ndarray

    def scalar(self, values, flags=None, **meta):
        return ScalarSurfaceField(
            self.face_ids, values, self.weights, self.points, flags, dict(meta)
        )
