"""Stress recovery, surface integrals and lifing on surface quadrature points."""

from __future__ import annotations

import csv
import math

import numpy as np

from ..fields import ScalarSurfaceField, TensorField
from ..material import Material, ndet_from_elastic_stress, von_mises
from .geometry import SurfaceQuadrature, surface_quadrature
from .solver import DisplacementField


def hooke(grad_u, lam, mu):
    """Cauchy stress ``lam tr(eps) I + 2 mu eps`` from displacement gradients."""
    eps = 0.5 * (grad_u + np.swapaxes(grad_u, -1, -2))
    tr = np.trace(eps, axis1=-2, axis2=-1)
    return lam * tr[..., None, None] * np.eye(3) + 2.0 * mu * eps


def _quadrature(u: DisplacementField, sq, faces):
    if sq is None:
        return surface_quadrature(u.mesh, faces=faces)
    return sq if faces is None else sq.subset(faces)


def stress_at_quadrature(u: DisplacementField, sq: SurfaceQuadrature | None = None,
                         faces=None) -> TensorField:
    """Stress tensors at the surface quadrature points of all (or ``faces``) boundary faces.

    Gradients are taken in the element owning each face, so values are
    exactly symmetric and linear displacements give constant stress.
    """
    q = _quadrature(u, sq, faces)
    grad = u.gradient_at(q.G, q.elem)
    sig = hooke(grad, u.elastic.lam, u.elastic.mu)
    sig = 0.5 * (sig + np.swapaxes(sig, -1, -2))
    return TensorField(q.face_ids, sig, q.weights, q.points, q.normals)


def surface_integral(field: ScalarSurfaceField) -> float:
    """Quadrature sum over faces in ascending face-id order (compensated)."""
    per_face = [math.fsum(row) for row in (field.values * field.weights)]
    return math.fsum(per_face)


def ones_field(mesh, faces=None, sq=None) -> ScalarSurfaceField:
    """Unit field on boundary faces; its integral is the surface area."""
    q = sq if sq is not None else surface_quadrature(mesh, faces=faces)
    return ScalarSurfaceField(q.face_ids, np.ones_like(q.weights), q.weights, q.points)


def ndet_surface_field(u: DisplacementField, material: Material, sq=None, faces=None,
                       tol=None) -> ScalarSurfaceField:
    """Deterministic lives at surface quadrature points.

    The load case is read as a load range, so the amplitude stress is half
    the solved stress. Runout points carry ``material.N_max`` and are
    flagged.
    """
    stress = stress_at_quadrature(u, sq, faces)
    amp = von_mises(0.5 * stress.values)
    kw = {} if tol is None else {"tol": tol}
    life = ndet_from_elastic_stress(amp, material, **kw)
    return stress.scalar(life.cycles, life.runout, quantity="N_det", von_mises_amplitude=amp)


def write_displacement_csv(u: DisplacementField, path):
    """CSV with columns ``node,x,y,z,ux,uy,uz``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", "z", "ux", "uy", "uz"])
        for i, (x, d) in enumerate(zip(u.mesh.nodes.tolist(), u.values.tolist())):
            w.writerow([i, *map(repr, x), *map(repr, d)])


def write_stress_csv(stress: TensorField, path, extra=None):
    """CSV keyed by ``face,qp`` with point, weight, Voigt stress and optional columns.

    ``extra`` maps column name to an (nf, nq) array.
    """
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["face", "qp", "x", "y", "z", "weight",
                    "s_xx", "s_yy", "s_zz", "s_yz", "s_xz", "s_xy", *extra])
        s = stress.values
        for f, fid in enumerate(stress.face_ids.tolist()):
            for q in range(s.shape[1]):
                m = s[f, q]
                row = [fid, q, *map(repr, stress.points[f, q].tolist()), repr(float(stress.weights[f, q])),
                       *(repr(float(v)) for v in (m[0, 0], m[1, 1], m[2, 2], m[1, 2], m[0, 2], m[0, 1]))]
                row += [repr(float(np.asarray(col)[f, q])) for col in extra.values()]
                w.writerow(row)
