"""Linear-elastic assembly and solve on a :class:`VolumeMesh`."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import AssemblyError, DomainError, MeshError, SolverError
from ..material import ElasticParams
from .geometry import face_geometry, face_reference_data, mapped_gradients
from .mesh import VolumeMesh

ALL = (0, 1, 2)


@dataclass
class BoundaryConditions:
    """Homogeneous Dirichlet constraints plus surface and body loads.

    Attributes
    ----------
    dirichlet : dict
        ``tag -> components`` fixed to zero; use ``(0, 1, 2)`` for a clamp and
        a single component for a roller.
    traction : dict
        ``tag -> g`` where ``g`` is a constant 3-vector or a callable
        ``g(points, normals) -> (..., 3)``.
    body_force : array_like or callable, optional
        Constant 3-vector or ``f(points) -> (..., 3)``.
    """

    dirichlet: dict = field(default_factory=dict)
    traction: dict = field(default_factory=dict)
    body_force: object = None

    @classmethod
    def clamped(cls, tags, traction=None, body_force=None):
        tags = [tags] if isinstance(tags, str) else list(tags)
        return cls({t: ALL for t in tags}, dict(traction or {}), body_force)

    def check(self, mesh: VolumeMesh):
        known = set(mesh.tags())
        errs = [f"unknown boundary tag {t!r}" for t in [*self.dirichlet, *self.traction] if t not in known]
        for t, comps in self.dirichlet.items():
            if not set(comps) <= set(ALL) or not comps:
                errs.append(f"dirichlet components for {t!r} must be a non-empty subset of (0, 1, 2)")
        if not self.dirichlet:
            errs.append("Dirichlet region is empty")
        if errs:
            raise MeshError("; ".join(errs))


def centrifugal_force(density, omega=None, rpm=None, axis=(0.0, 0.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """Body force ``rho * omega**2 * r_perp`` of a rotating part.

    Give either the angular rate ``omega`` [rad per time unit] or ``rpm``.
    """
    if (omega is None) == (rpm is None):
        raise DomainError("give exactly one of omega or rpm")
    w = omega if omega is not None else rpm * 2.0 * math.pi / 60.0
    a = np.asarray(axis, float)
    a = a / np.linalg.norm(a)
    o = np.asarray(origin, float)

    def f(x):
        r = x - o
        return density * w**2 * (r - np.einsum("...i,i->...", r, a)[..., None] * a)

    return f


def _eval_load(g, *args):
    if callable(g):
        return np.asarray(g(*args))
    shape = args[0].shape[:-1] + (3,)
    return np.broadcast_to(np.asarray(g, dtype=float), shape)


# -- element kernels ---------------------------------------------------------
def element_stiffness(X, kind, lam, mu):
    """Element stiffness matrices, shape (M, 3n, 3n), dof order ``3*node + comp``.

    ``X`` may be complex (complex-step differentiation).
    """
    rule = kind.volume_rule
    dN = kind.shape_grad(rule.points)
    G, det, _ = mapped_gradients(X[:, None], dN[None])
    w = det * rule.weights[None, :]
    GG = np.einsum("mqai,mqbj,mq->maibj", G, G, w)
    # K[a i, b j] = lam G_ai G_bj + mu (G_ak G_bk d_ij + G_aj G_bi)
    dot = np.einsum("maibi->mab", GG)
    n = kind.n_nodes
    K = lam * GG + mu * GG.transpose(0, 1, 4, 3, 2)
    K = K + mu * np.einsum("mab,ij->maibj", dot, np.eye(3))
    return K.reshape(len(X), 3 * n, 3 * n)


def element_body_load(X, kind, f):
    """Consistent nodal loads of a body force, shape (M, n, 3)."""
    rule = kind.volume_rule
    N = kind.shape(rule.points)
    dN = kind.shape_grad(rule.points)
    _, det, _ = mapped_gradients(X[:, None], dN[None])
    pts = np.einsum("qn,mna->mqa", N, X)
    fv = _eval_load(f, pts)
    return np.einsum("qn,mqa,mq,q->mna", N, fv, det, rule.weights)


def face_traction_load(X, kind, lface, g, n=None):
    """Consistent nodal loads of a traction on element faces, (nf, n_nodes, 3).

    ``X`` holds the coordinates of the elements owning the faces.
    """
    ref = face_reference_data(kind, n)
    N = np.stack([ref[lf][1] for lf in lface])
    dN = np.stack([ref[lf][2] for lf in lface])
    T = np.stack([ref[lf][3] for lf in lface])
    pts, w, nrm, _ = face_geometry(X, dN, T, ref[0][4], N)
    if np.iscomplexobj(nrm):
        nrm_u = nrm / np.sqrt(np.einsum("...i,...i->...", nrm, nrm))[..., None]
    else:
        nrm_u = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
    gv = _eval_load(g, pts, nrm_u)
    return np.einsum("fqn,fqa,fq->fna", N, gv, w)


# -- global system -----------------------------------------------------------
def _element_dofs(mesh):
    return (3 * mesh.elements[:, :, None] + np.arange(3)).reshape(mesh.n_elements, -1)


def assemble_stiffness(mesh: VolumeMesh, elastic: ElasticParams):
    """Global sparse stiffness (CSR, 3N x 3N)."""
    Ke = element_stiffness(mesh.nodes[mesh.elements], mesh.kind, elastic.lam, elastic.mu)
    dofs = _element_dofs(mesh)
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    n = 3 * mesh.n_nodes
    # coo -> csr sums duplicates in a fixed order, so assembly is deterministic
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_load(mesh: VolumeMesh, bc: BoundaryConditions, face_order=None):
    """Global load vector (3N,) from body force and tractions."""
    F = np.zeros((mesh.n_nodes, 3))
    if bc.body_force is not None:
        fe = element_body_load(mesh.nodes[mesh.elements], mesh.kind, bc.body_force)
        np.add.at(F, mesh.elements, fe)
    elem, lface, tags = mesh.boundary
    for tag, g in bc.traction.items():
        ids = np.nonzero(tags == tag)[0]
        if len(ids) == 0:
            continue
        e = elem[ids]
        fe = face_traction_load(mesh.nodes[mesh.elements[e]], mesh.kind, lface[ids], g, face_order)
        np.add.at(F, mesh.elements[e], fe)
    return F.ravel()


def constrained_dofs(mesh: VolumeMesh, bc: BoundaryConditions):
    """Boolean mask (N, 3) of dofs fixed to zero."""
    mask = np.zeros((mesh.n_nodes, 3), dtype=bool)
    for tag, comps in bc.dirichlet.items():
        nodes = mesh.nodes_on_tags(tag)
        for c in comps:
            mask[nodes, c] = True
    return mask


class LinearSystem:
    """Stiffness restricted to free dofs, factorised once and reused.

    ``solve`` takes and returns full-length (3N,) vectors; constrained
    entries of the result are zero.
    """

    def __init__(self, K, fixed_mask, method="direct", tol=1e-10):
        self.K = K
        self.fixed = np.asarray(fixed_mask, bool).ravel()
        self.free = np.nonzero(~self.fixed)[0]
        if len(self.free) == len(self.fixed):
            raise AssemblyError("no Dirichlet constraints: stiffness is singular")
        self.Kff = K[self.free][:, self.free].tocsc()
        self.method = method
        self.tol = tol
        self._lu = None
        if method not in ("direct", "cg"):
            raise DomainError(f"unknown solver method {method!r}")

    def _factor(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.Kff)
            except RuntimeError as exc:
                raise AssemblyError(f"stiffness factorisation failed: {exc}") from None
            d = self._lu.U.diagonal()
            if np.any(d == 0) or not np.all(np.isfinite(d)):
                raise AssemblyError("singular stiffness matrix (check Dirichlet constraints)")
        return self._lu

    def _solve_free(self, b):
        if self.method == "direct":
            lu = self._factor()
            x = lu.solve(b)
            r = b - self.Kff @ x
            x = x + lu.solve(r)  # one step of iterative refinement
            return x
        diag = self.Kff.diagonal()
        M = sp.diags(1.0 / diag)
        x, info = spla.cg(self.Kff, b, rtol=self.tol * 1e-2, atol=0.0, M=M, maxiter=20 * len(b))
        if info != 0:
            r = np.linalg.norm(b - self.Kff @ x) / max(np.linalg.norm(b), 1e-300)
            raise SolverError(f"CG did not converge (relative residual {r:.3e})", residual=r)
        return x

    def solve(self, rhs):
        b = np.asarray(rhs, float)[self.free]
        x = np.zeros(len(self.fixed))
        if np.any(b):
            x[self.free] = self._solve_free(b)
        return x

    def energy_residual(self, x, rhs):
        """Residual of the free equations in the energy norm, relative.

        Returns ``sqrt(r . K^-1 r) / sqrt(b . K^-1 b)`` (zero for a zero load).
        """
        b = np.asarray(rhs, float)[self.free]
        nb = np.linalg.norm(b)
        if nb == 0:
            return 0.0
        r = b - self.Kff @ np.asarray(x, float)[self.free]
        if self.method == "direct":
            e = self._factor().solve(r)
            xb = self._factor().solve(b)
            return math.sqrt(abs(r @ e)) / math.sqrt(abs(b @ xb))
        return float(np.linalg.norm(r) / nb)


@dataclass
class DisplacementField:
    """Nodal displacements of a solved elastic problem.

    Attributes
    ----------
    values : ndarray, shape (N, 3)
    fixed : ndarray of bool, shape (N, 3)
        Constrained components (zero by construction).
    residual : float
        Relative energy-norm residual of the discrete weak form.
    """

    mesh: VolumeMesh
    values: np.ndarray
    elastic: ElasticParams
    bc: BoundaryConditions
    fixed: np.ndarray
    residual: float
    system: LinearSystem | None = field(default=None, repr=False)
    load: np.ndarray | None = field(default=None, repr=False)

    def energy(self):
        """Strain energy ``u . K u / 2``."""
        u = self.values.ravel()
        return 0.5 * float(u @ (self.system.K @ u))

    def gradient_at(self, G, elem):
        """Displacement gradients ``du_i/dx_j`` from physical shape gradients.

        ``G`` has shape (nf, nq, n_nodes, 3) and ``elem`` (nf,) names the
        owning element of each face row.
        """
        ue = self.values[self.mesh.elements[elem]]
        return np.einsum("fni,fqnj->fqij", ue, G)


def assemble_and_solve(
    mesh: VolumeMesh,
    elastic: ElasticParams,
    bc: BoundaryConditions,
    tol=1e-10,
    method="direct",
    face_order=None,
) -> DisplacementField:
    """Assemble and solve the linear-elastic boundary value problem.

    Parameters
    ----------
    mesh : VolumeMesh
    elastic : ElasticParams
    bc : BoundaryConditions
        Dirichlet constraints, tractions and body force.
    tol : float
        Bound on the relative energy-norm residual.
    method : {"direct", "cg"}
        Sparse LU (default) or Jacobi-preconditioned conjugate gradients.

    Raises
    ------
    AssemblyError
        Singular system.
    SolverError
        Residual above ``tol``.
    """
    bc.check(mesh)
    K = assemble_stiffness(mesh, elastic)
    F = assemble_load(mesh, bc, face_order)
    fixed = constrained_dofs(mesh, bc)
    system = LinearSystem(K, fixed, method, tol)
    u = system.solve(F)
    res = system.energy_residual(u, F)
    if not np.all(np.isfinite(u)) or res > tol:
        raise SolverError(f"elastic solve residual {res:.3e} exceeds tol {tol:.1e}", residual=res)
    return DisplacementField(mesh, u.reshape(-1, 3), elastic, bc, fixed, res, system, F)


def displacement_from_function(mesh, elastic, fn, bc=None):
    """Wrap nodal values ``fn(nodes)`` as a :class:`DisplacementField` (no solve)."""
    vals = np.asarray(fn(mesh.nodes), float).reshape(mesh.n_nodes, 3)
    bc = bc or BoundaryConditions()
    return DisplacementField(mesh, vals, elastic, bc, np.zeros_like(vals, bool), 0.0)

