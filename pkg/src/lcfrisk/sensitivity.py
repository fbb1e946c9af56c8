"""Adjoint shape sensitivity of the proportional-hazard failure functional.

The objective is

    J(Omega) = sum_F sum_q w_q N_det(x_q)^(-m_bar)

evaluated with the surface quadrature of the discretised problem. Its
derivative with respect to the node coordinates is computed exactly (to
round-off) with one adjoint solve; element-level geometric derivatives use
complex-step differentiation. The nodal gradient is then reduced to the
design boundary through a harmonic mesh-motion extension and expressed as a
scalar density ``psi`` such that ``dJ[V] = int psi V.nu dA``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, MeshError, StepSizeError
from .failure_models import proportional_hazard_J
from .fem.geometry import SurfaceQuadrature, face_geometry, surface_quadrature
from .fem.mesh import VolumeMesh
from .fem.post import hooke, ndet_surface_field
from .fem.solver import (
    BoundaryConditions,
    DisplacementField,
    assemble_and_solve,
    element_body_load,
    element_stiffness,
    face_traction_load,
)
from .material import ElasticParams, Material, ndet_derivative, von_mises, von_mises_gradient

CS_STEP = 1e-30


@dataclass
class ShapeProblem:
    """Everything needed to re-evaluate the objective on a moved mesh."""

    mesh: VolumeMesh
    elastic: ElasticParams
    bc: BoundaryConditions
    material: Material
    m_bar: float
    tol: float = 1e-10
    face_order: int | None = None

    def __post_init__(self):
        if not self.m_bar >= 1:
            raise DomainError(f"m_bar must be >= 1, got {self.m_bar}")

    def moved(self, nodes):
        return ShapeProblem(self.mesh.with_nodes(nodes), self.elastic, self.bc,
                            self.material, self.m_bar, self.tol, self.face_order)

    def solve(self) -> DisplacementField:
        return assemble_and_solve(self.mesh, self.elastic, self.bc, self.tol,
                                  face_order=self.face_order)

    def quadrature(self) -> SurfaceQuadrature:
        return surface_quadrature(self.mesh, self.face_order)

    def objective(self, u=None, sq=None) -> float:
        """Proportional-hazard functional ``int N_det^-m_bar dA``."""
        u = self.solve() if u is None else u
        sq = self.quadrature() if sq is None else sq
        field = ndet_surface_field(u, self.material, sq)
        return proportional_hazard_J(field, self.m_bar)


# -- pointwise objective and its gradient -------------------------------------
@dataclass
class ObjectiveDerivative:
    """``F_sur`` and ``dF_sur / d(grad u)`` at surface quadrature points.

    Attributes
    ----------
    F : ndarray, shape (nf, nq)
    dF : ndarray, shape (nf, nq, 3, 3)
        Derivative with respect to the displacement gradient ``du_i/dx_j``.
    runout : ndarray of bool, shape (nf, nq)
        Capped points; their ``dF`` is zero.
    """

    F: np.ndarray
    dF: np.ndarray
    runout: np.ndarray
    quadrature: SurfaceQuadrature = field(repr=False)


def objective_integrand(grad_u, elastic: ElasticParams, material: Material, m_bar):
    """``F_sur(grad u) = N_det(vm(sigma/2))^-m_bar`` and its runout mask."""
    sig = hooke(grad_u, elastic.lam, elastic.mu)
    s = von_mises(0.5 * sig)
    N, _, runout = ndet_derivative(s.ravel(), material)
    return (N ** (-m_bar)).reshape(s.shape), runout.reshape(s.shape)


def integrand_gradient(grad_u, elastic: ElasticParams, material: Material, m_bar):
    """Chain-rule derivative of :func:`objective_integrand` in ``grad u``.

    Returns ``(F, dF, runout)``.
    """
    sig = hooke(grad_u, elastic.lam, elastic.mu)
    amp = 0.5 * sig
    s = von_mises(amp)
    N, dN, runout = ndet_derivative(s.ravel(), material)
    N = N.reshape(s.shape)
    dN = dN.reshape(s.shape)
    F = N ** (-m_bar)
    dF_ds = -m_bar * N ** (-m_bar - 1.0) * dN
    A = dF_ds[..., None, None] * 0.5 * von_mises_gradient(amp)
    trA = np.trace(A, axis1=-2, axis2=-1)
    dF = elastic.lam * trA[..., None, None] * np.eye(3) + 2.0 * elastic.mu * A
    return F, dF, runout.reshape(s.shape)


def surface_gradient_of_objective(u: DisplacementField, material: Material, m_bar,
                                  sq: SurfaceQuadrature | None = None) -> ObjectiveDerivative:
    """Tensor ``dF_sur/d(grad u)`` at every surface quadrature point."""
    sq = surface_quadrature(u.mesh) if sq is None else sq
    grad = u.gradient_at(sq.G, sq.elem)
    F, dF, runout = integrand_gradient(grad, u.elastic, material, m_bar)
    return ObjectiveDerivative(F, dF, runout, sq)


# -- adjoint ------------------------------------------------------------------
@dataclass
class AdjointField:
    """Adjoint displacements ``p`` (N, 3); zero on constrained components."""

    values: np.ndarray
    rhs: np.ndarray
    residual: float


def adjoint_rhs(u: DisplacementField, deriv: ObjectiveDerivative):
    """``dJ/du`` as a full (3N,) vector: ``sum w dF : (e_i x grad N_a)``."""
    sq = deriv.quadrature
    r_e = np.einsum("fq,fqij,fqaj->fai", sq.weights, deriv.dF, sq.G)
    R = np.zeros((u.mesh.n_nodes, 3))
    np.add.at(R, u.mesh.elements[sq.elem], r_e)
    return R.ravel()


def solve_adjoint(u: DisplacementField, material: Material, m_bar, sq=None,
                  deriv: ObjectiveDerivative | None = None) -> AdjointField:
    """Solve ``B(v, p) = int dF_sur : grad v dA`` for all admissible ``v``.

    Reuses the factorised stiffness of the state solve.
    """
    deriv = surface_gradient_of_objective(u, material, m_bar, sq) if deriv is None else deriv
    rhs = adjoint_rhs(u, deriv)
    p = u.system.solve(rhs)
    res = u.system.energy_residual(p, rhs)
    return AdjointField(p.reshape(-1, 3), rhs, res)


def bilinear_form(u: DisplacementField, v, w):
    """``B(v, w) = v . K w`` for nodal fields of shape (N, 3)."""
    return float(np.ravel(v) @ (u.system.K @ np.ravel(w)))


# -- full discrete shape gradient ---------------------------------------------
def _partial_objective(mesh, u, deriv, h=CS_STEP):
    sq = deriv.quadrature
    conn = mesh.elements[sq.elem]
    X = mesh.nodes[conn]
    ue = u.values[conn]
    out = np.zeros((mesh.n_nodes, 3))
    for b in range(mesh.kind.n_nodes):
        for k in range(3):
            Xc = X.astype(complex)
            Xc[:, b, k] += 1j * h
            _, w, _, G = face_geometry(Xc, sq.dN, sq.dxi_ds, sq.ref_weights, sq.N)
            dgrad = np.einsum("fni,fqnj->fqij", ue, G.imag / h)
            c = (w.imag / h) * deriv.F + sq.weights * np.einsum("fqij,fqij->fq", deriv.dF, dgrad)
            np.add.at(out[:, k], conn[:, b], c.sum(axis=1))
    return out


def _partial_residual(problem, u, p, h=CS_STEP):
    # d/dX of p . (f(X) - K(X) u) at fixed u, p
    mesh, bc = problem.mesh, problem.bc
    el = problem.elastic
    X = mesh.nodes[mesh.elements]
    n = mesh.kind.n_nodes
    ue = u.values[mesh.elements].reshape(mesh.n_elements, -1)
    pe = p[mesh.elements]
    out = np.zeros((mesh.n_nodes, 3))
    elem, lface, tags = mesh.boundary
    loaded = [(np.nonzero(tags == t)[0], g) for t, g in bc.traction.items()]
    for b in range(n):
        for k in range(3):
            Xc = X.astype(complex)
            Xc[:, b, k] += 1j * h
            dKu = np.einsum("mij,mj->mi", element_stiffness(Xc, mesh.kind, el.lam, el.mu).imag / h, ue)
            c = -np.einsum("mi,mi->m", pe.reshape(mesh.n_elements, -1), dKu)
            if bc.body_force is not None:
                df = element_body_load(Xc, mesh.kind, bc.body_force).imag / h
                c += np.einsum("mna,mna->m", pe, df)
            np.add.at(out[:, k], mesh.elements[:, b], c)
            for ids, g in loaded:
                if len(ids) == 0:
                    continue
                e = elem[ids]
                df = face_traction_load(Xc[e], mesh.kind, lface[ids], g, problem.face_order).imag / h
                np.add.at(out[:, k], mesh.elements[e, b], np.einsum("fna,fna->f", pe[e], df))
    return out


@dataclass
class ShapeGradient:
    """Nodal derivative ``dJ/dX`` (N, 3) with the states that produced it."""

    nodal: np.ndarray
    J: float
    u: DisplacementField = field(repr=False)
    p: AdjointField = field(repr=False)
    deriv: ObjectiveDerivative = field(repr=False)

    def directional(self, V):
        """``dJ[V] = sum_k G_k . V_k`` (exact discrete derivative)."""
        return math.fsum((self.nodal * np.asarray(V, float)).ravel())


def shape_gradient(problem: ShapeProblem) -> ShapeGradient:
    """Discrete derivative of the objective with respect to every node coordinate."""
    u = problem.solve()
    sq = problem.quadrature()
    deriv = surface_gradient_of_objective(u, problem.material, problem.m_bar, sq)
    p = solve_adjoint(u, problem.material, problem.m_bar, deriv=deriv)
    G = _partial_objective(problem.mesh, u, deriv) + _partial_residual(problem, u, p.values)
    J = problem.objective(u, sq)
    return ShapeGradient(G, J, u, p, deriv)


# -- design boundary ----------------------------------------------------------
def _scalar_laplacian(mesh):
    rule = mesh.kind.volume_rule
    dN = mesh.kind.shape_grad(rule.points)
    X = mesh.nodes[mesh.elements]
    J = np.einsum("mna,qnb->mqab", X, dN)
    G = np.einsum("qnb,mqba->mqna", dN, np.linalg.inv(J))
    w = np.linalg.det(J) * rule.weights
    Ke = np.einsum("mqai,mqbi,mq->mab", G, G, w)
    n = mesh.kind.n_nodes
    rows = np.repeat(mesh.elements, n, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, n)).ravel()
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()


class DesignSurface:
    """Movable boundary: non-Dirichlet faces minus nodes touching Dirichlet faces.

    Holds nodal normals, the boundary mass matrix on design nodes and the
    harmonic extension used to move interior nodes.
    """

    def __init__(self, mesh: VolumeMesh, bc: BoundaryConditions, face_order=None):
        self.mesh = mesh
        _, _, tags = mesh.boundary
        dtags = set(bc.dirichlet)
        self.face_ids = np.array([i for i, t in enumerate(tags) if t not in dtags], dtype=np.int64)
        if len(self.face_ids) == 0:
            raise MeshError("no Neumann faces to perturb")
        sq = surface_quadrature(mesh, face_order, faces=self.face_ids)
        self.quadrature = sq
        pinned = mesh.nodes_on_tags(dtags) if dtags else np.zeros(0, np.int64)
        cand = np.unique(mesh.face_nodes(self.face_ids).ravel())
        self.nodes = np.setdiff1d(cand, pinned)
        self.boundary_nodes = np.unique(mesh.face_nodes().ravel())
        self._index = -np.ones(mesh.n_nodes, dtype=np.int64)
        self._index[self.nodes] = np.arange(len(self.nodes))

        conn = mesh.elements[sq.elem]
        # nodal normals from shape-weighted face normals
        nv = np.zeros((mesh.n_nodes, 3))
        np.add.at(nv, conn, np.einsum("fqa,fq,fqi->fai", sq.N, sq.weights, sq.normals))
        nrm = np.linalg.norm(nv, axis=1)
        self.normals = np.divide(nv, nrm[:, None], out=np.zeros_like(nv), where=nrm[:, None] > 0)

        loc = self._index[conn]
        Me = np.einsum("fq,fqa,fqb->fab", sq.weights, sq.N, sq.N)
        keep = (loc[:, :, None] >= 0) & (loc[:, None, :] >= 0)
        r = np.broadcast_to(loc[:, :, None], Me.shape)[keep]
        c = np.broadcast_to(loc[:, None, :], Me.shape)[keep]
        nd = len(self.nodes)
        self.mass = sp.coo_matrix((Me[keep], (r, c)), shape=(nd, nd)).tocsc()
        self._mass_lu = spla.splu(self.mass)

        L = _scalar_laplacian(mesh)
        self.interior = np.setdiff1d(np.arange(mesh.n_nodes), self.boundary_nodes)
        self._L_ib = L[self.interior][:, self.nodes]
        self._L_ii_lu = spla.splu(L[self.interior][:, self.interior].tocsc()) if len(self.interior) else None

    @property
    def area(self):
        return math.fsum(self.quadrature.weights.ravel())

    def extend(self, V_design):
        """Full nodal field from values on design nodes (harmonic in the interior).

        Non-design boundary nodes stay fixed.
        """
        Vd = np.asarray(V_design, float).reshape(len(self.nodes), 3)
        V = np.zeros((self.mesh.n_nodes, 3))
        V[self.nodes] = Vd
        if self._L_ii_lu is not None:
            V[self.interior] = -self._L_ii_lu.solve(np.asarray(self._L_ib @ Vd))
        return V

    def reduce(self, G):
        """Gradient on design nodes of ``V_d -> G . extend(V_d)``."""
        G = np.asarray(G, float)
        Gd = G[self.nodes].copy()
        if self._L_ii_lu is not None:
            z = self._L_ii_lu.solve(G[self.interior], trans="T")
            Gd -= np.asarray(self._L_ib.T @ z)
        return Gd

    def normal_field(self, fn):
        """Design-node field ``fn(x) * nu`` extended to the whole mesh."""
        x = self.mesh.nodes[self.nodes]
        return self.extend(np.asarray(fn(x), float)[:, None] * self.normals[self.nodes])

    def tangential_field(self, fn, direction):
        """Design-node field ``fn(x) * (d - (d.nu) nu)`` extended to the mesh."""
        x = self.mesh.nodes[self.nodes]
        nu = self.normals[self.nodes]
        d = np.broadcast_to(np.asarray(direction, float), nu.shape)
        t = d - np.einsum("ki,ki->k", d, nu)[:, None] * nu
        return self.extend(np.asarray(fn(x), float)[:, None] * t)

    def face_interpolate(self, nodal_scalar):
        """Values at design-face quadrature points from design-node values."""
        full = np.zeros(self.mesh.n_nodes)
        full[self.nodes] = nodal_scalar
        conn = self.mesh.elements[self.quadrature.elem]
        return np.einsum("fqa,fa->fq", self.quadrature.N, full[conn])

    def normal_speed(self, V):
        """Face values of ``V.nu`` interpolated from design-node normal components."""
        V = np.asarray(V, float)
        return self.face_interpolate(np.einsum("ki,ki->k", V[self.nodes], self.normals[self.nodes]))


# -- Hadamard density -----------------------------------------------------------
@dataclass
class HadamardDensity:
    """Scalar shape-derivative density on the design (Neumann) faces.

    Attributes
    ----------
    face_ids : ndarray, shape (nf,)
    values : ndarray, shape (nf, nq)
        ``psi`` at face quadrature points.
    weights : ndarray, shape (nf, nq)
    nodal : ndarray, shape (n_design,)
        Coefficients on design nodes.
    runout : ndarray of bool, shape (nf, nq)
    """

    face_ids: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    nodal: np.ndarray
    runout: np.ndarray
    surface: DesignSurface = field(repr=False)
    method: str = "discrete"
    J: float = float("nan")

    @property
    def area(self):
        return math.fsum(self.weights.ravel())

    def norm(self):
        """Area-weighted root-mean-square of ``psi``."""
        return math.sqrt(math.fsum((self.weights * self.values**2).ravel()) / self.area)

    def directional(self, V):
        """``dJ[V] = int psi (V.nu) dA``."""
        vn = self.surface.normal_speed(V)
        return math.fsum((self.weights * self.values * vn).ravel())


def hadamard_density(problem: ShapeProblem, gradient: ShapeGradient | None = None,
                     surface: DesignSurface | None = None) -> HadamardDensity:
    """Density ``psi`` with ``int psi V.nu dA = dJ[V]`` for normal design motions.

    The discrete nodal gradient is reduced to the design nodes through the
    harmonic extension, projected on nodal normals and converted from a
    nodal load to a density with the boundary mass matrix.
    """
    gradient = shape_gradient(problem) if gradient is None else gradient
    surface = DesignSurface(problem.mesh, problem.bc, problem.face_order) if surface is None else surface
    Gd = surface.reduce(gradient.nodal)
    g = np.einsum("ki,ki->k", Gd, surface.normals[surface.nodes])
    psi_nodal = surface._mass_lu.solve(g)
    values = surface.face_interpolate(psi_nodal)
    # runout flags restricted to design faces
    pos = np.searchsorted(gradient.deriv.quadrature.face_ids, surface.face_ids)
    runout = gradient.deriv.runout[pos]
    return HadamardDensity(surface.face_ids, values, surface.quadrature.weights, psi_nodal,
                           runout, surface, "discrete", gradient.J)


def fd_shape_gradient(problem: ShapeProblem, V, h):
    """Central difference ``(J(X + hV) - J(X - hV)) / 2h`` with re-solved states.

    Raises
    ------
    StepSizeError
        A perturbed mesh has an inverted element.
    """
    V = np.asarray(V, float).reshape(problem.mesh.n_nodes, 3)
    if not np.any(V):
        return 0.0
    vals = []
    for s in (1.0, -1.0):
        try:
            moved = problem.moved(problem.mesh.nodes + s * h * V)
            moved.mesh.validate()
        except MeshError as exc:
            raise StepSizeError(f"perturbation step h={h:g} inverts the mesh ({exc}); use a smaller h") from None
        vals.append(moved.objective())
    return (vals[0] - vals[1]) / (2.0 * h)


def optimality_residual(density: HadamardDensity) -> float:
    """Area-weighted standard deviation of ``psi`` over the design faces."""
    w = density.weights.ravel()
    v = density.values.ravel()
    A = math.fsum(w)
    mean = math.fsum(w * v) / A
    return math.sqrt(max(math.fsum(w * (v - mean) ** 2) / A, 0.0))


def gradcheck(problem: ShapeProblem, fields, h=None):
    """Compare density-based and finite-difference derivatives.

    Parameters
    ----------
    fields : dict
        ``name -> nodal perturbation (N, 3)``.
    h : float, optional
        FD step; defaults to ``1e-4`` times the mesh bounding-box size.

    Returns
    -------
    list of dict
        ``{name, dJ_adjoint, dJ_fd, dJ_exact, relative_gap, fd_over_scale}``
        per field. ``fd_over_scale`` divides the FD derivative by
        ``int |psi| dA * max |V|``, the largest value any field of that size
        could produce; it is the useful measure for tangential fields,
        whose derivative should vanish.
    """
    grad = shape_gradient(problem)
    dens = hadamard_density(problem, grad)
    if h is None:
        h = 1e-4 * float(np.ptp(problem.mesh.nodes, axis=0).max())
    l1 = math.fsum((dens.weights * np.abs(dens.values)).ravel())
    out = []
    for name, V in fields.items():
        a = dens.directional(V)
        fd = fd_shape_gradient(problem, V, h)
        gap = abs(a - fd) / max(abs(fd), 1e-300)
        scale = l1 * float(np.linalg.norm(V, axis=1).max())
        out.append({"name": name, "dJ_adjoint": a, "dJ_fd": fd,
                    "dJ_exact": grad.directional(V), "relative_gap": gap,
                    "fd_over_scale": fd / scale if scale > 0 else 0.0})
    return out, dens
