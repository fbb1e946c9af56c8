"""Analysis pipelines behind the command-line subcommands.

Each ``run_*`` function takes a validated :class:`~lcfrisk.config.RunConfig`
and returns ``(record, tables)``: a JSON-ready result record and a dict
``filename -> (header, rows)`` of CSV tables.
"""

from __future__ import annotations

import numpy as np

from . import __version__
from . import _backend
from .config import RunConfig
from .errors import DomainError
from .failure_models import (
    Gompertz,
    GompertzModelParams,
    Weibull,
    evaluate,
    gompertz_from_field,
    ndet_component,
    weibull_from_field,
)
from .fem import (
    BoundaryConditions,
    assemble_and_solve,
    centrifugal_force,
    load_mesh,
    ndet_surface_field,
    promote_quadratic,
    refine,
    stress_at_quadrature,
    surface_quadrature,
)
from .material import CmbParams, ElasticParams, Material, RambergOsgoodParams, as_stress_matrix, von_mises
from .microstructure import DEFAULT_VARTHETA, MultiscaleParams, kappa, life_distribution
from .sensitivity import DesignSurface, ShapeProblem, gradcheck, optimality_residual
from .service import EconomicParams, epv_sweep, optimize_interval

DEFAULT_TIMES = (1e2, 1e3, 1e4, 1e5)


# -- builders ----------------------------------------------------------------------------
def build_material(sec) -> Material:
    if "lambda" in sec:
        elastic = ElasticParams(float(sec["lambda"]), float(sec["mu"]), sec.get("E"))
    else:
        elastic = ElasticParams.from_young_poisson(float(sec["E"]), float(sec["nu"]))
    E = elastic.E
    ro = RambergOsgoodParams(E, float(sec["K"]), float(sec["n_prime"]))
    cmb = CmbParams(float(sec["sigma_f_prime"]), float(sec["eps_f_prime"]), float(sec["b"]), float(sec["c"]))
    return Material(elastic, ro, cmb, N_max=float(sec.get("N_max", 1e12)), units=sec.get("units", "MPa"))


def build_mesh(cfg: RunConfig):
    sec = cfg.section("mesh")
    mesh = load_mesh(cfg.mesh_path)
    for _ in range(int(sec.get("refine", 0))):
        mesh = refine(mesh)
    if sec.get("quadratic", False):
        mesh = promote_quadratic(mesh)
    return mesh


def build_bc(sec) -> BoundaryConditions:
    dirichlet = {t: tuple(int(c) for c in comps) for t, comps in sec["dirichlet"].items()}
    traction = {t: np.asarray(g, float) for t, g in (sec.get("traction") or {}).items()}
    body = sec.get("body_force")
    body = None if body is None else np.asarray(body, float)
    if sec.get("rpm") is not None:
        rot = centrifugal_force(float(sec["density"]), rpm=float(sec["rpm"]),
                                axis=sec.get("axis", (0.0, 0.0, 1.0)),
                                origin=sec.get("origin", (0.0, 0.0, 0.0)))
        if body is None:
            body = rot
        else:
            const = body
            body = lambda x: rot(x) + const  # noqa: E731
    return BoundaryConditions(dirichlet, traction, body)


def build_distribution(stats):
    """Distribution given directly by ``eta``/``m_bar`` or ``J``/``alpha``."""
    if stats["model"] == "weibull":
        return Weibull(float(stats["eta"]), float(stats["m_bar"]))
    return Gompertz(float(stats["J"]), float(stats["alpha"]))


def build_service(cfg: RunConfig):
    s = cfg.section("service")
    if "eta" in s:
        d = Weibull(float(s["eta"]), float(s["m"]))
    else:
        d = build_distribution(cfg.section("statistics"))
    econ = EconomicParams(float(s["income"]), float(s["service_cost"]), float(s["failure_cost"]),
                          float(s["i_eff"]), float(s.get("outage", 0.0)))
    bracket = tuple(s["bracket"]) if "bracket" in s else None
    return d, econ, bracket, float(s.get("tol", 1e-3))


def provenance(cfg: RunConfig, seed=None):
    return {"config_sha256": cfg.digest(), "seed": seed, "version": __version__,
            "backend": _backend.NAME}


def _solver_opts(cfg):
    s = cfg.section("solver")
    return {"tol": float(s.get("tol", 1e-10)), "method": s.get("method", "direct"),
            "face_order": cfg.section("mesh").get("face_order")}


def _solve(cfg):
    mesh = build_mesh(cfg)
    material = build_material(cfg.section("material"))
    bc = build_bc(cfg.section("loads"))
    bc.check(mesh)
    u = assemble_and_solve(mesh, material.elastic, bc, **_solver_opts(cfg))
    return mesh, material, bc, u


def _mesh_record(mesh):
    return {"kind": mesh.kind.name, "nodes": int(mesh.n_nodes), "elements": int(mesh.n_elements),
            "boundary_faces": int(mesh.n_boundary_faces), "volume": float(mesh.volume())}


def _faces_for(mesh, stats):
    tags = stats.get("faces")
    return None if tags is None else mesh.faces_with_tags(tags)


def _voigt(s):
    return [float(s[0, 0]), float(s[1, 1]), float(s[2, 2]), float(s[1, 2]), float(s[0, 2]), float(s[0, 1])]


STRESS_COLUMNS = ["face", "qp", "x", "y", "z", "weight", "s_xx", "s_yy", "s_zz", "s_yz", "s_xz", "s_xy"]


def _stress_rows(stress, extra=()):
    rows = []
    for f, fid in enumerate(stress.face_ids.tolist()):
        for q in range(stress.values.shape[1]):
            rows.append([fid, q, *stress.points[f, q].tolist(), float(stress.weights[f, q]),
                         *_voigt(stress.values[f, q]), *(float(np.asarray(c)[f, q]) for c in extra)])
    return rows


# -- commands ----------------------------------------------------------------------------
def run_solve(cfg: RunConfig):
    mesh, material, bc, u = _solve(cfg)
    stress = stress_at_quadrature(u)
    rec = {
        "command": "solve",
        "mesh": _mesh_record(mesh),
        "residual": float(u.residual),
        "strain_energy": u.energy(),
        "max_displacement": float(np.linalg.norm(u.values, axis=1).max()),
    }
    disp = (["node", "x", "y", "z", "ux", "uy", "uz"],
            [[i, *x, *d] for i, (x, d) in enumerate(zip(mesh.nodes.tolist(), u.values.tolist()))])
    return rec, {"displacement.csv": disp, "stress.csv": (STRESS_COLUMNS, _stress_rows(stress))}


def life_model(cfg: RunConfig, field):
    stats = cfg.section("statistics")
    if stats["model"] == "weibull":
        return weibull_from_field(field, float(stats["m_bar"]))
    return gompertz_from_field(field, GompertzModelParams(float(stats["C"]), float(stats["alpha"])))


def run_life(cfg: RunConfig):
    mesh, material, bc, u = _solve(cfg)
    stats = cfg.section("statistics")
    sq = surface_quadrature(mesh, cfg.section("mesh").get("face_order"))
    faces = _faces_for(mesh, stats)
    field = ndet_surface_field(u, material, sq=sq, faces=faces)
    d = life_model(cfg, field)
    rec = evaluate(d, stats.get("times", DEFAULT_TIMES))
    rec.update({
        "command": "life",
        "mesh": _mesh_record(mesh),
        "residual": float(u.residual),
        "area": field.area,
        "ndet_min": ndet_component(field),
        "runout_fraction": float(field.flags.mean()),
    })
    stress = stress_at_quadrature(u, sq, faces)
    vm = field.meta["von_mises_amplitude"]
    rows = _stress_rows(stress, (vm, field.values, field.flags.astype(float)))
    return rec, {"life.csv": (STRESS_COLUMNS + ["vm_amplitude", "n_det", "runout"], rows)}


def run_pof(cfg: RunConfig):
    stats = cfg.section("statistics")
    rec = evaluate(build_distribution(stats), stats.get("times", DEFAULT_TIMES))
    rec["command"] = "pof"
    rows = [[t, F, h] for t, F, h in zip(rec["t"], rec["pof"], rec["hazard"])]
    return rec, {"pof.csv": (["t", "pof", "hazard"], rows)}


def run_schmid(cfg: RunConfig, seed, kappa_report=False):
    sec = cfg.section("microstructure")
    material = build_material(cfg.section("material"))
    st = sec["stress"]
    sigma = np.diag(np.asarray(st, float)) if not isinstance(st[0], list) else as_stress_matrix(st)
    params = MultiscaleParams(float(sec.get("mu_g", 1.0)), float(sec.get("vartheta", DEFAULT_VARTHETA)))
    dist = life_distribution(sigma, int(sec.get("n_samples", 10_000)), seed, material,
                             eps_a=sec.get("eps_a"), params=params, threads=cfg.threads)
    rec = {"command": "schmid", "summary": dist.summary(), "vartheta": params.vartheta}
    edges, counts = dist.histogram(int(sec.get("bins", 50)))
    rec["histogram"] = {"log10_edges": [float(x) for x in edges], "counts": [int(c) for c in counts]}
    if kappa_report:
        try:
            k = kappa(sigma)
        except DomainError:
            k = None
        rec["kappa"] = k
    vm = float(von_mises(sigma))
    rows = [[i, float(m) * vm, float(m), float(N), int(r)]
            for i, (m, N, r) in enumerate(zip(dist.schmid, dist.lives, dist.runout))]
    return rec, {"grains.csv": (["rank", "tau", "schmid_factor", "n_i", "runout"], rows)}


def _bump(center, width):
    c = np.asarray(center, float)

    def fn(x):
        return np.exp(-np.sum((x - c) ** 2, axis=1) / width**2)

    return fn


def gradcheck_fields(surface: DesignSurface, specs):
    """Named perturbation fields from ``{type, center, width[, direction]}`` tables."""
    out = {}
    for k, f in enumerate(specs):
        bump = _bump(f["center"], float(f["width"]))
        if f["type"] == "normal":
            V = surface.normal_field(bump)
        else:
            V = surface.tangential_field(bump, f["direction"])
        out[f.get("name", f"{f['type']}_{k}")] = V
    return out


def default_gradcheck_specs(mesh):
    lo, hi = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
    mid = 0.5 * (lo + hi)
    w = 0.25 * float((hi - lo).max())
    specs = [{"type": "normal", "center": [float(a + t * (b - a)) for a, b in zip(lo, hi)], "width": w}
             for t in (0.3, 0.5, 0.7)]
    specs.append({"type": "tangential", "center": mid.tolist(), "width": w, "direction": [1.0, 0.0, 0.0]})
    return specs


def run_gradcheck(cfg: RunConfig):
    mesh = build_mesh(cfg)
    material = build_material(cfg.section("material"))
    bc = build_bc(cfg.section("loads"))
    bc.check(mesh)
    opts = _solver_opts(cfg)
    stats = cfg.section("statistics")
    problem = ShapeProblem(mesh, material.elastic, bc, material, float(stats["m_bar"]), tol=opts["tol"],
                           face_order=opts["face_order"])
    surface = DesignSurface(mesh, bc, opts["face_order"])
    sec = cfg.section("gradcheck")
    fields = gradcheck_fields(surface, sec.get("fields") or default_gradcheck_specs(mesh))
    checks, dens = gradcheck(problem, fields, sec.get("h"))
    rec = {
        "command": "gradcheck",
        "mesh": _mesh_record(mesh),
        "J": dens.J,
        "density_norm": dens.norm(),
        "optimality_residual": optimality_residual(dens),
        "checks": checks,
    }
    sq = surface.quadrature
    rows = []
    for f, fid in enumerate(dens.face_ids.tolist()):
        for q in range(dens.values.shape[1]):
            rows.append([fid, q, *sq.points[f, q].tolist(), float(dens.weights[f, q]),
                         float(dens.values[f, q]), int(dens.runout[f, q])])
    return rec, {"density.csv": (["face", "qp", "x", "y", "z", "weight", "psi", "runout"], rows)}


def run_service(cfg: RunConfig):
    d, econ, bracket, tol = build_service(cfg)
    res = optimize_interval(d, econ, bracket, tol)
    rec = {"command": "service", "model": d.name, **d.params(), **res.to_dict()}
    rows = [[float(x), float(v)] for x, v in zip(res.grid, res.curve)]
    return rec, {"epv_curve.csv": (["delta", "epv"], rows)}


def run_sweep(cfg: RunConfig):
    d, econ, bracket, _ = build_service(cfg)
    incomes = [float(x) for x in cfg.section("service")["incomes"]]
    grid, curves = epv_sweep(d, econ, incomes, bracket)
    best = {}
    for inc, c in curves.items():
        k = int(np.argmax(c))
        best[repr(inc)] = {"delta": float(grid[k]), "epv": float(c[k]),
                           "boundary": k in (0, len(grid) - 1)}
    rec = {"command": "sweep", "model": d.name, **d.params(), "incomes": incomes, "grid_best": best}
    header = ["delta"] + [f"epv_income_{inc!r}" for inc in incomes]
    rows = [[float(x), *(float(curves[inc][i]) for inc in incomes)] for i, x in enumerate(grid)]
    return rec, {"epv_sweep.csv": (header, rows)}

