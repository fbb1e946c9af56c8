"""Minimal Lagrange finite elements for linear elasticity."""

from .elements import HEX8, HEX20, KINDS, TET4, TET10, ElementKind, get_kind
from .geometry import SurfaceQuadrature, surface_quadrature
from .mesh import VolumeMesh, load_mesh, promote_quadratic, refine, save_mesh
from .post import (
    hooke,
    ndet_surface_field,
    ones_field,
    stress_at_quadrature,
    surface_integral,
    write_displacement_csv,
    write_stress_csv,
)
from .quadrature import QuadratureRule, gauss_cube, gauss_line, gauss_square, gauss_tetrahedron, gauss_triangle
from .solver import (
    BoundaryConditions,
    DisplacementField,
    assemble_and_solve,
    assemble_load,
    assemble_stiffness,
    centrifugal_force,
    displacement_from_function,
)

__all__ = [
    "HEX8", "HEX20", "KINDS", "TET4", "TET10", "ElementKind", "get_kind",
    "SurfaceQuadrature", "surface_quadrature",
    "VolumeMesh", "load_mesh", "promote_quadratic", "refine", "save_mesh",
    "hooke", "ndet_surface_field", "ones_field", "stress_at_quadrature", "surface_integral",
    "write_displacement_csv", "write_stress_csv",
    "QuadratureRule", "gauss_cube", "gauss_line", "gauss_square", "gauss_tetrahedron", "gauss_triangle",
    "BoundaryConditions", "DisplacementField", "assemble_and_solve", "assemble_load",
    "assemble_stiffness", "centrifugal_force", "displacement_from_function",
]
