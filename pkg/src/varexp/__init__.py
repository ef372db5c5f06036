"""Finite-element solver and blow-up/decay certificates for

    u_t - Δu_t - div(|∇u|^{p(x)-2} ∇u) = |u|^{q(x)-2} u ln|u|

with homogeneous Dirichlet data on a rectangle.
"""
from .mesh import Mesh, Rect, build_mesh, triangle_geometry
from .exponents import ExponentField, check_admissibility, check_log_holder

__all__ = [
    "Mesh", "Rect", "build_mesh", "triangle_geometry",
    "ExponentField", "check_admissibility", "check_log_holder",
]
__version__ = "0.1.0"
