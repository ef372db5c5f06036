"""Triangle quadrature rules in barycentric form."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """``points`` are (Q, 3) barycentric coordinates, ``weights`` sum to one.

    Physical integrals are ``area * sum(weights * f(points))``.
    """

    points: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def n_points(self) -> int:
        return len(self.weights)

    def physical_points(self, mesh) -> np.ndarray:
        """Quadrature points of every element, shape (T, Q, 2)."""
        corners = mesh.vertices[mesh.triangles]
        return np.einsum("qi,tik->tqk", self.points, corners)


def _orbit_21(a: float) -> list[list[float]]:
    b = 1.0 - 2.0 * a
    return [[a, a, b], [a, b, a], [b, a, a]]


@lru_cache(maxsize=None)
def strang_fix_6() -> QuadratureRule:
    """Symmetric 6-point rule, exact to degree 4."""
    a1, w1 = 0.445948490915964886318329253883, 0.223381589678011465944827882912
    a2, w2 = 0.091576213509770743459571463402, 0.109951743655321867388505450421
    pts = np.array(_orbit_21(a1) + _orbit_21(a2))
    w = np.array([w1] * 3 + [w2] * 3)
    return QuadratureRule(pts, w / w.sum(), 4)


@lru_cache(maxsize=None)
def centroid_rule() -> QuadratureRule:
    return QuadratureRule(np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]), 1)


@lru_cache(maxsize=None)
def collapsed_gauss(n: int) -> QuadratureRule:
    """Conical product rule with n*n points and positive weights, degree 2n-1.

    Gauss-Jacobi in the collapsed direction absorbs the Duffy Jacobian.
    """
    if n < 1:
        raise ValueError("n >= 1")
    s, ws = roots_jacobi(n, 1.0, 0.0)
    r, wr = roots_legendre(n)
    s, ws = 0.5 * (s + 1.0), ws / 4.0
    r, wr = 0.5 * (r + 1.0), wr / 2.0
    xs, ys, ww = [], [], []
    for si, wsi in zip(s, ws):
        for ri, wri in zip(r, wr):
            xs.append(si)
            ys.append((1.0 - si) * ri)
            ww.append(wsi * wri)
    x, y, w = np.array(xs), np.array(ys), np.array(ww)
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, w / w.sum(), 2 * n - 1)


def default_rule() -> QuadratureRule:
    return strang_fix_6()


def oracle_rule() -> QuadratureRule:
    """Degree-7 positive rule used to cross-check the default."""
    return collapsed_gauss(4)
