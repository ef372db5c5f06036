"""Discrete embedding constants by multi-start ascent of norm quotients.

The continuum constants needed by the decay theorem are replaced by
suprema over the P1 space of the mesh; they are mesh dependent and are
labelled as such wherever they are reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import (ModularProfile, _bisect_unit, _qp_data, h01_norm,
                          luxemburg_gradient)


class LuxemburgNorm:
    """||w||_{r(.)} or ||grad w||_{r(.)} with its nodal gradient."""

    def __init__(self, mesh, r, use_gradient=False, tol=1e-10):
        self.mesh, self.use_gradient, self.tol = mesh, use_gradient, tol
        self.expo = r if isinstance(r, np.ndarray) else r.at_quadrature(mesh)
        self._last = None

    def value(self, w) -> float:
        vals, expo, wts = _qp_data(self.mesh, self.expo, w, self.use_gradient, None)
        prof = ModularProfile(vals, expo, wts)
        rho1 = prof(1.0)
        if rho1 == 0.0:
            return 0.0
        return _bisect_unit(prof, rho1 ** (1.0 / prof.r_min), self.tol)

    def grad(self, w, value=None):
        lam = self.value(w) if value is None else value
        return luxemburg_gradient(self.mesh, self.expo, w, lam, self.use_gradient)


class H01Norm:
    def __init__(self, mesh, M, K):
        self.mesh, self.S = mesh, (M + K).tocsr()

    def value(self, w) -> float:
        return math.sqrt(max(float(w @ (self.S @ w)), 0.0))

    def grad(self, w, value=None):
        nrm = self.value(w) if value is None else value
        return (self.S @ w) / nrm


@dataclass
class EmbeddingEstimate:
    value: float
    maximizer: np.ndarray = field(repr=False)
    per_start: list
    stagnated: bool
    label: str = "discrete supremum over the P1 space (mesh dependent)"


def embedding_constant(mesh, numerator, denominator, starts: int = 20, steps: int = 200,
                       seed: int = 0, free=None, smoother=None) -> EmbeddingEstimate:
    """max over nodal fields v of numerator(v)/denominator(v).

    Each start is a seeded Gaussian vector on the free (interior) nodes,
    improved by normalized gradient steps with backtracking. With a
    ``smoother``, odd-numbered starts are first smoothed ``k % 4 + 1``
    times so both rough and smooth maximizers are reachable. Start k
    depends only on (seed, k), so more starts never lower the estimate.
    ``stagnated`` is set when the best start never accepted a step.
    """
    free = mesh.interior_nodes if free is None else np.asarray(free)
    n = mesh.n_vertices
    best, best_v, best_moved = -math.inf, None, False
    per_start = []

    def quotient(v):
        nv, dv = numerator.value(v), denominator.value(v)
        return (nv / dv if dv > 0 else 0.0), nv, dv

    for k in range(starts):
        rng = np.random.default_rng([seed, k])
        v = np.zeros(n)
        v[free] = rng.standard_normal(free.size)
        if smoother is not None and k % 2 == 1:
            for _ in range(k % 4 + 1):
                v = smoother(v)
        v /= np.linalg.norm(v)
        R, nv, dv = quotient(v)
        step, moved = 0.5, False
        for _ in range(steps):
            g = (numerator.grad(v, nv) - R * denominator.grad(v, dv)) / dv
            g_free = np.zeros(n)
            g_free[free] = g[free]
            gn = np.linalg.norm(g_free)
            if gn == 0.0 or not np.isfinite(gn):
                break
            d = g_free / gn
            accepted = False
            while step > 1e-12:
                trial = v + step * d
                trial /= np.linalg.norm(trial)
                Rt, nt, dt = quotient(trial)
                if Rt > R:
                    v, R, nv, dv = trial, Rt, nt, dt
                    step = min(2.0 * step, 1.0)
                    accepted = moved = True
                    break
                step *= 0.5
            if not accepted:
                break
        per_start.append(R)
        if R > best:
            best, best_v, best_moved = R, v, moved
    return EmbeddingEstimate(best, best_v, per_start, not best_moved)


def estimate_constants(mesh, q, sigma, M, K, starts=20, steps=200, seed=0) -> dict:
    """Discrete estimates of B_sigma, C1 and C2.

    B_sigma = sup ||v||_{q+s} / ||grad v||_{q+s},
    C_i = sup ||grad v||_{L^{r_i}} / ||v||_{H^1_0} with r_1 = q1+s, r_2 = q2+s.
    """
    from .exponents import ExponentField

    q1, q2 = q.bounds(mesh)
    qs = q.shifted(sigma)
    h1 = H01Norm(mesh, M, K)
    smooth = h1_smoother(mesh, M, K)
    out = {}
    out["B_sigma"] = embedding_constant(mesh, LuxemburgNorm(mesh, qs), LuxemburgNorm(mesh, qs, True),
                                        starts, steps, seed, smoother=smooth)
    for name, r in (("C1", q1 + sigma), ("C2", q2 + sigma)):
        num = LuxemburgNorm(mesh, ExponentField.constant(r), True)
        out[name] = embedding_constant(mesh, num, h1, starts, steps, seed, smoother=smooth)
    return out


def h1_smoother(mesh, M, K):
    """v -> (M+K)^{-1} M v with homogeneous Dirichlet rows."""
    from .assembly import apply_dirichlet, cg_solve

    A, _ = apply_dirichlet(M + K, np.zeros(mesh.n_vertices), mesh)

    def smooth(v):
        rhs = M @ v
        rhs[mesh.boundary_mask] = 0.0
        return cg_solve(A, rhs, tol=1e-8)

    return smooth
