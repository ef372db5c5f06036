"""Variable exponent fields and their admissibility checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import default_rule


@dataclass(eq=False)
class ExponentField:
    """A pointwise exponent ``func(x, y)`` (vectorized over arrays).

    ``kind`` is ``constant``, ``paper_floor`` or ``user``. Bounds come from
    :meth:`bounds`, which samples quadrature points plus vertices of a mesh.
    """

    func: object
    kind: str = "user"
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x, y), dtype=float),
                               np.broadcast(x, y).shape)

    @classmethod
    def constant(cls, value: float) -> "ExponentField":
        value = float(value)
        return cls(lambda x, y: np.full(np.broadcast(x, y).shape, value),
                   "constant", {"value": value})

    @classmethod
    def floor_form(cls, a: float, b: float) -> "ExponentField":
        """``a*|floor(x)| + b``; (0.2, 2.5) and (0.1, 6) give the reference p and q."""
        a, b = float(a), float(b)
        return cls(lambda x, y: a * np.abs(np.floor(x)) + b, "paper_floor",
                   {"a": a, "b": b})

    @classmethod
    def linear_x(cls, c0: float, c1: float) -> "ExponentField":
        c0, c1 = float(c0), float(c1)
        return cls(lambda x, y: c0 + c1 * x + 0.0 * y, "linear_x",
                   {"c0": c0, "c1": c1})

    def shifted(self, sigma: float) -> "ExponentField":
        """The field ``self + sigma``."""
        base = self
        params = dict(self.params, shift=float(sigma))
        if self.kind == "constant":
            return ExponentField.constant(self.params["value"] + sigma)
        return ExponentField(lambda x, y: base(x, y) + sigma, self.kind + "+shift", params)

    def at_quadrature(self, mesh, rule=None) -> np.ndarray:
        """Exponent values at element quadrature points, shape (T, Q)."""
        rule = rule or default_rule()
        key = ("qp", id(mesh), id(rule))
        hit = self._cache.get(key)
        if hit is None or hit[0] is not mesh:
            qp = rule.physical_points(mesh)
            vals = np.array(self(qp[..., 0], qp[..., 1]), dtype=float, order="C")
            vals.setflags(write=False)
            hit = (mesh, vals)
            self._cache[key] = hit
        return hit[1]

    def sample_bounds(self, points) -> tuple[float, float]:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        vals = self(pts[:, 0], pts[:, 1])
        return float(vals.min()), float(vals.max())

    def bounds(self, mesh, rule=None) -> tuple[float, float]:
        """(ess inf, ess sup) realized on quadrature points and vertices."""
        if self.kind == "constant":
            v = self.params["value"]
            return v, v
        qv = self.at_quadrature(mesh, rule)
        vv = self(mesh.vertices[:, 0], mesh.vertices[:, 1])
        return float(min(qv.min(), vv.min())), float(max(qv.max(), vv.max()))


@dataclass
class AdmissibilityReport:
    p1: float
    p2: float
    q1: float
    q2: float
    ordering_ok: bool
    sobolev_ok: bool
    p_star_inf: float
    sigma: float
    sigma_ok: bool
    log_holder_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.ordering_ok and self.sobolev_ok and self.sigma_ok


def p_star(p_values, dim: int, p2: float):
    """Critical Sobolev exponent n*p/(n-p); +inf when n <= p2."""
    p_values = np.asarray(p_values, dtype=float)
    if dim <= p2:
        return np.full(p_values.shape, math.inf)
    return dim * p_values / (dim - p_values)


def default_sigma(p_star_inf: float, q2: float) -> float:
    if math.isinf(p_star_inf):
        return 0.1
    return 0.5 * (p_star_inf - q2)


def check_admissibility(p: ExponentField, q: ExponentField, sigma, dim: int,
                        mesh) -> AdmissibilityReport:
    """Evaluate 2 <= p1 <= p2 < q1 <= q2 < p*, and 0 < sigma < p* - q2.

    ``sigma=None`` picks the default. Violations are reported, never raised.
    """
    p1, p2 = p.bounds(mesh)
    q1, q2 = q.bounds(mesh)
    pq = np.concatenate([p.at_quadrature(mesh).ravel(),
                         p(mesh.vertices[:, 0], mesh.vertices[:, 1])])
    ps = float(p_star(pq, dim, p2).min())
    if sigma is None:
        sigma = default_sigma(ps, q2)
    sigma = float(sigma)
    ordering_ok = 2.0 <= p1 <= p2 < q1 <= q2
    sobolev_ok = q2 < ps
    sigma_ok = sigma > 0 and (math.isinf(ps) or sigma < ps - q2)
    return AdmissibilityReport(p1, p2, q1, q2, ordering_ok, sobolev_ok, ps, sigma, sigma_ok)


def _refine_jumps(q, a: np.ndarray, b: np.ndarray, iters: int = 1100):
    """Shrink segments [a, b] onto the steepest part of q, keeping endpoints distinct."""
    a, b = a.copy(), b.copy()
    for _ in range(iters):
        m = 0.5 * (a + b)
        same = np.all((m == a) | (m == b), axis=1)
        if same.all():
            break
        qa, qm, qb = q(a[:, 0], a[:, 1]), q(m[:, 0], m[:, 1]), q(b[:, 0], b[:, 1])
        left = np.abs(qm - qa) >= np.abs(qb - qm)
        move = ~same
        b = np.where((move & left)[:, None], m, b)
        a = np.where((move & ~left)[:, None], m, a)
    return a, b


def check_log_holder(q: ExponentField, M: float, samples: int, rect) -> list:
    """Sampled pairs with |x-y| < 1/2 and |q(x)-q(y)| > M/|log|x-y||.

    Samples a ``samples x samples`` grid and, for each pair of grid
    neighbours, adds a pair straddling the steepest point between them
    (bisection to float resolution), so jump discontinuities are caught.
    The smallest separation reachable is the float spacing at the jump.
    """
    if M <= 0 or samples < 2:
        raise ValueError("need M > 0 and samples >= 2")
    xs = np.linspace(rect.xmin, rect.xmax, samples)
    ys = np.linspace(rect.ymin, rect.ymax, samples)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(samples * samples).reshape(samples, samples)
    nb = np.concatenate([
        np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()]),
        np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()]),
    ])
    ra, rb = _refine_jumps(q, pts[nb[:, 0]], pts[nb[:, 1]])

    out = []

    def scan(A, B):
        d = np.linalg.norm(A - B, axis=1)
        dq = np.abs(q(A[:, 0], A[:, 1]) - q(B[:, 0], B[:, 1]))
        ok = (d > 0) & (d < 0.5)
        bound = np.full(d.shape, np.inf)
        bound[ok] = M / np.abs(np.log(d[ok]))
        hit = ok & (dq > bound)
        for i in np.flatnonzero(hit):
            out.append((tuple(A[i]), tuple(B[i])))

    iu, ju = np.triu_indices(len(pts), k=1)
    for s in range(0, len(iu), 1 << 20):
        scan(pts[iu[s:s + (1 << 20)]], pts[ju[s:s + (1 << 20)]])
    scan(ra, rb)
    return out
