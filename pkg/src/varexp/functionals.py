"""Modulars, Luxemburg norms, energy and the scalar constants of the analysis."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .assembly import SolverError, cg_solve, quad_weights
from .quadrature import default_rule

# more distinct exponent values than this -> evaluate the modular pointwise
_MAX_GROUPS = 256


_COLLAPSE_CACHE: dict = {}


def _collapsed(expo, wts):
    """(T, 1) exponent and weight arrays when expo is constant on each element."""
    key = (id(expo), id(wts))
    hit = _COLLAPSE_CACHE.get(key)
    if hit is not None and hit[0] is expo and hit[1] is wts:
        return hit[2]
    out = None
    if expo.shape[1] > 1 and np.all(expo == expo[:, :1]):
        e1 = np.ascontiguousarray(expo[:, :1])
        w1 = np.ascontiguousarray(wts.sum(axis=1, keepdims=True))
        e1.setflags(write=False)
        w1.setflags(write=False)
        out = (e1, w1)
    if not expo.flags.writeable:
        if len(_COLLAPSE_CACHE) > 64:
            _COLLAPSE_CACHE.clear()
        _COLLAPSE_CACHE[key] = (expo, wts, out)
    return out


def _qp_data(mesh, r, w, use_gradient, rule):
    """(values, exponents, weights) at quadrature points, each (T, Q).

    Gradient values are element constants; if the exponent is too, the
    quadrature axis collapses to a single point per element.
    """
    rule = rule or default_rule()
    expo = r if isinstance(r, np.ndarray) else r.at_quadrature(mesh, rule)
    wts = quad_weights(mesh, rule)
    w = np.asarray(w, dtype=float)
    if use_gradient:
        col = _collapsed(expo, wts)
        if col is not None:
            expo, wts = col
        g = _kernels._pykernels.element_gradients(mesh.triangles, mesh.grads, w)
        mag = np.sqrt(g[:, 0] ** 2 + g[:, 1] ** 2)
        vals = np.ascontiguousarray(np.broadcast_to(mag[:, None], expo.shape))
    else:
        vals = np.ascontiguousarray(w[mesh.triangles] @ rule.points.T)
    return vals, expo, wts


def modular(mesh, r, w, use_gradient: bool = False, rule=None) -> float:
    """int |w|^{r(x)} (or int |grad w|^{r(x)}) by element quadrature."""
    vals, expo, wts = _qp_data(mesh, r, w, use_gradient, rule)
    return _kernels.power_sum(vals, expo, wts)


_GROUP_CACHE: dict = {}


def _exponent_groups(expo):
    """Distinct exponent values and group index (None if too many groups)."""
    key = id(expo)
    hit = _GROUP_CACHE.get(key)
    if hit is not None and hit[0] is expo:
        return hit[1], hit[2]
    uniq, inv = np.unique(expo, return_inverse=True)
    inv = inv.ravel() if len(uniq) <= _MAX_GROUPS else None
    if not expo.flags.writeable:
        if len(_GROUP_CACHE) > 64:
            _GROUP_CACHE.clear()
        _GROUP_CACHE[key] = (expo, uniq, inv)
    return uniq, inv


class ModularProfile:
    """lambda -> int |w/lambda|^{r(x)} for fixed w.

    When r takes few distinct values the integral is regrouped as
    sum_k S_k lambda^{-r_k}, which is exact and makes bisection cheap.
    """

    def __init__(self, vals, expo, wts):
        self.vals, self.expo, self.wts = vals, expo, wts
        uniq, inv = _exponent_groups(expo)
        self.r_min = float(uniq[0])
        self.grouped = inv is not None
        if self.grouped:
            terms = wts * np.abs(vals) ** expo
            self.r = uniq
            self.S = np.bincount(inv, weights=terms.ravel(), minlength=len(uniq))

    def __call__(self, lam: float) -> float:
        if self.grouped:
            return float(np.sum(self.S * lam ** (-self.r)))
        return _kernels.power_sum(self.vals, self.expo, self.wts, 1.0 / lam)


def _bisect_unit(rho, lam0: float, tol: float) -> float:
    """Solve rho(lam) = 1 for decreasing rho by bracket growth then bisection."""
    lo = hi = lam0
    while rho(hi) > 1.0:
        lo, hi = hi, hi * 2.0
    while rho(lo) < 1.0:
        hi, lo = lo, lo * 0.5
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def luxemburg_norm(mesh, r, w, use_gradient: bool = False, tol: float = 1e-10,
                   rule=None) -> float:
    """inf{lam > 0 : int |w/lam|^{r(x)} <= 1}, relative accuracy ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    vals, expo, wts = _qp_data(mesh, r, w, use_gradient, rule)
    prof = ModularProfile(vals, expo, wts)
    rho1 = prof(1.0)
    if rho1 == 0.0:
        return 0.0
    return _bisect_unit(prof, rho1 ** (1.0 / prof.r_min), tol)


def luxemburg_gradient(mesh, r, w, lam: float, use_gradient: bool = False, rule=None):
    """Derivative of the Luxemburg norm with respect to the nodal values of w.

    Implicit differentiation of rho(w/lam) = 1.
    """
    rule = rule or default_rule()
    z = np.asarray(w, dtype=float) / lam
    vals, expo, wts = _qp_data(mesh, r, z, use_gradient, rule)
    rw = wts * expo
    if use_gradient:
        num = _kernels.grad_flux(mesh.triangles, mesh.grads, z, expo, rw)
    else:
        num = _kernels.value_flux(mesh.triangles, np.ascontiguousarray(rule.points), z,
                                  expo, rw, False)
    den = _kernels.power_sum(vals, expo, rw)
    return num / den


def h01_norm(mesh, M, K, w) -> float:
    """sqrt(int w^2 + int |grad w|^2)."""
    w = np.asarray(w, dtype=float)
    return math.sqrt(max(float(w @ (M @ w) + w @ (K @ w)), 0.0))


@dataclass
class EnergyBreakdown:
    gradient_term: float
    log_term: float
    q2_term: float

    @property
    def E(self) -> float:
        return self.gradient_term - self.log_term + self.q2_term


def energy(mesh, p, q, w, rule=None) -> EnergyBreakdown:
    """int |grad w|^p / p - int |w|^q ln|w| / q + int |w|^q / q^2."""
    rule = rule or default_rule()
    pq = p.at_quadrature(mesh, rule)
    qq = q.at_quadrature(mesh, rule)
    wts = quad_weights(mesh, rule)
    gvals, pe, we = _qp_data(mesh, pq, w, True, rule)
    grad_term = _kernels.power_sum(gvals, pe, we / pe)
    uq, _, _ = _qp_data(mesh, qq, w, False, rule)
    a = np.abs(uq)
    safe = np.where(a > 0, a, 1.0)
    log_term = float(np.sum(np.where(a > 0, wts * safe ** qq * np.log(safe) / qq, 0.0)))
    q2_term = _kernels.power_sum(uq, qq, wts / qq ** 2)
    return EnergyBreakdown(grad_term, log_term, q2_term)


@dataclass
class ConstantsBundle:
    p1: float
    p2: float
    q1: float
    q2: float
    sigma: float
    B_sigma: float
    lambda1: float
    C1: float
    C2: float
    area: float
    B1: float = field(init=False)
    alpha1: float = field(init=False)
    E1: float = field(init=False)
    A: float = field(init=False)
    B: float = field(init=False)
    C: float = field(init=False)
    M: float = field(init=False)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        p1, p2, q1, q2, s = self.p1, self.p2, self.q1, self.q2, self.sigma
        if q1 - p2 + s <= 0:
            raise ValueError(f"q1 - p2 + sigma = {q1 - p2 + s} <= 0")
        self.B1 = max(1.0, self.B_sigma)
        self.alpha1 = alpha1_value(p2, q1, s, self.B1)
        self.E1 = (1.0 / p2 - 1.0 / (q1 + s)) * self.alpha1
        lam = self.lambda1
        self.A = self.area ** ((2.0 - p1) / 2.0) * (lam / (2.0 * (lam + 1.0))) ** (p1 / 2.0)
        self.B = 4.0 / (math.e * s) * self.B_sigma * self.C1 ** (q1 + s)
        self.C = 4.0 / (math.e * s) * self.B_sigma * self.C2 ** (q2 + s)
        self.M = decay_threshold(self.A, self.B, self.C, p1, q1, q2, s)

    @property
    def energy_level(self) -> float:
        """E1 - sigma*alpha1/(p2 (q1+sigma)), the level that H(t) is measured from."""
        return self.E1 - self.sigma * self.alpha1 / (self.p2 * (self.q1 + self.sigma))

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("notes")
        return d


def alpha1_value(p2, q1, sigma, B1) -> float:
    base = math.e * sigma * q1 / (q1 + sigma) * B1 ** (-(q1 + sigma))
    return base ** (p2 / (q1 - p2 + sigma))


def decay_threshold(A, B, C, p1, q1, q2, sigma) -> float:
    """min((A/2B)^{1/(q1-p1+s)}, (A/2C)^{1/(q2-p1+s)})."""
    m1 = (A / (2.0 * B)) ** (1.0 / (q1 - p1 + sigma)) if B > 0 else math.inf
    m2 = (A / (2.0 * C)) ** (1.0 / (q2 - p1 + sigma)) if C > 0 else math.inf
    return min(m1, m2)


def g_eval(xi, c: ConstantsBundle):
    """Lower bound function for the energy in terms of ||grad u||^{p2}."""
    xi = np.asarray(xi, dtype=float)
    p1, p2, q1, q2, s, B1 = c.p1, c.p2, c.q1, c.q2, c.sigma, c.B1
    lead = np.minimum(xi ** (p1 / p2), xi) / p2
    tail = np.maximum(B1 ** (q2 + s) * xi ** ((q2 + s) / p2),
                      B1 ** (q1 + s) * xi ** ((q1 + s) / p2))
    out = lead - tail / (math.e * s * q1)
    return float(out) if out.ndim == 0 else out


def h_eval(xi, c: ConstantsBundle):
    """xi/p2 - B1^{q1+s} xi^{(q1+s)/p2} / (e s q1)."""
    xi = np.asarray(xi, dtype=float)
    s = c.sigma
    out = xi / c.p2 - c.B1 ** (c.q1 + s) * xi ** ((c.q1 + s) / c.p2) / (math.e * s * c.q1)
    return float(out) if out.ndim == 0 else out


def lambda1(mesh, M, K, tol: float = 1e-8, cg_tol: float = 1e-10, maxiter: int = 1000) -> float:
    """Smallest eigenvalue of K x = lam M x on interior nodes (inverse iteration)."""
    inner = mesh.interior_nodes
    if inner.size == 0:
        raise ValueError("mesh has no interior nodes")
    Ki = K[inner][:, inner].tocsr()
    Mi = M[inner][:, inner].tocsr()
    x = np.ones(inner.size)
    x /= math.sqrt(x @ (Mi @ x))
    lam_prev = float(x @ (Ki @ x))
    for _ in range(maxiter):
        y = cg_solve(Ki, Mi @ x, tol=cg_tol, x0=x / lam_prev)
        my = Mi @ y
        lam = float(y @ (Ki @ y)) / float(y @ my)
        x = y / math.sqrt(float(y @ my))
        if abs(lam - lam_prev) <= tol * lam:
            return lam
        lam_prev = lam
    raise SolverError(f"inverse iteration did not converge in {maxiter} steps")


def lambda1_analytic(rect) -> float:
    """pi^2 (1/Lx^2 + 1/Ly^2) for the rectangle."""
    lx, ly = rect.xmax - rect.xmin, rect.ymax - rect.ymin
    return math.pi ** 2 * (1.0 / lx ** 2 + 1.0 / ly ** 2)


def compute_constants(p_bounds, q_bounds, sigma, *, area, lambda1, B_sigma, C1, C2,
                      notes=None) -> ConstantsBundle:
    """Bundle the blow-up and decay constants from exponent bounds and estimates."""
    p1, p2 = p_bounds
    q1, q2 = q_bounds
    return ConstantsBundle(p1, p2, q1, q2, float(sigma), float(B_sigma), float(lambda1),
                           float(C1), float(C2), float(area), notes=dict(notes or {}))
