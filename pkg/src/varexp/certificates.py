"""Blow-up and decay certificates built from the constants bundle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import ConstantsBundle, energy, h01_norm, h_eval, luxemburg_norm


class CertificateError(ValueError):
    pass


def solve_alpha2(E0: float, c: ConstantsBundle, growth: float = 2.0, cap: float = 1e6) -> float:
    """Root alpha2 > alpha1 of h(alpha2) = E0 on the decreasing branch of h."""
    if not E0 < c.E1:
        raise CertificateError(f"E0 = {E0} >= E1 = {c.E1}: no root beyond alpha1")
    lo = c.alpha1
    hi = lo * growth
    while h_eval(hi, c) >= E0:
        hi *= growth
        if hi > cap * c.alpha1:
            raise CertificateError(f"no bracket for alpha2 below {cap:g}*alpha1")
    # bisect to float resolution
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h_eval(mid, c) > E0:
            lo = mid
        else:
            hi = mid
    return lo if abs(h_eval(lo, c) - E0) <= abs(h_eval(hi, c) - E0) else hi


def alpha2_lower_bound(E0: float, c: ConstantsBundle) -> float:
    """Lower bound for alpha2/alpha1 implied by E0 < E1."""
    s = c.sigma
    return ((c.q1 + s) * (1.0 / c.p2 - E0 / c.alpha1)) ** (c.p2 / (c.q1 + s - c.p2))


def h_functional(E_t, c: ConstantsBundle):
    """H(t) = E1 - sigma*alpha1/(p2 (q1+sigma)) - E(t)."""
    return c.energy_level - E_t


@dataclass
class BlowupCertificate:
    E0: float
    grad_norm0_pow: float
    h01_norm0: float
    alpha1: float
    energy_bound: float
    norm_upper: float
    energy_cond_ok: bool
    norm_cond_ok: bool
    alpha2: float | None = None
    zeta: float | None = None
    script_B: float | None = None
    psi0: float | None = None
    phi0: float | None = None
    H0: float | None = None
    T_star: float | None = None
    T_star_theorem: float | None = None
    # same denominator with ||u0||^{p2} in the numerator (the other printed variant)
    T_star_p2_form: float | None = None

    @property
    def certified(self) -> bool:
        return self.energy_cond_ok and self.norm_cond_ok

    def fields(self) -> dict:
        return {k: v for k, v in self.__dict__.items()} | {"certified": self.certified}


def t_star(phi0: float, psi0: float, rate: float) -> float:
    """Blow-up time bound 2 phi(0) / ((rate - 2) psi(0)), rate = zeta q1 + p2."""
    return 2.0 * phi0 / ((rate - 2.0) * psi0)


def blowup_from_values(E0: float, grad_norm0: float, h01_norm0: float,
                       c: ConstantsBundle) -> BlowupCertificate:
    """Evaluate both blow-up hypotheses and, when they hold, alpha2, zeta, T*.

    ``grad_norm0`` is ||grad u0||_{p(.)}; ``h01_norm0`` is ||u0||_{H^1_0}.
    """
    p2, q1, s = c.p2, c.q1, c.sigma
    level = c.energy_level
    bound = p2 / (q1 + p2) * level
    gpow = grad_norm0 ** p2
    upper = c.B1 ** (-p2)
    cert = BlowupCertificate(
        E0=E0, grad_norm0_pow=gpow, h01_norm0=h01_norm0, alpha1=c.alpha1,
        energy_bound=bound, norm_upper=upper,
        energy_cond_ok=bool(0.0 <= E0 < bound),
        norm_cond_ok=bool(c.alpha1 < gpow <= upper),
    )
    cert.H0 = level - E0
    if not cert.certified:
        return cert
    a2 = solve_alpha2(E0, c)
    ratio = (c.alpha1 / a2) ** ((q1 + s) / p2)
    cert.alpha2 = a2
    cert.zeta = (q1 - p2) / q1 * (1.0 - ratio)
    cert.script_B = (q1 - p2) * (1.0 - ratio)
    cert.psi0 = -(cert.zeta * q1 + p2) * E0 + p2 * level
    cert.phi0 = 0.5 * h01_norm0 ** 2
    cert.T_star = t_star(cert.phi0, cert.psi0, cert.zeta * q1 + p2)
    Bs = cert.script_B
    den = (Bs + p2 - 2.0) * ((q1 - p2) / (q1 + s) * c.alpha1 - (Bs + p2) * E0)
    cert.T_star_theorem = h01_norm0 ** 2 / den
    cert.T_star_p2_form = h01_norm0 ** p2 / den
    return cert


def check_blowup(mesh, p, q, u0, c: ConstantsBundle, M, K) -> BlowupCertificate:
    E0 = energy(mesh, p, q, u0).E
    gn = luxemburg_norm(mesh, p, u0, use_gradient=True)
    return blowup_from_values(E0, gn, h01_norm(mesh, M, K, u0), c)


@dataclass
class DecayCertificate:
    u0_h01: float
    M_threshold: float
    cond_ok: bool
    envelope_kind: str
    A: float
    B: float
    p1: float
    q1: float
    sigma: float
    varpi: float = field(init=False)

    def __post_init__(self):
        self.varpi = (self.q1 - 2.0 + self.sigma) / 2.0
        if self.envelope_kind == "exponential":
            k = 2.0 * self.varpi
            if self.A <= self.B * self.u0_h01 ** k:
                raise CertificateError("A <= B ||u0||^{q1-2+sigma}: exponential envelope undefined")

    def envelope(self, t):
        """Upper bound on ||u(t)||_{H^1_0}."""
        t = np.asarray(t, dtype=float)
        n0 = self.u0_h01
        if self.envelope_kind == "power":
            e = self.p1 - 2.0
            out = (4.0 / (self.A * e * t + 4.0 * n0 ** (-e))) ** (1.0 / e)
        else:
            k = 2.0 * self.varpi
            pre = (self.A * n0 ** k / (self.A - self.B * n0 ** k)) ** (1.0 / k)
            out = pre * np.exp(-0.5 * self.A * t)
        return float(out) if out.ndim == 0 else out

    def fields(self) -> dict:
        return dict(self.__dict__)


def check_decay(u0_h01: float, c: ConstantsBundle) -> DecayCertificate:
    """Smallness condition ||u0|| < M and the matching decay envelope."""
    if c.p1 < 2.0:
        raise CertificateError("p1 >= 2 required")
    kind = "power" if c.p1 > 2.0 else "exponential"
    return DecayCertificate(float(u0_h01), c.M, bool(u0_h01 < c.M), kind,
                            c.A, c.B, c.p1, c.q1, c.sigma)
