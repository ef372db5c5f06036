"""Semi-implicit time stepping and per-step diagnostics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import (SolverError, apply_dirichlet, assemble_logsource, assemble_mass,
                       assemble_plaplacian, assemble_stiffness, cg_solve, zero_boundary)
from .certificates import (BlowupCertificate, CertificateError, DecayCertificate,
                           blowup_from_values, check_decay)
from .config import ConfigError, RunConfig
from .exponents import AdmissibilityReport, ExponentField, check_admissibility
from .estimators import estimate_constants
from .functionals import (ConstantsBundle, compute_constants, energy, h01_norm,
                          lambda1, lambda1_analytic, luxemburg_norm)
from .mesh import Mesh, Rect, build_mesh

log = logging.getLogger(__name__)


@dataclass(eq=False)
class Problem:
    """Mesh, exponents and the time-independent operators of the scheme."""

    mesh: Mesh
    p: ExponentField
    q: ExponentField
    M: object
    K: object
    system: object  # Dirichlet-constrained M + K
    admissibility: AdmissibilityReport

    @property
    def sigma(self) -> float:
        return self.admissibility.sigma


def exponent_from(cfg: RunConfig, f: str) -> ExponentField:
    kind = cfg[f"{f}.kind"]
    if kind == "constant":
        return ExponentField.constant(cfg[f"{f}.value"])
    if kind == "paper_floor":
        return ExponentField.floor_form(cfg[f"{f}.a"], cfg[f"{f}.b"])
    return ExponentField.linear_x(cfg[f"{f}.c0"], cfg[f"{f}.c1"])


def build_problem(cfg: RunConfig) -> Problem:
    rect = Rect(cfg["rect.xmin"], cfg["rect.xmax"], cfg["rect.ymin"], cfg["rect.ymax"])
    mesh = build_mesh(rect, cfg["mesh.nx"], cfg["mesh.ny"])
    p, q = exponent_from(cfg, "p"), exponent_from(cfg, "q")
    report = check_admissibility(p, q, cfg["sigma"], 2, mesh)
    if not report.ok:
        log.warning("exponents not admissible (ordering=%s sobolev=%s sigma=%s); running anyway",
                    report.ordering_ok, report.sobolev_ok, report.sigma_ok)
    M, K = assemble_mass(mesh), assemble_stiffness(mesh)
    system, _ = apply_dirichlet(M + K, np.zeros(mesh.n_vertices), mesh)
    return Problem(mesh, p, q, M, K, system, report)


def initial_datum(cfg: RunConfig, mesh: Mesh) -> np.ndarray:
    """Nodal interpolant of the configured u0 (boundary values untouched)."""
    kind = cfg["u0.kind"]
    if kind == "gaussian":
        a, b = cfg["u0.amplitude"], cfg["u0.b"]
        return mesh.interpolate(lambda x, y: a * np.exp(-b * (x * x + y * y)))
    if kind == "product_sine":
        a, mx, my = cfg["u0.amplitude"], cfg["u0.mx"], cfg["u0.my"]
        r = mesh.rect
        lx, ly = r.xmax - r.xmin, r.ymax - r.ymin
        return mesh.interpolate(lambda x, y: a * np.sin(mx * np.pi * (x - r.xmin) / lx)
                                * np.sin(my * np.pi * (y - r.ymin) / ly))
    path = Path(cfg["u0.path"])
    if not path.is_absolute():
        path = cfg.base_dir / path
    try:
        vals = np.loadtxt(path, dtype=float, ndmin=1)
    except OSError as exc:
        raise ConfigError(f"cannot read u0.path {path}: {exc}") from None
    if vals.shape != (mesh.n_vertices,):
        raise ConfigError(f"{path}: expected {mesh.n_vertices} nodal values, got {vals.size}")
    return vals


def prepare_initial_state(problem: Problem, datum, mode: str = "project", tol=1e-10):
    """Bring the datum into the discrete space with zero boundary values.

    ``project`` takes the (M+K)-orthogonal projection onto the interior
    space (the H^1_0 best approximation); ``zero`` overwrites boundary
    nodes with 0.
    """
    mesh = problem.mesh
    bmax = float(np.max(np.abs(datum[mesh.boundary_mask]), initial=0.0))
    if bmax == 0.0:
        return np.array(datum, dtype=float)
    if mode == "zero":
        log.info("u0 is %.3g on the boundary; boundary nodes set to 0", bmax)
        return zero_boundary(mesh, datum)
    log.info("u0 is %.3g on the boundary; projecting onto H^1_0", bmax)
    rhs = zero_boundary(mesh, (problem.M + problem.K) @ datum)
    return cg_solve(problem.system, rhs, tol=tol)


def step(u, dt: float, problem: Problem, tol: float = 1e-10, maxiter=None,
         source: bool = True) -> np.ndarray:
    """One semi-implicit step: (M+K)(u_new - u) = dt (F(u) - A_p(u)), u_new = 0 on the boundary.

    ``source=False`` drops F (pure pseudo-parabolic p-Laplacian flow).
    """
    mesh = problem.mesh
    load = -assemble_plaplacian(mesh, problem.p, u)
    if source:
        load += assemble_logsource(mesh, problem.q, u)
    rhs = zero_boundary(mesh, dt * load)
    du = cg_solve(problem.system, rhs, tol=tol, maxiter=maxiter)
    return zero_boundary(mesh, u + du)


@dataclass
class DiagnosticsRecord:
    t: float
    theta: float
    h01: float
    phi: float
    E: float
    gradient_term: float
    log_term: float
    q2_term: float
    H: float
    lux_grad_p: float
    delta: float | None
    maxabs: float

    CSV_COLUMNS = ("t", "theta", "h01", "phi", "E", "H", "lux_grad_p", "delta", "maxabs")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.CSV_COLUMNS)


@dataclass
class Termination:
    status: str  # completed | overflow | solver_failure
    t: float
    maxabs: float = float("nan")
    message: str = ""


@dataclass
class RunResult:
    config: RunConfig
    records: list
    final: np.ndarray = field(repr=False)
    datum: np.ndarray = field(repr=False)
    constants: ConstantsBundle
    blowup: BlowupCertificate
    decay: DecayCertificate | None
    admissibility: AdmissibilityReport
    termination: Termination
    problem: Problem = field(repr=False)
    snapshots: dict = field(default_factory=dict, repr=False)
    notes: dict = field(default_factory=dict)


def constants_for(problem: Problem, cfg: RunConfig) -> ConstantsBundle:
    """Constants bundle, with discrete estimates unless overridden in the config."""
    mesh = problem.mesh
    notes = {}
    if cfg["lambda1.mode"] == "analytic-square":
        lam = lambda1_analytic(mesh.rect)
        notes["lambda1.source"] = "analytic"
    else:
        lam = lambda1(mesh, problem.M, problem.K)
        notes["lambda1.source"] = "fem"
    overrides = {k: cfg.get(f"constants.{k}") for k in ("B_sigma", "C1", "C2")}
    est = {}
    if any(v is None for v in overrides.values()):
        est = estimate_constants(mesh, problem.q, problem.sigma, problem.M, problem.K,
                                 starts=cfg["estimators.starts"], steps=cfg["estimators.steps"],
                                 seed=cfg["seed"])
    vals = {}
    for k, v in overrides.items():
        if v is None:
            vals[k] = est[k].value
            notes[f"{k}.source"] = "discrete-supremum"
            notes[f"{k}.stagnated"] = est[k].stagnated
        else:
            vals[k] = v
            notes[f"{k}.source"] = "config"
    r = problem.admissibility
    return compute_constants((r.p1, r.p2), (r.q1, r.q2), r.sigma, area=mesh.rect.area,
                             lambda1=lam, notes=notes, **vals)


def certify(problem: Problem, datum, c: ConstantsBundle):
    """Blow-up and decay certificates for the interpolated datum."""
    mesh = problem.mesh
    h1 = h01_norm(mesh, problem.M, problem.K, datum)
    blow = blowup_from_values(energy(mesh, problem.p, problem.q, datum).E,
                              luxemburg_norm(mesh, problem.p, datum, True), h1, c)
    try:
        decay = check_decay(h1, c)
    except CertificateError as exc:
        log.warning("no decay envelope: %s", exc)
        decay = None
    return blow, decay, h1


def diagnostics(problem: Problem, u, t: float, c: ConstantsBundle, decay, with_envelope: bool):
    mesh = problem.mesh
    en = energy(mesh, problem.p, problem.q, u)
    h1 = h01_norm(mesh, problem.M, problem.K, u)
    delta = decay.envelope(t) if (decay is not None and with_envelope) else None
    return DiagnosticsRecord(
        t=t, theta=h1 * h1, h01=h1, phi=0.5 * h1 * h1, E=en.E,
        gradient_term=en.gradient_term, log_term=en.log_term, q2_term=en.q2_term,
        H=c.energy_level - en.E, lux_grad_p=luxemburg_norm(mesh, problem.p, u, True),
        delta=delta, maxabs=float(np.max(np.abs(u))),
    )


def run(cfg: RunConfig, problem: Problem | None = None, constants: ConstantsBundle | None = None,
        keep_snapshots=()) -> RunResult:
    """Assemble once, certify the initial datum, then step to T or termination."""
    problem = problem or build_problem(cfg)
    mesh = problem.mesh
    c = constants or constants_for(problem, cfg)
    datum = initial_datum(cfg, mesh)

    blow, decay, h1_datum = certify(problem, datum, c)
    with_env = decay is not None and (decay.cond_ok or cfg["decay.envelope"] == "always")

    tol, maxiter = cfg["solver.tol"], cfg.get("solver.maxiter")
    dt, stride = cfg.dt, cfg.report_stride
    snap_steps = {int(round(ts / dt)): ts for ts in tuple(keep_snapshots) + cfg["output.snapshots"]}
    snapshots = {}
    threshold = cfg["overflow.threshold"]

    u = prepare_initial_state(problem, datum, cfg["u0.boundary"], tol)
    records = [diagnostics(problem, u, 0.0, c, decay, with_env)]
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = u.copy()
    term = Termination("completed", 0.0)
    for n in range(1, cfg.n_steps + 1):
        t = n * dt
        try:
            u_new = step(u, dt, problem, tol, maxiter)
        except SolverError as exc:
            term = Termination("solver_failure", t, float(np.max(np.abs(u))), str(exc))
            log.error("solver failure at t=%g: %s", t, exc)
            break
        amax = float(np.max(np.abs(u_new)))
        if not math.isfinite(amax) or amax > threshold:
            term = Termination("overflow", t, amax, f"max|u| = {amax:.3e} > {threshold:g}")
            log.info("overflow at t=%g (max|u| = %.3e)", t, amax)
            break
        u = u_new
        term.t = t
        if n % stride == 0:
            records.append(diagnostics(problem, u, t, c, decay, with_env))
        if n in snap_steps:
            snapshots[snap_steps[n]] = u.copy()
    if term.status == "completed":
        term.maxabs = float(np.max(np.abs(u)))
    return RunResult(cfg, records, u, datum, c, blow, decay, problem.admissibility, term,
                     problem, snapshots, {"u0.h01_datum": h1_datum})
