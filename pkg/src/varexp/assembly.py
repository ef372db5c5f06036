"""Sparse P1 operators, nonlinear load vectors, Dirichlet constraints and CG."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .quadrature import default_rule


class SolverError(RuntimeError):
    """CG failed to reach the requested residual."""

    def __init__(self, msg, residual=float("nan"), iterations=0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


def _pattern(mesh):
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return rows, cols


def _csr(mesh, local):
    rows, cols = _pattern(mesh)
    n = mesh.n_vertices
    # coo -> csr sums duplicates in a fixed (sorted) order
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


@lru_cache(maxsize=16)
def _quad_weights(mesh, rule):
    w = np.ascontiguousarray(mesh.areas[:, None] * rule.weights[None, :])
    w.setflags(write=False)
    return w


def quad_weights(mesh, rule=None) -> np.ndarray:
    """area * weight for every element quadrature point, shape (T, Q), read-only."""
    return _quad_weights(mesh, rule or default_rule())


def assemble_mass(mesh) -> sp.csr_matrix:
    """Consistent mass matrix, entries int phi_i phi_j (exact P1 closed form)."""
    local = mesh.areas[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _csr(mesh, local)


def assemble_mass_quadrature(mesh, rule) -> sp.csr_matrix:
    """Mass matrix by quadrature; equals :func:`assemble_mass` for degree >= 2."""
    B = rule.points
    local = mesh.areas[:, None, None] * np.einsum("q,qi,qj->ij", rule.weights, B, B)[None]
    return _csr(mesh, local)


def assemble_stiffness(mesh) -> sp.csr_matrix:
    """Stiffness matrix, entries int grad phi_i . grad phi_j."""
    local = np.einsum("tik,tjk->tij", mesh.grads, mesh.grads) * mesh.areas[:, None, None]
    return _csr(mesh, local)


def assemble_plaplacian(mesh, p, u, rule=None) -> np.ndarray:
    """Vector of int |grad u|^{p(x)-2} grad u . grad phi_i.

    ``p`` is an ExponentField or a (T, Q) array of exponent values.
    The factor |grad u|^{p-2} at grad u = 0 is 1 where p == 2 and 0 otherwise.
    """
    rule = rule or default_rule()
    expo = p if isinstance(p, np.ndarray) else p.at_quadrature(mesh, rule)
    return _kernels.grad_flux(mesh.triangles, mesh.grads, np.asarray(u, float),
                              expo, quad_weights(mesh, rule))


def log_kernel(s, q):
    """Pointwise |s|^{q-2} s ln|s| with the value 0 at s = 0."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    safe = np.where(a > 0, a, 1.0)
    return np.where(a > 0, safe ** (np.asarray(q) - 2.0) * s * np.log(safe), 0.0)


def assemble_logsource(mesh, q, u, rule=None) -> np.ndarray:
    """Vector of int |u|^{q(x)-2} u ln|u| phi_i, u interpolated at quadrature points."""
    rule = rule or default_rule()
    expo = q if isinstance(q, np.ndarray) else q.at_quadrature(mesh, rule)
    return _kernels.value_flux(mesh.triangles, np.ascontiguousarray(rule.points),
                               np.asarray(u, float), expo, quad_weights(mesh, rule), True)


def zero_boundary(mesh, vec) -> np.ndarray:
    out = np.array(vec, dtype=float, copy=True)
    out[mesh.boundary_mask] = 0.0
    return out


def apply_dirichlet(matrix, rhs, mesh):
    """Homogeneous Dirichlet rows/columns -> identity, rhs entries -> 0.

    Symmetry is preserved because constrained columns are cleared too.
    """
    n = mesh.n_vertices
    rhs = np.asarray(rhs, dtype=float)
    if matrix.shape != (n, n) or rhs.shape != (n,):
        raise ValueError(f"dimension mismatch: matrix {matrix.shape}, rhs {rhs.shape}, mesh {n}")
    keep = sp.diags((~mesh.boundary_mask).astype(float))
    A = (keep @ matrix @ keep + sp.diags(mesh.boundary_mask.astype(float))).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return A, zero_boundary(mesh, rhs)


def cg_solve(matrix, rhs, tol: float = 1e-10, maxiter: int | None = None, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Stops when ||r||_2 <= tol * ||rhs||_2; raises :class:`SolverError`
    with the final residual otherwise.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = matrix.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    rhs = np.asarray(rhs, dtype=float)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    A = matrix if sp.isspmatrix_csr(matrix) else sp.csr_matrix(matrix)
    x, it, res = _kernels.pcg(A, rhs, x0, tol, maxiter)
    bnorm = float(np.linalg.norm(rhs))
    if not np.isfinite(res) or res > tol * bnorm:
        raise SolverError(f"CG did not converge in {it} iterations (residual {res:.3e}, "
                          f"target {tol * bnorm:.3e})", res, it)
    return x
