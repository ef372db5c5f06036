"""Numpy implementations of the hot kernels (fallback backend)."""
import numpy as np

NAME = "python"


def element_gradients(tri, grads, u):
    return np.einsum("tik,ti->tk", grads, u[tri])


def grad_flux(tri, grads, u, expo, wts, n):
    g = element_gradients(tri, grads, u)
    s = np.sqrt(g[:, 0] ** 2 + g[:, 1] ** 2)[:, None]
    e = expo - 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(s > 0.0, s ** e, np.where(e == 0.0, 1.0, 0.0))
    c = np.sum(wts * fac, axis=1)
    contrib = c[:, None] * np.einsum("tik,tk->ti", grads, g)
    out = np.zeros(n)
    np.add.at(out, tri, contrib)
    return out


def qp_values(tri, bary, u):
    return u[tri] @ bary.T


def value_flux(tri, bary, u, expo, wts, log_mode, n):
    uq = qp_values(tri, bary, u)
    a = np.abs(uq)
    pos = a > 0.0
    safe = np.where(pos, a, 1.0)
    f = np.where(pos, safe ** (expo - 2.0) * uq, 0.0)
    if log_mode:
        f = f * np.log(safe)
    contrib = (wts * f) @ bary
    out = np.zeros(n)
    np.add.at(out, tri, contrib)
    return out


def power_sum(vals, expo, wts, scale):
    # expo > 0, so 0 ** expo == 0
    return float(np.sum(wts * (np.abs(vals) * scale) ** expo))


def pcg(indptr, indices, data, n, rhs, x0, tol, maxiter):
    """Jacobi-preconditioned CG. Returns (x, iterations, residual norm)."""
    from scipy.sparse import csr_matrix

    A = csr_matrix((data, indices, indptr), shape=(n, n))
    d = A.diagonal()
    x = np.array(x0, dtype=float, copy=True)
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    r = rhs - A @ x
    rnorm = float(np.linalg.norm(r))
    if rnorm <= tol * bnorm:
        return x, 0, rnorm
    z = r / d
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm or not np.isfinite(rnorm):
            return x, it, rnorm
        z = r / d
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, rnorm
