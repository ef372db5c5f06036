# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element loops and Jacobi-PCG."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, log, exp, fabs, isfinite

NAME = "cython"


def grad_flux(const cnp.int64_t[:, ::1] tri, const double[:, :, ::1] grads,
              const double[::1] u, const double[:, ::1] expo,
              const double[:, ::1] wts, Py_ssize_t n):
    cdef Py_ssize_t T = tri.shape[0], Q = expo.shape[1], t, q, i
    cdef double gx, gy, s, e, c, fac, e_prev
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    with nogil:
        for t in range(T):
            gx = 0.0
            gy = 0.0
            for i in range(3):
                gx = gx + u[tri[t, i]] * grads[t, i, 0]
                gy = gy + u[tri[t, i]] * grads[t, i, 1]
            s = sqrt(gx * gx + gy * gy)
            c = 0.0
            e_prev = -1.0
            fac = 0.0
            for q in range(Q):
                e = expo[t, q] - 2.0
                if e != e_prev:  # exponents usually repeat within an element
                    if s > 0.0:
                        fac = pow(s, e)
                    elif e == 0.0:
                        fac = 1.0
                    else:
                        fac = 0.0
                    e_prev = e
                c = c + wts[t, q] * fac
            for i in range(3):
                out[tri[t, i]] += c * (grads[t, i, 0] * gx + grads[t, i, 1] * gy)
    return out_arr


def value_flux(const cnp.int64_t[:, ::1] tri, const double[:, ::1] bary,
               const double[::1] u, const double[:, ::1] expo,
               const double[:, ::1] wts, bint log_mode, Py_ssize_t n):
    cdef Py_ssize_t T = tri.shape[0], Q = bary.shape[0], t, q, i
    cdef double uq, a, f, la
    cdef double acc[3]
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    with nogil:
        for t in range(T):
            acc[0] = 0.0
            acc[1] = 0.0
            acc[2] = 0.0
            for q in range(Q):
                uq = 0.0
                for i in range(3):
                    uq = uq + bary[q, i] * u[tri[t, i]]
                a = fabs(uq)
                if a > 0.0:
                    la = log(a)
                    f = exp((expo[t, q] - 2.0) * la) * uq
                    if log_mode:
                        f = f * la
                    f = f * wts[t, q]
                    for i in range(3):
                        acc[i] = acc[i] + f * bary[q, i]
            for i in range(3):
                out[tri[t, i]] += acc[i]
    return out_arr


def power_sum(const double[:, ::1] vals, const double[:, ::1] expo,
              const double[:, ::1] wts, double scale):
    cdef Py_ssize_t T = vals.shape[0], Q = vals.shape[1], t, q
    cdef double total = 0.0, a
    with nogil:
        for t in range(T):
            for q in range(Q):
                a = fabs(vals[t, q]) * scale
                if a > 0.0:
                    total = total + wts[t, q] * pow(a, expo[t, q])
    return total


cdef void _matvec(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                  const double[::1] data, const double[::1] x, double[::1] y,
                  Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s = s + data[k] * x[indices[k]]
        y[i] = s


def pcg(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
        const double[::1] data, Py_ssize_t n, const double[::1] rhs,
        x0, double tol, Py_ssize_t maxiter):
    """Jacobi-preconditioned CG. Returns (x, iterations, residual norm)."""
    x_arr = np.array(x0, dtype=float, copy=True)
    cdef double[::1] x = x_arr
    cdef double[::1] r = np.empty(n), z = np.empty(n), p = np.empty(n)
    cdef double[::1] Ap = np.empty(n), dinv = np.empty(n)
    cdef Py_ssize_t i, k, it = 0
    cdef double bnorm = 0.0, rnorm = 0.0, rz = 0.0, rz_new, pAp, alpha, beta
    with nogil:
        for i in range(n):
            bnorm = bnorm + rhs[i] * rhs[i]
            dinv[i] = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                if indices[k] == i:
                    dinv[i] = 1.0 / data[k]
        bnorm = sqrt(bnorm)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    with nogil:
        _matvec(indptr, indices, data, x, Ap, n)
        for i in range(n):
            r[i] = rhs[i] - Ap[i]
            rnorm = rnorm + r[i] * r[i]
        rnorm = sqrt(rnorm)
        if rnorm > tol * bnorm:
            for i in range(n):
                z[i] = r[i] * dinv[i]
                p[i] = z[i]
                rz = rz + r[i] * z[i]
            while it < maxiter:
                it += 1
                _matvec(indptr, indices, data, p, Ap, n)
                pAp = 0.0
                for i in range(n):
                    pAp = pAp + p[i] * Ap[i]
                alpha = rz / pAp
                rnorm = 0.0
                for i in range(n):
                    x[i] = x[i] + alpha * p[i]
                    r[i] = r[i] - alpha * Ap[i]
                    rnorm = rnorm + r[i] * r[i]
                rnorm = sqrt(rnorm)
                if rnorm <= tol * bnorm or not isfinite(rnorm):
                    break
                rz_new = 0.0
                for i in range(n):
                    z[i] = r[i] * dinv[i]
                    rz_new = rz_new + r[i] * z[i]
                beta = rz_new / rz
                rz = rz_new
                for i in range(n):
                    p[i] = z[i] + beta * p[i]
    return x_arr, it, rnorm
