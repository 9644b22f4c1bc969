# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid kernels: 5-point shifted Laplacian, upwind taxis flux
divergence and CFL speed scan.

Stencil evaluation order matches `_numpy_impl` exactly (face difference
quotients first, then face-by-face accumulation) so both backends agree
to the last bit on the same input.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def shifted_laplacian(double[:, ::1] x, double a, double b, double hx,
                      double hy, double[:, ::1] out):
    """out = a*x - b*lap(x) with the mirror-ghost 5-point Laplacian."""
    cdef Py_ssize_t ny = x.shape[0]
    cdef Py_ssize_t nx = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double lap, qe, qw, qn, qs
    for j in range(ny):
        for i in range(nx):
            qe = (x[j, i + 1] - x[j, i]) / hx if i + 1 < nx else 0.0
            qw = (x[j, i] - x[j, i - 1]) / hx if i > 0 else 0.0
            qn = (x[j + 1, i] - x[j, i]) / hy if j + 1 < ny else 0.0
            qs = (x[j, i] - x[j - 1, i]) / hy if j > 0 else 0.0
            # accumulation order mirrors the numpy backend bit-for-bit
            lap = qe / hx - qw / hx + qn / hy - qs / hy
            out[j, i] = x[j, i] * a - b * lap
    return np.asarray(out)


def upwind_divergence(double[:, ::1] u, double[:, ::1] p, double hx,
                      double hy, double[:, ::1] out):
    """Divergence of the first-order upwind flux u_donor * grad(p)."""
    cdef Py_ssize_t ny = u.shape[0]
    cdef Py_ssize_t nx = u.shape[1]
    cdef Py_ssize_t i, j
    cdef double fe, fw, fn, fs, v
    for j in range(ny):
        for i in range(nx):
            fe = fw = fn = fs = 0.0
            if i + 1 < nx:
                v = (p[j, i + 1] - p[j, i]) / hx
                fe = (u[j, i] if v > 0.0 else u[j, i + 1]) * v
            if i > 0:
                v = (p[j, i] - p[j, i - 1]) / hx
                fw = (u[j, i - 1] if v > 0.0 else u[j, i]) * v
            if j + 1 < ny:
                v = (p[j + 1, i] - p[j, i]) / hy
                fn = (u[j, i] if v > 0.0 else u[j + 1, i]) * v
            if j > 0:
                v = (p[j, i] - p[j - 1, i]) / hy
                fs = (u[j - 1, i] if v > 0.0 else u[j, i]) * v
            out[j, i] = fe / hx - fw / hx + fn / hy - fs / hy
    return np.asarray(out)


cdef inline double _apply_op(double[:, ::1] v, double[:, ::1] out,
                             Py_ssize_t ny, Py_ssize_t nx, double a, double b,
                             double ihx2, double ihy2) nogil:
    """out = (a I - b Lap) v with hoisted reciprocals; returns <v, out>."""
    cdef Py_ssize_t i, j
    cdef double qe, qw, qn, qs, val, acc = 0.0
    for j in range(ny):
        for i in range(nx):
            qe = v[j, i + 1] - v[j, i] if i + 1 < nx else 0.0
            qw = v[j, i] - v[j, i - 1] if i > 0 else 0.0
            qn = v[j + 1, i] - v[j, i] if j + 1 < ny else 0.0
            qs = v[j, i] - v[j - 1, i] if j > 0 else 0.0
            val = v[j, i] * a - b * ((qe - qw) * ihx2 + (qn - qs) * ihy2)
            out[j, i] = val
            acc += v[j, i] * val
    return acc


def pcg_solve(double[:, ::1] x, double[:, ::1] rhs, double a, double b,
              double hx, double hy, double[:, ::1] diag, double tol,
              int maxiter):
    """Jacobi-preconditioned CG for (a I - b Lap) x = rhs, fully in C.

    x holds the initial guess on entry and the solution on exit.
    Returns (iterations, relative_residual, converged).
    """
    cdef Py_ssize_t ny = x.shape[0]
    cdef Py_ssize_t nx = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double ihx2 = 1.0 / (hx * hx)
    cdef double ihy2 = 1.0 / (hy * hy)
    r_arr = np.empty((ny, nx))
    id_arr = np.empty((ny, nx))
    p_arr = np.empty((ny, nx))
    ap_arr = np.empty((ny, nx))
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] idg = id_arr
    cdef double[:, ::1] pv = p_arr
    cdef double[:, ::1] ap = ap_arr
    cdef double bnorm2 = 0.0, rnorm2 = 0.0, rz = 0.0, rz_new, pap
    cdef double alpha, beta, z
    cdef int k

    for j in range(ny):
        for i in range(nx):
            bnorm2 += rhs[j, i] * rhs[j, i]
            idg[j, i] = 1.0 / diag[j, i]
    if bnorm2 == 0.0:
        for j in range(ny):
            for i in range(nx):
                x[j, i] = 0.0
        return 0, 0.0, True

    _apply_op(x, ap, ny, nx, a, b, ihx2, ihy2)
    for j in range(ny):
        for i in range(nx):
            r[j, i] = rhs[j, i] - ap[j, i]
            z = r[j, i] * idg[j, i]
            pv[j, i] = z
            rz += r[j, i] * z
            rnorm2 += r[j, i] * r[j, i]
    if rnorm2 <= tol * tol * bnorm2:
        return 0, (rnorm2 / bnorm2) ** 0.5, True

    for k in range(1, maxiter + 1):
        pap = _apply_op(pv, ap, ny, nx, a, b, ihx2, ihy2)
        alpha = rz / pap
        rnorm2 = 0.0
        rz_new = 0.0
        for j in range(ny):
            for i in range(nx):
                x[j, i] += alpha * pv[j, i]
                r[j, i] -= alpha * ap[j, i]
                rnorm2 += r[j, i] * r[j, i]
                rz_new += r[j, i] * (r[j, i] * idg[j, i])
        if rnorm2 <= tol * tol * bnorm2:
            return k, (rnorm2 / bnorm2) ** 0.5, True
        beta = rz_new / rz
        rz = rz_new
        for j in range(ny):
            for i in range(nx):
                pv[j, i] = r[j, i] * idg[j, i] + beta * pv[j, i]
    return maxiter, (rnorm2 / bnorm2) ** 0.5, False


def max_face_speeds(double[:, ::1] p, double hx, double hy):
    """Largest |grad p| per direction over interior faces."""
    cdef Py_ssize_t ny = p.shape[0]
    cdef Py_ssize_t nx = p.shape[1]
    cdef Py_ssize_t i, j
    cdef double sx = 0.0, sy = 0.0, d
    for j in range(ny):
        for i in range(nx - 1):
            d = p[j, i + 1] - p[j, i]
            if d < 0.0:
                d = -d
            if d > sx:
                sx = d
    for j in range(ny - 1):
        for i in range(nx):
            d = p[j + 1, i] - p[j, i]
            if d < 0.0:
                d = -d
            if d > sy:
                sy = d
    return sx / hx, sy / hy
