# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Same algorithms, same signatures, one scalar loop per entry.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, fmin, fmax

cnp.import_array()

NAME = "cython"

ctypedef double (*resid_fn)(double y, double* par, double* df) noexcept nogil


cdef double _neuber_res(double y, double* par, double* df) noexcept nogil:
    # par: a, p
    cdef double e2 = exp(2.0 * y)
    cdef double ep = par[0] * exp(par[1] * y)
    df[0] = 2.0 * e2 + par[1] * ep
    return e2 + ep - 1.0


cdef double _ro_res(double y, double* par, double* df) noexcept nogil:
    # par: E, inv_n, logK, eps
    cdef double el = exp(y) / par[0]
    cdef double pl = exp(par[1] * (y - par[2]))
    df[0] = (el + par[1] * pl) / par[3]
    return (el + pl - par[3]) / par[3]


cdef double _cmb_res(double y, double* par, double* df) noexcept nogil:
    # par: A, B, b, c, eps ; negated so that it increases in y
    cdef double ta = par[0] * exp(par[2] * y)
    cdef double tb = par[1] * exp(par[3] * y)
    df[0] = -(par[2] * ta + par[3] * tb) / par[4]
    return -(ta + tb - par[4]) / par[4]


cdef long _newton(resid_fn fun, double* par, double y, double lo, double hi,
                  double tol, long maxiter, double* root) noexcept nogil:
    cdef long it
    cdef double f, df, step
    for it in range(maxiter):
        f = fun(y, par, &df)
        if fabs(f) <= tol:
            root[0] = y
            return it
        if f > 0:
            hi = y
        else:
            lo = y
        step = y - f / df
        if not (step > lo and step < hi):
            step = 0.5 * (lo + hi)
        if step == y:
            root[0] = y
            if fabs(f) <= 1e3 * tol:
                return it
            return -1
        y = step
    root[0] = y
    return -1


def neuber_solve(sigma_el, double E, double K, double n_prime, double tol, long maxiter):
    cdef double[::1] s = np.ascontiguousarray(sigma_el, dtype=np.float64).ravel()
    cdef Py_ssize_t n = s.shape[0], i
    out = np.zeros(n, dtype=np.float64)
    its = np.zeros(n, dtype=np.int64)
    cdef double[::1] o = out
    cdef long[::1] itv = its
    cdef double par[2]
    cdef double p = 1.0 + 1.0 / n_prime
    cdef double a, lo, hi, y
    with nogil:
        for i in range(n):
            if s[i] <= 0:
                continue
            a = (E / s[i]) * exp(log(s[i] / K) / n_prime)
            hi = fmin(0.0, -log(a) / p)
            lo = fmin(0.5 * log(0.5), (log(0.5) - log(a)) / p)
            lo = fmin(lo, hi)
            par[0] = a
            par[1] = p
            itv[i] = _newton(_neuber_res, par, hi, lo - 1e-12, hi + 1e-12, tol, maxiter, &y)
            o[i] = s[i] * exp(y)
    return out.reshape(np.shape(sigma_el)), its.reshape(np.shape(sigma_el))


def ro_inverse_solve(eps, double E, double K, double n_prime, double tol, long maxiter):
    cdef double[::1] e = np.ascontiguousarray(eps, dtype=np.float64).ravel()
    cdef Py_ssize_t n = e.shape[0], i
    out = np.zeros(n, dtype=np.float64)
    its = np.zeros(n, dtype=np.int64)
    cdef double[::1] o = out
    cdef long[::1] itv = its
    cdef double par[4]
    cdef double lo, hi, y
    par[0] = E
    par[1] = 1.0 / n_prime
    par[2] = log(K)
    with nogil:
        for i in range(n):
            if e[i] <= 0:
                continue
            hi = fmin(log(E * e[i]), log(K) + n_prime * log(e[i]))
            lo = fmin(log(0.5 * E * e[i]), log(K) + n_prime * log(0.5 * e[i]))
            par[3] = e[i]
            itv[i] = _newton(_ro_res, par, hi, lo - 1e-12, hi + 1e-12, tol, maxiter, &y)
            o[i] = exp(y)
    return out.reshape(np.shape(eps)), its.reshape(np.shape(eps))


def cmb_inverse_solve(eps, double sigma_f, double eps_f, double b, double c, double E,
                      double tol, long maxiter):
    cdef double[::1] e = np.ascontiguousarray(eps, dtype=np.float64).ravel()
    cdef Py_ssize_t n = e.shape[0], i
    out = np.zeros(n, dtype=np.float64)
    its = np.zeros(n, dtype=np.int64)
    cdef double[::1] o = out
    cdef long[::1] itv = its
    cdef double par[5]
    cdef double A = sigma_f / E
    cdef double xl, xu, le, x
    par[0] = A
    par[1] = eps_f
    par[2] = b
    par[3] = c
    with nogil:
        for i in range(n):
            le = log(e[i])
            xl = fmax((le - log(A)) / b, (le - log(eps_f)) / c)
            xu = fmax((le - log(2.0 * A)) / b, (le - log(2.0 * eps_f)) / c)
            par[4] = e[i]
            itv[i] = _newton(_cmb_res, par, xl, xl - 1e-12, xu + 1e-12, tol, maxiter, &x)
            o[i] = 0.5 * exp(x)
    return out.reshape(np.shape(eps)), its.reshape(np.shape(eps))


def max_resolved_shear(dev, rotations, normals, directions):
    cdef double[:, ::1] d = np.ascontiguousarray(dev, dtype=np.float64)
    cdef double[:, :, ::1] U = np.ascontiguousarray(rotations, dtype=np.float64)
    cdef double[:, ::1] nrm = np.ascontiguousarray(normals, dtype=np.float64)
    cdef double[:, :, ::1] dirs = np.ascontiguousarray(directions, dtype=np.float64)
    cdef Py_ssize_t m = U.shape[0], P = nrm.shape[0], Q = dirs.shape[1]
    cdef Py_ssize_t r, i, j, k, l, p, q
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef double loc[3][3]
    cdef double tmp[3][3]
    cdef double acc, t, best, v
    with nogil:
        for r in range(m):
            # tmp = sigma U ; loc = U^T tmp
            for k in range(3):
                for j in range(3):
                    acc = 0.0
                    for l in range(3):
                        acc = acc + d[k, l] * U[r, l, j]
                    tmp[k][j] = acc
            for i in range(3):
                for j in range(3):
                    acc = 0.0
                    for k in range(3):
                        acc = acc + U[r, k, i] * tmp[k][j]
                    loc[i][j] = acc
            best = 0.0
            for p in range(P):
                for q in range(Q):
                    t = 0.0
                    for i in range(3):
                        v = 0.0
                        for j in range(3):
                            v = v + loc[i][j] * dirs[p, q, j]
                        t = t + nrm[p, i] * v
                    t = fabs(t)
                    if t > best:
                        best = t
            o[r] = best
    return out
