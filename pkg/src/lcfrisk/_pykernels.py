"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The solvers work on a logarithmic variable so that Newton steps stay
well-scaled across many decades, and keep a bracket that Newton iterates
are never allowed to leave (bisection fallback).

Each solver returns ``(root, iterations)``; ``iterations[k] == -1`` marks a
non-converged entry.
"""

import numpy as np

NAME = "numpy"


def _safeguarded_newton(fun, y, lo, hi, tol, maxiter):
    # fun(y) -> (scaled residual, derivative), residual increasing in y
    y = y.copy()
    lo = lo.copy()
    hi = hi.copy()
    its = np.full(y.shape, -1, dtype=np.int64)
    active = np.ones(y.shape, dtype=bool)
    for it in range(maxiter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        f, df = fun(y[idx], idx)
        done = np.abs(f) <= tol
        its[idx[done]] = it
        active[idx[done]] = False
        keep = ~done
        idx, f, df = idx[keep], f[keep], df[keep]
        if idx.size == 0:
            break
        pos = f > 0
        hi[idx[pos]] = y[idx[pos]]
        lo[idx[~pos]] = y[idx[~pos]]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = y[idx] - f / df
        bad = ~((step > lo[idx]) & (step < hi[idx]))
        step[bad] = 0.5 * (lo[idx][bad] + hi[idx][bad])
        stalled = step == y[idx]
        # bracket collapsed to round-off: accept if residual is near tolerance
        if stalled.any():
            s_idx = idx[stalled]
            ok = np.abs(f[stalled]) <= 1e3 * tol
            its[s_idx[ok]] = it
            active[s_idx] = False
        y[idx] = step
    return y, its


def neuber_solve(sigma_el, E, K, n_prime, tol, maxiter):
    """Solve the Neuber energy balance for the elastic-plastic amplitude.

    Works on ``y = log(sigma_pl / sigma_el)``; the residual is the balance
    divided by ``sigma_el**2 / E``.
    """
    s = np.ascontiguousarray(sigma_el, dtype=float)
    out = np.zeros_like(s)
    its = np.zeros(s.shape, dtype=np.int64)
    nz = s > 0
    if not nz.any():
        return out, its
    sv = s[nz]
    p = 1.0 + 1.0 / n_prime
    # x**2 + a * x**p = 1 with x = sigma_pl / sigma_el
    a = (E / sv) * (sv / K) ** (1.0 / n_prime)
    hi = np.minimum(0.0, -np.log(a) / p)
    lo = np.minimum(0.5 * np.log(0.5), (np.log(0.5) - np.log(a)) / p)
    lo = np.minimum(lo, hi)

    def fun(y, idx):
        e2 = np.exp(2.0 * y)
        ep = a[idx] * np.exp(p * y)
        return e2 + ep - 1.0, 2.0 * e2 + p * ep

    y, it = _safeguarded_newton(fun, hi, lo - 1e-12, hi + 1e-12, tol, maxiter)
    out[nz] = sv * np.exp(y)
    its[nz] = it
    return out, its


def ro_inverse_solve(eps, E, K, n_prime, tol, maxiter):
    """Invert the Ramberg-Osgood law; residual is relative to ``eps``."""
    e = np.ascontiguousarray(eps, dtype=float)
    out = np.zeros_like(e)
    its = np.zeros(e.shape, dtype=np.int64)
    nz = e > 0
    if not nz.any():
        return out, its
    ev = e[nz]
    hi = np.minimum(np.log(E * ev), np.log(K) + n_prime * np.log(ev))
    lo = np.minimum(np.log(0.5 * E * ev), np.log(K) + n_prime * np.log(0.5 * ev))
    inv_n = 1.0 / n_prime

    def fun(y, idx):
        el = np.exp(y) / E
        pl = np.exp(inv_n * (y - np.log(K)))
        ei = ev[idx]
        return (el + pl - ei) / ei, (el + inv_n * pl) / ei

    y, it = _safeguarded_newton(fun, hi, lo - 1e-12, hi + 1e-12, tol, maxiter)
    out[nz] = np.exp(y)
    its[nz] = it
    return out, its


def cmb_inverse_solve(eps, sigma_f, eps_f, b, c, E, tol, maxiter):
    """Invert the Coffin-Manson-Basquin curve for the cycle count.

    Works on ``x = log(2N)``. The curve is decreasing in ``x`` so the solver
    sees the negated residual.
    """
    e = np.ascontiguousarray(eps, dtype=float)
    A = sigma_f / E
    B = eps_f
    with np.errstate(divide="ignore"):
        le = np.log(e)
    xl = np.maximum((le - np.log(A)) / b, (le - np.log(B)) / c)
    xu = np.maximum((le - np.log(2.0 * A)) / b, (le - np.log(2.0 * B)) / c)

    def fun(x, idx):
        ta = A * np.exp(b * x)
        tb = B * np.exp(c * x)
        ei = e[idx]
        return -(ta + tb - ei) / ei, -(b * ta + c * tb) / ei

    x, its = _safeguarded_newton(fun, xl, xl - 1e-12, xu + 1e-12, tol, maxiter)
    return 0.5 * np.exp(x), its


def max_resolved_shear(dev, rotations, normals, directions):
    """Largest absolute resolved shear over all slip systems per rotation.

    Parameters
    ----------
    dev : ndarray, shape (3, 3)
        Deviatoric stress (hydrostatic part already removed).
    rotations : ndarray, shape (m, 3, 3)
    normals : ndarray, shape (p, 3)
    directions : ndarray, shape (p, q, 3)
    """
    # stress in the crystal frame: U^T sigma U
    local = np.einsum("mki,kl,mlj->mij", rotations, dev, rotations, optimize=True)
    tau = np.einsum("pi,mij,pqj->mpq", normals, local, directions, optimize=True)
    return np.abs(tau).reshape(tau.shape[0], -1).max(axis=1)
