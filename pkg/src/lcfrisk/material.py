"""Deterministic lifing chain for low-cycle fatigue.

Elastic von Mises amplitude -> Neuber shakedown -> Ramberg-Osgood strain ->
inverse Coffin-Manson-Basquin curve, giving the deterministic number of
cycles to crack initiation ``N_det``.

All functions accept scalars or numpy arrays. The root finders are the
batched kernels from :mod:`lcfrisk._backend`, so a scalar call and an array
call run the identical per-entry arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .errors import DomainError, SolverError

DEFAULT_TOL = 1e-12
MAX_ITER = 200
DEFAULT_N_MAX = 1e12


@dataclass(frozen=True)
class ElasticParams:
    """Isotropic linear elasticity.

    Construct from the Lamé constants, or use :meth:`from_young_poisson`.
    ``E`` is derived when omitted and checked for consistency when given.
    """

    lam: float
    mu: float
    E: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lambda must be > 0, got {self.lam}")
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        E_lame = self.mu * (3 * self.lam + 2 * self.mu) / (self.lam + self.mu)
        if self.E is None:
            object.__setattr__(self, "E", E_lame)
        elif not self.E > 0:
            raise DomainError(f"E must be > 0, got {self.E}")
        elif abs(self.E - E_lame) > 1e-9 * E_lame:
            raise DomainError(
                f"E={self.E} inconsistent with lambda, mu (implies E={E_lame})"
            )

    @classmethod
    def from_young_poisson(cls, E, nu):
        if not E > 0:
            raise DomainError(f"E must be > 0, got {E}")
        if not 0 < nu < 0.5:
            raise DomainError(f"nu must lie in (0, 0.5), got {nu}")
        lam = E * nu / ((1 + nu) * (1 - 2 * nu))
        mu = E / (2 * (1 + nu))
        return cls(lam, mu)

    @property
    def nu(self):
        return self.lam / (2 * (self.lam + self.mu))


@dataclass(frozen=True)
class RambergOsgoodParams:
    """Cyclic stress-strain curve ``eps = sigma/E + (sigma/K)**(1/n')``."""

    E: float
    K: float
    n_prime: float

    def __post_init__(self):
        if not self.E > 0:
            raise DomainError(f"E must be > 0, got {self.E}")
        if not self.K > 0:
            raise DomainError(f"K must be > 0, got {self.K}")
        if not 0 < self.n_prime < 1:
            raise DomainError(f"n_prime must lie in (0, 1), got {self.n_prime}")


@dataclass(frozen=True)
class CmbParams:
    """Strain-life curve coefficients (Coffin-Manson-Basquin)."""

    sigma_f_prime: float
    eps_f_prime: float
    b: float
    c: float

    def __post_init__(self):
        if not self.sigma_f_prime > 0:
            raise DomainError(f"sigma_f_prime must be > 0, got {self.sigma_f_prime}")
        if not self.eps_f_prime > 0:
            raise DomainError(f"eps_f_prime must be > 0, got {self.eps_f_prime}")
        if not self.b < 0:
            raise DomainError(f"b must be < 0, got {self.b}")
        if not self.c < 0:
            raise DomainError(f"c must be < 0, got {self.c}")


_VOIGT = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))


@dataclass(frozen=True)
class StressTensor:
    """Symmetric 3x3 stress stored as six components.

    Component order is ``(xx, yy, zz, yz, xz, xy)``.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if len(comps) != 6:
            raise DomainError("a stress tensor needs exactly 6 components")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise DomainError(f"expected a 3x3 matrix, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            raise DomainError("stress matrix is not symmetric")
        return cls(tuple(m[i, j] for i, j in _VOIGT))

    @classmethod
    def diag(cls, a, b, c):
        return cls((a, b, c, 0.0, 0.0, 0.0))

    @property
    def matrix(self):
        m = np.empty((3, 3))
        for (i, j), v in zip(_VOIGT, self.components):
            m[i, j] = m[j, i] = v
        return m


def as_stress_matrix(s):
    """Return ``s`` as a (..., 3, 3) float array."""
    if isinstance(s, StressTensor):
        return s.matrix
    m = np.asarray(s, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise DomainError(f"expected (..., 3, 3) stress, got shape {m.shape}")
    return m


def deviator(s):
    """Trace-free part of a (..., 3, 3) tensor.

    The diagonal is formed from pairwise differences so a hydrostatic tensor
    maps to exactly zero.
    """
    m = as_stress_matrix(s)
    d = m.copy()
    s11, s22, s33 = m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]
    d[..., 0, 0] = ((s11 - s22) + (s11 - s33)) / 3.0
    d[..., 1, 1] = ((s22 - s11) + (s22 - s33)) / 3.0
    d[..., 2, 2] = ((s33 - s11) + (s33 - s22)) / 3.0
    return d


def von_mises(s):
    """Von Mises equivalent of a stress (amplitude), ``sqrt(3/2 s':s')``.

    Accepts a :class:`StressTensor` or any (..., 3, 3) array.
    """
    d = deviator(s)
    return np.sqrt(1.5 * np.einsum("...ij,...ij->...", d, d))


def von_mises_gradient(s):
    """Derivative of :func:`von_mises` with respect to the stress entries.

    Returns ``3/2 s' / vm`` and zero where the von Mises value vanishes.
    """
    d = deviator(s)
    vm = np.sqrt(1.5 * np.einsum("...ij,...ij->...", d, d))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = 1.5 * d / vm[..., None, None]
    return np.where((vm > 0)[..., None, None], g, 0.0)


def _check_converged(its, residual_fn, what):
    bad = np.asarray(its) < 0
    if bad.any():
        res = residual_fn(bad)
        raise SolverError(
            f"{what}: no convergence within {MAX_ITER} iterations "
            f"({int(bad.sum())} entries, worst residual {np.max(np.abs(res)):.3e})",
            residual=float(np.max(np.abs(res))),
        )


def _vec(x):
    # 1-d work array: numpy scalar arithmetic uses libm pow, the ufunc loops do
    # not, and mixing them breaks bitwise agreement between scalar/array calls
    return np.atleast_1d(np.asarray(x, dtype=float))


def _out(x, like):
    if np.ndim(like) == 0:
        return float(np.asarray(x).ravel()[0])
    return np.asarray(x).reshape(np.shape(like))


def ro_strain(sigma, p: RambergOsgoodParams):
    """Ramberg-Osgood strain amplitude for a stress amplitude ``sigma >= 0``."""
    s = _vec(sigma)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("ro_strain requires sigma >= 0")
    eps = s / p.E + (s / p.K) ** (1.0 / p.n_prime)
    return _out(eps, sigma)


def ro_strain_derivative(sigma, p: RambergOsgoodParams):
    """``d eps / d sigma`` of the Ramberg-Osgood law."""
    s = _vec(sigma)
    inv_n = 1.0 / p.n_prime
    d = 1.0 / p.E + inv_n / p.K * (s / p.K) ** (inv_n - 1.0)
    return _out(d, sigma)


def ro_inverse(eps, p: RambergOsgoodParams, tol=DEFAULT_TOL):
    """Stress amplitude whose Ramberg-Osgood strain is ``eps``.

    The residual satisfies ``|ro_strain(sigma) - eps| <= tol * eps``.
    """
    e = np.asarray(eps, dtype=float)
    if np.any(e < 0) or np.any(np.isnan(e)):
        raise DomainError("ro_inverse requires eps >= 0")
    if not tol > 0:
        raise DomainError("tol must be > 0")
    flat = np.atleast_1d(e).ravel()
    sig, its = kernels.ro_inverse_solve(flat, p.E, p.K, p.n_prime, tol, MAX_ITER)
    _check_converged(
        its, lambda bad: (ro_strain(sig[bad], p) - flat[bad]) / flat[bad], "ro_inverse"
    )
    return _out(sig.reshape(e.shape), eps)


def neuber_shakedown(sigma_el, p: RambergOsgoodParams, tol=DEFAULT_TOL):
    """Elastic-plastic amplitude from the Neuber energy balance.

    Solves ``s_el**2/E = s**2/E + s*(s/K)**(1/n')`` for ``s`` in
    ``[0, s_el]``. The residual, measured relative to ``s_el**2/E``, is below
    ``tol``.
    """
    s = np.asarray(sigma_el, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("neuber_shakedown requires sigma_el >= 0")
    flat = np.atleast_1d(s).ravel()
    out, its = kernels.neuber_solve(flat, p.E, p.K, p.n_prime, tol, MAX_ITER)
    _check_converged(
        its, lambda bad: neuber_residual(flat[bad], out[bad], p), "neuber_shakedown"
    )
    return _out(out.reshape(s.shape), sigma_el)


def neuber_residual(sigma_el, sigma_pl, p: RambergOsgoodParams):
    """Energy-balance residual relative to ``sigma_el**2 / E``."""
    se = _vec(sigma_el)
    sp = _vec(sigma_pl)
    lhs = se**2 / p.E
    rhs = sp**2 / p.E + sp * (sp / p.K) ** (1.0 / p.n_prime)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(lhs > 0, (rhs - lhs) / lhs, rhs)
    return _out(r, sigma_el)


def neuber_derivative(sigma_el, sigma_pl, p: RambergOsgoodParams):
    """``d sigma_pl / d sigma_el`` by implicit differentiation of the balance."""
    se = _vec(sigma_el)
    sp = _vec(sigma_pl)
    inv_n = 1.0 / p.n_prime
    den = 2.0 * sp / p.E + (1.0 + inv_n) * (sp / p.K) ** inv_n
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(den > 0, (2.0 * se / p.E) / den, 1.0)
    return _out(d, sigma_el)


def cmb_strain(N, p: CmbParams, E):
    """Strain amplitude of the Coffin-Manson-Basquin curve at ``N`` cycles."""
    n = _vec(N)
    if np.any(~(n > 0)):
        raise DomainError("cmb_strain requires N > 0")
    two_n = 2.0 * n
    eps = p.sigma_f_prime / E * two_n**p.b + p.eps_f_prime * two_n**p.c
    return _out(eps, N)


def cmb_strain_derivative(N, p: CmbParams, E):
    """``d eps / d N`` of the Coffin-Manson-Basquin curve (negative)."""
    two_n = 2.0 * _vec(N)
    d = 2.0 * (
        p.sigma_f_prime / E * p.b * two_n ** (p.b - 1.0)
        + p.eps_f_prime * p.c * two_n ** (p.c - 1.0)
    )
    return _out(d, N)


def cmb_inverse(eps, p: CmbParams, E, tol=DEFAULT_TOL):
    """Cycles ``N`` with ``cmb_strain(N) == eps`` to relative tolerance ``tol``.

    No runout cap is applied here; see :func:`ndet_from_elastic_stress`.
    """
    e = np.asarray(eps, dtype=float)
    if np.any(~(e > 0)):
        raise DomainError("cmb_inverse requires eps > 0")
    flat = np.atleast_1d(e).ravel()
    N, its = kernels.cmb_inverse_solve(
        flat, p.sigma_f_prime, p.eps_f_prime, p.b, p.c, E, tol, MAX_ITER
    )
    _check_converged(
        its, lambda bad: (cmb_strain(N[bad], p, E) - flat[bad]) / flat[bad], "cmb_inverse"
    )
    return _out(N.reshape(e.shape), eps)


class LifeResult(NamedTuple):
    """Deterministic life with a runout mask (``True`` where capped)."""

    cycles: np.ndarray | float
    runout: np.ndarray | bool


@dataclass(frozen=True)
class Material:
    """Bundle of everything the lifing chain needs.

    ``N_max`` caps the deterministic life; lives beyond it are reported as
    runout.
    """

    elastic: ElasticParams
    ro: RambergOsgoodParams
    cmb: CmbParams
    N_max: float = DEFAULT_N_MAX
    units: str = "MPa"

    def __post_init__(self):
        if not self.N_max > 0.5:
            raise DomainError(f"N_max must be > 0.5, got {self.N_max}")

    @property
    def E(self):
        return self.ro.E

    @property
    def runout_strain(self):
        return cmb_strain(self.N_max, self.cmb, self.E)


def life_from_strain(eps, material: Material, tol=DEFAULT_TOL):
    """Inverse CMB with the runout cap applied."""
    e = np.asarray(eps, dtype=float)
    if np.any(e < 0) or np.any(np.isnan(e)):
        raise DomainError("strain amplitude must be >= 0")
    flat = np.atleast_1d(e).ravel()
    runout = flat <= material.runout_strain
    N = np.full(flat.shape, float(material.N_max))
    live = ~runout
    if live.any():
        N[live] = cmb_inverse(flat[live], material.cmb, material.E, tol)
    N = np.minimum(N, material.N_max)
    if np.ndim(eps) == 0:
        return LifeResult(float(N[0]), bool(runout[0]))
    return LifeResult(N.reshape(e.shape), runout.reshape(e.shape))


def ndet_from_elastic_stress(sigma_el, material: Material, tol=DEFAULT_TOL):
    """Deterministic cycles to crack initiation for an elastic von Mises amplitude.

    Composition ``CMB^-1(RO(SD(sigma_el)))``, clamped at ``material.N_max``.

    Returns
    -------
    LifeResult
        ``cycles`` and a boolean ``runout`` flag (array or scalar, matching
        the input).
    """
    s = np.asarray(sigma_el, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("ndet_from_elastic_stress requires sigma_el >= 0")
    sp = neuber_shakedown(s, material.ro, tol)
    eps = ro_strain(sp, material.ro)
    res = life_from_strain(eps, material, tol)
    if np.ndim(sigma_el) == 0:
        return LifeResult(float(res.cycles), bool(res.runout))
    return res


def ndet_derivative(sigma_el, material: Material, tol=DEFAULT_TOL):
    """``d N_det / d sigma_el`` along the lifing chain.

    Returns ``(N_det, dN/dsigma_el, runout)``; the derivative is zero at
    runout-capped entries.
    """
    s = np.atleast_1d(np.asarray(sigma_el, dtype=float))
    sp = neuber_shakedown(s, material.ro, tol)
    eps = ro_strain(sp, material.ro)
    life = life_from_strain(eps, material, tol)
    N = np.atleast_1d(life.cycles)
    runout = np.atleast_1d(life.runout)
    d_sd = neuber_derivative(s, sp, material.ro)
    d_ro = ro_strain_derivative(sp, material.ro)
    d_cmb = cmb_strain_derivative(N, material.cmb, material.E)
    dN = np.where(runout, 0.0, d_ro * d_sd / d_cmb)
    return N, dN, runout
