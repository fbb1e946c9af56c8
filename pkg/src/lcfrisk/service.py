"""Renewal-reward maintenance model with periodic as-new service.

Times are life-counter cycles. A service of duration ``W`` starts after
every ``delta`` cycles of operation and resets the component to as-new.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .errors import DomainError, NumericalError
from .failure_models import FailureDistribution, Gompertz, Weibull, cumulative_hazard, hazard

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-11
GRID_POINTS = 64


@dataclass(frozen=True)
class EconomicParams:
    """Cash-flow parameters (currency per cycle, currency, per-cycle discount, cycles)."""

    income: float
    service_cost: float
    failure_cost: float
    i_eff: float
    outage: float = 0.0

    def __post_init__(self):
        errs = []
        for name in ("income", "service_cost", "failure_cost", "outage"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                errs.append(f"{name} must be finite and >= 0, got {v}")
        if not 0 < self.i_eff <= 1:
            errs.append(f"i_eff must be in (0, 1], got {self.i_eff}")
        if errs:
            raise DomainError("; ".join(errs))

    def scaled(self, s):
        """Currency parameters multiplied by ``s``."""
        return EconomicParams(self.income * s, self.service_cost * s, self.failure_cost * s,
                              self.i_eff, self.outage)

    def with_income(self, income):
        return EconomicParams(income, self.service_cost, self.failure_cost, self.i_eff, self.outage)


# -- periodic hazard -------------------------------------------------------------------
def _period_position(tau, delta, W):
    if not delta > 0:
        raise DomainError("delta must be > 0")
    t = np.asarray(tau, float)
    if np.any(t < 0):
        raise DomainError("tau must be >= 0")
    period = delta + W
    k = np.floor(t / period)
    return k, t - k * period


def periodic_hazard(d: FailureDistribution, delta, W, tau):
    """Hazard under periodic as-new service: ``h(tau mod (delta+W))`` on uptime, 0 in outages."""
    _, x = _period_position(tau, delta, W)
    up = x < delta
    h = np.where(up, hazard(d, np.where(up, x, 0.0)), 0.0)
    return float(h) if np.ndim(tau) == 0 else h


def periodic_cumulative_hazard(d: FailureDistribution, delta, W, tau):
    """``floor(tau/(delta+W)) H(delta) + H(min(tau mod (delta+W), delta))``."""
    k, x = _period_position(tau, delta, W)
    H = k * cumulative_hazard(d, delta) + cumulative_hazard(d, np.minimum(x, delta))
    return float(H) if np.ndim(tau) == 0 else H


def characteristic_life(d: FailureDistribution):
    """Time at which the cumulative hazard reaches 1."""
    if isinstance(d, Weibull):
        return d.eta
    if isinstance(d, Gompertz):
        return math.log1p(1.0 / d.J) / d.alpha
    raise DomainError(f"unsupported distribution {d!r}")


# -- EPV -------------------------------------------------------------------------------
def _integrate(fn, a, b, what):
    with np.errstate(all="ignore"):
        val, err = quad(fn, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    if not (math.isfinite(val) and math.isfinite(err)):
        raise NumericalError(f"non-finite {what} integral on [{a}, {b}]")
    return val


def _scalar_hazards(d: FailureDistribution):
    """Plain-float ``(H, h)`` closures for the quadrature integrands."""
    if isinstance(d, Weibull):
        eta, m = d.eta, d.m_bar

        def H(t):
            return (t / eta) ** m

        def h(t):
            return m / eta * (t / eta) ** (m - 1.0) if t > 0 or m > 1 else (1.0 / eta if m == 1 else 0.0)

        return H, h
    if isinstance(d, Gompertz):
        J, a = d.J, d.alpha
        return (lambda t: J * math.expm1(a * t)), (lambda t: J * a * math.exp(a * t))
    raise DomainError(f"unsupported distribution {d!r}")


def _survival(d, t):
    return math.exp(-_scalar_hazards(d)[0](t))


@dataclass(frozen=True)
class EpvTerms:
    """Currency-free building blocks of the EPV closed form.

    ``income_part = int_0^delta e^(-i t) S dt``, ``failure_part =
    int_0^delta e^(-i t) S h dt``, ``service_discount = e^(-i delta) S(delta)``
    and ``denominator = 1 - e^(-i (delta + W)) S(delta)``.
    """

    income_part: float
    failure_part: float
    service_discount: float
    denominator: float

    def value(self, econ: EconomicParams):
        num = (econ.income * self.income_part - econ.failure_cost * self.failure_part
               - econ.service_cost * self.service_discount)
        return num / self.denominator


def epv_terms(d: FailureDistribution, i_eff, outage, delta) -> EpvTerms:
    if not delta > 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    H, h = _scalar_hazards(d)
    a = _integrate(lambda t: math.exp(-i_eff * t - H(t)), 0.0, delta, "income")
    b = _integrate(lambda t: math.exp(-i_eff * t - H(t)) * h(t), 0.0, delta, "failure")
    S = math.exp(-H(delta))
    den = -math.expm1(-i_eff * (delta + outage)) if S == 1.0 else 1.0 - math.exp(-i_eff * (delta + outage)) * S
    if not den > 0:
        raise NumericalError(f"EPV denominator {den} is not positive at delta={delta}")
    return EpvTerms(a, b, math.exp(-i_eff * delta) * S, den)


def epv(d: FailureDistribution, econ: EconomicParams, delta) -> float:
    """Expected present value of periodic as-new service every ``delta`` cycles."""
    if np.ndim(delta):
        return np.array([epv(d, econ, float(x)) for x in np.ravel(delta)]).reshape(np.shape(delta))
    return epv_terms(d, econ.i_eff, econ.outage, delta).value(econ)


def epv_series(d: FailureDistribution, econ: EconomicParams, delta, max_terms=10_000, rtol=1e-13):
    """Renewal-by-renewal evaluation of the EPV on the actual timeline.

    Each uptime window ``[k(delta+W), k(delta+W)+delta]`` is integrated
    separately with the periodic survival and hazard, and every service
    payment is discounted at its start time. Summation stops once the
    remaining terms cannot change the total by more than ``rtol`` relative,
    or after ``max_terms`` renewals.

    Returns ``(value, n_terms)``.
    """
    i, W = econ.i_eff, econ.outage
    period = delta + W
    Hf, hf = _scalar_hazards(d)
    HD = Hf(delta)
    terms = []
    for k in range(max_terms):
        t0 = k * period
        base = k * HD

        def integrand(t, t0=t0, base=base):
            x = t - t0
            S = math.exp(-(base + Hf(x)))
            return math.exp(-i * t) * S * (econ.income - econ.failure_cost * hf(x))

        up = _integrate(integrand, t0, t0 + delta, "renewal")
        ts = t0 + delta
        svc = math.exp(-i * ts - (k + 1) * HD) * econ.service_cost
        terms.append(up - svc)
        # remaining terms decay geometrically with this ratio
        ratio = math.exp(-i * period - HD)
        total = math.fsum(terms)
        tail = abs(terms[-1]) * ratio / (1.0 - ratio) if ratio < 1 else math.inf
        if tail <= rtol * max(abs(total), 1e-300):
            break
    return math.fsum(terms), len(terms)


# -- optimisation ------------------------------------------------------------------------
@dataclass
class ServiceResult:
    """Optimal interval, its EPV, the sampled curve and status flags."""

    delta_star: float
    epv_star: float
    grid: np.ndarray = field(repr=False)
    curve: np.ndarray = field(repr=False)
    boundary: bool = False
    never_profitable: bool = False
    evaluations: int = 0

    def to_dict(self):
        return {
            "delta_star": self.delta_star,
            "epv_star": self.epv_star,
            "boundary": self.boundary,
            "never_profitable": self.never_profitable,
            "evaluations": self.evaluations,
        }


def default_bracket(d: FailureDistribution):
    L = characteristic_life(d)
    return (1e-3 * L, 3.0 * L)


def log_grid(bracket, n=GRID_POINTS):
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise DomainError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    return np.geomspace(lo, hi, n)


def optimize_interval(d: FailureDistribution, econ: EconomicParams, bracket=None, tol=1e-3,
                      n_grid=GRID_POINTS) -> ServiceResult:
    """Maximise EPV over the service interval.

    A log-spaced grid scan locates the best cell, which is then refined by
    golden-section search to a relative tolerance ``tol`` in ``delta``.
    When the best grid point is a bracket end the result is flagged as a
    boundary solution.
    """
    bracket = default_bracket(d) if bracket is None else bracket
    grid = log_grid(bracket, n_grid)
    terms = {}

    def f(x):
        x = float(x)
        if x not in terms:
            terms[x] = epv_terms(d, econ.i_eff, econ.outage, x).value(econ)
        return terms[x]

    curve = np.array([f(x) for x in grid])
    k = int(np.argmax(curve))
    boundary = k in (0, len(grid) - 1)
    if boundary:
        x_star, v_star = float(grid[k]), float(curve[k])
    else:
        res = minimize_scalar(lambda x: -f(x), bracket=(grid[k - 1], grid[k], grid[k + 1]),
                              method="golden", options={"xtol": tol})
        x_star, v_star = float(res.x), float(-res.fun)
        if v_star < curve[k]:
            x_star, v_star = float(grid[k]), float(curve[k])
    return ServiceResult(x_star, v_star, grid, curve, boundary, bool(np.all(curve < 0)), len(terms))


def epv_sweep(d: FailureDistribution, econ: EconomicParams, incomes, bracket=None, n_grid=GRID_POINTS):
    """EPV curves on a shared log grid for several income rates.

    The income enters linearly, so the currency-free terms are computed once
    per grid point. Returns ``(grid, {income: curve})``.
    """
    incomes = list(incomes)
    if not incomes:
        raise DomainError("income list must be non-empty")
    bracket = default_bracket(d) if bracket is None else bracket
    grid = log_grid(bracket, n_grid)
    terms = [epv_terms(d, econ.i_eff, econ.outage, float(x)) for x in grid]
    out = {}
    for inc in incomes:
        e = econ.with_income(float(inc))
        out[float(inc)] = np.array([t.value(e) for t in terms])
    return grid, out


def grid_scan(d, econ, bracket, step):
    """Exhaustive scan on a uniform grid: ``(delta, epv)`` of the best point."""
    xs = np.arange(bracket[0], bracket[1] + 0.5 * step, step)
    vals = np.array([epv(d, econ, float(x)) for x in xs])
    k = int(np.argmax(vals))
    return float(xs[k]), float(vals[k])
