"""Component failure-time distributions from surface life fields.

Crack initiation is modelled as a Poisson point process on the component
surface. With the local Weibull intensity the first failure time is
Weibull(eta, m_bar); with the local Gompertz intensity it is
Gompertz(J, alpha). Both are proportional-hazard models.

Integrals over the surface are accumulated with :func:`math.fsum` in
ascending face-id order, so results do not depend on how the field was
assembled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NumericalError
from .fields import ScalarSurfaceField

POF_FLOOR = 1e-300


@dataclass(frozen=True)
class WeibullModelParams:
    m_bar: float

    def __post_init__(self):
        if not self.m_bar >= 1:
            raise DomainError(f"m_bar must be >= 1, got {self.m_bar}")


@dataclass(frozen=True)
class GompertzModelParams:
    C: float
    alpha: float

    def __post_init__(self):
        if not self.C > 0:
            raise DomainError(f"C must be > 0, got {self.C}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class Weibull:
    """Weibull first-failure distribution, ``S(t) = exp(-(t/eta)**m_bar)``."""

    eta: float
    m_bar: float

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise DomainError(f"eta must be finite and > 0, got {self.eta}")
        if not (self.m_bar >= 1 and math.isfinite(self.m_bar)):
            raise DomainError(f"m_bar must be >= 1, got {self.m_bar}")

    name = "weibull"

    def cumulative_hazard(self, t):
        return (np.asarray(t, float) / self.eta) ** self.m_bar

    def hazard(self, t):
        t = np.asarray(t, float)
        if self.m_bar == 1:
            return np.full(t.shape, 1.0 / self.eta)
        return self.m_bar / self.eta * (t / self.eta) ** (self.m_bar - 1)

    def params(self):
        return {"eta": self.eta, "m_bar": self.m_bar}


@dataclass(frozen=True)
class Gompertz:
    """Gompertz first-failure distribution, ``S(t) = exp(-J (e^{alpha t} - 1))``."""

    J: float
    alpha: float

    def __post_init__(self):
        if not (self.J > 0 and math.isfinite(self.J)):
            raise DomainError(f"J must be finite and > 0, got {self.J}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be finite and > 0, got {self.alpha}")

    name = "gompertz"

    def cumulative_hazard(self, t):
        return self.J * np.expm1(self.alpha * np.asarray(t, float))

    def hazard(self, t):
        return self.J * self.alpha * np.exp(self.alpha * np.asarray(t, float))

    def params(self):
        return {"J": self.J, "alpha": self.alpha}


FailureDistribution = Weibull | Gompertz


def _check_t(t):
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0) or np.any(np.isnan(ta)):
        raise DomainError("time must be >= 0")
    return ta


def _ret(x, like):
    return float(x) if np.ndim(like) == 0 else np.asarray(x)


def survival(d: FailureDistribution, t):
    """Survival probability ``S(t)``."""
    ta = _check_t(t)
    return _ret(np.exp(-d.cumulative_hazard(ta)), t)


def cumulative_hazard(d: FailureDistribution, t):
    ta = _check_t(t)
    return _ret(d.cumulative_hazard(ta), t)


def pof(d: FailureDistribution, t):
    """Probability of failure ``F(t) = 1 - exp(-H(t))``.

    Values below ``1e-300`` are returned as exactly 0; see
    :func:`evaluate` for the accompanying flag.
    """
    ta = _check_t(t)
    F = -np.expm1(-d.cumulative_hazard(ta))
    F = np.where(F < POF_FLOOR, 0.0, F)
    return _ret(F, t)


def hazard(d: FailureDistribution, t):
    """Hazard rate ``h(t) = H'(t)`` (per cycle)."""
    ta = _check_t(t)
    return _ret(d.hazard(ta), t)


def _positive_values(field: ScalarSurfaceField):
    v = field.values
    bad = ~(v > 0)
    if bad.any():
        f, q = np.argwhere(bad)[0]
        raise DomainError(
            f"nonpositive life {v[f, q]!r} on face {int(field.face_ids[f])} (point {q})"
        )
    return v


def proportional_hazard_J(field: ScalarSurfaceField, m_bar):
    """Weibull proportional-hazard constant ``J = int N_det**(-m_bar) dA``."""
    WeibullModelParams(m_bar)
    v = _positive_values(field)
    terms = field.weights * v ** (-float(m_bar))
    return math.fsum(terms.ravel())


def weibull_eta(field: ScalarSurfaceField, m_bar):
    """Component Weibull scale ``eta = (int N_det**(-m_bar) dA)**(-1/m_bar)``."""
    J = proportional_hazard_J(field, m_bar)
    if not J > 0:
        raise NumericalError("surface integral of N_det^-m vanished (runout everywhere?)")
    return J ** (-1.0 / m_bar)


def gompertz_J(field: ScalarSurfaceField, p: GompertzModelParams):
    """Gompertz constant ``J = (C/alpha) int exp(-alpha N_det) dA``.

    Evaluated in log space; returns 0.0 when every term underflows.
    """
    v = np.asarray(field.values, float).ravel()
    w = np.asarray(field.weights, float).ravel()
    if np.any(np.isnan(v)):
        raise DomainError("life field contains NaN")
    log_int = logsumexp(-p.alpha * v, b=w)
    logJ = math.log(p.C) - math.log(p.alpha) + float(log_int)
    J = math.exp(logJ) if logJ < 709.0 else math.inf
    if not math.isfinite(J):
        raise NumericalError(f"Gompertz J overflowed (log J = {logJ:.3f})")
    return J


def gompertz_J_sum(field: ScalarSurfaceField, p: GompertzModelParams):
    """Gompertz constant by direct compensated summation (no log shift).

    Used where exact additivity over face subsets matters; loses range for
    very large ``alpha * N_det``.
    """
    terms = field.weights * np.exp(-p.alpha * np.asarray(field.values, float))
    return p.C / p.alpha * math.fsum(terms.ravel())


def ndet_component(field: ScalarSurfaceField):
    """Deterministic component life: minimum over all surface points."""
    if field.values.size == 0:
        raise DomainError("empty life field")
    return float(np.min(field.values))


def weibull_from_field(field, m_bar):
    return Weibull(weibull_eta(field, m_bar), float(m_bar))


def gompertz_from_field(field, p: GompertzModelParams):
    return Gompertz(gompertz_J(field, p), p.alpha)


def evaluate(d: FailureDistribution, times):
    """JSON-ready record with PoF and hazard at the requested times."""
    t = _check_t(np.atleast_1d(np.asarray(times, float)))
    F_raw = -np.expm1(-d.cumulative_hazard(t))
    under = F_raw < POF_FLOOR
    F = np.where(under, 0.0, F_raw)
    rec = {"model": d.name}
    rec.update(d.params())
    rec["t"] = [float(x) for x in t]
    rec["pof"] = [float(x) for x in F]
    rec["pof_underflow"] = [bool(x) for x in under]
    rec["hazard"] = [float(x) for x in d.hazard(t)]
    return rec
