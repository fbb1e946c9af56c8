"""Grain-orientation scatter: FCC slip systems, Haar rotations and Schmid-adjusted lives."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import DomainError
from .fields import ScalarSurfaceField
from .material import (
    DEFAULT_TOL,
    Material,
    as_stress_matrix,
    deviator,
    life_from_strain,
    ro_inverse,
    ro_strain,
    von_mises,
)

CHUNK = 65536

# Monte-Carlo mean of tau/s under uniaxial load, 1e6 samples, seed 20240601;
# regenerate with ``estimate_vartheta(10**6, seed=20240601)``.
DEFAULT_VARTHETA = 0.4523575612807805
DEFAULT_VARTHETA_SE = 4.12496388100573e-05


@dataclass(frozen=True)
class SlipSystemTable:
    """Slip-plane normals (p, 3) and in-plane slip directions (p, q, 3)."""

    normals: np.ndarray
    directions: np.ndarray

    @property
    def n_systems(self):
        return self.directions.shape[0] * self.directions.shape[1]

    def check(self):
        n = np.linalg.norm(self.normals, axis=1)
        s = np.linalg.norm(self.directions, axis=2)
        dots = np.einsum("pi,pqi->pq", self.normals, self.directions)
        return bool(np.all(np.abs(n - 1) <= 1e-15) and np.all(np.abs(s - 1) <= 1e-15) and np.all(dots == 0))


def fcc_slip_systems() -> SlipSystemTable:
    """The twelve {111}<110> systems of the face-centred cubic lattice."""
    normals = np.array([[1, 1, 1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]], dtype=float)
    dirs = []
    for n in normals:
        cand = [np.array(v, float) for v in
                ([1, -1, 0], [1, 0, -1], [0, 1, -1], [1, 1, 0], [1, 0, 1], [0, 1, 1])]
        dirs.append([v for v in cand if n @ v == 0])
    normals /= math.sqrt(3.0)
    directions = np.array(dirs) / math.sqrt(2.0)
    return SlipSystemTable(normals, directions)


FCC = fcc_slip_systems()


@dataclass(frozen=True)
class MultiscaleParams:
    """Average grain surface ``mu_g`` and expected uniaxial Schmid factor ``vartheta``."""

    mu_g: float = 1.0
    vartheta: float = DEFAULT_VARTHETA

    def __post_init__(self):
        if not self.mu_g > 0:
            raise DomainError(f"mu_g must be > 0, got {self.mu_g}")
        if not 0 < self.vartheta <= 0.5:
            raise DomainError(f"vartheta must be in (0, 0.5], got {self.vartheta}")


# -- rotations -------------------------------------------------------------------
def quaternion_to_matrix(q):
    """Rotation matrices (..., 3, 3) from unit quaternions (..., 4) ``(w, x, y, z)``."""
    q = np.asarray(q, float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], -2)


def sample_rotations(rng: np.random.Generator, n):
    """``n`` Haar-uniform rotations from normalised 4D Gaussian quaternions."""
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return quaternion_to_matrix(q)


def sample_rotation(rng: np.random.Generator):
    """One Haar-uniform rotation matrix."""
    return sample_rotations(rng, 1)[0]


def _chunks(n):
    return [(i, min(CHUNK, n - i)) for i in range(0, n, CHUNK)]


def _map_chunks(fn, n, seed, threads):
    # one SeedSequence child per fixed-size chunk: the stream depends on the
    # seed and n only, never on the number of workers
    parts = _chunks(n)
    seqs = np.random.SeedSequence(seed).spawn(len(parts))

    def job(k):
        return fn(np.random.default_rng(seqs[k]), parts[k][1])

    if threads and threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(job, range(len(parts))))
    else:
        out = [job(k) for k in range(len(parts))]
    return np.concatenate(out) if out else np.zeros(0)


def rotation_stream(n, seed, threads=1):
    """``n`` rotations (n, 3, 3) reproducible from ``seed`` for any thread count."""
    return _map_chunks(sample_rotations, n, seed, threads).reshape(n, 3, 3)


# -- resolved shear ----------------------------------------------------------------
def max_resolved_shear(sigma, U, table: SlipSystemTable = FCC):
    """``max_ij |U n_i . sigma . U s_ij|`` for one rotation or a stack (m, 3, 3).

    The hydrostatic part is removed before projecting, so a hydrostatic
    tensor gives exactly zero.
    """
    dev = deviator(as_stress_matrix(sigma))
    R = np.asarray(U, float)
    single = R.ndim == 2
    tau = kernels.max_resolved_shear(dev, R[None] if single else R, table.normals, table.directions)
    return float(tau[0]) if single else tau


def resolved_shear_sample(sigma, n, seed, threads=1, table: SlipSystemTable = FCC):
    """Maximum resolved shear for ``n`` Haar rotations, in stream order."""
    dev = deviator(as_stress_matrix(sigma))

    def fn(rng, k):
        return kernels.max_resolved_shear(dev, sample_rotations(rng, k), table.normals, table.directions)

    return _map_chunks(fn, n, seed, threads)


def estimate_vartheta(n=10**6, seed=20240601, threads=1):
    """Monte-Carlo mean Schmid factor under unit uniaxial load and its standard error."""
    tau = resolved_shear_sample(np.diag([1.0, 0.0, 0.0]), n, seed, threads)
    return float(tau.mean()), float(tau.std(ddof=1) / math.sqrt(n))


def vartheta_consistency(vartheta, n=10**5, seed=1, threads=1):
    """``(mean, se, z)`` of a fresh uniaxial sample against a configured ``vartheta``.

    ``|z| >= 3`` flags a mismatch.
    """
    mean, se = estimate_vartheta(n, seed, threads)
    return mean, se, (mean - vartheta) / se


# -- principal stresses and kappa ------------------------------------------------------
def principal_stresses(sigma):
    """Eigenvalues of symmetric (..., 3, 3) tensors, descending.

    Diagonal tensors return their entries exactly.
    """
    m = as_stress_matrix(sigma)
    out = np.linalg.eigvalsh(m)[..., ::-1]
    off = (m[..., 0, 1] == 0) & (m[..., 0, 2] == 0) & (m[..., 1, 2] == 0)
    diag = np.sort(np.diagonal(m, axis1=-2, axis2=-1), axis=-1)[..., ::-1]
    return np.where(off[..., None], diag, out)


def sort_by_magnitude(eig, rtol=1e-12):
    """Order principal values by descending magnitude.

    Values whose magnitudes agree within ``rtol`` (relative to the largest)
    count as tied and are ordered by descending signed value.
    """
    e = np.asarray(eig, float)
    scale = np.max(np.abs(e), axis=-1, keepdims=True)
    mag = np.where(scale > 0, np.abs(e) / np.where(scale > 0, scale, 1.0), 0.0)
    mag = np.round(mag / rtol) * rtol
    # lexsort keys: last is primary
    order = np.lexsort((-e, -mag), axis=-1)
    return np.take_along_axis(e, order, axis=-1)


def kappa(sigma):
    """Multiaxiality ``|s_III - s_II| / |s_I|`` on magnitude-sorted principal stresses.

    Zero only for uniaxial states; can exceed 1 when the minor principal
    stresses have opposite signs.

    Raises
    ------
    DomainError
        For a zero tensor.
    """
    s = sort_by_magnitude(principal_stresses(sigma))
    lead = np.abs(s[..., 0])
    if np.any(lead == 0):
        raise DomainError("kappa is undefined for a zero stress tensor")
    k = np.abs(s[..., 2] - s[..., 1]) / lead
    return float(k) if np.ndim(k) == 0 else k


# -- Schmid-adjusted life ------------------------------------------------------------
def schmid_factor(sigma, U, table: SlipSystemTable = FCC):
    """``tau(U)`` normalised by the von Mises stress of ``sigma``."""
    vm = float(von_mises(sigma))
    if vm == 0:
        return 0.0 if np.ndim(U) == 2 else np.zeros(len(U))
    return max_resolved_shear(sigma, U, table) / vm


def adjusted_strain(m, eps_a, material: Material, vartheta, tol=DEFAULT_TOL):
    """``RO(m / vartheta * RO^-1(eps_a))`` for Schmid factors ``m``."""
    s_a = ro_inverse(eps_a, material.ro, tol)
    return ro_strain(np.asarray(m, float) / vartheta * s_a, material.ro)


def schmid_life(sigma, U, eps_a, material: Material, params: MultiscaleParams = MultiscaleParams(),
                tol=DEFAULT_TOL):
    """Cycles to crack initiation of one grain with orientation ``U``.

    Returns a :class:`~lcfrisk.material.LifeResult`; a zero Schmid factor
    (e.g. hydrostatic stress) gives the runout cap.
    """
    if not eps_a > 0:
        raise DomainError("eps_a must be > 0")
    m = schmid_factor(sigma, U)
    eps = adjusted_strain(m, eps_a, material, params.vartheta, tol)
    return life_from_strain(eps, material, tol)


@dataclass
class LifeDistribution:
    """Sorted Monte-Carlo sample of grain lives with summary statistics."""

    lives: np.ndarray
    schmid: np.ndarray = field(repr=False)
    runout: np.ndarray = field(repr=False)
    kappa: float | None
    seed: int
    eps_a: float

    @property
    def n(self):
        return len(self.lives)

    def summary(self, quantiles=(0.01, 0.1, 0.5, 0.9, 0.99)):
        lv = self.lives
        sd = float(lv.std(ddof=1)) if len(lv) > 1 else 0.0
        return {
            "n": int(len(lv)),
            "mean": float(lv.mean()),
            "sd": sd,
            "se_mean": sd / math.sqrt(len(lv)),
            "log10_mean": float(np.log10(lv).mean()),
            "log10_sd": float(np.log10(lv).std(ddof=1)) if len(lv) > 1 else 0.0,
            "quantiles": {str(q): float(np.quantile(lv, q)) for q in quantiles},
            "runout_fraction": float(self.runout.mean()),
            "schmid_mean": float(self.schmid.mean()),
            "kappa": self.kappa,
            "seed": self.seed,
            "eps_a": self.eps_a,
        }

    def histogram(self, bins=50):
        """Histogram of ``log10`` lives: ``(edges, counts)``."""
        counts, edges = np.histogram(np.log10(self.lives), bins=bins)
        return edges, counts

    def cumulative_hazard(self, t):
        """Nelson-Aalen estimate of the single-grain cumulative hazard at ``t``."""
        t = np.asarray(t, float)
        n = len(self.lives)
        at_risk = n - np.arange(n)
        steps = np.cumsum(1.0 / at_risk)
        k = np.searchsorted(self.lives, t, side="right")
        H = np.where(k > 0, steps[np.maximum(k - 1, 0)], 0.0)
        return float(H) if H.ndim == 0 else H


def life_distribution(sigma, n_samples, seed, material: Material, eps_a=None,
                      params: MultiscaleParams = MultiscaleParams(), threads=1,
                      tol=DEFAULT_TOL) -> LifeDistribution:
    """Monte-Carlo grain lives under a fixed stress amplitude ``sigma``.

    ``eps_a`` defaults to the Ramberg-Osgood strain of the von Mises
    amplitude of ``sigma``. The sample is reproducible for fixed ``seed``
    and independent of ``threads``.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    sig = as_stress_matrix(sigma)
    vm = float(von_mises(sig))
    if eps_a is None:
        eps_a = ro_strain(vm, material.ro)
    if not eps_a > 0:
        raise DomainError("eps_a must be > 0 (zero stress gives no life distribution)")
    tau = resolved_shear_sample(sig, n_samples, seed, threads)
    m = tau / vm if vm > 0 else np.zeros_like(tau)
    eps = adjusted_strain(m, eps_a, material, params.vartheta, tol)
    life = life_from_strain(eps, material, tol)
    order = np.argsort(life.cycles, kind="stable")
    try:
        k = kappa(sig)
    except DomainError:
        k = None
    return LifeDistribution(np.asarray(life.cycles)[order], m[order],
                            np.asarray(life.runout)[order], k, seed, float(eps_a))


def two_sample_ks(a: LifeDistribution, b: LifeDistribution):
    """Kolmogorov-Smirnov comparison of two life samples: ``(statistic, p_value)``."""
    from scipy.stats import ks_2samp

    r = ks_2samp(a.lives, b.lives)
    return float(r.statistic), float(r.pvalue)


# -- multiscale survival --------------------------------------------------------------
def multiscale_survival(cumulative_hazard, surface: ScalarSurfaceField, params: MultiscaleParams, t):
    """``exp(-(1/mu_g) int H(t | sigma(x)) dA)`` on a surface quadrature.

    Parameters
    ----------
    cumulative_hazard : callable or array_like
        ``H(t) -> (nf, nq)`` grain cumulative hazard at the surface points,
        or fixed values of that shape for a single ``t``.
    surface : ScalarSurfaceField
        Supplies the quadrature weights (values are ignored).
    t : float or array_like
    """
    w = surface.weights

    def one(tt):
        H = cumulative_hazard(tt) if callable(cumulative_hazard) else cumulative_hazard
        H = np.broadcast_to(np.asarray(H, float), w.shape)
        if np.any(H < 0):
            raise DomainError("cumulative hazard must be >= 0")
        per_face = [math.fsum(r) for r in H * w]
        return math.exp(-math.fsum(per_face) / params.mu_g)

    if np.ndim(t) == 0:
        return one(float(t))
    return np.array([one(float(tt)) for tt in np.ravel(t)]).reshape(np.shape(t))


def grain_product_survival(H, area, params: MultiscaleParams):
    """Exact grain product ``(1 - (1 - exp(-H)))**N_g`` with ``N_g = area / mu_g``."""
    return (1.0 - (1.0 - math.exp(-H))) ** (area / params.mu_g)
