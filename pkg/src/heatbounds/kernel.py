"""Spectral heat kernel of the discretized generator and its bound checks.

The generator is discretized self-adjointly in L^2(mu) with zero-flux
boundaries, eigendecomposed, and the transition density with respect to mu
is assembled as p_t(x,y) = sum_k exp(-lambda_k t) phi_k(x) phi_k(y).  The
verification routines compare this kernel against power-law on-diagonal
envelopes, Gaussian off-diagonal envelopes, exponential long-time decay,
weighted spectral gaps and the exponential-twist mass estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .discretize import Discretization, discretize
from .errors import InputError, ParameterError, TruncationError, TwistError
from .potentials import Potential


@dataclass
class DiscretizedGenerator:
    disc: Discretization
    potential: Potential

    @property
    def x(self):
        return self.disc.x

    @property
    def mu(self):
        return self.disc.mu

    @property
    def u_vals(self):
        return self.disc.u_vals

    @property
    def boundary_density_ratio(self) -> float:
        """Boundary-to-peak density ratio; > 1e-12 means visible edge effects."""
        dens = np.exp(-self.disc.u_vals)
        return float(max(dens[0], dens[-1]) / np.max(dens))

    def apply(self, f):
        return self.disc.generator_apply(f)

    def inner(self, f, g):
        return self.disc.inner(f, g)


def build_generator(potential: Potential, n: int, radius: float,
                    omega: Optional[Callable] = None,
                    truncation_tol: float = 1e-6) -> DiscretizedGenerator:
    """Discretize the generator on [-radius, radius] with n points.

    Raises :class:`TruncationError` when the box captures less than
    ``1 - truncation_tol`` of the invariant mass.  A large density ratio
    at the box ends only triggers a warning: the mass criterion is the
    enforced gate.
    """
    if n < 10:
        raise InputError(f"n={n} is too small for a meaningful discretization")
    if potential.dim != 1:
        raise InputError("kernel numerics require a 1D potential")
    disc = discretize(potential, n, radius, omega=omega)

    compact = getattr(potential, "compact_radius", None)
    if compact is not None and radius >= compact:
        tail = 0.0
    else:
        tail = potential.tail_mass_beyond(radius)
    total = disc.mass_captured + tail
    if disc.mass_captured / total < 1.0 - truncation_tol:
        raise TruncationError(
            f"box [-{radius}, {radius}] captures {disc.mass_captured / total:.8f} "
            f"of the invariant mass (need >= {1.0 - truncation_tol})")

    return DiscretizedGenerator(disc=disc, potential=potential)


@dataclass
class KernelSpectrum:
    """Eigenpairs of -L, orthonormal in the mu-weighted inner product."""

    gen: DiscretizedGenerator
    eigenvalues: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)  # columns phi_k, mu-orthonormal

    @property
    def x(self):
        return self.gen.x

    @property
    def mu(self):
        return self.gen.mu

    @property
    def spectral_gap(self) -> float:
        return float(self.eigenvalues[1])

    def heat_kernel(self, t: float) -> np.ndarray:
        """Transition density w.r.t. mu on the grid; exactly symmetric."""
        if t <= 0:
            raise InputError(f"time must be > 0, got {t}")
        b = self.phi * np.exp(-0.5 * self.eigenvalues * t)[None, :]
        k = b @ b.T
        return 0.5 * (k + k.T)

    def heat_diag(self, t: float) -> np.ndarray:
        """Diagonal p_t(x, x) without forming the full table."""
        return (self.phi ** 2) @ np.exp(-self.eigenvalues * t)

    def conjugated_heat(self, t: float) -> np.ndarray:
        """sqrt(mu)-conjugated kernel sqrt(mu_i) p_t(x_i,x_j) sqrt(mu_j).

        Entries are O(1) (a substochastic symmetric matrix), which makes
        max-norm residuals meaningful where p_t itself carries huge
        exp(U) factors near the box ends.
        """
        s = np.sqrt(self.mu)
        u = self.phi * s[:, None]
        b = u * np.exp(-0.5 * self.eigenvalues * t)[None, :]
        k = b @ b.T
        return 0.5 * (k + k.T)

    def propagate(self, f: np.ndarray, t: float) -> np.ndarray:
        """P_t f via the spectral representation."""
        coeff = self.phi.T @ (self.mu * f)
        return self.phi @ (np.exp(-self.eigenvalues * t) * coeff)

    def row_stochasticity_residual(self, t: float) -> float:
        k = self.heat_kernel(t)
        return float(np.max(np.abs(k @ self.mu - 1.0)))

    def chapman_kolmogorov_residual(self, s: float, t: float) -> float:
        """max-norm residual of H_{s+t} = H_s H_t in conjugated coordinates."""
        hs = self.conjugated_heat(s)
        ht = self.conjugated_heat(t)
        hst = self.conjugated_heat(s + t)
        return float(np.max(np.abs(hst - hs @ ht)))

    def orthonormality_residual(self) -> float:
        gram = self.phi.T @ (self.phi * self.mu[:, None])
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def eigendecompose(gen: DiscretizedGenerator) -> KernelSpectrum:
    """Full eigendecomposition of the symmetrized tridiagonal operator."""
    diag, off = gen.disc.sym_tridiagonal()
    lam, u = eigh_tridiagonal(diag, off)
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs[None, :]
    phi = u / np.sqrt(gen.mu)[:, None]
    return KernelSpectrum(gen=gen, eigenvalues=lam, phi=phi)


def spectrum_for(potential: Potential, n: int, radius: float,
                 truncation_tol: float = 1e-6) -> KernelSpectrum:
    return eigendecompose(build_generator(potential, n, radius,
                                          truncation_tol=truncation_tol))


# ---------------------------------------------------------------------------
# verification reports

def _weight_values(weight, spectrum: KernelSpectrum) -> np.ndarray:
    """V on the grid, evaluated with the generator's re-normalized U."""
    x = spectrum.x
    return (1.0 + x ** 2) ** (-weight.beta / 2.0) * np.exp(0.5 * spectrum.gen.u_vals)


def _loglog_slope(t, m):
    fit = np.polyfit(np.log(1.0 / np.asarray(t)), np.log(np.asarray(m)), 1)
    return float(fit[0])


@dataclass
class OnDiagReport:
    slope: float
    c_calibrated: float
    t_values: np.ndarray
    m_values: np.ndarray
    excluded_t: list

    def to_dict(self):
        return {"slope": self.slope, "C": self.c_calibrated,
                "t": self.t_values.tolist(), "m": self.m_values.tolist(),
                "excluded_t": self.excluded_t}


def verify_ondiag(spectrum: KernelSpectrum, weight, p: float,
                  t_grid: Sequence[float],
                  stochasticity_tol: float = 1e-6) -> OnDiagReport:
    """Fit the decay exponent of sup_x p_t(x,x)/V(x)^2 against 1/t.

    The two smallest times are dropped from the fit when their
    row-stochasticity residual exceeds ``stochasticity_tol`` (truncation
    contamination); the calibrated constant is sup_t m(t) t^p.
    """
    t = np.sort(np.asarray(t_grid, dtype=float))
    if t.size < 3:
        raise InputError("need at least 3 time points for a slope fit")
    v2 = _weight_values(weight, spectrum) ** 2
    m = np.array([np.max(spectrum.heat_diag(tv) / v2) for tv in t])
    excluded = []
    keep = np.ones_like(t, dtype=bool)
    for j in range(min(2, t.size)):
        if spectrum.row_stochasticity_residual(t[j]) > stochasticity_tol:
            keep[j] = False
            excluded.append(float(t[j]))
    slope = _loglog_slope(t[keep], m[keep])
    c_cal = float(np.max(m * t ** p))
    return OnDiagReport(slope=slope, c_calibrated=c_cal, t_values=t, m_values=m,
                        excluded_t=excluded)


@dataclass
class OffDiagReport:
    sup_ratio: float
    sup_smallest_decade: float
    sup_rest: float
    decade_factor: float
    n_excluded: int
    n_cells: int
    passed: bool
    per_t: list

    def to_dict(self):
        return {"sup_ratio": self.sup_ratio,
                "sup_smallest_decade": self.sup_smallest_decade,
                "sup_rest": self.sup_rest, "decade_factor": self.decade_factor,
                "n_excluded": self.n_excluded, "n_cells": self.n_cells,
                "passed": bool(self.passed), "per_t": self.per_t}


def verify_offdiag(spectrum: KernelSpectrum, weight, p: float, epsilon: float,
                   t_grid: Sequence[float], pair_indices: Sequence[int],
                   gauss_floor: float = 1e-12, decade_cap: float = 3.0,
                   ultracontractive_baseline: bool = False) -> OffDiagReport:
    """Ratio of the kernel to the Gaussian off-diagonal envelope.

    envelope = t^{-p} V(x) V(y) exp(-|x-y|^2 / (4 (1+eps) t)).  Cells whose
    Gaussian factor underflows below ``gauss_floor`` are excluded and
    counted.  Pass requires a finite sup and no blow-up as t decreases:
    the sup over the smallest decade of t must not exceed ``decade_cap``
    times the sup over the remaining times.
    """
    if epsilon <= 0 and not ultracontractive_baseline:
        raise ParameterError("epsilon must be > 0 (epsilon = 0 is reserved for the "
                             "uniform heat-semigroup baseline)")
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    t = np.sort(np.asarray(t_grid, dtype=float))
    idx = np.asarray(pair_indices, dtype=int)
    x = spectrum.x[idx]
    v = _weight_values(weight, spectrum)[idx]
    dist2 = (x[:, None] - x[None, :]) ** 2
    vv = v[:, None] * v[None, :]

    sup_by_t = []
    n_excluded = 0
    n_cells = 0
    for tv in t:
        k = spectrum.heat_kernel(tv)[np.ix_(idx, idx)]
        gauss = np.exp(-dist2 / (4.0 * (1.0 + epsilon) * tv))
        mask = gauss >= gauss_floor
        n_excluded += int(np.sum(~mask))
        n_cells += mask.size
        env = np.where(mask, tv ** (-p) * vv * gauss, 1.0)
        ratio = np.where(mask, k / env, -np.inf)
        sup_by_t.append(float(np.max(ratio)))
    sup_by_t = np.array(sup_by_t)

    small = t < 10.0 * t[0]
    sup_small = float(np.max(sup_by_t[small]))
    sup_rest = float(np.max(sup_by_t[~small])) if np.any(~small) else sup_small
    factor = sup_small / sup_rest if sup_rest > 0 else np.inf
    passed = bool(np.isfinite(sup_by_t).all() and factor <= decade_cap)
    per_t = [{"t": float(tv), "sup_ratio": float(sv)} for tv, sv in zip(t, sup_by_t)]
    return OffDiagReport(sup_ratio=float(np.max(sup_by_t)), sup_smallest_decade=sup_small,
                         sup_rest=sup_rest, decade_factor=float(factor),
                         n_excluded=n_excluded, n_cells=n_cells, passed=passed,
                         per_t=per_t)


@dataclass
class LongTimeReport:
    decay_rate: float
    spectral_gap: float
    t_values: np.ndarray
    deviations: np.ndarray
    n_fit: int

    def to_dict(self):
        return {"decay_rate": self.decay_rate, "spectral_gap": self.spectral_gap,
                "t": self.t_values.tolist(), "deviation": self.deviations.tolist(),
                "n_fit": self.n_fit}


def verify_longtime(spectrum: KernelSpectrum, weight, t_grid: Sequence[float],
                    floor: float = 1e-12) -> LongTimeReport:
    """Exponential decay rate of sup_{x,y} |p_t(x,y) - 1| / (V(x) V(y)).

    Values below ``floor`` are dropped from the fit window (they sit at
    the rounding level of the spectral representation).
    """
    if spectrum.spectral_gap <= 0:
        raise ParameterError("long-time fit needs a positive spectral gap")
    t = np.sort(np.asarray(t_grid, dtype=float))
    v = _weight_values(weight, spectrum)
    vv = v[:, None] * v[None, :]
    dev = np.array([float(np.max(np.abs(spectrum.heat_kernel(tv) - 1.0) / vv)) for tv in t])
    keep = dev > floor
    if np.sum(keep) < 2:
        raise ParameterError("all deviations below the floor; shrink the time window")
    fit = np.polyfit(t[keep], np.log(dev[keep]), 1)
    return LongTimeReport(decay_rate=float(-fit[0]), spectral_gap=spectrum.spectral_gap,
                          t_values=t, deviations=dev, n_fit=int(np.sum(keep)))


def poincare_gap(potential: Potential, omega: Optional[Callable], n: int, radius: float,
                 truncation_tol: float = 1e-6) -> float:
    """Smallest nonzero eigenvalue of the (omega-weighted) Dirichlet form vs mu."""
    gen = build_generator(potential, n, radius, omega=omega,
                          truncation_tol=truncation_tol)
    diag, off = gen.disc.sym_tridiagonal()
    lam = eigh_tridiagonal(diag, off, eigvals_only=True, select="i",
                           select_range=(0, 1))
    return float(lam[1])


# ---------------------------------------------------------------------------
# exponential twist

def flattened_coordinate(x: np.ndarray, r_flat: float, r_stop: float):
    """Odd C^2 map equal to x on [-r_flat, r_flat], constant beyond r_stop.

    The derivative ramps from 1 to 0 through a quintic smoothstep, so
    |psi'| <= 1 everywhere and |psi''| <= 1.875 / (r_stop - r_flat).
    Returns (psi, psi_prime, rho_bound).
    """
    if not 0 < r_flat < r_stop:
        raise ParameterError("need 0 < r_flat < r_stop")
    x = np.asarray(x, dtype=float)
    span = r_stop - r_flat
    v = np.clip((np.abs(x) - r_flat) / span, 0.0, 1.0)
    s5 = 6 * v ** 5 - 15 * v ** 4 + 10 * v ** 3
    i5 = v ** 6 - 3 * v ** 5 + 2.5 * v ** 4
    psi = np.sign(x) * (np.abs(x) - span * i5)
    psi_prime = 1.0 - s5
    rho = 1.875 / span
    return psi, psi_prime, rho


@dataclass
class TwistReport:
    a_values: np.ndarray
    k_hat: np.ndarray
    quad_coeff: float
    y_slope_untwisted: float
    envelope_ratio: float
    rho: float

    def to_dict(self):
        return {"a": self.a_values.tolist(), "K_hat": self.k_hat.tolist(),
                "quad_coeff": self.quad_coeff,
                "y_slope_untwisted": self.y_slope_untwisted,
                "envelope_ratio": self.envelope_ratio, "rho": self.rho}


def davies_twist_check(spectrum: KernelSpectrum, weight, a_values: Sequence[float],
                       t_grid: Sequence[float], p: float,
                       r_flat: Optional[float] = None, x0: float = 0.0) -> TwistReport:
    """Evolve F(t) = e^{-a psi} P_t(e^{a psi} f) and fit the growth constant.

    Initial data is a discrete point mass at x0 with unit weighted mass
    (integral of f V d(mu) equal to one).  For each a the report fits
    K_hat(a) = max_t log(int F(t) V dmu)/t, then the quadratic coefficient
    of K_hat against a; the L^2 mass y(t) is checked against
    C t^{-p} e^{2 K_hat t} with C calibrated at the largest time.
    """
    x = spectrum.x
    radius = float(np.max(np.abs(x)))
    if r_flat is None:
        r_flat = 0.5 * radius
    psi, _, rho = flattened_coordinate(x, r_flat, radius)
    v = _weight_values(weight, spectrum)
    t = np.sort(np.asarray(t_grid, dtype=float))
    a_values = np.asarray(a_values, dtype=float)

    psi_max = float(np.max(np.abs(psi)))
    a_max_adm = 700.0 / psi_max
    too_big = np.abs(a_values) * psi_max > 700.0
    if np.any(too_big):
        raise TwistError(f"twist parameter overflows exp; max admissible |a| = {a_max_adm:.3g}")

    i0 = int(np.argmin(np.abs(x - x0)))
    mu = spectrum.mu
    f = np.zeros_like(x)
    f[i0] = 1.0 / (mu[i0] * v[i0])

    k_hat = np.zeros_like(a_values)
    envelope_ratio = 0.0
    y_slope0 = np.nan
    for j, a in enumerate(a_values):
        phi_twist = np.exp(a * psi)
        g1 = phi_twist * f
        target = v / phi_twist
        coeff = spectrum.phi.T @ (mu * g1)
        proj = spectrum.phi.T @ (mu * target)
        m_v = np.array([float(np.sum(coeff * np.exp(-spectrum.eigenvalues * tv) * proj))
                        for tv in t])
        m_v = np.maximum(m_v, 1e-300)
        k_hat[j] = float(np.max(np.log(m_v) / t))

        f_evol = [spectrum.propagate(g1, tv) / phi_twist for tv in t]
        y = np.array([float(np.sum(mu * fe ** 2)) for fe in f_evol])
        if a == 0.0:
            y_slope0 = _loglog_slope(t, y)
        c_cal = y[-1] * t[-1] ** p * np.exp(-2.0 * k_hat[j] * t[-1])
        env = c_cal * t ** (-p) * np.exp(2.0 * k_hat[j] * t)
        envelope_ratio = max(envelope_ratio, float(np.max(y / env)))

    quad = float(np.polyfit(a_values, k_hat, 2)[0]) if a_values.size >= 3 else np.nan
    return TwistReport(a_values=a_values, k_hat=k_hat, quad_coeff=quad,
                       y_slope_untwisted=float(y_slope0), envelope_ratio=envelope_ratio,
                       rho=rho)
