"""Shared 1D discretization: quadrature masses and Dirichlet stiffness form.

The mass form uses trapezoid weights on a uniform grid; the energy form
uses first-order differences with midpoint-evaluated edge weights.  Both
are re-normalized together so the discrete invariant measure has unit
total mass on the grid, which makes the constant vector an exact null
vector of the generator and the exact equilibrium of the heat flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError
from .potentials import Potential


@dataclass(frozen=True)
class UniformGrid:
    n: int
    radius: float

    def __post_init__(self):
        if self.n < 3:
            raise InputError(f"grid needs at least 3 points, got {self.n}")
        if self.radius <= 0:
            raise InputError(f"grid radius must be > 0, got {self.radius}")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def dx(self) -> float:
        return 2.0 * self.radius / (self.n - 1)


@dataclass
class Discretization:
    """Mass and stiffness data of the generator on a uniform grid.

    ``mu`` are node masses (trapezoid weights times the normalized density,
    summing to one); ``m_mid`` are edge weights ``dx * density(midpoint) *
    omega(midpoint)`` entering the Dirichlet form
    ``E(f,g) = sum_k m_k (f_{k+1}-f_k)(g_{k+1}-g_k)/dx^2``.
    """

    grid: UniformGrid
    x: np.ndarray = field(repr=False)
    dx: float
    u_vals: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    m_mid: np.ndarray = field(repr=False)
    offset: float
    mass_captured: float

    def dirichlet(self, f, g=None) -> float:
        """Energy form E(f, g) with the stored edge weights."""
        df = np.diff(f, axis=0) / self.dx
        dg = df if g is None else np.diff(g, axis=0) / self.dx
        return float(np.sum(self.m_mid * df * dg))

    def inner(self, f, g) -> float:
        return float(np.sum(self.mu * f * g))

    def stiffness_apply(self, f: np.ndarray) -> np.ndarray:
        """A f with A the tridiagonal stiffness matrix (difference form).

        Computed as D^T (m (D f)) so that constants map to exactly zero.
        Accepts a vector or an (n, k) block of columns.
        """
        f = np.asarray(f, dtype=float)
        m = self.m_mid if f.ndim == 1 else self.m_mid[:, None]
        flux = m * np.diff(f, axis=0) / self.dx ** 2
        out = np.zeros_like(f)
        out[:-1] -= flux
        out[1:] += flux
        return out

    def generator_apply(self, f: np.ndarray) -> np.ndarray:
        """L f = -M^{-1} A f; rows sum to zero exactly on constants."""
        af = self.stiffness_apply(f)
        mu = self.mu if af.ndim == 1 else self.mu[:, None]
        return -af / mu

    def sym_tridiagonal(self):
        """Diagonal and off-diagonal of M^{-1/2} A M^{-1/2} (symmetric PSD)."""
        dx2 = self.dx ** 2
        mid = self.m_mid / dx2
        diag = np.zeros(self.grid.n)
        diag[:-1] += mid
        diag[1:] += mid
        diag /= self.mu
        off = -mid / np.sqrt(self.mu[:-1] * self.mu[1:])
        return diag, off


def discretize(potential: Potential, n: int, radius: float,
               omega: Optional[Callable] = None) -> Discretization:
    """Assemble mass and stiffness data for the generator of exp(-U) dx.

    ``omega`` optionally weights the energy form (weighted Dirichlet form);
    it does not enter the mass form.
    """
    grid = UniformGrid(n, radius)
    x = grid.x
    dx = grid.dx
    u_raw = potential.u(x)
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2.0
    raw_mass = w * np.exp(-u_raw)
    captured = float(np.sum(raw_mass))
    # local re-normalization: exact unit mass on this grid
    offset = float(np.log(captured))
    mu = raw_mass / captured
    x_mid = 0.5 * (x[:-1] + x[1:])
    m_mid = dx * np.exp(-(potential.u(x_mid) + offset))
    if omega is not None:
        m_mid = m_mid * np.asarray(omega(x_mid), dtype=float)
    return Discretization(grid=grid, x=x, dx=dx, u_vals=u_raw + offset, mu=mu,
                          m_mid=m_mid, offset=offset, mass_captured=captured)
