"""Stochastic oracle: Euler-Maruyama paths of dX = -U'(X) dt + sqrt(2) dB.

Used to cross-validate the spectral kernel through kernel density
estimates of the time-t law.  Path generation is chunked with per-chunk
seeds spawned deterministically from the master seed, so results are
bit-reproducible and chunk-order independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import gaussian_kde

from .errors import BandwidthError, InputError, SimError
from .kernel import KernelSpectrum
from .potentials import Potential

_CHUNK = 20000
_ESCAPE_FRACTION = 1e-3


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    dt: float
    t_final: float
    x0: float
    seed: int

    def __post_init__(self):
        if self.n_paths < 1:
            raise InputError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.dt <= 0:
            raise InputError(f"dt must be > 0, got {self.dt}")
        if self.t_final < 0:
            raise InputError(f"t_final must be >= 0, got {self.t_final}")


def stability_warnings(cfg: SimConfig, potential: Potential, grid) -> list:
    """Heuristic checks: explicit-step stability and sample-size adequacy."""
    notes = []
    curv = float(np.max(np.abs(potential.lap(np.asarray(grid, dtype=float)))))
    dt_max = 0.01 * min(1.0, 1.0 / curv) if curv > 0 else 0.01
    if cfg.dt > dt_max:
        notes.append(f"dt={cfg.dt:g} exceeds the stability heuristic {dt_max:.3g} "
                     f"(0.01 / sup |U''| on the grid)")
    if cfg.n_paths < 10_000:
        notes.append(f"n_paths={cfg.n_paths} below 10^4; density comparisons will be noisy")
    return notes


@dataclass
class SimResult:
    samples: np.ndarray = field(repr=False)
    n_reflected: int
    reflect_radius: float
    notes: list = field(default_factory=list)


def _evolve_chunk(potential, x, n_full, dt, rem, bound, rng):
    touched = np.zeros(x.shape, dtype=bool)
    sq = np.sqrt(2.0 * dt)
    for _ in range(n_full):
        x = x - potential.grad(x) * dt + sq * rng.standard_normal(x.shape)
        out = np.abs(x) > bound
        touched |= out
        x = np.where(x > bound, 2.0 * bound - x, x)
        x = np.where(x < -bound, -2.0 * bound - x, x)
    if rem > 0:
        x = x - potential.grad(x) * rem + np.sqrt(2.0 * rem) * rng.standard_normal(x.shape)
        out = np.abs(x) > bound
        touched |= out
        x = np.where(x > bound, 2.0 * bound - x, x)
        x = np.where(x < -bound, -2.0 * bound - x, x)
    return x, touched


def simulate(potential: Potential, cfg: SimConfig,
             reflect_radius: Optional[float] = None,
             x0_samples: Optional[np.ndarray] = None) -> SimResult:
    """Terminal samples X_{t_final}; reflecting walls far outside the bulk.

    Paths are reflected at +-reflect_radius (default ten times the
    potential's truncation radius, mirroring the zero-flux box).  Paths
    that ever touch the wall are counted; more than 0.1% of them raises
    :class:`SimError`.
    """
    bound = 10.0 * potential.norm_radius if reflect_radius is None else float(reflect_radius)
    if x0_samples is not None:
        x0_samples = np.asarray(x0_samples, dtype=float)
        if x0_samples.shape != (cfg.n_paths,):
            raise InputError("x0_samples must have shape (n_paths,)")

    n_full = int(cfg.t_final / cfg.dt + 1e-12)
    rem = cfg.t_final - n_full * cfg.dt
    if rem < 1e-12 * max(cfg.t_final, cfg.dt):
        rem = 0.0

    starts = list(range(0, cfg.n_paths, _CHUNK))
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(starts))
    samples = np.empty(cfg.n_paths)
    n_reflected = 0
    for seq, lo in zip(seeds, starts):
        hi = min(lo + _CHUNK, cfg.n_paths)
        rng = np.random.default_rng(seq)
        x = (np.full(hi - lo, float(cfg.x0)) if x0_samples is None
             else x0_samples[lo:hi].copy())
        x, touched = _evolve_chunk(potential, x, n_full, cfg.dt, rem, bound, rng)
        samples[lo:hi] = x
        n_reflected += int(np.sum(touched))

    if n_reflected > _ESCAPE_FRACTION * cfg.n_paths:
        raise SimError(f"{n_reflected} of {cfg.n_paths} paths reached the reflecting "
                       f"wall at +-{bound:g}")
    return SimResult(samples=samples, n_reflected=n_reflected, reflect_radius=bound)


@dataclass
class DensityComparison:
    l1_discrepancy: float
    bandwidth: float
    x0_snapped: float
    t: float
    n_samples: int

    def to_dict(self):
        return {"l1_discrepancy": self.l1_discrepancy, "bandwidth": self.bandwidth,
                "x0_snapped": self.x0_snapped, "t": self.t, "n_samples": self.n_samples}


def compare_density(samples: np.ndarray, spectrum: KernelSpectrum, t: float,
                    x0: float) -> DensityComparison:
    """L1 distance between the sampled law and the spectral row at time t.

    The kernel density estimate (Silverman bandwidth) is a Lebesgue
    density; the spectral transition density w.r.t. mu is converted by
    multiplying with the invariant density before comparing.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2 or np.std(samples) < 1e-12:
        raise BandwidthError("sample spread too small for a kernel density estimate")
    try:
        kde = gaussian_kde(samples, bw_method="silverman")
    except np.linalg.LinAlgError as exc:
        raise BandwidthError(f"degenerate bandwidth: {exc}") from None

    x = spectrum.x
    dx = spectrum.gen.disc.dx
    w = np.full(x.size, dx)
    w[0] = w[-1] = dx / 2.0
    i0 = int(np.argmin(np.abs(x - x0)))
    row = spectrum.heat_kernel(t)[i0]
    spectral_lebesgue = row * np.exp(-spectrum.gen.u_vals)
    kde_vals = kde(x)
    l1 = float(np.sum(w * np.abs(kde_vals - spectral_lebesgue)))
    bandwidth = float(kde.factor * np.std(samples, ddof=1))
    return DensityComparison(l1_discrepancy=l1, bandwidth=bandwidth,
                             x0_snapped=float(x[i0]), t=t, n_samples=samples.size)
