"""Weighted super-Poincare profiles and their empirical verification.

Builds the profile functions g, h, psi from a certified Lyapunov
condition, evaluates the closed-form decay exponents, checks the local
Nash inequality on balls, and estimates the best constant b*(s) of the
weighted inequality

    int f^2 dmu <= s int |f'|^2 omega dmu + b(s) (int |f| V dmu)^2

by projected gradient ascent over the nonnegative cone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .discretize import Discretization, discretize
from .errors import CertificateError, InputError, ParameterError, RateError
from .lyapunov import LyapunovCertificate, LyapunovSpec, gradient_weight
from .potentials import Potential


# ---------------------------------------------------------------------------
# weights

@dataclass(frozen=True)
class Weight:
    """V(x) = (1 + |x|^2)^(-beta/2) exp(U(x)/2); V^2 dmu = (1+|x|^2)^(-beta) dx."""

    beta: float
    potential: Potential

    def v(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 + x ** 2) ** (-self.beta / 2.0) * np.exp(0.5 * self.potential.u(x))

    def square_integrable(self) -> bool:
        """Whether V is in L^2(mu), i.e. 2 beta > d (reported, not required)."""
        return 2.0 * self.beta > self.potential.dim


# ---------------------------------------------------------------------------
# closed-form exponents

def exponent_p(alpha: float, gamma: float, delta: float, beta: float, d: int,
               cauchy: bool = False) -> float:
    """Decay exponent of b(s) = C s^{-p} for the two drift regimes.

    Power-growth drift: p = (2 beta v 0 + d [delta v (alpha+gamma-1)])
    / (2 (alpha+gamma-1)), needing alpha + gamma > 1.  Cauchy-type drift:
    p = gamma beta + d [1 v (delta gamma)] / 2, needing gamma > 2/alpha
    and beta > 0.
    """
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if cauchy:
        if gamma <= 2.0 / alpha:
            raise ParameterError(f"cauchy exponent needs gamma > 2/alpha "
                                 f"(gamma={gamma}, alpha={alpha})")
        if beta <= 0:
            raise ParameterError(f"cauchy exponent needs beta > 0, got {beta}")
        return gamma * beta + d * max(1.0, delta * gamma) / 2.0
    if alpha + gamma <= 1.0:
        raise ParameterError(f"need alpha + gamma > 1 (alpha={alpha}, gamma={gamma})")
    return (max(2.0 * beta, 0.0) + d * max(delta, alpha + gamma - 1.0)) \
        / (2.0 * (alpha + gamma - 1.0))


# ---------------------------------------------------------------------------
# profile

@dataclass
class SPIProfile:
    """Sampled profile of the weighted super-Poincare inequality.

    ``b(s) = C g(psi(4/s)) (1/s v h(psi(4/s)))^{d/2}`` with C calibrated
    once against the empirical best constant; ``form`` records the
    parametric shape: ("power", p) or ("exp_power", (c, theta)).
    """

    r_grid: np.ndarray = field(repr=False)
    g_vals: np.ndarray = field(repr=False)
    h_vals: np.ndarray = field(repr=False)
    s0: float
    exponent: float
    d: int
    form: str = "power"
    form_params: dict = field(default_factory=dict)
    psi_exponent: Optional[float] = None
    psi_scale: Optional[float] = None
    omega_gamma: float = 0.0
    c_calibrated: Optional[float] = None

    def g(self, r):
        return np.interp(np.asarray(r, dtype=float), self.r_grid, self.g_vals)

    def h(self, r):
        return np.interp(np.asarray(r, dtype=float), self.r_grid, self.h_vals)

    def psi(self, r):
        """Smallest radius u with inf_{|x| >= u} phi >= r (closed power form)."""
        return self.psi_scale * np.asarray(r, dtype=float) ** (1.0 / self.psi_exponent)

    def b_shape(self, s):
        s = np.asarray(s, dtype=float)
        if self.form == "exp_power":
            c, theta = self.form_params["c_exp"], self.form_params["theta"]
            return np.exp(c * (1.0 + s ** (-theta)))
        if self.psi_exponent is None:
            return s ** (-self.exponent)
        r = self.psi(4.0 / s)
        return self.g(r) * np.maximum(1.0 / s, self.h(r)) ** (self.d / 2.0)

    def calibrate(self, s_cal: float, target: float) -> None:
        shape = float(self.b_shape(s_cal))
        if shape <= 0:
            raise ParameterError("profile shape vanishes at the calibration point")
        self.c_calibrated = target / shape

    def b(self, s):
        if self.c_calibrated is None:
            raise ParameterError("profile not calibrated; call calibrate() first")
        return self.c_calibrated * self.b_shape(s)


def profile_from_certificate(potential: Potential, cert: LyapunovCertificate,
                             spec: LyapunovSpec, weight: Weight,
                             hyp=None, gamma: float = 0.0, d: int = 1,
                             cauchy: bool = False, s_min: float = 1e-4,
                             n_samples: int = 400) -> SPIProfile:
    """Assemble the profile (g, h, psi, s0, p) from a certified condition.

    g and h are running suprema of exp(U)/V^2 and |U'|^2 sampled out to
    the radius psi(4/s_min); s0 = 4 / phi-infimum beyond r0.
    """
    if not cert.admissible:
        raise CertificateError("certificate is not admissible")
    c_rate, q = cert.c_rate, cert.phi_exponent
    psi_scale = (1.0 / c_rate) ** (1.0 / q)
    r_needed = psi_scale * (4.0 / s_min) ** (1.0 / q)
    r_grid = np.logspace(-2, np.log10(max(r_needed * 1.05, 1.0)), n_samples)

    xs = np.linspace(0.0, r_grid[-1], 8001)
    gv = np.exp(potential.u(xs)) / weight.v(xs) ** 2
    hv = potential.grad(xs) ** 2
    g_run = np.maximum.accumulate(gv)
    h_run = np.maximum.accumulate(hv)
    g_vals = np.interp(r_grid, xs, g_run)
    h_vals = np.interp(r_grid, xs, h_run)

    r0_eff = max(cert.r0, float(r_grid[0]))
    s0 = 4.0 / (c_rate * r0_eff ** q)

    if cauchy:
        form_a = getattr(spec.form, "a_pow", None)
        xi_b = getattr(spec.xi, "b_exp", None)
        if form_a is None or xi_b is None:
            raise ParameterError("cauchy profiles need a pure-power form with power-tail xi")
        gamma_eff = 2.0 / (form_a * xi_b - 2.0)
        p = exponent_p(hyp.alpha, gamma_eff, hyp.delta, weight.beta, d, cauchy=True) \
            if hyp is not None else np.nan
        omega_gamma = 1.0 + 1.0 / gamma_eff
    else:
        p = exponent_p(hyp.alpha, gamma, hyp.delta, weight.beta, d) \
            if hyp is not None else np.nan
        omega_gamma = gamma

    return SPIProfile(r_grid=r_grid, g_vals=g_vals, h_vals=h_vals, s0=float(s0),
                      exponent=float(p), d=d, form="power", form_params={"p": float(p)},
                      psi_exponent=q, psi_scale=psi_scale, omega_gamma=omega_gamma)


def heat_baseline_profile(d: int = 1) -> SPIProfile:
    """Uniform-measure baseline: b(s) = C s^{-d/2}, valid for every s."""
    r = np.logspace(-2, 2, 50)
    return SPIProfile(r_grid=r, g_vals=np.ones_like(r), h_vals=np.zeros_like(r),
                      s0=float("inf"), exponent=d / 2.0, d=d, form="power",
                      form_params={"p": d / 2.0}, psi_exponent=None, psi_scale=None)


def exp_power_profile(alpha: float, c_exp: float = 1.0, d: int = 1) -> SPIProfile:
    """Exponential-power profile b(s) = exp(c (1 + s^{-alpha/(2 alpha - 2)})).

    Valid shape for confinement exponents alpha > 2 (uniformly bounded
    kernels); provided as a descriptor, not derived from a certificate.
    """
    if alpha <= 2.0:
        raise ParameterError(f"exp-power profile needs alpha > 2, got {alpha}")
    theta = alpha / (2.0 * alpha - 2.0)
    r = np.logspace(-2, 2, 50)
    return SPIProfile(r_grid=r, g_vals=np.ones_like(r), h_vals=np.zeros_like(r),
                      s0=float("inf"), exponent=np.nan, d=d, form="exp_power",
                      form_params={"c_exp": float(c_exp), "theta": float(theta)})


# ---------------------------------------------------------------------------
# local ball inequality

def _default_ball_functions(r: float):
    return {
        "const": lambda x: np.ones_like(x),
        "linear": lambda x: x,
        "square": lambda x: (x / r) ** 2,
        "cosine": lambda x: np.cos(np.pi * x / (2.0 * r)),
        "bump": lambda x: np.exp(-(2.0 * x / r) ** 2),
        "shifted": lambda x: 1.0 + x / (2.0 * r),
    }


@dataclass
class LocalBallReport:
    worst_ratio: float
    c_d_fit: float
    envelope: float
    per_function: dict
    skipped: list

    def to_dict(self):
        return {"worst_ratio": self.worst_ratio, "c_d_fit": self.c_d_fit,
                "envelope": self.envelope, "per_function": self.per_function,
                "skipped": self.skipped}


def local_ball_spi_check(r: float, u: float, n_grid: int = 2001,
                         test_functions: Optional[dict] = None,
                         d: int = 1) -> LocalBallReport:
    """Check the flat-measure inequality on the ball of radius r.

    For each test function g computes
    [int g^2 dx - u int g'^2 dx] / (int |g| dx)^2 and compares the worst
    value with the envelope u^{-d/2} + r^{-d}; the fitted constant is
    worst / envelope.  Functions vanishing identically are skipped.
    """
    if r <= 0 or u <= 0:
        raise InputError(f"need r > 0 and u > 0 (got r={r}, u={u})")
    x = np.linspace(-r, r, n_grid)
    fns = test_functions or _default_ball_functions(r)
    per, skipped = {}, []
    for name, fn in fns.items():
        g = np.asarray(fn(x), dtype=float)
        l1 = np.trapezoid(np.abs(g), x)
        if l1 < 1e-14:
            skipped.append(name)
            continue
        gp = np.gradient(g, x)
        num = np.trapezoid(g ** 2, x) - u * np.trapezoid(gp ** 2, x)
        per[name] = float(num / l1 ** 2)
    if not per:
        raise InputError("all test functions vanish identically")
    worst = max(per.values())
    envelope = u ** (-d / 2.0) + r ** (-float(d))
    return LocalBallReport(worst_ratio=float(worst),
                           c_d_fit=float(max(worst, 0.0) / envelope),
                           envelope=float(envelope), per_function=per, skipped=skipped)


# ---------------------------------------------------------------------------
# empirical best constant by cone-constrained quadratic maximization

class EmpiricalSPI:
    """Discrete forms of the weighted inequality on a fixed grid.

    M is the diagonal mass form, A the (omega-weighted) Dirichlet form,
    v the V-weighted mass vector.  b*(s) is the supremum of
    <f, (M - s A) f> over f >= 0 with <v, f> = 1.
    """

    def __init__(self, potential: Potential, n: int, radius: float,
                 weight: Weight, omega: Optional[Callable] = None):
        self.disc = discretize(potential, n, radius, omega=omega)
        self.x = self.disc.x
        self.mu = self.disc.mu
        self.v = weight.v(self.x) * np.exp(0.5 * self.disc.offset) * self.mu
        self.v_mass = float(np.sum(self.v))

    # quadratic form action on column blocks
    def _q_apply(self, f, s):
        mf = self.mu[:, None] * f
        return mf - s * self.disc.stiffness_apply(f)

    def _objective(self, f, s):
        return np.einsum("ik,ik->k", f, self._q_apply(f, s))

    def _project(self, y):
        """Exact Euclidean projection onto {f >= 0, <v, f> = 1}, per column.

        The projection is f = max(0, y - lam v); the multiplier comes in
        closed form from the active set, found by sorting the breakpoints
        y_i / v_i (the weighted generalization of simplex projection).
        """
        v = self.v[:, None]
        ratios = y / v
        order = np.argsort(-ratios, axis=0)
        r_sorted = np.take_along_axis(ratios, order, axis=0)
        vy = np.take_along_axis(v * y, order, axis=0)
        v2 = np.take_along_axis(v * v, order, axis=0)
        lam_k = (np.cumsum(vy, axis=0) - 1.0) / np.cumsum(v2, axis=0)
        valid = r_sorted > lam_k
        k_star = y.shape[0] - 1 - np.argmax(valid[::-1, :], axis=0)
        lam = lam_k[k_star, np.arange(y.shape[1])]
        return np.maximum(0.0, y - lam[None, :] * self.v[:, None])

    def _step_size(self, s, seed):
        """1 / Lipschitz constant of the gradient 2 (M - s A) f."""
        rng = np.random.default_rng([seed, 777])
        z = rng.standard_normal((len(self.x), 1))
        norm = 1.0
        for _ in range(40):
            z = self._q_apply(z, s)
            norm = float(np.linalg.norm(z))
            if norm == 0.0:
                return 1.0
            z /= norm
        return 1.0 / (2.0 * norm)

    def const_lower_bound(self) -> float:
        """Objective of f = const: (sum mu) / (int V dmu)^2 = 1/(int V dmu)^2."""
        return float(np.sum(self.mu)) / self.v_mass ** 2

    def best_b(self, s: float, restarts: int = 20, seed: int = 0,
               max_iter: int = 10000, tol: float = 1e-8,
               warm: Optional[np.ndarray] = None):
        """Best constant at a single s; returns (value, argmax, converged)."""
        if s <= 0:
            raise InputError(f"s must be > 0, got {s}")
        n = len(self.x)
        cols = []
        cols.append(np.ones(n))
        quantiles = np.quantile(self.x, np.linspace(0.1, 0.9, 5))
        for qx in quantiles:
            e = np.zeros(n)
            e[int(np.argmin(np.abs(self.x - qx)))] = 1.0
            cols.append(e)
        for j in range(max(0, restarts - len(cols))):
            rng = np.random.default_rng([seed, j])
            cols.append(np.abs(rng.standard_normal(n)))
        f = np.stack(cols[:max(restarts, 1)], axis=1)
        if warm is not None:
            f = np.concatenate([f, warm.reshape(-1, 1)], axis=1)
        f = self._project(f)

        step = self._step_size(s, seed)
        obj = self._objective(f, s)
        j = int(np.argmax(obj))
        best_val, best_f = float(obj[j]), f[:, j].copy()
        prev = obj
        converged = False
        stall = 0
        patience = 100
        for _ in range(max_iter):
            grad = 2.0 * self._q_apply(f, s)
            f = self._project(f + step * grad)
            obj = self._objective(f, s)
            scale = tol * max(1.0, abs(best_val))
            j = int(np.argmax(obj))
            if obj[j] > best_val + scale:
                best_val, best_f = float(obj[j]), f[:, j].copy()
                stall = 0
            else:
                best_val = max(best_val, float(obj[j]))
                stall += 1
            if np.max(np.abs(obj - prev)) <= scale:
                converged = True
                break
            if stall >= patience:
                # every column stopped improving the incumbent; good enough
                converged = True
                break
            prev = obj
        return float(best_val), best_f, converged


def empirical_best_b(s: float, potential: Potential, n: int, radius: float,
                     weight: Weight, omega: Optional[Callable] = None,
                     restarts: int = 20, seed: int = 0, max_iter: int = 10000,
                     tol: float = 1e-8) -> float:
    """Empirical best constant b*(s) of the weighted inequality on a grid."""
    solver = EmpiricalSPI(potential, n, radius, weight, omega=omega)
    val, _, _ = solver.best_b(s, restarts=restarts, seed=seed, max_iter=max_iter, tol=tol)
    return val


def empirical_b_curve(s_values: Sequence[float], potential: Potential, n: int,
                      radius: float, weight: Weight,
                      omega: Optional[Callable] = None, restarts: int = 20,
                      seed: int = 0, max_iter: int = 10000, tol: float = 1e-8):
    """b*(s) on a grid of s values, nonincreasing in s by construction.

    Values are computed from the largest s down, warm-starting each solve
    with the previous optimizer: since the objective at fixed f increases
    as s decreases, the chain is monotone regardless of solver accuracy.
    Returns (values ordered like s_values, all_converged).
    """
    solver = EmpiricalSPI(potential, n, radius, weight, omega=omega)
    s_arr = np.asarray(s_values, dtype=float)
    order = np.argsort(-s_arr)
    vals = np.zeros_like(s_arr)
    warm = None
    all_conv = True
    prev_val = -np.inf
    for i in order:
        val, warm, conv = solver.best_b(s_arr[i], restarts=restarts, seed=seed,
                                        max_iter=max_iter, tol=tol, warm=warm)
        val = max(val, prev_val)
        vals[i] = val
        prev_val = val
        all_conv = all_conv and conv
    return vals, all_conv


# ---------------------------------------------------------------------------
# Nash rate

@dataclass
class NashProfile:
    """n(t) = int_t^inf dx/Phi(x) for an increasing convex Phi.

    Power form Phi(x) = c x^(1+2/d) has the closed inverse
    n^{-1}(t) = (d / (2 c t))^{d/2}; other shapes are inverted numerically.
    """

    c: float = 1.0
    d: float = 1.0
    phi_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.phi_fn is None and (self.c <= 0 or self.d <= 0):
            raise ParameterError("power Nash profile needs c > 0 and d > 0")

    @property
    def exponent(self) -> float:
        return 1.0 + 2.0 / self.d

    def _check_integrable(self):
        """The integral converges only if Phi grows super-linearly."""
        r1, r2 = self.phi_fn(1e6), self.phi_fn(2e6)
        if not (np.isfinite(r2) and r2 > 0) or r2 / r1 <= 2.0 * (1.0 + 1e-9):
            raise RateError("n(t) diverges: Phi grows at most linearly")

    def n(self, t: float) -> float:
        if t <= 0:
            raise InputError(f"t must be > 0, got {t}")
        if self.phi_fn is None:
            return (self.d / (2.0 * self.c)) * t ** (-2.0 / self.d)
        self._check_integrable()
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                val, _ = quad(lambda y: 1.0 / self.phi_fn(y), t, np.inf, limit=200)
            except Warning as warn:
                raise RateError(f"n(t) integral did not converge: {warn}") from None
        if not np.isfinite(val):
            raise RateError("n(t) diverges: Phi grows too slowly")
        return float(val)

    def n_inverse(self, t: float) -> float:
        if t <= 0:
            raise InputError(f"t must be > 0, got {t}")
        if self.phi_fn is None:
            return (self.d / (2.0 * self.c * t)) ** (self.d / 2.0)
        hi = 1.0
        while self.n(hi) > t:
            hi *= 2.0
            if hi > 1e12:
                raise RateError("numerical inversion out of range")
        lo = hi
        while self.n(lo) < t:
            lo /= 2.0
            if lo < 1e-12:
                raise RateError("numerical inversion out of range")
        for _ in range(100):
            mid = np.sqrt(lo * hi)
            if self.n(mid) > t:
                lo = mid
            else:
                hi = mid
        return float(np.sqrt(lo * hi))


def nash_rate(profile: NashProfile, t: float) -> float:
    """Ultracontractive rate n^{-1}(t): the uniform kernel bound at time t."""
    if profile.phi_fn is not None:
        profile._check_integrable()
    return profile.n_inverse(t)
