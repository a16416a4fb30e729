"""Lyapunov functions W >= 1 with drift condition LW/xi(W) <= -phi + b 1_{|x|<=r0}.

Two closed-form families are supported: exponential-of-power tails
W = exp(a |x|^alpha) and pure power tails W = |x|^a, both replaced inside a
smoothing radius by an even polynomial patch 1 + B x^2 + C x^4 + D x^6 that
matches value, first and second derivative at the radius and is pinned to
W(0) = 1.  The patch is validated numerically to stay >= 1 and increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .potentials import DriftHypothesis, Potential

_TINY = 1e-300


# ---------------------------------------------------------------------------
# xi families: C1, positive, increasing on (0, inf)

class IdentityXi:
    name = "identity"

    def xi(self, u):
        return np.asarray(u, dtype=float)

    def xi_prime(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def params(self):
        return {}


class LogPowerXi:
    """xi(u) = u (log u)^(-2 gamma / alpha) above u0 = exp(4 gamma / alpha).

    Below u0 the closed form is not monotone, so it is extended linearly
    with matching value and slope; the extension stays positive.
    """

    name = "log_power"

    def __init__(self, gamma: float, alpha: float):
        if gamma < 0 or alpha <= 0:
            raise ParameterError(f"log_power xi needs gamma >= 0, alpha > 0 "
                                 f"(got gamma={gamma}, alpha={alpha})")
        self.gamma = float(gamma)
        self.alpha = float(alpha)
        self.q = 2.0 * gamma / alpha
        self.u0 = float(np.exp(2.0 * self.q))
        lu = max(np.log(self.u0), _TINY)
        self.val0 = self.u0 * lu ** (-self.q) if self.q > 0 else self.u0
        self.slope0 = lu ** (-self.q) * (1.0 - self.q / lu) if self.q > 0 else 1.0

    def xi(self, u):
        u = np.asarray(u, dtype=float)
        above = u > self.u0
        safe = np.where(above, u, self.u0 * 2.0)
        tail = safe * np.log(safe) ** (-self.q)
        below = self.val0 + self.slope0 * (u - self.u0)
        return np.where(above, tail, below)

    def xi_prime(self, u):
        u = np.asarray(u, dtype=float)
        above = u > self.u0
        safe = np.where(above, u, self.u0 * 2.0)
        lu = np.log(safe)
        tail = lu ** (-self.q) * (1.0 - self.q / lu)
        return np.where(above, tail, self.slope0)

    def params(self):
        return {"gamma": self.gamma, "alpha": self.alpha}


class PowerTailXi:
    """xi(r) = r^(1-b) with 0 <= b < 1."""

    name = "power_tail"

    def __init__(self, b_exp: float):
        if not 0.0 <= b_exp < 1.0:
            raise ParameterError(f"power_tail xi needs 0 <= b < 1, got {b_exp}")
        self.b_exp = float(b_exp)

    def xi(self, u):
        return np.asarray(u, dtype=float) ** (1.0 - self.b_exp)

    def xi_prime(self, u):
        u = np.asarray(u, dtype=float)
        return (1.0 - self.b_exp) * u ** (-self.b_exp)

    def params(self):
        return {"b_exp": self.b_exp}


# ---------------------------------------------------------------------------
# W forms

def _patch_coefficients(rs: float, f: float, fp: float, fpp: float):
    """Coefficients (B, C, D) of 1 + B x^2 + C x^4 + D x^6 matching f, f', f'' at rs."""
    mat = np.array([
        [rs ** 2, rs ** 4, rs ** 6],
        [2 * rs, 4 * rs ** 3, 6 * rs ** 5],
        [2.0, 12 * rs ** 2, 30 * rs ** 4],
    ])
    rhs = np.array([f - 1.0, fp, fpp])
    return np.linalg.solve(mat, rhs)


def _validate_patch(coeffs, rs: float, label: str):
    b, c, d = coeffs
    xs = np.linspace(0.0, rs, 2001)
    p = 1.0 + b * xs ** 2 + c * xs ** 4 + d * xs ** 6
    dp = 2 * b * xs + 4 * c * xs ** 3 + 6 * d * xs ** 5
    if np.min(p) < 1.0 - 1e-9 or np.min(dp) < -1e-9:
        raise ParameterError(
            f"{label}: smoothing patch on [0, {rs}] dips below 1 or decreases; "
            f"increase the smoothing radius")


class _PatchedForm:
    """Shared machinery: polynomial patch inside rs, closed-form tail outside."""

    def __init__(self, smoothing_radius: float):
        if smoothing_radius <= 0:
            raise ParameterError("smoothing radius must be > 0")
        self.smoothing_radius = float(smoothing_radius)
        rs = self.smoothing_radius
        self._coeffs = _patch_coefficients(rs, self._tail(rs), self._tail_d1(rs),
                                           self._tail_d2(rs))
        _validate_patch(self._coeffs, rs, self.name)

    def _tail(self, r):
        raise NotImplementedError

    def _tail_d1(self, r):
        raise NotImplementedError

    def _tail_d2(self, r):
        raise NotImplementedError

    def _patch_eval(self, r):
        b, c, d = self._coeffs
        return 1.0 + b * r ** 2 + c * r ** 4 + d * r ** 6

    def _patch_d1(self, r):
        b, c, d = self._coeffs
        return 2 * b * r + 4 * c * r ** 3 + 6 * d * r ** 5

    def _patch_d2(self, r):
        b, c, d = self._coeffs
        return 2 * b + 12 * c * r ** 2 + 30 * d * r ** 4

    def w(self, x):
        r = np.abs(np.asarray(x, dtype=float))
        inside = r < self.smoothing_radius
        rt = np.where(inside, self.smoothing_radius, r)
        return np.where(inside, self._patch_eval(r), self._tail(rt))

    def w_grad(self, x):
        """Signed derivative d/dx W along the axis."""
        x = np.asarray(x, dtype=float)
        r = np.abs(x)
        inside = r < self.smoothing_radius
        rt = np.where(inside, self.smoothing_radius, r)
        radial = np.where(inside, self._patch_d1(r), self._tail_d1(rt))
        return np.sign(x) * radial

    def w_lap(self, x):
        """Second derivative (1D Laplacian) of W."""
        r = np.abs(np.asarray(x, dtype=float))
        inside = r < self.smoothing_radius
        rt = np.where(inside, self.smoothing_radius, r)
        return np.where(inside, self._patch_d2(r), self._tail_d2(rt))


class ExpPowerForm(_PatchedForm):
    """W = exp(a |x|^alpha) outside the smoothing radius."""

    name = "exp_power"

    def __init__(self, a: float, alpha: float, smoothing_radius: float = 1.0):
        if a <= 0 or alpha <= 0:
            raise ParameterError(f"exp_power needs a > 0 and alpha > 0 (got a={a}, alpha={alpha})")
        self.a = float(a)
        self.alpha = float(alpha)
        super().__init__(smoothing_radius)

    def _tail(self, r):
        return np.exp(self.a * r ** self.alpha)

    def _tail_d1(self, r):
        return self.a * self.alpha * r ** (self.alpha - 1.0) * self._tail(r)

    def _tail_d2(self, r):
        a, al = self.a, self.alpha
        return (a * al * (al - 1.0) * r ** (al - 2.0)
                + (a * al * r ** (al - 1.0)) ** 2) * self._tail(r)

    def params(self):
        return {"a": self.a, "alpha": self.alpha, "smoothing_radius": self.smoothing_radius}


class PurePowerForm(_PatchedForm):
    """W = |x|^a outside the smoothing radius (which must exceed 1 so W >= 1)."""

    name = "pure_power"

    def __init__(self, a_pow: float, smoothing_radius: float = 2.0):
        if a_pow <= 0:
            raise ParameterError(f"pure_power needs a > 0, got {a_pow}")
        if smoothing_radius <= 1.0:
            raise ParameterError("pure_power needs smoothing_radius > 1 so that the tail stays >= 1")
        self.a_pow = float(a_pow)
        super().__init__(smoothing_radius)

    def _tail(self, r):
        return r ** self.a_pow

    def _tail_d1(self, r):
        return self.a_pow * r ** (self.a_pow - 1.0)

    def _tail_d2(self, r):
        return self.a_pow * (self.a_pow - 1.0) * r ** (self.a_pow - 2.0)

    def params(self):
        return {"a_pow": self.a_pow, "smoothing_radius": self.smoothing_radius}


class CustomForm:
    """User-supplied W with its derivative and Laplacian; no patching."""

    name = "custom"

    def __init__(self, w: Callable, grad: Callable, lap: Callable):
        self._w, self._g, self._l = w, grad, lap
        self.smoothing_radius = 0.0

    def w(self, x):
        return np.asarray(self._w(np.asarray(x, dtype=float)), dtype=float)

    def w_grad(self, x):
        return np.asarray(self._g(np.asarray(x, dtype=float)), dtype=float)

    def w_lap(self, x):
        return np.asarray(self._l(np.asarray(x, dtype=float)), dtype=float)

    def params(self):
        return {}


# ---------------------------------------------------------------------------
# rate descriptor and spec

@dataclass
class PowerRate:
    """phi(x) = C |x|^exponent; C may be left None for certification to fit."""

    exponent: float
    c_rate: Optional[float] = None

    def __post_init__(self):
        if self.exponent <= 0:
            raise ParameterError(f"rate exponent must be > 0, got {self.exponent}")
        if self.c_rate is not None and self.c_rate <= 0:
            raise ParameterError(f"rate constant must be > 0, got {self.c_rate}")

    def phi(self, x, c: Optional[float] = None):
        cc = self.c_rate if c is None else c
        if cc is None:
            raise ParameterError("rate constant not set; certify the spec first")
        return cc * np.abs(np.asarray(x, dtype=float)) ** self.exponent


@dataclass
class LyapunovSpec:
    form: object
    xi: object
    rate: PowerRate

    def w(self, x):
        return self.form.w(x)

    def lw(self, potential: Potential, x):
        """LW = W'' - U' W' evaluated in closed form (1D)."""
        return self.form.w_lap(x) - potential.grad(x) * self.form.w_grad(x)

    def drift_ratio(self, potential: Potential, x):
        """LW / xi(W)."""
        return self.lw(potential, x) / self.xi.xi(self.form.w(x))

    def describe(self):
        return {"form": self.form.name, **self.form.params(),
                "xi": self.xi.name, "xi_params": self.xi.params(),
                "phi_exponent": self.rate.exponent}


def suggest_exp_lyapunov(hyp: DriftHypothesis, gamma: float = 0.0,
                         smoothing_radius: float = 1.0) -> LyapunovSpec:
    """Exponential-tail Lyapunov spec adapted to a drift hypothesis.

    The tail coefficient is half the admissible threshold 1/(2 c alpha);
    the rate exponent is 2 (alpha + gamma - 1), which must be positive.
    """
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma}")
    if gamma <= 1.0 - hyp.alpha:
        raise ParameterError(
            f"rate exponent would be <= 0: need gamma > 1 - alpha "
            f"(gamma={gamma}, alpha={hyp.alpha})")
    a = 1.0 / (4.0 * hyp.c * hyp.alpha)
    xi = IdentityXi() if gamma == 0.0 else LogPowerXi(gamma, hyp.alpha)
    rate = PowerRate(exponent=2.0 * (hyp.alpha + gamma - 1.0))
    return LyapunovSpec(form=ExpPowerForm(a, hyp.alpha, smoothing_radius), xi=xi, rate=rate)


# ---------------------------------------------------------------------------
# certification

@dataclass
class LyapunovCertificate:
    admissible: bool
    b_const: Optional[float]
    r0: Optional[float]
    c_rate: float
    phi_exponent: float
    grid: np.ndarray = field(repr=False)
    margin_profile: np.ndarray = field(repr=False)
    margin_min_tail: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)
    spec: Optional[LyapunovSpec] = None

    def to_json_dict(self):
        d = {"form": None, "a": None, "xi": None, "phi_exponent": float(self.phi_exponent),
             "C_rate": float(self.c_rate), "b": self.b_const, "r0": self.r0,
             "margin_min": self.margin_min_tail, "admissible": bool(self.admissible)}
        if self.spec is not None:
            desc = self.spec.describe()
            d["form"] = desc["form"]
            d["a"] = desc.get("a", desc.get("a_pow"))
            d["xi"] = {"name": desc["xi"], **desc["xi_params"]}
        return d


def _tail_scan(abs_x, margin, tol=1e-12):
    """Smallest radius r0 such that margin >= -tol at every point with |x| > r0."""
    order = np.argsort(abs_x, kind="stable")
    r_sorted = abs_x[order]
    m_sorted = margin[order]
    suffix_ok = np.minimum.accumulate(m_sorted[::-1])[::-1] >= -tol
    if suffix_ok[0]:
        return 0.0
    # first index where every strictly larger radius is fine
    idx = np.nonzero(~suffix_ok)[0][-1]
    if idx == len(r_sorted) - 1:
        return None
    return float(r_sorted[idx])


def certify(potential: Potential, spec: LyapunovSpec, grid,
            r0_max: Optional[float] = None, c_floor: float = 1e-6,
            rel_tol: float = 1e-3) -> LyapunovCertificate:
    """Fit the certificate (C, r0, b) for the drift condition on a grid.

    With the rate constant given, only r0 and b are fitted.  Otherwise the
    largest constant C for which the tail condition can hold somewhere
    inside r0_max is found by bisection (relative precision ``rel_tol``),
    then the smallest admissible r0 is scanned outward and
    b = max(0, sup_{|x|<=r0} (LW/xi(W) + phi)).
    """
    x = np.asarray(grid, dtype=float)
    if x.size == 0:
        raise ParameterError("certification grid is empty")
    abs_x = np.abs(x)
    ratio = spec.drift_ratio(potential, x)
    q = spec.rate.exponent
    if r0_max is None:
        r0_max = 0.5 * float(np.max(abs_x))

    def margins(c):
        return -ratio - c * abs_x ** q

    diagnostics = {"r0_max": float(r0_max)}

    if spec.rate.c_rate is None:
        outer = abs_x > r0_max
        if not np.any(outer):
            raise ParameterError("no grid points beyond r0_max; enlarge grid or reduce r0_max")
        with np.errstate(divide="ignore", invalid="ignore"):
            local = np.where(outer, -ratio / np.maximum(abs_x, _TINY) ** q, np.inf)
        c_upper = float(np.min(local[outer]))
        if not np.isfinite(c_upper) or c_upper < c_floor:
            diagnostics["c_upper"] = c_upper
            return LyapunovCertificate(False, None, None, 0.0, q, x, margins(0.0) + 0.0,
                                       None, diagnostics, spec)
        lo, hi = c_floor, c_upper

        def feasible(c):
            return np.min(margins(c)[outer]) >= -1e-12

        # feasible(c_upper) holds by construction of the pointwise min
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        c_fit = lo if feasible(lo) else c_floor
        spec = LyapunovSpec(spec.form, spec.xi,
                            PowerRate(exponent=q, c_rate=float(c_fit)))
    else:
        c_fit = float(spec.rate.c_rate)

    m = margins(c_fit)
    r0 = _tail_scan(abs_x, m)
    if r0 is None or r0 > r0_max + 1e-12:
        diagnostics["reason"] = "tail condition fails inside r0_max at the fitted constant"
        return LyapunovCertificate(False, None, None, c_fit, q, x, m, None, diagnostics, spec)

    inner = abs_x <= r0 + 1e-12
    b_const = float(max(0.0, np.max(ratio[inner] + c_fit * abs_x[inner] ** q))) if np.any(inner) else 0.0
    tail = ~inner
    margin_min_tail = float(np.min(m[tail])) if np.any(tail) else float("inf")
    admissible = c_fit >= c_floor
    return LyapunovCertificate(admissible, b_const, float(r0), c_fit, q, x, m,
                               margin_min_tail, diagnostics, spec)


def gradient_weight(spec: LyapunovSpec, x):
    """Energy weight omega(x) = 1 v 1/xi'(W(x)); equals 1 for identity xi."""
    w = spec.form.w(x)
    return np.maximum(1.0, 1.0 / spec.xi.xi_prime(w))


def gradient_weight_bound(spec: LyapunovSpec, grid, gamma: float) -> float:
    """Smallest constant C with omega(x) <= C (1 v |x|^(2 gamma)) on the grid."""
    x = np.asarray(grid, dtype=float)
    omega = gradient_weight(spec, x)
    envelope = np.maximum(1.0, np.abs(x) ** (2.0 * gamma))
    return float(np.max(omega / envelope))
