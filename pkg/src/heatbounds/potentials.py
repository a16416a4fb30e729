"""Potential families for the diffusion generator ``Lf = f'' - U' f'``.

Each potential knows its value, gradient and Laplacian in closed form and
carries an additive normalization constant so that ``exp(-U)`` integrates
to one over the truncation box.  Evaluation is along a 1D axis (signed
coordinate); the Laplacian is the full d-dimensional one for radial
families, which reduces to ``U''`` when ``dim == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError, InputError, ParameterError

_DEFAULT_NORM_RADIUS = 20.0
_NORM_POINTS = 40001


class Potential:
    """Base class: subclasses provide raw (un-normalized) u/grad/lap."""

    family = "base"

    def __init__(self, dim: int = 1, norm_radius: float = _DEFAULT_NORM_RADIUS,
                 hessian_lb: Optional[float] = None):
        if dim < 1:
            raise ParameterError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self.norm_radius = float(norm_radius)
        self.hessian_lb = hessian_lb
        self.normalization = 0.0
        if self.dim == 1:
            self.normalization = self._compute_normalization()

    # raw closed forms, without the normalization constant
    def _u_raw(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _grad_raw(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _lap_raw(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _compute_normalization(self) -> float:
        # log of the trapezoid integral of exp(-u_raw) over the box;
        # adding it to U makes the box mass exactly one in exact arithmetic.
        x = np.linspace(-self.norm_radius, self.norm_radius, _NORM_POINTS)
        vals = np.exp(-self._u_raw(x))
        mass = np.trapezoid(vals, x)
        if not np.isfinite(mass) or mass <= 0:
            raise ParameterError(
                f"exp(-U) has non-finite or zero mass on [-{self.norm_radius}, {self.norm_radius}]")
        return float(np.log(mass))

    def u(self, x):
        """Potential value, including the additive normalization constant."""
        return self._u_raw(np.asarray(x, dtype=float)) + self.normalization

    def grad(self, x):
        """Signed 1D gradient component along the axis."""
        return self._grad_raw(np.asarray(x, dtype=float))

    def lap(self, x):
        """d-dimensional Laplacian evaluated on the axis."""
        return self._lap_raw(np.asarray(x, dtype=float))

    def density(self, x):
        """Normalized invariant density exp(-U)."""
        return np.exp(-self.u(x))

    def tail_mass_beyond(self, r: float) -> float:
        """Mass of exp(-U) outside [-r, r], relative to the box-normalized measure."""
        from scipy.integrate import quad
        val, _ = quad(lambda y: float(np.exp(-self.u(y))), r, np.inf, limit=200)
        val2, _ = quad(lambda y: float(np.exp(-self.u(y))), -np.inf, -r, limit=200)
        return float(val + val2)


class Quadratic(Potential):
    """U(x) = kappa |x|^2 / 2 (+ constant); kappa = 1 is the standard OU well."""

    family = "quadratic"

    def __init__(self, kappa: float = 1.0, **kw):
        if kappa <= 0:
            raise ParameterError(f"kappa must be > 0, got {kappa}")
        self.kappa = float(kappa)
        super().__init__(**kw)
        if self.hessian_lb is None:
            self.hessian_lb = self.kappa

    def _u_raw(self, x):
        return 0.5 * self.kappa * x ** 2

    def _grad_raw(self, x):
        return self.kappa * x

    def _lap_raw(self, x):
        return self.kappa * self.dim * np.ones_like(x)


class PowerExponential(Potential):
    """U(x) = (1 + |x|^2)^(alpha/2) (+ constant), sub-exponential for alpha < 1."""

    family = "power_exponential"

    def __init__(self, alpha: float, **kw):
        if alpha <= 0:
            raise ParameterError(f"alpha must be > 0, got {alpha}")
        self.alpha = float(alpha)
        super().__init__(**kw)

    def _u_raw(self, x):
        return (1.0 + x ** 2) ** (self.alpha / 2.0)

    def _grad_raw(self, x):
        return self.alpha * x * (1.0 + x ** 2) ** (self.alpha / 2.0 - 1.0)

    def _lap_raw(self, x):
        a, d = self.alpha, self.dim
        q = 1.0 + x ** 2
        return a * q ** (a / 2.0 - 2.0) * (d * q + (a - 2.0) * x ** 2)


class GeneralizedCauchy(Potential):
    """U(x) = ((d + alpha)/2) log(1 + |x|^2) (+ constant): polynomial tails."""

    family = "generalized_cauchy"

    def __init__(self, alpha: float, **kw):
        if alpha <= 0:
            raise ParameterError(f"alpha must be > 0, got {alpha}")
        self.alpha = float(alpha)
        super().__init__(**kw)

    @property
    def _k(self):
        return self.dim + self.alpha

    def _u_raw(self, x):
        return 0.5 * self._k * np.log1p(x ** 2)

    def _grad_raw(self, x):
        return self._k * x / (1.0 + x ** 2)

    def _lap_raw(self, x):
        q = 1.0 + x ** 2
        return self._k * (self.dim * q - 2.0 * x ** 2) / q ** 2


class CustomPotential(Potential):
    """Wraps user-supplied evaluators for U, its gradient and its Laplacian.

    All three must be provided; no automatic differentiation is attempted.
    Non-finite return values raise :class:`EvaluationError` at call time.
    """

    family = "custom"

    def __init__(self, u: Callable, grad: Callable, lap: Callable, **kw):
        self._fu, self._fg, self._fl = u, grad, lap
        super().__init__(**kw)

    def _checked(self, f, x, name):
        val = np.asarray(f(x), dtype=float)
        val = np.broadcast_to(val, np.shape(x)) if np.shape(val) != np.shape(x) else val
        if not np.all(np.isfinite(val)):
            raise EvaluationError(f"custom {name} evaluator returned a non-finite value")
        return np.array(val, dtype=float)

    def _u_raw(self, x):
        return self._checked(self._fu, x, "U")

    def _grad_raw(self, x):
        return self._checked(self._fg, x, "gradient")

    def _lap_raw(self, x):
        return self._checked(self._fl, x, "Laplacian")


def flat_potential(radius: float = 3.0) -> CustomPotential:
    """Zero drift on a box: U constant, mu = uniform on [-radius, radius].

    The measure is understood as supported on the box (heat-semigroup
    baseline with reflecting walls), so no exterior tail is charged.
    """
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    pot = CustomPotential(u=zero, grad=zero, lap=zero, norm_radius=radius)
    pot.compact_radius = radius
    pot.family = "flat"
    return pot


def make_potential(family: str, **params) -> Potential:
    """Factory used by the experiment config: family name + parameters."""
    table = {
        "quadratic": Quadratic,
        "power_exponential": PowerExponential,
        "generalized_cauchy": GeneralizedCauchy,
        "flat": lambda **kw: flat_potential(**kw),
    }
    if family not in table:
        raise ParameterError(f"unknown potential family '{family}'")
    return table[family](**params)


def eval_potential(potential: Potential, x):
    """Return the triple (U, gradient, Laplacian) at x."""
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise InputError("evaluation point must be finite")
    return potential.u(xa), potential.grad(xa), potential.lap(xa)


@dataclass(frozen=True)
class DriftHypothesis:
    """Growth hypotheses on the drift: outward component and gradient size.

    Non-Cauchy mode requires ``grad U . x >= |x|^alpha / c - c`` and
    ``|grad U| <= c (1 v |x|^delta)``.  Cauchy mode replaces the first
    inequality by a liminf condition with target ``d + alpha``.
    """

    c: float
    alpha: float
    delta: float
    cauchy_mode: bool = False

    def __post_init__(self):
        if self.c <= 0 or self.alpha <= 0 or self.delta < 0:
            raise ParameterError(
                f"drift hypothesis needs c > 0, alpha > 0, delta >= 0 "
                f"(got c={self.c}, alpha={self.alpha}, delta={self.delta})")

    def liminf_target(self, dim: int) -> float:
        return dim + self.alpha


@dataclass
class HypothesisReport:
    passed: bool
    margin: float
    worst_x: float
    margin_gradient: float
    worst_x_gradient: float
    c_min: Optional[float] = None
    delta_fit: Optional[float] = None
    cauchy_radius: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "worst_x": float(self.worst_x),
            "margin_gradient": float(self.margin_gradient),
            "worst_x_gradient": float(self.worst_x_gradient),
            "c_min": None if self.c_min is None else float(self.c_min),
            "delta_fit": None if self.delta_fit is None else float(self.delta_fit),
            "cauchy_radius": None if self.cauchy_radius is None else float(self.cauchy_radius),
            "notes": list(self.notes),
        }


def _drift_margin(potential, x, c, alpha):
    return potential.grad(x) * x - np.abs(x) ** alpha / c + c


def _gradient_margin(potential, x, c, delta):
    return c * np.maximum(1.0, np.abs(x) ** delta) - np.abs(potential.grad(x))


def fit_smallest_c(potential, hyp: DriftHypothesis, grid, tol: float = 1e-4,
                   c_hi: float = 1e6) -> Optional[float]:
    """Smallest c for which both drift inequalities hold on the grid.

    Both margins are monotone increasing in c, so bisection applies.
    Returns None when even c_hi fails.
    """
    x = np.asarray(grid, dtype=float)

    def ok(c):
        return (np.min(_drift_margin(potential, x, c, hyp.alpha)) >= 0.0
                and np.min(_gradient_margin(potential, x, c, hyp.delta)) >= 0.0)

    if not ok(c_hi):
        return None
    lo, hi = 1e-9, c_hi
    if ok(lo):
        return lo
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def fit_delta(potential, grid, c: float, x_floor: float = 1.5) -> Optional[float]:
    """Smallest exponent delta with |grad U| <= c |x|^delta on the grid tail."""
    x = np.abs(np.asarray(grid, dtype=float))
    mask = x >= x_floor
    if not np.any(mask):
        return None
    g = np.abs(potential.grad(np.asarray(grid, dtype=float)))[mask]
    ratio = np.log(np.maximum(g / c, 1e-300)) / np.log(x[mask])
    return float(np.max(ratio))


def check_drift_hypothesis(potential: Potential, hyp: DriftHypothesis, grid,
                           eps_tol: float = 0.05) -> HypothesisReport:
    """Verify the drift hypotheses pointwise on a symmetric 1D grid.

    Reports the worst margin and point for each inequality, the smallest
    admissible c found by bisection, and the fitted gradient exponent.
    In Cauchy mode the outward-drift check becomes: find the smallest
    radius beyond which ``grad U . x >= (d + alpha)(1 - eps_tol)``.
    """
    x = np.asarray(grid, dtype=float)
    if x.size == 0:
        raise InputError("verification grid is empty")

    mg = _gradient_margin(potential, x, hyp.c, hyp.delta)
    i_g = int(np.argmin(mg))
    notes = []

    if hyp.cauchy_mode:
        target = hyp.liminf_target(potential.dim) * (1.0 - eps_tol)
        outward = potential.grad(x) * x
        order = np.argsort(np.abs(x))
        ox, ov = np.abs(x)[order], outward[order]
        # smallest radius r such that the target holds at every grid point beyond r
        suffix_min = np.minimum.accumulate(ov[::-1])[::-1]
        good = suffix_min >= target
        if np.any(good):
            radius = float(ox[int(np.argmax(good))])
            margin = float(suffix_min[int(np.argmax(good))] - target)
            passed = mg[i_g] >= 0.0
        else:
            radius, margin, passed = float("inf"), float(np.max(suffix_min) - target), False
        worst = float(x[int(np.argmin(outward))])
        if radius > 0:
            notes.append(f"liminf condition holds outside radius {radius:.4g} at eps_tol={eps_tol}")
        return HypothesisReport(passed=passed and np.isfinite(radius), margin=margin,
                                worst_x=worst, margin_gradient=float(mg[i_g]),
                                worst_x_gradient=float(x[i_g]),
                                c_min=fit_smallest_c(potential, hyp, x),
                                delta_fit=fit_delta(potential, x, hyp.c),
                                cauchy_radius=radius, notes=notes)

    md = _drift_margin(potential, x, hyp.c, hyp.alpha)
    i_d = int(np.argmin(md))
    passed = md[i_d] >= 0.0 and mg[i_g] >= 0.0
    return HypothesisReport(passed=passed, margin=float(md[i_d]), worst_x=float(x[i_d]),
                            margin_gradient=float(mg[i_g]), worst_x_gradient=float(x[i_g]),
                            c_min=fit_smallest_c(potential, hyp, x),
                            delta_fit=fit_delta(potential, x, hyp.c), notes=notes)
