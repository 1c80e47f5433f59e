"""Scalar Riccati equations ``y' + f y^2 + g y + h = 0``.

Integration with blow-up detection, finite-horizon regular/normal/extremal
classification, and numerical checks of the comparison identities used by
the stability criterion.  Nested integrals are carried as extra ODE states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ode
from .system import ConstantFunction, ScalarComparisonSystem
from .trend import BOUNDED, DIVERGES_DOWN, DIVERGES_UP, classify_trend

REGULAR = "regular"
NORMAL = "normal"
EXTREMAL = "extremal"
ESCAPED = "escaped"
UNRESOLVED = "unresolved"

DEFAULT_TOL = 1e-10


class RiccatiError(RuntimeError):
    pass


def _fn(v) -> Callable:
    if isinstance(v, (int, float)):
        return ConstantFunction(v)
    return v


@dataclass
class RiccatiProblem:
    f: Callable
    g: Callable
    h: Callable
    t1: float = 0.0
    y1: float = 0.0

    def __post_init__(self):
        self.f, self.g, self.h = _fn(self.f), _fn(self.g), _fn(self.h)
        self.t1, self.y1 = float(self.t1), float(self.y1)

    def rhs(self, t: float, y: float) -> float:
        return -(self.f(t) * y * y + self.g(t) * y + self.h(t))

    def with_initial(self, y1: float, t1: float | None = None) -> "RiccatiProblem":
        return RiccatiProblem(self.f, self.g, self.h, self.t1 if t1 is None else t1, y1)


@dataclass
class RiccatiSolution:
    grid: np.ndarray
    values: np.ndarray
    escaped: bool
    escape_time: float | None
    classification: str
    horizon: float
    message: str = ""

    @property
    def regular(self) -> bool:
        return self.classification in (REGULAR, NORMAL, EXTREMAL)


def integrate_riccati(p: RiccatiProblem, horizon: float, tol: float = DEFAULT_TOL,
                      max_step: float | None = None) -> RiccatiSolution:
    """Adaptive Dormand-Prince run; escape once ``|y| > 1e8``."""
    if horizon <= p.t1:
        raise ValueError("horizon must exceed t1")
    res = ode.integrate(
        lambda t, y: np.array([p.rhs(t, y[0])]),
        p.t1, [p.y1], horizon,
        rtol=tol, atol=tol * 1e-2,
        max_step=max_step if max_step is not None else (horizon - p.t1) / 50,
        escape_components=[0],
    )
    if res.status == "escaped":
        cls = ESCAPED
    elif res.status == "ok":
        cls = REGULAR
    else:
        cls = UNRESOLVED
    return RiccatiSolution(res.t, res.y[:, 0], res.status == "escaped", res.escape_time, cls, horizon, res.message)


def probe_offsets(delta: float, probes: int) -> np.ndarray:
    return delta * np.linspace(-1.0, 1.0, probes + 2)[1:-1]


def classify_solution(p: RiccatiProblem, horizon: float, delta: float = 1e-3, probes: int = 8,
                      tol: float = DEFAULT_TOL) -> str:
    """Finite-horizon surrogate for normal / extremal solutions.

    Returns ``escaped`` or ``unresolved`` when the base solution itself does
    not reach the horizon.
    """
    base = integrate_riccati(p, horizon, tol)
    if not base.regular:
        return base.classification
    for off in probe_offsets(delta, probes):
        s = integrate_riccati(p.with_initial(p.y1 + off), horizon, tol)
        if not s.regular:
            return EXTREMAL
    return NORMAL


def _augmented(p: RiccatiProblem, extra: Callable, n_extra: int, horizon: float, tol: float, y_extra0=None):
    def rhs(t, s):
        y = s[0]
        out = np.empty_like(s)
        out[0] = p.rhs(t, y)
        out[1:] = extra(t, y, s[1:])
        return out

    s0 = np.zeros(1 + n_extra)
    s0[0] = p.y1
    if y_extra0 is not None:
        s0[1:] = y_extra0
    return ode.integrate(rhs, p.t1, s0, horizon, rtol=tol, atol=tol * 1e-4,
                         max_step=(horizon - p.t1) / 50, escape_components=[0])


def cauchy_identity_residual(p: RiccatiProblem, sol: RiccatiSolution, tol: float = DEFAULT_TOL) -> float:
    """Relative residual of the variation-of-constants identity

        y(t) phi0(t) = y(t1) e^{-int g} - int_{t1}^t e^{-int_tau^t g} h(tau) phi0(tau) dtau,

    with ``phi0 = exp(int f y)``; computed on ``[t1, sol.grid[-1]]``.
    """
    if not sol.regular:
        raise RiccatiError("identity needs a regular solution")
    T = float(sol.grid[-1])
    # states: L = int f y, G = exp(-int g), R = convolution term
    def extra(t, y, s):
        L, G, R = s
        fv, gv, hv = p.f(t), p.g(t), p.h(t)
        return np.array([fv * y, -gv * G, -gv * R + hv * math.exp(L)])

    res = _augmented(p, extra, 3, T, tol, [0.0, 1.0, 0.0])
    if not res.success:
        raise RiccatiError(res.message)
    y, L, G, R = res.y.T
    lhs = y * np.exp(L)
    rhs = p.y1 * G - R
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(p.y1 * G)), np.max(np.abs(R)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)) / scale)


@dataclass
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool
    worst_gap: float = 0.0


def riccati_bound_check(p: RiccatiProblem, sol: RiccatiSolution, tol: float = 1e-8) -> InequalityCheck:
    """Integral bound on ``int f y`` for regular solutions with ``f >= 0``::

        int f y <= y(t1) int f e^{-int_{t1}^tau g} - int f(tau) int_{t1}^tau e^{-int_xi^tau g} h(xi) dxi dtau

    ``lhs``/``rhs`` are the values at the end of the solution grid; ``holds``
    also requires the inequality at every grid point.
    """
    if not sol.regular:
        raise RiccatiError("bound needs a regular solution")
    fvals = np.broadcast_to(np.asarray(p.f(sol.grid), dtype=float), sol.grid.shape)
    if np.any(fvals < 0):
        raise RiccatiError("f must be non-negative")
    T = float(sol.grid[-1])

    def extra(t, y, s):
        lhs, G, P, Q, S = s
        fv, gv, hv = p.f(t), p.g(t), p.h(t)
        return np.array([fv * y, -gv * G, fv * G, -gv * Q + hv, fv * Q])

    res = _augmented(p, extra, 5, T, DEFAULT_TOL, [0.0, 1.0, 0.0, 0.0, 0.0])
    if not res.success:
        raise RiccatiError(res.message)
    _, lhs, G, P, Q, S = res.y.T
    rhs = p.y1 * P - S
    gap = lhs - rhs
    scale = max(1.0, float(np.max(np.abs(rhs))))
    return InequalityCheck(float(lhs[-1]), float(rhs[-1]), bool(np.all(gap <= tol * scale)), float(gap.max()))


@dataclass
class DecayCheck:
    value: float
    trace_t: np.ndarray
    trace: np.ndarray
    bounded_hypothesis: bool
    divergent_g: bool
    decreasing_tail: bool


def convolution_decay_check(g: Callable, h: Callable, phi: Callable, horizon: float, t0: float = 0.0,
                  tol: float = DEFAULT_TOL) -> DecayCheck:
    """Value at ``horizon`` of ``int_{t0}^t e^{-int_tau^t g} |h(tau)| phi(tau) dtau``.

    Also reports the hypotheses: ``int g`` trending to infinity and the
    ``phi = 1`` version of the same integral staying bounded.
    """
    g, h, phi = _fn(g), _fn(h), _fn(phi)

    def rhs(t, s):
        V, W, Gi = s
        gv, ah = g(t), abs(h(t))
        return np.array([-gv * V + ah * phi(t), -gv * W + ah, gv])

    res = ode.integrate(rhs, t0, [0.0, 0.0, 0.0], horizon, rtol=tol, atol=1e-30,
                        max_step=(horizon - t0) / 100)
    if not res.success:
        raise RiccatiError(res.message)
    V, W, Gi = res.y.T
    tail = res.t >= t0 + 0.8 * (horizon - t0)
    divergent = classify_trend(res.t, Gi) == DIVERGES_UP
    bounded = classify_trend(res.t, W) in (BOUNDED, DIVERGES_DOWN)
    decreasing = bool(V[-1] <= np.max(V[tail]) + 1e-300)
    return DecayCheck(float(V[-1]), res.t, V, bounded, divergent, decreasing)


@dataclass
class ComparisonCheck:
    hypothesis_holds: bool
    ordering_holds: bool
    min_hypothesis: float
    min_gap: float
    violations: list[str] = field(default_factory=list)
    grid: np.ndarray | None = None
    y0: np.ndarray | None = None
    y1: np.ndarray | None = None


def _derivative(fn: Callable, t: np.ndarray) -> np.ndarray:
    h = 1e-6 * np.maximum(1.0, np.abs(t))
    return (np.asarray(fn(t + h)) - np.asarray(fn(t - h))) / (2 * h)


def riccati_comparison_check(eq1: RiccatiProblem, eq2: RiccatiProblem, eta0: Callable, eta1: Callable,
                    lam: float, horizon: float, tol: float = 1e-7) -> ComparisonCheck:
    """Comparison of two Riccati equations.

    ``eq1`` carries ``(f, g, h)`` and the initial value ``y0(t1)``; ``eq2``
    carries ``(f1, g1, h1)`` and ``y1(t1)``.  Both start at ``eq1.t1``.
    ``eta0``/``eta1`` must satisfy the differential inequalities of the two
    equations.  The hypothesis is the sign of

        lam - y1(t) + int_{t1}^t exp(int_{t1}^tau [f (eta0 + eta1) + g]) [(f1 - f) y1^2 + (g1 - g) y1 + h1 - h] dtau

    and the conclusion ``y0 >= y1`` is checked by integrating both equations.
    """
    eta0, eta1 = _fn(eta0), _fn(eta1)
    t1 = eq1.t1
    grid = np.linspace(t1, horizon, 401)
    violations = []
    fv = np.broadcast_to(np.asarray(eq1.f(grid), dtype=float), grid.shape)
    if np.any(fv < -1e-14):
        violations.append("f is negative somewhere")

    def ineq(eta, q):
        return _derivative(eta, grid) + q.f(grid) * eta(grid) ** 2 + q.g(grid) * eta(grid) + q.h(grid)

    if np.min(ineq(eta0, eq1)) < -tol:
        violations.append("eta0 violates the differential inequality of the first equation")
    if np.min(ineq(eta1, eq2)) < -tol:
        violations.append("eta1 violates the differential inequality of the second equation")
    if eta0(t1) < eq1.y1 - tol or eta1(t1) < eq1.y1 - tol:
        violations.append("eta_k(t1) must dominate y0(t1)")
    if not (eq2.y1 - tol <= lam <= eta0(t1) + tol):
        violations.append("lambda outside [y1(t1), eta0(t1)]")

    def rhs(t, s):
        y0, y1, Z, I = s
        f, g, h = eq1.f(t), eq1.g(t), eq1.h(t)
        f1, g1, h1 = eq2.f(t), eq2.g(t), eq2.h(t)
        return np.array([
            -(f * y0 * y0 + g * y0 + h),
            -(f1 * y1 * y1 + g1 * y1 + h1),
            f * (eta0(t) + eta1(t)) + g,
            math.exp(Z) * ((f1 - f) * y1 * y1 + (g1 - g) * y1 + h1 - h),
        ])

    res = ode.integrate(rhs, t1, [eq1.y1, eq2.y1, 0.0, 0.0], horizon, rtol=DEFAULT_TOL, atol=1e-13,
                        max_step=(horizon - t1) / 200, escape_components=[0, 1])
    y0, y1, Z, I = res.y.T
    hyp = lam - y1 + I
    gap = y0 - y1
    if not res.success:
        violations.append(f"integration stopped early: {res.message}")
    min_h = float(hyp.min())
    min_g = float(gap.min())
    hypothesis = min_h >= -tol and not violations
    ordering = res.success and min_g >= -tol
    return ComparisonCheck(hypothesis, ordering, min_h, min_g, violations, res.t, y0, y1)


def main_riccati(scalar: ScalarComparisonSystem, y1: float = 0.0, t1: float | None = None) -> RiccatiProblem:
    """``y' + |B| y^2 + E y - |C| = 0`` attached to a comparison system."""
    return RiccatiProblem(scalar.norm_b, scalar.E, lambda t: -scalar.norm_c(t),
                          scalar.t0 if t1 is None else t1, y1)


@dataclass
class SolutionPair:
    grid: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    y0: RiccatiSolution
    bound: np.ndarray
    representation_residual: float
    direct_residual: float
    bound_violation: float

    @property
    def bound_holds(self) -> bool:
        return self.bound_violation <= 1e-6


def construct_solution_pair(scalar: ScalarComparisonSystem, horizon: float, tol: float = DEFAULT_TOL,
                            max_step: float | None = None) -> SolutionPair:
    """Solution of the comparison system with ``phi(t0) = 1, psi(t0) = 0`` built
    from the Riccati solution ``y0(t0) = 0``:  ``phi = exp(int |B| y0 + a*)``,
    ``psi = y0 phi``.

    Cross-checks ``psi`` against its convolution representation, ``(phi, psi)``
    against a direct integration, and the upper bound
    ``phi <= exp(int [a* + |B| K])`` with ``K' = -E K + |C|``.
    """
    t0 = scalar.t0
    a, d, nb, nc = scalar.a_star, scalar.d_star, scalar.norm_b, scalar.norm_c

    def rhs(t, s):
        y, L, P, K, Jb, ph, ps = s
        av, dv, bv, cv = a(t), d(t), nb(t), nc(t)
        phi = math.exp(L)
        return np.array([
            -(bv * y * y + (av - dv) * y - cv),
            bv * y + av,
            dv * P + cv * phi,
            -(av - dv) * K + cv,
            av + bv * K,
            av * ph + bv * ps,
            cv * ph + dv * ps,
        ])

    res = ode.integrate(rhs, t0, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0], horizon, rtol=tol, atol=tol * 1e-4,
                        max_step=max_step if max_step is not None else (horizon - t0) / 200,
                        escape_components=[0])
    y, L, P, K, Jb, ph, ps = res.y.T
    cls = REGULAR if res.success else (ESCAPED if res.status == "escaped" else UNRESOLVED)
    ysol = RiccatiSolution(res.t, y, res.status == "escaped", res.escape_time, cls, horizon, res.message)
    if not res.success:
        raise RiccatiError(f"Riccati solution y0 does not reach the horizon: {res.message}")
    phi = np.exp(L)
    psi = y * phi
    scale_psi = max(float(np.max(np.abs(psi))), float(np.max(np.abs(P))), 1e-300)
    rep = float(np.max(np.abs(psi - P))) / scale_psi if np.any(psi) or np.any(P) else 0.0
    scale_d = max(float(np.max(np.abs(ph))), float(np.max(np.abs(ps))), 1e-300)
    direct = float(max(np.max(np.abs(phi - ph)), np.max(np.abs(psi - ps)))) / scale_d
    with np.errstate(over="ignore"):
        bound = np.exp(Jb)
    # (phi - bound) / bound in log space, so overflow cannot turn it into nan
    violation = float(np.max(np.expm1(L - Jb)))
    return SolutionPair(res.t, phi, psi, ysol, bound, rep, direct, max(violation, 0.0))
