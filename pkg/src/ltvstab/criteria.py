"""Riccati-based stability criterion for two-block systems.

Given the scalar majorant ``(a*, |B|, |C|, d*)`` with ``E = a* - d*`` the
criterion evaluates

* ``I1(t) = int_{t0}^t exp(int_tau^t d*) |C(tau)| dtau``           (must stay bounded)
* ``J(t)  = int_{t0}^t [a* + |B| K]``, ``K(tau) = int_{t0}^tau exp(-int_xi^tau E) |C(xi)| dxi``
  (sup must be finite for Lyapunov stability; ``int E -> +inf`` together with
  ``J -> -inf`` gives asymptotic stability).

All nested integrals are carried as ODE states: ``I1' = d* I1 + |C|``,
``K' = -E K + |C|``, ``J' = a* + |B| K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ode
from .expr import TimeFunction
from .quaternion import qconj_arr, qmul_arr
from .riccati import RiccatiError, SolutionPair, construct_solution_pair
from .system import (
    BlockSystem,
    ConditionResult,
    ConstantFunction,
    Envelopes,
    ScalarComparisonSystem,
    build_scalar_system,
    check_condition_a,
    check_condition_b,
    default_grid,
    derive_envelopes,
)
from .trend import BOUNDED, DIVERGES_DOWN, DIVERGES_UP, fit_trend

LYAPUNOV = "LyapunovStable"
ASYMPTOTIC = "AsymptoticallyStable"
INCONCLUSIVE = "Inconclusive"

CURVE_TOL = 1e-10
CURVE_STEPS = 400


class CriterionError(RuntimeError):
    pass


@dataclass
class ConditionCurve:
    name: str
    grid: np.ndarray
    values: np.ndarray
    trend: str
    slope: float = 0.0
    label: str = ""

    @property
    def sup(self) -> float:
        return float(np.max(self.values))

    @property
    def final(self) -> float:
        return float(self.values[-1])

    @property
    def bounded(self) -> bool:
        return self.trend == BOUNDED

    @property
    def sup_finite(self) -> bool:
        """Supremum finite on the trend evidence (bounded or drifting down)."""
        return self.trend in (BOUNDED, DIVERGES_DOWN)

    def to_dict(self, series: bool = True) -> dict:
        d = {
            "name": self.name,
            "label": self.label,
            "sup": self.sup,
            "final": self.final,
            "trend": self.trend,
            "slope": self.slope,
        }
        if series:
            d["series"] = {"t": self.grid.tolist(), "value": self.values.tolist()}
        return d


def make_curve(name: str, t, v, label: str = "") -> ConditionCurve:
    fit = fit_trend(t, v)
    return ConditionCurve(name, np.asarray(t, dtype=float), np.asarray(v, dtype=float), fit.trend,
                          float(fit.slope), label)


def _run(rhs: Callable, scalar: ScalarComparisonSystem, y0, horizon: float, tol: float):
    if horizon <= scalar.t0:
        raise CriterionError("horizon must exceed t0")
    res = ode.integrate(rhs, scalar.t0, y0, horizon, rtol=tol, atol=tol * 1e-3,
                        max_step=(horizon - scalar.t0) / CURVE_STEPS)
    if not res.success:
        raise CriterionError(f"integration failed: {res.message}")
    return res


def eval_condition1(scalar: ScalarComparisonSystem, horizon: float, tol: float = CURVE_TOL) -> ConditionCurve:
    d, c = scalar.d_star, scalar.norm_c
    res = _run(lambda t, s: np.array([d(t) * s[0] + c(t)]), scalar, [0.0], horizon, tol)
    return make_curve("cond1", res.t, res.y[:, 0], "I1(t) = int exp(int_tau^t d*) |C(tau)| dtau")


def _kj_rhs(scalar: ScalarComparisonSystem):
    a, d, b, c = scalar.a_star, scalar.d_star, scalar.norm_b, scalar.norm_c

    def rhs(t, s):
        K = s[0]
        av, dv = a(t), d(t)
        return np.array([-(av - dv) * K + c(t), av + b(t) * K, av - dv])

    return rhs


def eval_condition2(scalar: ScalarComparisonSystem, horizon: float, tol: float = CURVE_TOL) -> ConditionCurve:
    res = _run(_kj_rhs(scalar), scalar, [0.0, 0.0, 0.0], horizon, tol)
    return make_curve("cond2", res.t, res.y[:, 1], "J(t) = int [a* + |B| K]")


@dataclass
class Condition2Prime:
    e_curve: ConditionCurve
    j_curve: ConditionCurve
    satisfied: bool

    def to_dict(self, series: bool = True) -> dict:
        return {
            "satisfied": self.satisfied,
            "E": self.e_curve.to_dict(series),
            "J": self.j_curve.to_dict(series),
        }


def eval_condition2_prime(scalar: ScalarComparisonSystem, horizon: float, tol: float = CURVE_TOL) -> Condition2Prime:
    res = _run(_kj_rhs(scalar), scalar, [0.0, 0.0, 0.0], horizon, tol)
    e_curve = make_curve("intE", res.t, res.y[:, 2], "int E = int (a* - d*)")
    j_curve = make_curve("cond2", res.t, res.y[:, 1], "J(t) = int [a* + |B| K]")
    ok = e_curve.trend == DIVERGES_UP and j_curve.trend == DIVERGES_DOWN
    return Condition2Prime(e_curve, j_curve, ok)


@dataclass
class CriterionReport:
    cond_a: ConditionResult
    cond_b: ConditionResult
    cond1: ConditionCurve
    cond2: ConditionCurve
    cond2prime: Condition2Prime | None
    verdict: str
    notes: list[str] = field(default_factory=list)
    extra_curves: list[ConditionCurve] = field(default_factory=list)
    pair: dict | None = None

    def to_dict(self, series: bool = True) -> dict:
        return {
            "verdict": self.verdict,
            "condA": self.cond_a.to_dict(),
            "condB": self.cond_b.to_dict(),
            "cond1": self.cond1.to_dict(series),
            "cond2": self.cond2.to_dict(series),
            "cond2prime": None if self.cond2prime is None else self.cond2prime.to_dict(series),
            "extra": [c.to_dict(series) for c in self.extra_curves],
            "solution_pair": self.pair,
            "notes": list(self.notes),
        }

    def curves(self) -> list[ConditionCurve]:
        out = [self.cond1, self.cond2]
        if self.cond2prime is not None:
            out.append(self.cond2prime.e_curve)
        return out + list(self.extra_curves)


def assemble_verdict(structural_ok: bool, cond1: ConditionCurve, cond2: ConditionCurve,
                     cond2prime: Condition2Prime | None) -> str:
    if not structural_ok:
        return INCONCLUSIVE
    if cond1.bounded and cond2prime is not None and cond2prime.satisfied:
        return ASYMPTOTIC
    if cond1.bounded and cond2.sup_finite:
        return LYAPUNOV
    return INCONCLUSIVE


def _pair_summary(scalar: ScalarComparisonSystem, horizon: float) -> dict:
    try:
        pair: SolutionPair = construct_solution_pair(scalar, horizon)
    except RiccatiError as exc:
        return {"ok": False, "message": str(exc)}
    return {
        "ok": True,
        "min_y0": float(pair.y0.values.min()),
        "representation_residual": pair.representation_residual,
        "direct_residual": pair.direct_residual,
        "bound_violation": pair.bound_violation,
        "bound_holds": pair.bound_holds,
        "phi_final": float(pair.phi[-1]),
        "psi_final": float(pair.psi[-1]),
    }


def evaluate_scalar(scalar: ScalarComparisonSystem, horizon: float, structural_ok: bool = True,
                    cond_a: ConditionResult | None = None, cond_b: ConditionResult | None = None,
                    notes: list[str] | None = None) -> CriterionReport:
    cond1 = eval_condition1(scalar, horizon)
    c2p = eval_condition2_prime(scalar, horizon)
    cond2 = c2p.j_curve
    verdict = assemble_verdict(structural_ok, cond1, cond2, c2p)
    notes = list(notes or [])
    if not cond1.bounded:
        notes.append(f"condition 1 not bounded (trend {cond1.trend})")
    if not cond2.sup_finite:
        notes.append(f"condition 2 sup not finite (trend {cond2.trend})")
    cond_a = cond_a or ConditionResult("a", True, 0.0, "not checked")
    cond_b = cond_b or ConditionResult("b", True, 0.0, "not checked")
    return CriterionReport(cond_a, cond_b, cond1, cond2, c2p, verdict, notes,
                           pair=_pair_summary(scalar, horizon))


def block_verdict(sys: BlockSystem, env: Envelopes | None = None, horizon: float | None = None,
                      grid_points: int = 12, tol: float = 1e-9) -> CriterionReport:
    """Full pipeline: structural checks, envelopes, majorant, conditions, verdict."""
    horizon = horizon if horizon is not None else sys.t0 + 100.0
    grid = default_grid(sys.t0, horizon, grid_points)
    cond_a = check_condition_a(sys, grid, tol, mode="a")
    cond_b = check_condition_b(sys, grid, tol)
    notes = []
    structural = cond_a.passed and cond_b.passed
    if not structural:
        notes.append("structural conditions a)/b) failed; criterion not applicable")
    if env is None:
        env = derive_envelopes(sys, horizon)
        notes.append("envelopes derived as pointwise max real eigenvalue")
    scalar = build_scalar_system(sys, env, horizon)
    return evaluate_scalar(scalar, horizon, structural, cond_a, cond_b, notes)


# -- second-order front end --------------------------------------------------

def _tf(v, t0) -> TimeFunction:
    return v if isinstance(v, TimeFunction) else TimeFunction(str(v), t0)


class _RealRatio:
    """``Re(q(t) p(t)^{-1})``."""

    def __init__(self, q: TimeFunction, p: TimeFunction, sign: float = 1.0):
        self.q, self.p, self.sign = q, p, sign

    def __call__(self, t):
        if isinstance(t, float):
            pw, px, py, pz = self.p.quat_scalar(t)
            qw, qx, qy, qz = self.q.quat_scalar(t)
            # real part of q conj(p) / |p|^2
            return self.sign * (qw * pw + qx * px + qy * py + qz * pz) / (pw * pw + px * px + py * py + pz * pz)
        pq = self.p.quat(t)
        inv = qconj_arr(pq) / np.sum(pq * pq, axis=-1)[..., None]
        v = self.sign * qmul_arr(self.q.quat(t), inv)[..., 0]
        return float(v) if np.ndim(t) == 0 else v


class _InvModulus:
    def __init__(self, p: TimeFunction):
        self.p = p

    def __call__(self, t):
        if isinstance(t, float):
            return 1.0 / math.hypot(*self.p.quat_scalar(t))
        v = 1.0 / np.linalg.norm(self.p.quat(t), axis=-1)
        return float(v) if np.ndim(t) == 0 else v


class _Modulus:
    def __init__(self, r: TimeFunction):
        self.r = r

    def __call__(self, t):
        if isinstance(t, float):
            return math.hypot(*self.r.quat_scalar(t))
        v = np.linalg.norm(self.r.quat(t), axis=-1)
        return float(v) if np.ndim(t) == 0 else v


def second_order_system(p, q, r, t0: float = 0.0) -> BlockSystem:
    """``(p phi')' + q phi' + r phi = 0`` as ``phi' = psi / p``, ``psi' = -r phi - (q/p) psi``."""
    p, q, r = (_tf(v, t0).source for v in (p, q, r))
    return BlockSystem.from_expressions(
        A=[["0"]], B=[[f"1/({p})"]], C=[[f"-({r})"]], D=[[f"-({q})/({p})"]],
        t0=t0, name="second-order",
    )


def _check_p(p: TimeFunction, t0: float, horizon: float) -> None:
    g = np.linspace(t0, horizon, 4001)
    mod = np.linalg.norm(p.quat(g), axis=-1)
    if np.any(mod == 0.0) or (p.is_real and np.any(np.diff(np.sign(p.real(g))) != 0)):
        raise CriterionError("p vanishes on the grid")


def second_order_verdict(p, q, r, horizon: float, t0: float = 0.0) -> CriterionReport:
    """Lyapunov stability of ``(p phi')' + q phi' + r phi = 0`` when both
    ``I1(t) = int exp(-int_tau^t Re(q/p)) |r|`` and
    ``I2(t) = int dtau/|p| int exp(-int_xi^tau Re(q/p)) |r| dxi`` stay bounded."""
    p, q, r = _tf(p, t0), _tf(q, t0), _tf(r, t0)
    _check_p(p, t0, horizon)
    scalar = ScalarComparisonSystem(
        a_star=ConstantFunction(0.0),
        d_star=_RealRatio(q, p, -1.0),
        norm_b=_InvModulus(p),
        norm_c=_Modulus(r),
        t0=t0,
        label="second-order",
    )
    cond1 = eval_condition1(scalar, horizon)
    cond2 = eval_condition2(scalar, horizon)
    cond2.label = "I2(t) = int dtau/|p| int exp(-int_xi^tau Re(q/p)) |r| dxi"
    cond1.label = "I1(t) = int exp(-int_tau^t Re(q/p)) |r| dtau"
    verdict = LYAPUNOV if cond1.bounded and cond2.bounded else INCONCLUSIVE
    scalar_ok = ConditionResult("a", True, 0.0, "scalar", ["A: scalar", "D: scalar"])
    notes = []
    if verdict == INCONCLUSIVE:
        notes.append(f"I1 trend {cond1.trend}, I2 trend {cond2.trend}")
    return CriterionReport(scalar_ok, ConditionResult("b", True, 0.0, "scalar", ["A: scalar", "D: scalar"]),
                           cond1, cond2, None, verdict, notes)


@dataclass
class ExclusionResult:
    applicable: bool
    excluded: bool
    reason: str
    witness_min_phi: float | None = None
    witness_nondecreasing: bool | None = None


def exclusion_check(p, q, r, horizon: float, t0: float = 0.0) -> ExclusionResult:
    """Asymptotic stability is impossible when ``p > 0``, ``r <= 0`` and ``q`` is real.

    The witness is the solution with ``phi(t0) = 1, p phi'(t0) = 0``, which
    stays positive and non-decreasing.
    """
    p, q, r = _tf(p, t0), _tf(q, t0), _tf(r, t0)
    g = np.linspace(t0, horizon, 4001)
    if not (p.is_real and q.is_real and r.is_real):
        return ExclusionResult(False, False, "p, q, r must be real-valued")
    pv, rv = p.real(g), r.real(g)
    if np.any(pv <= 0):
        return ExclusionResult(False, False, "p must be positive")
    if np.any(rv > 0):
        return ExclusionResult(False, False, "r must be non-positive")

    def rhs(t, s):
        pt = p.real(t)
        return np.array([s[1] / pt, -r.real(t) * s[0] - q.real(t) / pt * s[1]])

    res = ode.integrate(rhs, t0, [1.0, 0.0], horizon, rtol=1e-10, atol=1e-12,
                        max_step=(horizon - t0) / 200, escape_components=[0, 1], escape_threshold=1e300)
    phi = res.y[:, 0]
    nondecr = bool(np.all(np.diff(phi) >= -1e-9 * np.maximum(1.0, np.abs(phi[1:]))))
    return ExclusionResult(True, True, "p > 0, r <= 0, q real", float(phi.min()), nondecr)


def apply_exclusion(report: CriterionReport, excl: ExclusionResult) -> CriterionReport:
    if excl.excluded and report.verdict == ASYMPTOTIC:
        report.verdict = LYAPUNOV
        report.notes.append("asymptotic claim withdrawn: a positive non-decreasing solution exists")
    if excl.excluded:
        report.notes.append("asymptotic stability excluded (p > 0, r <= 0, q real)")
    return report
