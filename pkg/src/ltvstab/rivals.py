"""Classical stability tests used as comparison baselines.

* logarithmic norms (Lozinskii measures) of the full coefficient matrix;
* the spectral precondition of the freezing method;
* integral-norm estimates in the style of Lyapunov and Bogdanov.

Each test returns a :class:`RivalReport` whose ``curve`` backs the verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .criteria import ConditionCurve, make_curve
from .quaternion import QMatrix, complex_embed, max_real_eig_arr, op_norm_arr, qconj_arr
from .system import BlockSystem

STABLE = "Stable"
INCONCLUSIVE = "Inconclusive"

LOZINSKII = {"I": "LozinskiiI", "II": "LozinskiiII", "III": "LozinskiiIII"}
FREEZING = "Freezing"
LYAPUNOV_BOGDANOV = "LyapunovBogdanov"

PRECONDITION_FAILED = "precondition failed"
PRECONDITION_PASSED = "precondition passed (full test not implemented)"


@dataclass
class RivalReport:
    method: str
    applicable: bool
    verdict: str
    curve: ConditionCurve
    label: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self, series: bool = True) -> dict:
        return {
            "method": self.method,
            "applicable": self.applicable,
            "verdict": self.verdict,
            "label": self.label,
            "curve": self.curve.to_dict(series),
            "extra": self.extra,
        }


def _as_array(M) -> np.ndarray:
    return M.array if isinstance(M, QMatrix) else np.asarray(M, dtype=float)


def lozinskii_norm(M, kind: str):
    """Logarithmic norm of a square quaternion matrix (or a stack of them).

    ``I``: row measure ``max_i Re m_ii + sum_{j != i} |m_ij|`` (infinity norm);
    ``II``: the column analogue (1-norm);
    ``III``: largest eigenvalue of the Hermitian part (2-norm).
    """
    a = _as_array(M)
    n = a.shape[-3]
    if a.shape[-2] != n:
        raise ValueError("logarithmic norm needs a square matrix")
    if kind in ("I", "II"):
        mod = np.linalg.norm(a, axis=-1)
        diag = np.arange(n)
        off = mod.copy()
        off[..., diag, diag] = 0.0
        re_diag = a[..., diag, diag, 0]
        sums = off.sum(axis=-1) if kind == "I" else off.sum(axis=-2)
        out = (re_diag + sums).max(axis=-1)
    elif kind == "III":
        herm = 0.5 * (a + qconj_arr(np.swapaxes(a, -3, -2)))
        out = np.linalg.eigvalsh(complex_embed(herm))[..., -1]
    else:
        raise ValueError(f"unknown logarithmic norm kind {kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def dense_grid(t0: float, horizon: float) -> np.ndarray:
    span = horizon - t0
    if span <= 0:
        raise ValueError("horizon must exceed t0")
    n = int(np.clip(20 * span, 2000, 40000)) + 1
    return np.linspace(t0, horizon, n)


def lozinskii_verdict(sys: BlockSystem, kind: str, horizon: float) -> RivalReport:
    """Stable iff ``int gamma_kind`` is bounded above on the horizon."""
    t = dense_grid(sys.t0, horizon)
    gamma = lozinskii_norm(sys.full(t), kind)
    integral = cumulative_trapezoid(gamma, t, initial=0.0)
    curve = make_curve(f"gamma_{kind}", t, integral, f"int gamma_{kind}")
    stable = curve.sup_finite
    return RivalReport(
        LOZINSKII[kind], True, STABLE if stable else INCONCLUSIVE, curve,
        f"int gamma_{kind} {curve.trend}",
        {"min_gamma": float(gamma.min()), "max_gamma": float(gamma.max())},
    )


def freezing_check(sys: BlockSystem, horizon: float) -> RivalReport:
    """Spectral precondition: frozen spectra uniformly in the open left half-plane."""
    t = dense_grid(sys.t0, horizon)
    abscissa = max_real_eig_arr(sys.full(t))
    curve = make_curve("spectral_abscissa", t, abscissa, "max Re eig of the frozen matrix")
    sup = float(abscissa.max())
    extra = {"sup_abscissa": sup}
    if sup >= 0.0:
        return RivalReport(FREEZING, False, INCONCLUSIVE, curve, PRECONDITION_FAILED, extra)
    constant = all(blk.is_constant for blk in (sys.A, sys.B, sys.C, sys.D))
    if constant:
        return RivalReport(FREEZING, True, STABLE, curve, "constant Hurwitz matrix", extra)
    return RivalReport(FREEZING, True, INCONCLUSIVE, curve, PRECONDITION_PASSED, extra)


def lyapunov_bogdanov_check(sys: BlockSystem, horizon: float) -> RivalReport:
    """Integral-norm estimate: ``||x(t)|| <= exp(int ||M||) ||x(t0)||``.

    Per-entry absolute integrals are recorded alongside.
    """
    t = dense_grid(sys.t0, horizon)
    full = sys.full(t)
    integral = cumulative_trapezoid(op_norm_arr(full), t, initial=0.0)
    curve = make_curve("norm_integral", t, integral, "int ||M||")
    entries = cumulative_trapezoid(np.linalg.norm(full, axis=-1), t, axis=0)[-1]
    stable = curve.bounded
    return RivalReport(
        LYAPUNOV_BOGDANOV, True, STABLE if stable else INCONCLUSIVE, curve,
        f"integral-norm estimate, int ||M|| {curve.trend}",
        {"entry_integrals": np.round(entries, 12).tolist()},
    )


RIVALS = ("I", "II", "III", "freezing", "lyapunov")


def run_rivals(sys: BlockSystem, horizon: float, which=RIVALS) -> list[RivalReport]:
    out = []
    for name in which:
        if name in LOZINSKII:
            out.append(lozinskii_verdict(sys, name, horizon))
        elif name == "freezing":
            out.append(freezing_check(sys, horizon))
        elif name == "lyapunov":
            out.append(lyapunov_bogdanov_check(sys, horizon))
        else:
            raise ValueError(f"unknown rival method {name!r}")
    return out
