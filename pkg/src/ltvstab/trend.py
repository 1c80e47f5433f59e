"""Finite-horizon boundedness classification of sampled curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDED = "bounded"
DIVERGES_UP = "divergesUp"
DIVERGES_DOWN = "divergesDown"
UNRESOLVED = "unresolved"

WINDOW = 0.2
REL_EPS = 1e-3
RATE_GUARD = 0.1


@dataclass(frozen=True)
class TrendFit:
    trend: str
    slope: float
    eps: float
    residual: float


def fit_trend(t, v, rel_eps: float = REL_EPS, window: float = WINDOW) -> TrendFit:
    """Least-squares slope over the last ``window`` fraction of the horizon.

    ``|slope| < rel_eps * max|v|`` is bounded, provided the tail slope is
    also below ``RATE_GUARD`` times the mean rate ``max|v| / span`` (without
    this guard a linear ramp looks flat once the span exceeds 1/rel_eps).
    Otherwise the slope counts as divergence only when the change it predicts
    across the window exceeds the largest residual of the fit; if not, the
    fit is ambiguous.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.size < 2 or not np.all(np.isfinite(v)):
        return TrendFit(UNRESOLVED, np.nan, np.nan, np.nan)
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return TrendFit(BOUNDED, 0.0, 0.0, 0.0)
    eps = rel_eps * scale
    mask = t >= t[-1] - window * (t[-1] - t[0])
    if np.count_nonzero(mask) < 5:
        return TrendFit(UNRESOLVED, np.nan, eps, np.nan)
    tw, vw = t[mask], v[mask]
    A = np.vstack([tw - tw.mean(), np.ones_like(tw)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, vw, rcond=None)
    resid = float(np.max(np.abs(vw - A @ np.array([slope, icpt]))))
    span = t[-1] - t[0]
    if abs(slope) < eps and abs(slope) * span < RATE_GUARD * scale:
        return TrendFit(BOUNDED, float(slope), eps, resid)
    if abs(slope) * (tw[-1] - tw[0]) > resid:
        return TrendFit(DIVERGES_UP if slope > 0 else DIVERGES_DOWN, float(slope), eps, resid)
    return TrendFit(UNRESOLVED, float(slope), eps, resid)


def classify_trend(t, v, rel_eps: float = REL_EPS, window: float = WINDOW) -> str:
    return fit_trend(t, v, rel_eps, window).trend
