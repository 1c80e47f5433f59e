"""Empirical checks by direct integration of the block system.

Quaternion vectors are integrated through the real embedding: a state
``(Phi, Psi)`` with ``m + n`` quaternion entries becomes a real vector of
length ``4(m + n)``, and ``x' = M(t) x`` uses the real ``4N x 4N`` image of
the full coefficient matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ode
from .quaternion import max_real_eig_arr, real_embed
from .system import BlockSystem, Envelopes, ModelError, build_scalar_system, check_condition_a, \
    check_condition_b, default_grid
from .trend import BOUNDED, DIVERGES_DOWN, fit_trend

DECAY_THRESHOLD = 1e-3
GROWTH_THRESHOLD = 1e3
PEAK_GROWTH = 1e6
PEAK_BOUNDED = 10.0

DECAYING = "decaying"
BOUNDED_EMPIRICAL = "bounded"
GROWING = "growing"
UNRESOLVED = "unresolved"


class VerifierError(RuntimeError):
    pass


@dataclass
class TrajectorySet:
    """``states[k, :, j]`` is trajectory ``j`` at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    initial_basis: str
    status: str = "ok"

    @property
    def count(self) -> int:
        return self.states.shape[2]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def block_norms(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Norms of the ``Phi`` (first ``m`` quaternions) and ``Psi`` parts."""
        return (np.linalg.norm(self.states[:, : 4 * m], axis=1),
                np.linalg.norm(self.states[:, 4 * m:], axis=1))


def embed_vector(v, length: int) -> np.ndarray:
    """Quaternion vector ``(k, 4)`` (or real/flat input) to a flat real vector."""
    a = np.asarray(v, dtype=float)
    if a.ndim == 1 and a.size == length:
        return a.copy()
    if a.ndim == 1 and a.size * 4 == length:
        out = np.zeros((a.size, 4))
        out[:, 0] = a
        return out.reshape(-1)
    if a.ndim == 2 and a.shape[1] == 4 and a.size == length:
        return a.reshape(-1)
    raise ModelError(f"initial vector of shape {a.shape} does not fit dimension {length // 4}")


def _linear_rhs(sys: BlockSystem, k: int):
    N = 4 * sys.dim

    def rhs(t, x):
        M = sys.real_matrix(t)
        return (M @ x.reshape(N, k)).reshape(-1)

    return rhs


def integrate_initial_set(sys: BlockSystem, X0: np.ndarray, horizon: float, tol: float = 1e-9,
                          basis: str = "custom") -> TrajectorySet:
    """Integrate the columns of ``X0`` (shape ``(4N, k)``) together."""
    X0 = np.asarray(X0, dtype=float)
    N, k = X0.shape
    if N != 4 * sys.dim:
        raise ModelError("initial set has the wrong dimension")
    res = ode.integrate(_linear_rhs(sys, k), sys.t0, X0.reshape(-1), horizon, rtol=tol, atol=tol * 1e-3,
                        max_step=(horizon - sys.t0) / 200)
    if res.status == "underflow":
        raise VerifierError(res.message)
    return TrajectorySet(res.t, res.y.reshape(len(res.t), N, k), basis, res.status)


def integrate_block_system(sys: BlockSystem, Phi0, Psi0, horizon: float, tol: float = 1e-9) -> TrajectorySet:
    x0 = np.concatenate([embed_vector(Phi0, 4 * sys.m), embed_vector(Psi0, 4 * sys.n)])
    return integrate_initial_set(sys, x0[:, None], horizon, tol, "single")


def integrate_basis(sys: BlockSystem, horizon: float, tol: float = 1e-9) -> TrajectorySet:
    """All ``4(m + n)`` embedded unit vectors at once (the fundamental matrix)."""
    N = 4 * sys.dim
    return integrate_initial_set(sys, np.eye(N), horizon, tol, f"embedded unit vectors ({N})")


@dataclass
class EmpiricalVerdict:
    classification: str
    peak_norm: float
    end_ratio: float
    trend: str = ""

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "peakNorm": self.peak_norm,
            "endRatio": self.end_ratio,
            "trend": self.trend,
        }


def classify_empirical(traj: TrajectorySet) -> EmpiricalVerdict:
    """Worst case over the trajectories of ``||x(t)|| / ||x(t0)||``."""
    norms = traj.norms()
    init = norms[0]
    keep = init > 0
    if not np.any(keep):
        return EmpiricalVerdict(BOUNDED_EMPIRICAL, 0.0, 0.0, BOUNDED)
    ratio = norms[:, keep] / init[keep]
    worst = ratio.max(axis=1)
    peak = float(worst.max())
    end = float(worst[-1])
    trend = fit_trend(traj.times, worst).trend
    if traj.status == "escaped" or end > GROWTH_THRESHOLD or peak > PEAK_GROWTH:
        cls = GROWING
    elif end < DECAY_THRESHOLD:
        cls = DECAYING
    elif peak <= PEAK_BOUNDED and trend in (BOUNDED, DIVERGES_DOWN):
        cls = BOUNDED_EMPIRICAL
    else:
        cls = UNRESOLVED
    return EmpiricalVerdict(cls, peak, end, trend)


@dataclass
class DominationResult:
    max_violation: float
    holds: bool
    times: np.ndarray
    phi_norm: np.ndarray
    psi_norm: np.ndarray
    phi0: np.ndarray
    psi0: np.ndarray


def _fused_rhs(sys: BlockSystem):
    """Block system plus its majorant with derived envelopes, sharing one
    evaluation of the coefficients per step."""
    m, m4 = sys.m, 4 * sys.m

    def re_eig(block):
        return float(block[0, 0, 0]) if block.shape[0] == 1 else float(max_real_eig_arr(block))

    def norm(emb):
        return float(np.linalg.norm(emb, ord=2)) if emb.size else 0.0

    def rhs(t, z):
        M = sys.full(t)
        R = real_embed(M)
        a, d = re_eig(M[:m, :m]), re_eig(M[m:, m:])
        nb, nc = norm(R[:m4, m4:]), norm(R[m4:, :m4])
        p, q = z[-2], z[-1]
        return np.concatenate([R @ z[:-2], [a * p + nb * q, nc * p + d * q]])

    return rhs


def domination_check(sys: BlockSystem, env: Envelopes | None, Phi0, Psi0, horizon: float,
                     tol: float = 1e-6, ode_tol: float = 1e-10, check_structure: bool = True) -> DominationResult:
    """Integrate the block system and its scalar majorant side by side and
    check ``||Phi|| <= phi0 (1 + tol)``, ``||Psi|| <= psi0 (1 + tol)``."""
    if check_structure:
        grid = default_grid(sys.t0, horizon, 8)
        a = check_condition_a(sys, grid)
        b = check_condition_b(sys, grid)
        if not (a.passed and b.passed):
            raise ModelError("domination needs conditions a) and b)")
    x0 = np.concatenate([embed_vector(Phi0, 4 * sys.m), embed_vector(Psi0, 4 * sys.n)])
    m4 = 4 * sys.m
    s0 = [np.linalg.norm(x0[:m4]), np.linalg.norm(x0[m4:])]
    if env is None:
        rhs = _fused_rhs(sys)
    else:
        scalar = build_scalar_system(sys, env, horizon, exact=True)

        def rhs(t, z):
            x = z[:-2]
            return np.concatenate([sys.real_matrix(t) @ x, scalar.rhs(t, z[-2:])])

    res = ode.integrate(rhs, sys.t0, np.concatenate([x0, s0]), horizon, rtol=ode_tol, atol=ode_tol * 1e-3,
                        max_step=(horizon - sys.t0) / 200)
    if not res.success:
        raise VerifierError(res.message)
    X = res.y[:, :-2]
    pn = np.linalg.norm(X[:, :m4], axis=1)
    qn = np.linalg.norm(X[:, m4:], axis=1)
    p0, q0 = res.y[:, -2], res.y[:, -1]
    floor = 1e-300
    viol = max(
        float(np.max((pn - p0) / np.maximum(p0, floor), initial=-np.inf)),
        float(np.max((qn - q0) / np.maximum(q0, floor), initial=-np.inf)),
    )
    # zero against zero is no violation
    if not np.isfinite(viol):
        viol = 0.0
    holds = bool(np.all(pn <= p0 * (1 + tol) + 1e-14) and np.all(qn <= q0 * (1 + tol) + 1e-14))
    return DominationResult(viol, holds, res.t, pn, qn, p0, q0)
