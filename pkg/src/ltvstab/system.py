"""Two-block linear systems with quaternion coefficients.

    Phi' = A(t) Phi + B(t) Psi
    Psi' = C(t) Phi + D(t) Psi,   t >= t0

This module holds the structural checks on the diagonal blocks (commutation
with their running integrals, normality of interval integrals), the growth
envelopes ``a*``/``d*`` and the real two-dimensional majorant system built
from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.interpolate import CubicSpline

from .expr import Expression, TimeFunction, parse
from .quaternion import common_unit, max_real_eig_arr, op_norm_arr, real_embed

RealFunction = Callable  # float or ndarray -> same shape


class ModelError(ValueError):
    pass


class MatrixFunction:
    """Matrix of :class:`TimeFunction` entries evaluated in bulk."""

    def __init__(self, entries: Sequence[Sequence[TimeFunction]]):
        rows = [list(r) for r in entries]
        if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
            raise ModelError("matrix rows must be non-empty and of equal length")
        self.entries = rows
        self.rows = len(rows)
        self.cols = len(rows[0])

    @classmethod
    def parse(cls, spec, t0: float, constants=None) -> "MatrixFunction":
        """Accepts nested lists of strings or the ``"a, b; c, d"`` row syntax."""
        if isinstance(spec, str):
            spec = [[c.strip() for c in row.split(",")] for row in spec.split(";")]
        elif not isinstance(spec, (list, tuple)):
            spec = [[spec]]
        elif spec and not isinstance(spec[0], (list, tuple)):
            spec = [list(spec)]
        return cls([[e if isinstance(e, TimeFunction) else TimeFunction(e, t0, constants) for e in row] for row in spec])

    @classmethod
    def zeros(cls, rows: int, cols: int, t0: float) -> "MatrixFunction":
        return cls([[TimeFunction("0", t0) for _ in range(cols)] for _ in range(rows)])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __call__(self, t) -> np.ndarray:
        """Quaternion values, shape ``t.shape + (rows, cols, 4)``."""
        ta = np.asarray(t, dtype=float)
        if ta.ndim == 0:
            tf = float(ta)
            return np.array([[f.quat_scalar(tf) for f in row] for row in self.entries])
        out = np.empty(ta.shape + (self.rows, self.cols, 4))
        for i, row in enumerate(self.entries):
            for j, f in enumerate(row):
                out[..., i, j, :] = f.quat(ta)
        return out

    @property
    def is_real(self) -> bool:
        return all(f.is_real for row in self.entries for f in row)

    @property
    def is_constant(self) -> bool:
        return all(f.is_constant for row in self.entries for f in row)

    def is_zero(self) -> bool:
        return all(f.is_zero() for row in self.entries for f in row)

    def sources(self) -> list[list[str]]:
        return [[f.source for f in row] for row in self.entries]


class BlockSystem:
    def __init__(self, A: MatrixFunction, B: MatrixFunction, C: MatrixFunction, D: MatrixFunction,
                 t0: float = 0.0, name: str = ""):
        m, n = A.rows, D.rows
        if A.shape != (m, m) or D.shape != (n, n):
            raise ModelError("A and D must be square")
        if B.shape != (m, n) or C.shape != (n, m):
            raise ModelError(f"B must be {m}x{n} and C {n}x{m}")
        self.A, self.B, self.C, self.D = A, B, C, D
        self.m, self.n = m, n
        self.t0 = float(t0)
        self.name = name

    @classmethod
    def from_expressions(cls, A, B, C, D, t0: float = 0.0, name: str = "", constants=None) -> "BlockSystem":
        Am = MatrixFunction.parse(A, t0, constants)
        Dm = MatrixFunction.parse(D, t0, constants)
        m, n = Am.rows, Dm.rows
        Bm = MatrixFunction.zeros(m, n, t0) if B is None else MatrixFunction.parse(B, t0, constants)
        Cm = MatrixFunction.zeros(n, m, t0) if C is None else MatrixFunction.parse(C, t0, constants)
        return cls(Am, Bm, Cm, Dm, t0, name)

    @property
    def dim(self) -> int:
        return self.m + self.n

    def full(self, t) -> np.ndarray:
        """Full coefficient matrix ``[[A, B], [C, D]]`` as quaternion array."""
        top = np.concatenate([self.A(t), self.B(t)], axis=-2)
        bottom = np.concatenate([self.C(t), self.D(t)], axis=-2)
        return np.concatenate([top, bottom], axis=-3)

    def real_matrix(self, t) -> np.ndarray:
        return real_embed(self.full(t))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "m": self.m,
            "n": self.n,
            "t0": self.t0,
            "A": self.A.sources(),
            "B": self.B.sources(),
            "C": self.C.sources(),
            "D": self.D.sources(),
        }


# -- structural conditions ---------------------------------------------------

@dataclass
class ConditionResult:
    name: str
    passed: bool
    max_violation: float
    mode: str = ""
    witnesses: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_violation": self.max_violation,
            "mode": self.mode,
            "witnesses": list(self.witnesses),
            "notes": list(self.notes),
        }


def default_grid(t0: float, horizon: float, points: int = 12) -> np.ndarray:
    return np.linspace(t0, horizon, points)


def running_integrals(block: MatrixFunction, grid: Sequence[float], t0: float, epsrel: float = 1e-10) -> np.ndarray:
    """``int_{t0}^{tau} block`` for each ``tau`` in ``grid`` (adaptive quadrature)."""
    g = np.asarray(grid, dtype=float)
    if np.any(np.diff(g) < 0) or g[0] < t0 - 1e-12:
        raise ModelError("grid must be sorted and start at or after t0")
    shape = (block.rows, block.cols, 4)
    if block.is_constant:
        val = block(t0)
        return (g - t0)[:, None, None, None] * val[None]
    out = np.zeros((len(g),) + shape)
    acc = np.zeros(shape)
    prev = t0
    for k, tau in enumerate(g):
        if tau > prev:
            piece, err = quad_vec(lambda s: block(s).reshape(-1), prev, tau, epsrel=epsrel, epsabs=1e-13)
            if not np.all(np.isfinite(piece)):
                raise ModelError(f"quadrature failed on [{prev:g}, {tau:g}]")
            acc = acc + piece.reshape(shape)
            prev = tau
        out[k] = acc
    return out


def _commutator_defect(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``||XY - YX|| / (||X|| ||Y||)`` on embedded stacks (0 where either vanishes)."""
    num = np.linalg.norm(X @ Y - Y @ X, ord=2, axis=(-2, -1))
    den = np.linalg.norm(X, ord=2, axis=(-2, -1)) * np.linalg.norm(Y, ord=2, axis=(-2, -1))
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def check_condition_a(sys: BlockSystem, grid: Sequence[float] | None = None, tol: float = 1e-9,
                      mode: str = "a", horizon: float | None = None) -> ConditionResult:
    """Commutation of ``A(t)`` with ``int_{t0}^{tau} A`` (and the same for ``D``).

    Mode ``"a"`` checks every grid pair ``(tau, t)``; mode ``"a'"`` only
    ``tau = t``.
    """
    if grid is None:
        grid = default_grid(sys.t0, horizon if horizon is not None else sys.t0 + 10.0)
    g = np.asarray(grid, dtype=float)
    worst = 0.0
    witnesses = []
    for label, block in (("A", sys.A), ("D", sys.D)):
        if block.rows == 1 and common_unit(block(g)) is not None:
            continue
        vals = real_embed(block(g))  # (N, 4r, 4r)
        ints = real_embed(running_integrals(block, g, sys.t0))
        if mode == "a":
            defect = _commutator_defect(vals[None, :], ints[:, None])  # [tau, t]
        elif mode in ("a'", "a_prime", "aprime"):
            defect = _commutator_defect(vals, ints)[None, :]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        k = np.unravel_index(int(np.argmax(defect)), defect.shape)
        d = float(defect[k])
        if d > tol:
            tau = g[k[0]] if mode == "a" else g[k[1]]
            witnesses.append(f"{label}(t={g[k[1]]:g}) does not commute with its integral up to tau={tau:g} (defect {d:.3g})")
        worst = max(worst, d)
    return ConditionResult("a", worst <= tol, worst, mode, witnesses)


def _normality_defect(M: np.ndarray) -> np.ndarray:
    MH = np.swapaxes(M, -1, -2)
    num = np.linalg.norm(M @ MH - MH @ M, ord=2, axis=(-2, -1))
    den = np.linalg.norm(M, ord=2, axis=(-2, -1)) ** 2
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _witness_class(block: MatrixFunction, vals: np.ndarray, tol: float) -> str:
    if block.rows == 1:
        return "scalar"
    n = block.rows
    off = vals.copy()
    off[..., np.arange(n), np.arange(n), :] = 0.0
    diag = vals[..., np.arange(n), np.arange(n), :]
    scale = max(1.0, float(np.abs(vals).max()))
    unit = common_unit(vals, tol)
    if np.abs(off).max() <= tol * scale and np.abs(diag - diag[..., :1, :]).max() <= tol * scale:
        return "multiple of identity"
    if unit is not None:
        return f"commuting normal family in C_J, J = {unit}"
    return "commuting normal family"


def check_condition_b(sys: BlockSystem, grid: Sequence[float] | None = None, tol: float = 1e-9,
                      horizon: float | None = None) -> ConditionResult:
    """Unitary diagonalisability of the interval integrals of ``A`` and ``D``.

    Verified through the sufficient route: every ``int_tau^t`` on the grid is
    normal and the family ``{A(t)}`` commutes pairwise.  1x1 blocks pass.
    """
    if grid is None:
        grid = default_grid(sys.t0, horizon if horizon is not None else sys.t0 + 10.0)
    g = np.asarray(grid, dtype=float)
    worst = 0.0
    witnesses, notes = [], ["the D-block display of condition b) is read with the integral of D"]
    for label, block in (("A", sys.A), ("D", sys.D)):
        if block.rows == 1:
            witnesses.append(f"{label}: scalar")
            continue
        vals = block(g)
        ints = running_integrals(block, g, sys.t0)
        diff = ints[None, :] - ints[:, None]  # [tau, t] = int_tau^t
        iu = np.triu_indices(len(g), k=1)
        nd = _normality_defect(real_embed(diff[iu]))
        emb = real_embed(vals)
        cd = _commutator_defect(emb[:, None], emb[None, :])
        d_norm = float(nd.max(initial=0.0))
        d_comm = float(cd.max(initial=0.0))
        if d_norm > tol:
            k = int(np.argmax(nd))
            witnesses.append(f"{label}: integral over [{g[iu[0][k]]:g}, {g[iu[1][k]]:g}] is not normal (defect {d_norm:.3g})")
        if d_comm > tol:
            a, b = np.unravel_index(int(np.argmax(cd)), cd.shape)
            witnesses.append(f"{label}({g[a]:g}) and {label}({g[b]:g}) do not commute (defect {d_comm:.3g})")
        if max(d_norm, d_comm) <= tol:
            witnesses.append(f"{label}: {_witness_class(block, vals, tol)}")
        worst = max(worst, d_norm, d_comm)
    return ConditionResult("b", worst <= tol, worst, "b", witnesses, notes)


# -- envelopes ---------------------------------------------------------------

class SampledFunction:
    """Cubic spline through a tabulated real function.

    A monotone (PCHIP) interpolant was tried first; its flattened slopes at
    extrema cost four orders of accuracy on oscillating envelopes.  Values of
    a non-negative table are clipped at zero to undo spline overshoot.
    """

    def __init__(self, grid: np.ndarray, values: np.ndarray, label: str = ""):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.label = label
        self._interp = CubicSpline(self.grid, self.values, extrapolate=False)
        self._nonneg = bool(np.all(self.values >= 0))
        self.lo, self.hi = float(self.grid[0]), float(self.grid[-1])

    def __call__(self, t):
        tc = np.clip(t, self.lo, self.hi)
        out = self._interp(tc)
        if self._nonneg:
            out = np.maximum(out, 0.0)
        return float(out) if np.ndim(t) == 0 else out

    def integral(self, a: float, b: float) -> float:
        # exact for the interpolant; quad struggles with thousands of knots
        lo, hi = max(a, self.lo), min(b, self.hi)
        inner = float(self._interp.integrate(lo, hi)) if hi > lo else 0.0
        return inner + self.values[0] * max(0.0, min(b, self.lo) - a) + self.values[-1] * max(0.0, b - max(a, self.hi))

    def __repr__(self) -> str:
        return f"SampledFunction({self.label!r}, {len(self.grid)} nodes)"


def tabulate(fn: Callable[[np.ndarray], np.ndarray], t0: float, horizon: float, label: str = "",
             base_points: int = 401, rel_change: float = 0.01, max_points: int = 200_000) -> SampledFunction:
    """Tabulate ``fn`` on a grid refined until neighbouring values differ by
    at most ``rel_change`` (relative to the local magnitude, floored at
    ``1e-3 * max|fn|``)."""
    grid = np.linspace(t0, horizon, base_points)
    vals = np.asarray(fn(grid), dtype=float)
    for _ in range(40):
        floor = 1e-3 * max(float(np.max(np.abs(vals))), 1e-300)
        mag = np.maximum(np.maximum(np.abs(vals[:-1]), np.abs(vals[1:])), floor)
        bad = np.abs(np.diff(vals)) > rel_change * mag
        bad &= np.diff(grid) > 1e-9 * max(1.0, abs(horizon))
        if not np.any(bad) or len(grid) >= max_points:
            break
        mids = 0.5 * (grid[:-1][bad] + grid[1:][bad])
        mvals = np.asarray(fn(mids), dtype=float)
        grid = np.concatenate([grid, mids])
        vals = np.concatenate([vals, mvals])
        order = np.argsort(grid, kind="stable")
        grid, vals = grid[order], vals[order]
    return SampledFunction(grid, vals, label)


class ExprFunction:
    """Real part of an expression as a plain callable."""

    def __init__(self, expression: Expression | str, label: str = "", constants=None):
        if not isinstance(expression, Expression):
            expression = parse(expression, constants)
        self.expression = expression
        self.label = label or expression.source

    def __call__(self, t):
        v = self.expression.real(t)
        return float(v) if np.ndim(t) == 0 else np.asarray(v, dtype=float)

    def __repr__(self) -> str:
        return f"ExprFunction({self.label!r})"


class ModulusFunction:
    """``|q(t)|`` for a scalar quaternion expression."""

    def __init__(self, f: TimeFunction):
        self.f = f
        self.label = f"|{f.source}|"

    def __call__(self, t):
        if self.f.is_real:
            v = np.abs(self.f.real(t))
        else:
            v = np.linalg.norm(self.f.quat(t), axis=-1)
        return float(v) if np.ndim(t) == 0 else np.asarray(v, dtype=float)


class ConstantFunction:
    def __init__(self, value: float, label: str | None = None):
        self.value = float(value)
        self.label = label or f"{self.value:g}"

    def __call__(self, t):
        return self.value if np.ndim(t) == 0 else np.full(np.shape(t), self.value)


class BlockFunction:
    """Pointwise scalar statistic of a block, computed on demand."""

    def __init__(self, block: MatrixFunction, stat: Callable[[np.ndarray], np.ndarray], label: str):
        self.block, self.stat, self.label = block, stat, label

    def __call__(self, t):
        v = self.stat(self.block(t))
        return float(v) if np.ndim(t) == 0 else np.asarray(v, dtype=float)


@dataclass
class Envelopes:
    a_star: RealFunction
    d_star: RealFunction
    provenance: str  # "user" or "derived"
    notes: list[str] = field(default_factory=list)


def _scalar_stat(block: MatrixFunction, kind: str, t0: float, horizon: float, exact: bool, label: str):
    """``kind`` is "re_eig" or "norm"."""
    if block.is_zero():
        return ConstantFunction(0.0, "0")
    if block.rows == 1 and block.cols == 1:
        f = block.entries[0][0]
        if kind == "norm":
            return ModulusFunction(f)
        return ExprFunction(f.expression, f"Re({f.source})")
    stat = max_real_eig_arr if kind == "re_eig" else op_norm_arr
    if block.is_constant:
        return ConstantFunction(float(stat(block(t0))), label)
    fn = BlockFunction(block, stat, label)
    if exact:
        return fn
    return tabulate(fn, t0, horizon, label)


def derive_envelopes(sys: BlockSystem, horizon: float | None = None, exact: bool = False) -> Envelopes:
    """Pointwise largest real part of the eigenvalues of ``A(t)`` and ``D(t)``.

    Sharp when the blocks form commuting normal families: the eigenframe is
    then fixed and eigenvalues of an integral are integrals of eigenvalues.
    """
    horizon = horizon if horizon is not None else sys.t0 + 100.0
    a = _scalar_stat(sys.A, "re_eig", sys.t0, horizon, exact, "max Re eig A(t)")
    d = _scalar_stat(sys.D, "re_eig", sys.t0, horizon, exact, "max Re eig D(t)")
    return Envelopes(a, d, "derived")


def user_envelopes(a_star: str, d_star: str, t0: float = 0.0, constants=None) -> Envelopes:
    return Envelopes(
        ExprFunction(TimeFunction(a_star, t0, constants).expression),
        ExprFunction(TimeFunction(d_star, t0, constants).expression),
        "user",
    )


def envelope_defect(sys: BlockSystem, env: Envelopes, grid: Sequence[float]) -> float:
    """Largest ``max_l Re eig(int_tau^t X) - int_tau^t x*`` over grid pairs, for
    ``(X, x*)`` in ``{(A, a*), (D, d*)}``.  Non-positive when the envelopes are valid."""
    g = np.asarray(grid, dtype=float)
    worst = -np.inf
    for block, star in ((sys.A, env.a_star), (sys.D, env.d_star)):
        ints = running_integrals(block, g, sys.t0)
        cum = np.zeros(len(g))
        for k in range(1, len(g)):
            if isinstance(star, SampledFunction):
                piece = star.integral(g[k - 1], g[k])
            else:
                piece = quad(star, g[k - 1], g[k], epsabs=1e-12, epsrel=1e-11, limit=200)[0]
            cum[k] = cum[k - 1] + piece
        for i in range(len(g)):
            for j in range(i + 1, len(g)):
                lhs = float(max_real_eig_arr((ints[j] - ints[i])[None])[0])
                worst = max(worst, lhs - (cum[j] - cum[i]))
    return float(worst)


# -- scalar majorant ---------------------------------------------------------

@dataclass
class ScalarComparisonSystem:
    """``phi' = a* phi + |B| psi``, ``psi' = |C| phi + d* psi``."""

    a_star: RealFunction
    d_star: RealFunction
    norm_b: RealFunction
    norm_c: RealFunction
    t0: float
    label: str = ""

    def E(self, t):
        return self.a_star(t) - self.d_star(t)

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        a, d, b, c = self.a_star(t), self.d_star(t), self.norm_b(t), self.norm_c(t)
        return np.array([a * x[0] + b * x[1], c * x[0] + d * x[1]])

    def check_nonnegative(self, grid) -> bool:
        g = np.asarray(grid, dtype=float)
        return bool(np.all(np.asarray(self.norm_b(g)) >= 0) and np.all(np.asarray(self.norm_c(g)) >= 0))


def scalar_system(a_star, d_star, norm_b, norm_c, t0: float, label: str = "") -> ScalarComparisonSystem:
    """Build a comparison system from constants, expression strings or callables."""

    def wrap(v):
        if isinstance(v, (int, float)):
            return ConstantFunction(v)
        if isinstance(v, (str, Expression)):
            return ExprFunction(v)
        return v

    return ScalarComparisonSystem(wrap(a_star), wrap(d_star), wrap(norm_b), wrap(norm_c), float(t0), label)


def build_scalar_system(sys: BlockSystem, env: Envelopes | None = None, horizon: float | None = None,
                        exact: bool = False) -> ScalarComparisonSystem:
    horizon = horizon if horizon is not None else sys.t0 + 100.0
    env = env if env is not None else derive_envelopes(sys, horizon, exact)
    nb = _scalar_stat(sys.B, "norm", sys.t0, horizon, exact, "||B(t)||")
    nc = _scalar_stat(sys.C, "norm", sys.t0, horizon, exact, "||C(t)||")
    return ScalarComparisonSystem(env.a_star, env.d_star, nb, nc, sys.t0, sys.name)
