"""Quaternion scalars and matrices.

Quaternion arrays are stored as float arrays whose trailing axis holds the
coefficients ``(w, x, y, z)`` of ``1, i, j, k``.  A matrix acts on column
vectors of quaternions by left multiplication; its real embedding replaces
every entry by the 4x4 matrix of left multiplication, which turns the
quaternionic operator norm into an ordinary spectral norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


class QuaternionError(ValueError):
    pass


@dataclass(frozen=True)
class Quaternion:
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float).reshape(4)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def real(self) -> float:
        return self.w

    @property
    def vector(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm2(self) -> float:
        return self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z

    def __abs__(self) -> float:
        return math.sqrt(self.norm2())

    def inverse(self) -> "Quaternion":
        n2 = self.norm2()
        if n2 == 0.0:
            raise ZeroDivisionError("quaternion inverse of zero")
        return Quaternion(self.w / n2, -self.x / n2, -self.y / n2, -self.z / n2)

    def is_real(self, tol: float = 0.0) -> bool:
        return max(abs(self.x), abs(self.y), abs(self.z)) <= tol

    def __add__(self, other):
        o = _coerce(other)
        return Quaternion(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)

    __radd__ = __add__

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        return qmul(self, _coerce(other))

    def __rmul__(self, other):
        return qmul(_coerce(other), self)

    def __truediv__(self, other):
        return self * _coerce(other).inverse()

    def isclose(self, other, tol: float = 1e-12) -> bool:
        o = _coerce(other)
        return float(np.max(np.abs(self.as_array() - o.as_array()))) <= tol

    def __str__(self) -> str:
        return f"{self.w:g}{self.x:+g}i{self.y:+g}j{self.z:+g}k"


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def _coerce(v) -> Quaternion:
    if isinstance(v, Quaternion):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Quaternion(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return Quaternion(v.real, v.imag)
    raise TypeError(f"cannot interpret {v!r} as a quaternion")


def qmul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product ``a b``."""
    return Quaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


# -- vectorised kernels on (..., 4) arrays ---------------------------------

def qmul_arr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def qconj_arr(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


_LM_INDEX = np.array([[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]])
_LM_SIGN = np.array([[1.0, -1, -1, -1], [1, 1, -1, 1], [1, 1, 1, -1], [1, -1, 1, 1]])


def left_mult_matrix(q) -> np.ndarray:
    """4x4 real matrix of ``p -> q p`` (broadcasts over leading axes)."""
    q = np.asarray(q.as_array() if isinstance(q, Quaternion) else q, dtype=float)
    return q[..., _LM_INDEX] * _LM_SIGN


def real_embed(arr: np.ndarray) -> np.ndarray:
    """Real embedding of a quaternion matrix stack ``(..., r, c, 4)``.

    Returns ``(..., 4r, 4c)``; the map is an algebra homomorphism and
    preserves Euclidean norms of vectors.
    """
    arr = np.asarray(arr, dtype=float)
    L = left_mult_matrix(arr)  # (..., r, c, 4, 4)
    r, c = arr.shape[-3], arr.shape[-2]
    L = np.swapaxes(L, -3, -2)  # (..., r, 4, c, 4)
    return L.reshape(arr.shape[:-3] + (4 * r, 4 * c))


def real_unembed(mat: np.ndarray) -> np.ndarray:
    """Inverse of :func:`real_embed` (reads the first column of each block)."""
    mat = np.asarray(mat, dtype=float)
    r, c = mat.shape[-2] // 4, mat.shape[-1] // 4
    blocks = mat.reshape(mat.shape[:-2] + (r, 4, c, 4))
    return np.moveaxis(blocks[..., :, :, :, 0], -2, -1)


def embed_vector(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(-1)


def complex_embed(arr: np.ndarray) -> np.ndarray:
    """Complex 2r x 2c embedding ``[[A, B], [-conj(B), conj(A)]]``.

    A quaternion ``q = (w + x i) + (y + z i) j`` contributes ``A = w + ix``
    and ``B = y + iz``.  Eigenvalues come in conjugate pairs whose real parts
    are the real parts of the quaternionic (right) eigenvalues.
    """
    arr = np.asarray(arr, dtype=float)
    A = arr[..., 0] + 1j * arr[..., 1]
    B = arr[..., 2] + 1j * arr[..., 3]
    top = np.concatenate([A, B], axis=-1)
    bottom = np.concatenate([-B.conj(), A.conj()], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def op_norm_arr(arr: np.ndarray) -> np.ndarray:
    """Operator norms of a stack of quaternion matrices ``(..., r, c, 4)``."""
    emb = real_embed(arr)
    if emb.size == 0:
        return np.zeros(emb.shape[:-2])
    return np.linalg.norm(emb, ord=2, axis=(-2, -1))


def max_real_eig_arr(arr: np.ndarray) -> np.ndarray:
    """Largest real part of the eigenvalues of square quaternion matrices."""
    arr = np.asarray(arr, dtype=float)
    if arr.shape[-3] == 1:
        return arr[..., 0, 0, 0].copy()
    return np.linalg.eigvals(complex_embed(arr)).real.max(axis=-1)


def unit_imaginary(q: Quaternion, tol: float = DEFAULT_TOL) -> bool:
    """True when ``q`` squares to -1, i.e. ``|q| = 1`` and ``Re q = 0``."""
    return abs(q.w) <= tol and abs(abs(q) - 1.0) <= tol


def qexp(q: Quaternion) -> Quaternion:
    r = math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
    ew = math.exp(q.w)
    if r == 0.0:
        return Quaternion(ew)
    s = ew * math.sin(r) / r
    return Quaternion(ew * math.cos(r), s * q.x, s * q.y, s * q.z)


class QMatrix:
    """Dense quaternion matrix (immutable)."""

    __slots__ = ("_a",)

    def __init__(self, entries):
        if isinstance(entries, QMatrix):
            a = entries._a
        else:
            a = _to_array(entries)
        if a.ndim != 3 or a.shape[-1] != 4 or a.shape[0] < 1 or a.shape[1] < 1:
            raise QuaternionError(f"bad quaternion matrix shape {a.shape}")
        a = np.array(a, dtype=float)
        a.setflags(write=False)
        self._a = a

    @classmethod
    def identity(cls, n: int) -> "QMatrix":
        a = np.zeros((n, n, 4))
        a[np.arange(n), np.arange(n), 0] = 1.0
        return cls(a)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "QMatrix":
        return cls(np.zeros((rows, cols, 4)))

    @classmethod
    def diag(cls, values: Sequence) -> "QMatrix":
        n = len(values)
        a = np.zeros((n, n, 4))
        for l, v in enumerate(values):
            a[l, l] = _coerce(v).as_array()
        return cls(a)

    @classmethod
    def from_complex(cls, Z, unit: Quaternion = I) -> "QMatrix":
        """Map a complex matrix into C_J^{r x c} via ``a + ib -> a + J b``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        u = unit.as_array()
        a = Z.real[..., None] * np.array([1.0, 0, 0, 0]) + Z.imag[..., None] * u
        return cls(a)

    @property
    def array(self) -> np.ndarray:
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, idx) -> Quaternion:
        i, j = idx
        return Quaternion.from_array(self._a[i, j])

    @property
    def H(self) -> "QMatrix":
        """Conjugate transpose."""
        return QMatrix(qconj_arr(np.swapaxes(self._a, 0, 1)))

    def __matmul__(self, other) -> "QMatrix":
        other = other if isinstance(other, QMatrix) else QMatrix(other)
        if self.cols != other.rows:
            raise QuaternionError(f"shape mismatch {self.shape} @ {other.shape}")
        prod = qmul_arr(self._a[:, :, None, :], other._a[None, :, :, :])
        return QMatrix(prod.sum(axis=1))

    def __add__(self, other) -> "QMatrix":
        return QMatrix(self._a + QMatrix(other)._a)

    def __sub__(self, other) -> "QMatrix":
        return QMatrix(self._a - QMatrix(other)._a)

    def __neg__(self) -> "QMatrix":
        return QMatrix(-self._a)

    def scale(self, q, side: str = "left") -> "QMatrix":
        qa = _coerce(q).as_array()
        if side == "left":
            return QMatrix(qmul_arr(np.broadcast_to(qa, self._a.shape), self._a))
        return QMatrix(qmul_arr(self._a, np.broadcast_to(qa, self._a.shape)))

    def apply(self, v) -> np.ndarray:
        """``M v`` for a quaternion vector given as ``(cols, 4)``."""
        v = np.asarray(v, dtype=float).reshape(self.cols, 4)
        return qmul_arr(self._a, v[None, :, :]).sum(axis=1)

    def real_embedding(self) -> np.ndarray:
        return real_embed(self._a)

    def complex_embedding(self) -> np.ndarray:
        return complex_embed(self._a)

    def is_complex_in(self, unit: Quaternion, tol: float = DEFAULT_TOL) -> bool:
        """True if every entry lies in C_J for ``J = unit``."""
        u = unit.as_array()[1:]
        vec = self._a[..., 1:]
        par = vec - (vec @ u)[..., None] * u
        return bool(np.max(np.abs(par), initial=0.0) <= tol * max(1.0, float(np.max(np.abs(vec), initial=0.0))))

    def common_unit(self, tol: float = DEFAULT_TOL) -> Quaternion | None:
        return common_unit(self._a, tol)

    def allclose(self, other, tol: float = 1e-12) -> bool:
        o = other if isinstance(other, QMatrix) else QMatrix(other)
        return self.shape == o.shape and bool(np.max(np.abs(self._a - o._a)) <= tol)

    def __repr__(self) -> str:
        return f"QMatrix({self.rows}x{self.cols})"


def _to_array(entries) -> np.ndarray:
    if isinstance(entries, np.ndarray) and entries.dtype != object:
        if entries.ndim == 3 and entries.shape[-1] == 4:
            return entries.astype(float)
        if entries.ndim == 2:
            if np.iscomplexobj(entries):
                out = np.zeros(entries.shape + (4,))
                out[..., 0] = entries.real
                out[..., 1] = entries.imag
                return out
            out = np.zeros(entries.shape + (4,))
            out[..., 0] = entries
            return out
    rows = [list(r) for r in entries]
    return np.array([[_coerce(v).as_array() for v in r] for r in rows], dtype=float)


def common_unit(arr: np.ndarray, tol: float = DEFAULT_TOL) -> Quaternion | None:
    """A unit J with every entry of ``arr`` in C_J, or None.

    Real-valued input returns ``i`` (any unit works).
    """
    vec = np.asarray(arr, dtype=float)[..., 1:].reshape(-1, 3)
    norms = np.linalg.norm(vec, axis=1)
    scale = float(norms.max(initial=0.0))
    if scale == 0.0:
        return I
    u = vec[int(np.argmax(norms))] / scale
    par = vec - (vec @ u)[:, None] * u
    if float(np.abs(par).max()) > tol * max(scale, 1.0):
        return None
    return Quaternion(0.0, *u)


def op_norm(M: QMatrix) -> float:
    """Quaternionic operator norm ``sup ||M q|| / ||q||``."""
    return float(np.linalg.norm(M.real_embedding(), ord=2))


def is_normal(M: QMatrix, tol: float = DEFAULT_TOL) -> bool:
    if M.rows != M.cols:
        raise QuaternionError("normality needs a square matrix")
    comm = M @ M.H - M.H @ M
    return op_norm(comm) <= tol * max(op_norm(M) ** 2, np.finfo(float).tiny)


def is_unitary(U: QMatrix, tol: float = DEFAULT_TOL) -> bool:
    if U.rows != U.cols:
        return False
    eye = QMatrix.identity(U.rows)
    return op_norm(U @ U.H - eye) <= tol and op_norm(U.H @ U - eye) <= tol


def is_j_unitary(U: QMatrix, unit: Quaternion | None = None, tol: float = DEFAULT_TOL) -> bool:
    """Unitary with all entries in one complex subfield C_J."""
    if not is_unitary(U, tol):
        return False
    if unit is None:
        return U.common_unit(tol) is not None
    return unit_imaginary(unit, tol) and U.is_complex_in(unit, tol)


def exp_diagonalized(U: QMatrix, m: Iterable) -> QMatrix:
    """``exp(U diag(m) U*) = U diag(e^m) U*`` for unitary ``U``."""
    return U @ QMatrix.diag([qexp(_coerce(v)) for v in m]) @ U.H


def exp_norm_bound(U: QMatrix, m: Sequence, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Norm of ``exp(U diag(m) U*)`` and the bound ``exp(max Re m_l)``."""
    if not is_unitary(U, tol):
        raise QuaternionError("U is not unitary")
    m = [_coerce(v) for v in m]
    if len(m) != U.rows:
        raise QuaternionError("diagonal length does not match U")
    lhs = op_norm(exp_diagonalized(U, m))
    rhs = math.exp(max(v.w for v in m))
    return lhs, rhs


def cyclic_matrix(n: int) -> QMatrix:
    """Cyclic permutation matrix (ones on the superdiagonal and corner)."""
    a = np.zeros((n, n, 4))
    for l in range(n):
        a[l, (l + 1) % n, 0] = 1.0
    return QMatrix(a)


def random_unitary_complex(n: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def random_unit_imaginary(rng: np.random.Generator) -> Quaternion:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return Quaternion(0.0, *v)
