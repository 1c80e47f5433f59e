import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvstab.quaternion import (
    I, J, K, ONE, QMatrix, Quaternion, QuaternionError, common_unit, cyclic_matrix, exp_norm_bound,
    is_j_unitary, is_normal, left_mult_matrix, op_norm, qexp, qmul, random_unit_imaginary,
    random_unitary_complex, real_embed, real_unembed,
)

finite = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda x: x == 0.0 or abs(x) > 1e-60)
quats = st.builds(Quaternion, finite, finite, finite, finite)


def test_unit_products():
    assert qmul(I, J) == K
    assert qmul(J, I) == -K
    assert qmul(J, K) == I
    assert qmul(K, I) == J
    for u in (I, J, K):
        assert qmul(u, u) == -ONE
    assert qmul(qmul(I, J), K) == -ONE


def test_identity_and_known_product():
    q = Quaternion(0.3, -1.2, 2.0, 0.5)
    assert qmul(q, ONE) == q
    assert (Quaternion(1, 1) * Quaternion(1, 0, 1)).isclose(Quaternion(1, 1, 1, 1))


def test_product_matches_left_multiplication_matrix():
    a, b = Quaternion(1, 1), Quaternion(1, 0, 1)
    via_matrix = left_mult_matrix(a) @ left_mult_matrix(b) @ np.array([1.0, 0, 0, 0])
    assert np.allclose(via_matrix, [1, 1, 1, 1])


def test_conjugate_and_modulus():
    q = Quaternion(1, -2, 3, -4)
    assert q.norm2() == 30.0
    assert (q * q.conj()).isclose(Quaternion(30.0))
    assert (q * q.inverse()).isclose(ONE)
    with pytest.raises(ZeroDivisionError):
        Quaternion(0.0).inverse()


@settings(max_examples=1000)
@given(quats, quats)
def test_modulus_is_multiplicative(a, b):
    lhs = abs(a * b)
    rhs = abs(a) * abs(b)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@given(quats, quats, quats)
def test_associative_and_distributive(a, b, c):
    scale = max(1.0, abs(a) * abs(b) * abs(c))
    assert ((a * b) * c - a * (b * c)).norm2() ** 0.5 <= 1e-12 * scale
    scale2 = max(1.0, abs(a) * (abs(b) + abs(c)))
    assert (a * (b + c) - (a * b + a * c)).norm2() ** 0.5 <= 1e-12 * scale2


def test_op_norm_examples():
    assert op_norm(QMatrix.identity(3)) == pytest.approx(1.0)
    assert op_norm(QMatrix.diag([3, Quaternion(0, 4)])) == pytest.approx(4.0)
    rng = np.random.default_rng(5)
    U = QMatrix.from_complex(random_unitary_complex(3, rng), random_unit_imaginary(rng))
    assert is_j_unitary(U)
    assert op_norm(U) == pytest.approx(1.0, abs=1e-10)
    assert op_norm(U.H) == pytest.approx(1.0, abs=1e-10)


def test_normality_examples():
    V = QMatrix([[1, Quaternion(0, 1, 2)], [Quaternion(0, -1, -2), 3]])
    assert V.H.allclose(V)
    assert is_normal(V)
    assert is_normal(cyclic_matrix(4))
    assert not is_normal(QMatrix([[0, 1], [0, 0]]))


def test_conjugate_transpose_involution():
    rng = np.random.default_rng(1)
    M = QMatrix(rng.normal(size=(2, 3, 4)))
    assert M.H.H.allclose(M)
    assert M.H.shape == (3, 2)


def test_common_unit():
    assert common_unit(np.zeros((2, 2, 4))) == I
    u = random_unit_imaginary(np.random.default_rng(2))
    M = QMatrix.from_complex([[1 + 2j, -1j], [0.5, 3]], u)
    got = common_unit(M.array)
    assert got is not None
    assert abs(abs(got.x * u.x + got.y * u.y + got.z * u.z) - 1.0) < 1e-12
    assert common_unit(QMatrix([[I, J]]).array) is None


def test_exp_norm_bound_examples():
    lhs, rhs = exp_norm_bound(QMatrix.identity(1), [0])
    assert (lhs, rhs) == (pytest.approx(1.0), pytest.approx(1.0))
    lhs, rhs = exp_norm_bound(QMatrix.identity(1), [I])
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    U = QMatrix.from_complex(random_unitary_complex(2, rng))
    lhs, rhs = exp_norm_bound(U, [1, -1])
    assert rhs == pytest.approx(math.e)
    assert lhs <= rhs + 1e-9
    with pytest.raises(QuaternionError):
        exp_norm_bound(QMatrix([[1, 1], [0, 1]]), [0, 0])


def test_qexp_modulus():
    q = Quaternion(0.5, 1.0, -2.0, 0.3)
    assert abs(qexp(q)) == pytest.approx(math.exp(0.5))
    assert qexp(Quaternion(0, math.pi)).isclose(-ONE, 1e-12)


def _rand_q(rng, *shape):
    return rng.normal(size=shape + (4,))


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_embedding_is_homomorphism(seed, r, k, c):
    rng = np.random.default_rng(seed)
    M = QMatrix(_rand_q(rng, r, k))
    N = QMatrix(_rand_q(rng, k, c))
    lhs = real_embed((M @ N).array)
    rhs = real_embed(M.array) @ real_embed(N.array)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())
    assert np.allclose(real_unembed(real_embed(M.array)), M.array)
    v = _rand_q(rng, k)
    Mv = M.apply(v)
    emb = real_embed(M.array) @ v.reshape(-1)
    assert np.allclose(emb, Mv.reshape(-1), rtol=1e-12, atol=1e-12 * np.abs(emb).max())
    assert np.linalg.norm(v.reshape(-1)) == pytest.approx(math.sqrt(np.sum(v * v)))


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_op_norm_submultiplicative(seed, n):
    rng = np.random.default_rng(seed)
    M = QMatrix(_rand_q(rng, n, n))
    N = QMatrix(_rand_q(rng, n, n))
    assert op_norm(M @ N) <= op_norm(M) * op_norm(N) * (1 + 1e-10)


def test_left_multiplication_matches_product_on_arrays():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 10, 4))
    got = np.einsum("nij,nj->ni", left_mult_matrix(a), b)
    want = np.array([(Quaternion.from_array(x) * Quaternion.from_array(y)).as_array() for x, y in zip(a, b)])
    assert np.allclose(got, want)
