import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvstab.builtins import get_builtin
from ltvstab.criteria import ASYMPTOTIC, block_verdict
from ltvstab.system import BlockSystem, ModelError, derive_envelopes, user_envelopes
from ltvstab.verifier import (
    BOUNDED_EMPIRICAL, DECAYING, GROWING, UNRESOLVED, TrajectorySet, classify_empirical, domination_check,
    embed_vector, integrate_basis, integrate_block_system, integrate_initial_set,
)


def decoupled():
    return BlockSystem.from_expressions(A="-1", B=None, C=None, D="-2")


def test_closed_form_decoupled():
    traj = integrate_block_system(decoupled(), [1.0], [1.0], 10.0, tol=1e-11)
    phi, psi = traj.block_norms(1)
    assert np.allclose(phi[:, 0], np.exp(-traj.times), rtol=1e-8)
    assert np.allclose(psi[:, 0], np.exp(-2 * traj.times), rtol=1e-8)


def test_zero_system_is_constant():
    traj = integrate_basis(get_builtin("zero").build(), 20.0)
    assert np.allclose(traj.states, traj.states[0][None])
    assert classify_empirical(traj).classification == BOUNDED_EMPIRICAL


def test_oscillating_example_decays():
    traj = integrate_basis(get_builtin("sine-forced").build(), 100.0)
    assert traj.count == 8
    v = classify_empirical(traj)
    assert v.classification == DECAYING and v.end_ratio < 1e-3


def test_quaternion_vector_embedding():
    assert np.array_equal(embed_vector([[1, 2, 3, 4]], 4), [1, 2, 3, 4])
    assert np.array_equal(embed_vector([2.0, 3.0], 8), [2, 0, 0, 0, 3, 0, 0, 0])
    with pytest.raises(ModelError):
        embed_vector([1.0, 2.0, 3.0], 8)


def synthetic(values, t_end):
    t = np.linspace(0, t_end, 401)
    return TrajectorySet(t, np.asarray(values(t))[:, None, None], "synthetic")


def test_classification_examples():
    v = classify_empirical(synthetic(lambda t: np.exp(-t), 20.0))
    assert v.classification == DECAYING and v.end_ratio == pytest.approx(math.exp(-20), rel=1e-12)
    assert classify_empirical(synthetic(lambda t: 1 + 0 * t, 20.0)).classification == BOUNDED_EMPIRICAL
    v = classify_empirical(synthetic(lambda t: np.exp(t / 10), 100.0))
    assert v.classification == GROWING and v.end_ratio == pytest.approx(math.exp(10), rel=1e-12)
    assert classify_empirical(synthetic(lambda t: 1 + t, 100.0)).classification == UNRESOLVED
    assert classify_empirical(synthetic(lambda t: 1 + 20 * np.sin(t) ** 2, 100.0)).classification == UNRESOLVED


def test_escape_counts_as_growing():
    sys = BlockSystem.from_expressions(A="t^2", B=None, C=None, D="0")
    traj = integrate_block_system(sys, [1.0], [0.0], 10.0)
    assert classify_empirical(traj).classification == GROWING


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3).filter(lambda a: abs(a) > 1e-3))
def test_linearity(seed, alpha):
    rng = np.random.default_rng(seed)
    sys = BlockSystem.from_expressions(A="-0.3 + qi*sin(t)", B="0.4*qj, 0", C="cos(t); 1", D="-0.5, 1; 0, -0.7")
    x0 = rng.normal(size=4 * sys.dim)
    X = integrate_initial_set(sys, np.stack([x0, alpha * x0], axis=1), 15.0, tol=1e-11)
    assert np.allclose(X.states[:, :, 1], alpha * X.states[:, :, 0], rtol=1e-9, atol=1e-12 * abs(alpha))


def test_domination_zero_system():
    res = domination_check(get_builtin("zero").build(), None, [1.0], [2.0], 10.0)
    assert res.holds and res.max_violation == pytest.approx(0.0, abs=1e-12)


def test_domination_oscillating_example():
    sys = get_builtin("sine-forced").build()
    res = domination_check(sys, None, [1.0], [1.0], 30.0)
    assert res.holds


def test_domination_rotating_scalar_quaternion():
    sys = BlockSystem.from_expressions(A="-0.2 + 0.3*sin(t) + qi*(2 + cos(t))", B="0.5 + qk", C="0.3*qj",
                                       D="-1 + qi*t")
    res = domination_check(sys, None, [[0.3, -1.0, 0.5, 0.2]], [[1.0, 0.0, 0.0, -1.0]], 20.0)
    assert res.holds


def test_domination_with_user_envelopes():
    sys = BlockSystem.from_expressions(A="-1 + qi", B="1", C="1", D="-2")
    env = user_envelopes("-0.9", "-1.8")
    assert domination_check(sys, env, [1.0], [1.0], 20.0).holds


def test_domination_requires_structure():
    sys = BlockSystem.from_expressions(A="0, 1; t, 0", B=None, C=None, D="-1")
    with pytest.raises(ModelError):
        domination_check(sys, None, [1.0, 0.0], [1.0], 5.0)


@pytest.mark.parametrize("system, horizon", [
    (get_builtin("sine-forced").build({"C": "0.5"}), 100.0),
    (get_builtin("log-coupled").build({"nu": "-1", "mu": "1"}), math.e + 100),
    (BlockSystem.from_expressions(A="-1 + qj*sin(t), 0; 0, -1 + qj*sin(t)", B="0.2; 0", C="0, 0.3",
                                  D="-2 + qi"), 60.0),
])
def test_consistency_gate(system, horizon):
    rep = block_verdict(system, horizon=horizon)
    assert rep.verdict == ASYMPTOTIC
    emp = classify_empirical(integrate_basis(system, horizon))
    assert emp.classification in (DECAYING, BOUNDED_EMPIRICAL)
