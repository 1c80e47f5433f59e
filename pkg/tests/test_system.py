import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvstab.system import (
    BlockSystem, MatrixFunction, ModelError, build_scalar_system, check_condition_a, check_condition_b,
    default_grid, derive_envelopes, envelope_defect, running_integrals, scalar_system, tabulate,
    user_envelopes,
)

def block_system(A, D="-1", B=None, C=None, t0=0.0, **kw):
    return BlockSystem.from_expressions(A=A, B=B, C=C, D=D, t0=t0, **kw)


def test_matrix_syntax_and_shapes():
    M = MatrixFunction.parse("1, t; qi, 2", 0.0)
    v = M(np.array([0.0, 1.0]))
    assert v.shape == (2, 2, 2, 4)
    assert v[1, 0, 1, 0] == 1.0 and v[0, 1, 0, 1] == 1.0
    assert M(2.0).shape == (2, 2, 4)
    with pytest.raises(ModelError):
        BlockSystem.from_expressions(A="1, 0; 0, 1", B="1", C=None, D="1")


def test_zero_blocks_default():
    s = block_system("-1, 0; 0, -2", D="-3")
    assert (s.m, s.n) == (2, 1)
    assert s.B.is_zero() and s.C.is_zero()
    assert s.full(0.0).shape == (3, 3, 4)


def test_running_integral_matches_closed_form():
    M = MatrixFunction.parse("cos(t), t; 1, 0", 0.0)
    ints = running_integrals(M, [0.0, 1.0, 2.0], 0.0)
    assert ints[2, 0, 0, 0] == pytest.approx(math.sin(2.0))
    assert ints[2, 0, 1, 0] == pytest.approx(2.0)
    assert ints[1, 1, 0, 0] == pytest.approx(1.0)


def test_condition_a_examples():
    g = default_grid(0.0, 5.0, 8)
    assert check_condition_a(block_system("sin(t), 0; 0, sin(t)"), g).passed
    cyc = block_system("0, cos(t), 0; 0, 0, cos(t); cos(t), 0, 0")
    assert check_condition_a(cyc, g).passed
    res = check_condition_a(block_system("0, 1; t, 0"), g)
    assert not res.passed
    assert res.witnesses


def test_condition_a_implies_a_prime():
    g = default_grid(0.0, 4.0, 6)
    for A in ("0, 1; t, 0", "-1, sin(t); -sin(t), -1", "t, 1; 0, t"):
        s = block_system(A)
        if check_condition_a(s, g, mode="a").passed:
            assert check_condition_a(s, g, mode="a'").passed


def test_condition_b_examples():
    g = default_grid(0.0, 5.0, 8)
    res = check_condition_b(block_system("-1 - sin(t)", D="-1.5 + qi*t"), g)
    assert res.passed and "A: scalar" in res.witnesses
    cyc = block_system("0, cos(t), 0; 0, 0, cos(t); cos(t), 0, 0")
    assert check_condition_b(cyc, g).passed
    assert not check_condition_b(block_system("0, 1; t, 0"), g).passed
    ident = check_condition_b(block_system("sin(t), 0; 0, sin(t)"), g)
    assert "A: multiple of identity" in ident.witnesses
    cj = check_condition_b(block_system("-1 + qj*t, 0; 0, -2 - qj"), g)
    assert cj.passed and any("C_J" in w for w in cj.witnesses)


def test_quaternion_scalar_with_varying_unit_fails_condition_a():
    s = block_system("qi*cos(t) + qj*sin(t)")
    assert not check_condition_a(s, default_grid(0.0, 3.0, 6)).passed


def test_derived_envelopes():
    t = np.linspace(math.e, 20, 7)
    env = derive_envelopes(block_system("sin(t) - 0.5", D="t"), horizon=20)
    assert np.allclose(env.a_star(np.linspace(0, 20, 7)), np.sin(np.linspace(0, 20, 7)) - 0.5)
    env = derive_envelopes(block_system("-1, 0; 0, -2"), horizon=10)
    assert env.a_star(3.0) == pytest.approx(-1.0)
    env = derive_envelopes(block_system("0, 3; -3, 0"), horizon=10)
    assert env.a_star(1.0) == pytest.approx(0.0, abs=1e-12)
    env = derive_envelopes(block_system("-1 + qi*t"), horizon=10)
    assert env.a_star(t).max() == pytest.approx(-1.0)


def test_user_envelopes():
    env = user_envelopes("-1", "-2 + 0*t", 0.0)
    assert env.provenance == "user"
    assert env.a_star(5.0) == -1.0 and env.d_star(5.0) == -2.0


def test_scalar_system_for_oscillating_example():
    s = block_system("-1 - 1*sin(t)", B="2", C="0.2", D="-1.5")
    sc = build_scalar_system(s, horizon=20)
    for t in (0.0, 1.3, 7.0):
        assert sc.a_star(t) == pytest.approx(-1 - math.sin(t))
        assert sc.d_star(t) == pytest.approx(-1.5)
        assert sc.norm_b(t) == pytest.approx(2.0)
        assert sc.norm_c(t) == pytest.approx(0.2)
        assert sc.E(t) == pytest.approx(0.5 - math.sin(t))


def test_scalar_system_zero_couplings_and_log_example():
    sc = build_scalar_system(block_system("-1"), horizon=5)
    assert sc.norm_b(2.0) == 0.0 and sc.norm_c(2.0) == 0.0
    s = BlockSystem.from_expressions(A="0", B="2/(t*ln(t)^2)", C="2", D="-1", t0=math.e)
    sc = build_scalar_system(s, horizon=100)
    assert sc.norm_b(math.e) == pytest.approx(2 / math.e, rel=1e-12)
    assert sc.norm_c(50.0) == pytest.approx(2.0)


def test_matrix_norms_tabulated_accurately():
    s = block_system("-1", B="sin(t), cos(t)*qj", C="t; 1", D="-2, 0; 0, -3")
    sc = build_scalar_system(s, horizon=10)
    t = np.linspace(0, 10, 97)
    assert np.allclose(sc.norm_b(t), 1.0, atol=1e-6)
    assert np.allclose(sc.norm_c(t), np.sqrt(t**2 + 1.0), rtol=1e-3)
    assert sc.check_nonnegative(t)


def test_tabulate_refines_fast_changes():
    f = tabulate(lambda t: np.exp(-t) * np.sin(5 * t), 0.0, 10.0)
    t = np.linspace(0, 10, 1001)
    assert np.max(np.abs(f(t) - np.exp(-t) * np.sin(5 * t))) < 2e-3


def test_scalar_system_builder_accepts_mixed_inputs():
    sc = scalar_system("-1", -2.0, lambda t: 0.5 + 0 * np.asarray(t), 1, 0.0)
    assert sc.rhs(0.0, np.array([1.0, 1.0])) == pytest.approx([-0.5, -1.0])


rng_seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=10)
@given(rng_seeds)
def test_derived_envelopes_dominate_integrated_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    a1, a2, w = rng.uniform(-1, 1, 3)
    # c1(t) I + c2(t) V with V real skew: a commuting normal family
    A = f"{a1:.6f} + sin({w:.6f}*t), {a2:.6f}*cos(t); {-a2:.6f}*cos(t), {a1:.6f} + sin({w:.6f}*t)"
    s = block_system(A, D=f"{a2:.6f} - t/10 + qk*t")
    g = default_grid(0.0, 8.0, 6)
    assert check_condition_b(s, g).passed
    env = derive_envelopes(s, horizon=8.0)
    assert envelope_defect(s, env, g) <= 1e-7
