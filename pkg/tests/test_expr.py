import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ltvstab.expr import (
    BinOp, Call, Const, CONSTANTS, ExprDomainError, ExprSyntaxError, Neg, Num, TimeFunction,
    UnknownIdentifierError, Var, evaluate, parse, render,
)
from ltvstab.quaternion import Quaternion


def val(src, t):
    return parse(src).quat(t)


@pytest.mark.parametrize("src,t,want", [
    ("sin(t)", 0.0, 0.0),
    ("-1 - 1*sin(t)", math.pi / 2, -2.0),
    ("1/(t*ln(t)^2)", math.e, 1 / math.e),
    ("2", 17.0, 2.0),
    ("exp(-t)*cos(t)", 0.0, 1.0),
    ("2+3*4", 0.0, 14.0),
    ("2^3^2", 0.0, 512.0),
    ("(2^3)^2", 0.0, 64.0),
    ("8/4/2", 0.0, 1.0),
    ("5-3-1", 0.0, 1.0),
    ("-2^2", 0.0, 4.0),
    ("abs(-3)", 0.0, 3.0),
    ("sqrt(t)", 9.0, 3.0),
    ("pi", 0.0, math.pi),
    ("1.5e1 + .5", 0.0, 15.5),
])
def test_real_values(src, t, want):
    q = val(src, t)
    assert q[0] == pytest.approx(want, rel=1e-12, abs=1e-15)
    assert np.all(q[1:] == 0)


def test_quaternion_values():
    assert evaluate(TimeFunction("qi*t"), 3.0) == Quaternion(0, 3)
    got = parse("(1+qi)*(1+qj)")(0.0)
    assert got.isclose(Quaternion(1, 1, 1, 1))
    assert parse("qi*qj")(0.0).isclose(Quaternion(0, 0, 0, 1))
    assert parse("qj*qi")(0.0).isclose(Quaternion(0, 0, 0, -1))
    assert parse("exp(qi*pi)")(0.0).isclose(Quaternion(-1), 1e-12)
    assert parse("abs(3*qj + 4*qk)")(0.0).isclose(Quaternion(5))
    assert parse("1/qi")(0.0).isclose(Quaternion(0, -1))


def test_non_real_power_and_functions_stay_in_subfield():
    q = parse("(1 + 2*qk)^2")(0.0)
    assert q.isclose(Quaternion(-3, 0, 0, 4), 1e-12)
    s = parse("sin(qj)")(0.0)
    assert s.isclose(Quaternion(0, 0, math.sinh(1.0), 0), 1e-12)


def test_vectorised_matches_scalar_path():
    e = parse("exp(qi*t)*qk/(1+t) - sqrt(t+qj)^1.5 + 2^(qj*t)")
    ts = np.linspace(0.1, 4, 9)
    arr = e.quat(ts)
    for k, t in enumerate(ts):
        assert np.allclose(arr[k], e.quat_scalar(float(t)), rtol=1e-12, atol=1e-13)


def test_domain_errors_carry_t():
    f = TimeFunction("ln(t)", 0.0)
    with pytest.raises(ExprDomainError) as ei:
        f.eval(0.0)
    assert ei.value.t == 0.0
    with pytest.raises(ExprDomainError):
        parse("ln(t)").quat(np.array([1.0, -1.0]))
    with pytest.raises(ExprDomainError):
        parse("1/(t-2)").quat(2.0)
    with pytest.raises(ExprDomainError):
        parse("1/(t-2)").real(np.array([1.0, 2.0]))
    with pytest.raises(ExprDomainError):
        TimeFunction("t", 1.0).eval(0.5)


def test_syntax_errors_have_positions():
    with pytest.raises(UnknownIdentifierError) as ei:
        parse("foo + 1")
    assert ei.value.position == 0
    with pytest.raises(ExprSyntaxError) as ei:
        parse("1 + * 2")
    assert ei.value.position == 4
    with pytest.raises(ExprSyntaxError):
        parse("sin(t")
    with pytest.raises(ExprSyntaxError):
        parse("2 $ 3")
    with pytest.raises(UnknownIdentifierError):
        parse("tan(t)")


def test_bound_constants():
    assert parse("l1 - C*sin(t)", {"l1": -1.0, "C": 2.0}).real(math.pi / 2) == pytest.approx(-3.0)


def test_time_function_flags():
    assert TimeFunction("0").is_zero()
    assert not TimeFunction("t").is_zero()
    assert TimeFunction("2*qi").is_constant
    assert not TimeFunction("2*qi").is_real
    assert TimeFunction("abs(qi*t)").is_real
    assert TimeFunction("sin(t)").continuity_defect(np.linspace(0, 10, 50)) < 1e-5


# -- random round trips ------------------------------------------------------

leaf = st.one_of(
    st.floats(-50, 50, allow_nan=False).map(Num),
    st.just(Var()),
    st.sampled_from(sorted(CONSTANTS)).map(lambda n: Const(n, CONSTANTS[n])),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.builds(BinOp, st.sampled_from(["+", "-", "*", "/"]), children, children),
        st.builds(Call, st.sampled_from(["sin", "cos", "exp", "abs"]), children),
    )


trees = st.recursive(leaf, _extend, max_leaves=12)
PROBES = np.linspace(0.05, 3.0, 20)


@settings(max_examples=100)
@given(trees)
def test_render_parse_round_trip(node):
    from ltvstab.expr import Expression
    original = Expression(node)
    try:
        want = original.quat(PROBES)
    except ExprDomainError:
        assume(False)
    assume(np.all(np.abs(want) < 1e12))
    again = parse(render(node))
    got = again.quat(PROBES)
    scale = np.maximum(np.abs(want), 1e-300)
    assert np.all(np.abs(got - want) <= 1e-12 * np.maximum(scale, 1.0))
    assert render(again.node) == render(node)


def test_real_float_path_matches_array_path():
    e = parse("exp(-t)*cos(3*t) + abs(sin(t))^1.5 - ln(1+t)/sqrt(2+t) - t^2")
    ts = np.linspace(0.0, 6.0, 13)
    arr = e.real(ts)
    for k, t in enumerate(ts):
        assert e.real(float(t)) == pytest.approx(arr[k], rel=1e-14, abs=1e-15)
    with pytest.raises(ExprDomainError):
        parse("ln(t - 1)").real(0.5)
    with pytest.raises(ExprDomainError):
        parse("(t - 2)^0.5").real(1.0)
