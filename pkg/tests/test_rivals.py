import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvstab.builtins import get_builtin
from ltvstab.quaternion import QMatrix, complex_embed, max_real_eig_arr, qconj_arr
from ltvstab.rivals import (
    FREEZING, INCONCLUSIVE, PRECONDITION_FAILED, PRECONDITION_PASSED, STABLE, dense_grid, freezing_check,
    lozinskii_norm, lozinskii_verdict, lyapunov_bogdanov_check, run_rivals,
)
from ltvstab.system import BlockSystem
from ltvstab.verifier import integrate_block_system


def oscillating_matrix(s, C=1.0, l1=-1.0, l2=-1.5, m1=2.0, m2=0.2):
    return np.array([[l1 - C * s, m1], [m2, l2]])


def as_quaternion(M):
    a = np.zeros(M.shape + (4,))
    a[..., 0] = M
    return a


@pytest.mark.parametrize("kind", ["I", "II", "III"])
def test_diagonal_matrix(kind):
    assert lozinskii_norm(as_quaternion(np.diag([-1.0, -2.0])), kind) == pytest.approx(-1.0)


def test_oscillating_matrix_closed_forms():
    M = as_quaternion(oscillating_matrix(0.0))
    assert lozinskii_norm(M, "I") == pytest.approx(1.0)  # max{l1 + m1, l2 + m2}
    assert lozinskii_norm(M, "II") == pytest.approx(0.5)  # max{l1 + m2, l2 + m1}
    assert lozinskii_norm(M, "III") == pytest.approx((-2.5 + math.sqrt(0.25 + 4.84)) / 2, abs=1e-12)
    for s in np.linspace(-1, 1, 9):
        M = as_quaternion(oscillating_matrix(s))
        assert lozinskii_norm(M, "I") == pytest.approx(max(-1 + 2 - s, -1.5 + 0.2))
        assert lozinskii_norm(M, "II") == pytest.approx(max(-1 + 0.2 - s, -1.5 + 2))


def test_quaternion_entries_use_modulus():
    M = QMatrix(np.array([[[-3.0, 0, 0, 0], [0, 3.0, 4.0, 0]], [[0, 0, 0, 0], [-1.0, 0, 0, 0]]]))
    assert lozinskii_norm(M, "I") == pytest.approx(2.0)
    assert lozinskii_norm(M, "II") == pytest.approx(4.0)


def test_rejects_non_square():
    with pytest.raises(ValueError):
        lozinskii_norm(np.zeros((2, 3, 4)), "I")
    with pytest.raises(ValueError):
        lozinskii_norm(np.zeros((2, 2, 4)), "IV")


def random_qmatrix(rng, n):
    return rng.normal(size=(n, n, 4))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_hermitian_part_eigenvalue(seed, n):
    a = random_qmatrix(np.random.default_rng(seed), n)
    herm = 0.5 * (a + qconj_arr(np.swapaxes(a, 0, 1)))
    direct = np.linalg.eigh(complex_embed(herm))[0][-1]
    assert lozinskii_norm(a, "III") == pytest.approx(direct, abs=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_log_norms_dominate_spectral_abscissa(seed, n):
    a = random_qmatrix(np.random.default_rng(seed), n)
    abscissa = float(max_real_eig_arr(a[None])[0])
    for kind in ("I", "II", "III"):
        assert lozinskii_norm(a, kind) >= abscissa - 1e-9


def test_log_norm_bounds_growth_rate():
    sys = get_builtin("sine-forced").build({"C": "3"})
    traj = integrate_block_system(sys, [1.0], [0.3], 20.0, tol=1e-11)
    t = traj.times
    lognorm = np.log(traj.norms()[:, 0])
    rate = np.diff(lognorm) / np.diff(t)
    mid = 0.5 * (t[1:] + t[:-1])
    gam = lozinskii_norm(sys.full(mid), "III")
    # secant slope is an average of the rate over the step; compare with the step maximum
    gam_hi = np.maximum(lozinskii_norm(sys.full(t[1:]), "III"), lozinskii_norm(sys.full(t[:-1]), "III"))
    assert np.all(rate <= np.maximum(gam, gam_hi) + 1e-3)


def test_dense_grid_resolution():
    g = dense_grid(0.0, 1000.0)
    assert g.size == 20001 and g[0] == 0.0 and g[-1] == 1000.0
    assert dense_grid(0.0, 10.0).size == 2001
    with pytest.raises(ValueError):
        dense_grid(1.0, 1.0)


def test_oscillating_example_verdicts():
    sys = get_builtin("sine-forced").build()
    assert lozinskii_verdict(sys, "I", 100.0).verdict == INCONCLUSIVE
    rep = lozinskii_verdict(sys, "II", 100.0)
    assert rep.verdict == INCONCLUSIVE and rep.extra["min_gamma"] >= 0.5 - 1e-12
    assert lyapunov_bogdanov_check(sys, 100.0).verdict == INCONCLUSIVE


def test_freezing_on_oscillating_example():
    strong = freezing_check(get_builtin("sine-forced").build({"C": "3"}), 100.0)
    assert not strong.applicable and strong.label == PRECONDITION_FAILED
    assert strong.extra["sup_abscissa"] >= 0
    weak = freezing_check(get_builtin("sine-forced").build({"C": "0.5"}), 100.0)
    assert weak.applicable and weak.verdict == INCONCLUSIVE and weak.label == PRECONDITION_PASSED


def test_single_block_diagonal_is_stable():
    sys = BlockSystem.from_expressions(A="-1, 0; 0, -1", B=None, C=None, D="-1")
    rep = lozinskii_verdict(sys, "I", 50.0)
    assert rep.verdict == STABLE
    assert rep.curve.final == pytest.approx(-50.0, rel=1e-9)


def test_constant_hurwitz_freezing():
    sys = BlockSystem.from_expressions(A="-1", B=None, C=None, D="-2")
    rep = freezing_check(sys, 20.0)
    assert rep.applicable and rep.verdict == STABLE


def test_log_coupled_rivals():
    b = get_builtin("log-coupled")
    sys = b.build()
    rep = lozinskii_verdict(sys, "II", b.default_horizon)
    assert rep.extra["min_gamma"] >= 2.0 - 1e-9
    assert rep.verdict == INCONCLUSIVE
    assert freezing_check(sys, b.default_horizon).label == PRECONDITION_FAILED
    assert lyapunov_bogdanov_check(sys, b.default_horizon).verdict == INCONCLUSIVE


def test_zero_system_all_stable():
    sys = get_builtin("zero").build()
    reps = run_rivals(sys, 30.0)
    for r in reps:
        if r.method == FREEZING:
            assert r.label == PRECONDITION_FAILED
        else:
            assert r.verdict == STABLE, r.method
    assert reps[-1].extra["entry_integrals"] == [[0.0, 0.0], [0.0, 0.0]]


def test_unknown_rival():
    with pytest.raises(ValueError):
        run_rivals(get_builtin("zero").build(), 10.0, ("nope",))
