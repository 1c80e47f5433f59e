import numpy as np
import pytest

from ltvstab import ode


def decay(t, y):
    return np.array([-y[0], -2.0 * y[1]])


def exact(t):
    return np.array([np.exp(-t), np.exp(-2.0 * t)])


def test_closed_form_accuracy():
    res = ode.integrate(decay, 0.0, [1.0, 1.0], 10.0, rtol=1e-10, atol=1e-14)
    assert res.success
    assert res.t[-1] == 10.0
    err = np.max(np.abs(res.y - exact(res.t[:, None]).T.reshape(res.y.shape)))
    assert err < 1e-10


def test_times_strictly_increasing_and_tstops_hit():
    res = ode.integrate(decay, 0.0, [1.0, 1.0], 5.0, tstops=[1.0, 2.5])
    assert np.all(np.diff(res.t) > 0)
    assert 1.0 in res.t and 2.5 in res.t


def test_escape_detected_for_blow_up():
    res = ode.integrate(lambda t, y: y * y, 0.0, [1.0], 2.0, escape_components=[0])
    assert res.status == "escaped"
    assert res.escape_time == pytest.approx(1.0, abs=1e-6)


def test_max_step_respected():
    res = ode.integrate(lambda t, y: np.zeros(1), 0.0, [0.0], 10.0, max_step=0.5)
    assert np.max(np.diff(res.t)) <= 0.5 + 1e-12


def test_fixed_step_fifth_order():
    errs = []
    for h in (0.2, 0.1):
        res = ode.integrate(decay, 0.0, [1.0, 1.0], 4.0, fixed_step=h)
        errs.append(np.max(np.abs(res.y[-1] - exact(4.0))))
    assert errs[0] / errs[1] > 25.0  # 2^5 = 32 asymptotically


def test_rejects_bad_interval():
    with pytest.raises(ValueError):
        ode.integrate(decay, 1.0, [1.0, 1.0], 1.0)


def test_step_budget():
    res = ode.integrate(decay, 0.0, [1.0, 1.0], 10.0, fixed_step=0.01, max_steps=10)
    assert res.status == "max_steps"
