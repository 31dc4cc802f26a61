import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdsens.params import MagicFormulaCoeffs, ParamSet, dt_state
from vdsens.tire import (
    cornering_stiffness,
    magic_formula,
    magic_formula_c,
    slip_quantities,
    stationary_loads,
    vertical_loads,
    wheel_slips,
    WheelKinematics,
)

MF = MagicFormulaCoeffs(10.0, 1.9, 1.0, 0.97)
P = ParamSet()


def test_zero_slip_zero_force():
    assert magic_formula_c(0.0, MF) == 0.0


def test_closed_form_value():
    # 10*0.1 - 0.97*(10*0.1 - atan(10*0.1)) = 1 - 0.97*(1 - pi/4)
    inner = 1.0 - 0.97 * (1.0 - math.pi / 4)
    assert inner == pytest.approx(0.7918, abs=1e-4)
    assert magic_formula_c(0.1, MF) == pytest.approx(math.sin(1.9 * math.atan(inner)), rel=1e-15)


def test_saturation_limit():
    for sign in (1, -1):
        assert magic_formula_c(sign * 1e12, MF) == pytest.approx(sign * math.sin(1.9 * math.pi / 2), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-5, 5),
    st.floats(0.1, 20),
    st.floats(0.1, 3),
    st.floats(1, 5000),
    st.floats(-3, 1),
    st.floats(0.1, 2),
    st.floats(0, 3),
)
def test_odd_and_bounded(x, B, C, D, E, mu, ls):
    f = magic_formula(x, B, C, D, E, mu, ls)
    assert magic_formula(-x, B, C, D, E, mu, ls) == -f
    assert abs(f) <= mu * ls * D * (1 + 1e-12)


def test_offset_bound():
    assert abs(magic_formula(2.0, 10, 1.9, 100, 0.97, 1.0, 1.0, S=-25.0)) <= 125.0


def test_cornering_stiffness_analytic():
    assert cornering_stiffness(MF, 1.0, 1.0) == pytest.approx(19.0)
    assert cornering_stiffness(MF, 1.0, 0.0) == 0.0


@pytest.mark.parametrize("mu,ls", [(1.0, 1.0), (0.6, 1.3), (1.7, 0.4)])
def test_cornering_stiffness_matches_fd(mu, ls):
    step = 1e-7
    fd = (magic_formula_c(step, MF, mu, ls) - magic_formula_c(-step, MF, mu, ls)) / (2 * step)
    assert cornering_stiffness(MF, mu, ls) == pytest.approx(fd, rel=1e-6)


def test_friction_scales_peak_not_slope():
    lo = np.array([magic_formula_c(a, MF, 0.5) for a in np.linspace(0.3, 2, 50)])
    assert np.max(np.abs(lo)) <= 0.5
    assert cornering_stiffness(MF, 0.5) == cornering_stiffness(MF, 1.0)


def test_free_rolling_no_slip():
    lam, alpha = wheel_slips(WheelKinematics(10.0, 0.0, 10.0 / 0.3, 0.3))
    assert lam == pytest.approx(0.0, abs=1e-15) and alpha == 0.0


def test_locked_wheel_slip():
    lam, _ = slip_quantities(10.0, 0.0, 0.0, 0.3)
    assert lam == -1.0


def test_slip_angle_value():
    _, alpha = slip_quantities(10.0, 1.0, 10.0 / 0.3, 0.3)
    assert alpha == pytest.approx(-math.atan(0.1), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-50, 50))
def test_slips_finite_near_standstill(vx, vy, w):
    lam, alpha = slip_quantities(vx, vy, w, 0.3)
    assert math.isfinite(lam) and math.isfinite(alpha)


def test_stationary_loads_value():
    loads, lifted = vertical_loads(dt_state(), P)
    front = 1600 * 9.81 * 1.8 / (2 * 3.0)
    rear = 1600 * 9.81 * 1.2 / (2 * 3.0)
    assert np.allclose(loads, [front, front, rear, rear], rtol=1e-15)
    assert loads.sum() == pytest.approx(P.m * P.g, rel=1e-14)
    assert not lifted.any()
    assert np.array_equal(stationary_loads(P), loads)


def test_symmetric_stationary_loads():
    p = ParamSet(l_f=1.5, l_r=1.5)
    loads, _ = vertical_loads(dt_state(), p)
    assert np.allclose(loads, p.m * p.g / 4, rtol=1e-15)


def test_pure_lift_changes_loads_by_stiffness():
    base, _ = vertical_loads(dt_state(), P)
    z = 0.01
    lifted, _ = vertical_loads(dt_state(z_s=z), P)
    k = np.array([P.k_f, P.k_f, P.k_r, P.k_r])
    # positive lift (z down is positive, so z_s > 0 extends the suspension) unloads every wheel by k z
    assert np.allclose(lifted - base, -k * z, rtol=1e-9)


def test_loads_monotone_in_lift():
    zs = np.linspace(-0.05, 0.05, 41)
    loads = np.array([vertical_loads(dt_state(z_s=z), P)[0] for z in zs])
    assert np.all(np.diff(loads, axis=0) < 0)


def test_load_clamp_and_flag():
    loads, lifted = vertical_loads(dt_state(phi=-0.3), P)
    assert np.all(loads >= 0)
    assert lifted[0] and lifted[2] and not lifted[1]
