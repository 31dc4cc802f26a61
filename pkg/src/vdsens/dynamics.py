"""Double-track and linear single-track vehicle models.

Both right-hand sides take ``(x, u, c)`` with ``c`` the flat parameter vector
(see :mod:`vdsens.params` for the orderings) and are generic over floats,
batched arrays (leading batch axis) and dual numbers.
"""

from __future__ import annotations

import numpy as np

from . import ad
from .geometry import ParamView, geometry_tables
from .params import (
    DT_INPUT_NAMES,
    DT_PARAM_NAMES,
    DT_STATE_NAMES,
    ST_INPUT_NAMES,
    ST_PARAM_NAMES,
    ST_STATE_NAMES,
    V_MIN,
    ParamSet,
    StParams,
)
from .tire import cornering_stiffness, magic_formula, slip_quantities, wheel_loads


class ModelDomainError(ValueError):
    """The model is evaluated outside its domain of validity."""


class DtPrepared:
    """Parameter-only quantities of the double-track model, computed once per run.

    Holding them across RK4 stages avoids re-deriving lever arms and
    stationary loads at every evaluation; for dual parameter vectors the
    cached entries carry their (constant) derivatives along.
    """

    def __init__(self, c):
        P = ParamView(c)
        self.c = c
        self.tables = geometry_tables(P)
        self.p, self.q, lp = self.tables
        self.k = ad.concatenate([P.k_f, P.k_f, P.k_r, P.k_r])
        self.d = ad.concatenate([P.d_f, P.d_f, P.d_r, P.d_r])
        self.F_z0 = P.m * P.g * lp / (2.0 * (P.l_f + P.l_r))
        self.r = P.quad("r")
        self.J_w = P.quad("J_w")
        self.S = P.quad("S")
        self.lat = (P.lat_B, P.lat_C, P.lat_D, P.lat_E)
        self.lon = (P.lon_B, P.lon_C, P.lon_D, P.lon_E)
        self.mu, self.m, self.g, self.h = P.mu, P.m, P.g, P.h
        self.J_x, self.J_y, self.J_z = P.J_x, P.J_y, P.J_z


def prepare_dt(c):
    return c if isinstance(c, DtPrepared) else DtPrepared(c)


def _dt_tire_forces(W: DtPrepared, x, delta):
    v_x, v_y, psi_dot, z_s, z_s_dot, phi, phi_dot, theta, theta_dot = (x[..., i : i + 1] for i in range(9))
    omega = x[..., 9:13]
    p, q = W.p, W.q
    raw, F_z = wheel_loads(W.F_z0, W.k, W.d, p, q, z_s, z_s_dot, phi, phi_dot, theta, theta_dot)

    cd, sd = np.cos(delta), np.sin(delta)
    # contact-point velocity, vehicle frame then wheel frame
    vx_v = v_x + psi_dot * p
    vy_v = v_y + psi_dot * q
    vx_w = cd * vx_v + sd * vy_v
    vy_w = cd * vy_v - sd * vx_v
    lam, alpha = slip_quantities(vx_w, vy_w, omega, W.r)

    load_scale = F_z / W.F_z0
    F_x = magic_formula(lam, *W.lon, W.mu, load_scale)
    F_y = magic_formula(alpha, *W.lat, W.mu, load_scale, W.S)
    return F_x, F_y, F_z, raw, cd, sd


def dt_rhs(x, u, c, locked=None):
    """Time derivative of the 13 double-track states.

    Args:
        x: state ``(v_x, v_y, psi_dot, z_s, z_s_dot, phi, phi_dot, theta,
            theta_dot, omega_fl, omega_fr, omega_rl, omega_rr)``.
        u: ``(delta_fl, delta_fr, delta_rl, delta_rr, M_fl, M_fr, M_rl, M_rr)``.
        c: 35-entry parameter vector, or its :class:`DtPrepared` form.
        locked: optional boolean per wheel; a locked wheel has zero spin
            acceleration (its spin speed is held by the brake).
    """
    W = prepare_dt(c)
    u = np.asarray(u, dtype=float)
    delta, torque = u[0:4], u[4:8]
    F_x, F_y, F_z, _, cd, sd = _dt_tire_forces(W, x, delta)
    p, q = W.p, W.q
    v_x, v_y, psi_dot = x[..., 0:1], x[..., 1:2], x[..., 2:3]

    Fx_v = cd * F_x - sd * F_y
    Fy_v = sd * F_x + cd * F_y
    sum_fx, sum_fy = ad.wsum(Fx_v), ad.wsum(Fy_v)

    psi_ddot = ad.wsum((p * cd + q * sd) * F_x + (q * cd - p * sd) * F_y) / W.J_z
    v_x_dot = v_y * psi_dot + sum_fx / W.m
    v_y_dot = -v_x * psi_dot + sum_fy / W.m
    z_s_ddot = -W.g + ad.wsum(F_z) / W.m
    phi_ddot = W.h / W.J_x * sum_fy - ad.wsum(p * F_z) / W.J_x
    theta_ddot = -W.h / W.J_y * sum_fx - ad.wsum(q * F_z) / W.J_y
    omega_dot = (torque - W.r * F_x) / W.J_w
    if locked is not None and np.any(locked):
        omega_dot = ad.where(np.asarray(locked, dtype=bool), 0.0, omega_dot)

    return ad.concatenate(
        [v_x_dot, v_y_dot, psi_ddot, x[..., 4:5], z_s_ddot, x[..., 6:7], phi_ddot, x[..., 8:9], theta_ddot, omega_dot]
    )


def dt_wheel_forces(x, u, p):
    """Wheel-frame tire forces ``(F_x, F_y)`` and loads ``F_z`` for one state."""
    W = prepare_dt(p.to_vector() if isinstance(p, ParamSet) else p)
    F_x, F_y, F_z, _, _, _ = _dt_tire_forces(W, np.asarray(x, dtype=float), np.asarray(u, dtype=float)[0:4])
    return F_x, F_y, F_z


def _st_entries(m, J_z, l_f, l_r, cf, cr, v):
    a11 = -(cf + cr) / (m * v)
    a12 = (cr * l_r - cf * l_f) / (m * v * v) - 1.0
    a21 = (cr * l_r - cf * l_f) / J_z
    a22 = -(cf * l_f * l_f + cr * l_r * l_r) / (J_z * v)
    b11 = cf / (m * v)
    b12 = cr / (m * v)
    b21 = cf * l_f / J_z
    b22 = -cr * l_r / J_z
    return a11, a12, a21, a22, b11, b12, b21, b22


def st_matrices(sp: StParams):
    """System and input matrices ``(A, B)`` of the linear single-track model."""
    if sp.v < V_MIN:
        raise ModelDomainError(f"single-track model requires v >= {V_MIN} m/s (got {sp.v})")
    a11, a12, a21, a22, b11, b12, b21, b22 = _st_entries(*sp.to_vector())
    return np.array([[a11, a12], [a21, a22]]), np.array([[b11, b12], [b21, b22]])


def st_rhs(x, u, c):
    """Time derivative of ``(beta, psi_dot)``; ``u = (delta_f, delta_r)``."""
    v = ad.value(c[..., 6:7])
    if np.any(np.asarray(v) < V_MIN):
        raise ModelDomainError(f"single-track model requires v >= {V_MIN} m/s")
    params = [c[..., i : i + 1] for i in range(7)]
    a11, a12, a21, a22, b11, b12, b21, b22 = _st_entries(*params)
    beta, r = x[..., 0:1], x[..., 1:2]
    u = np.asarray(u, dtype=float)
    d_f, d_r = u[0:1], u[1:2]
    beta_dot = a11 * beta + a12 * r + b11 * d_f + b12 * d_r
    psi_ddot = a21 * beta + a22 * r + b21 * d_f + b22 * d_r
    return ad.concatenate([beta_dot, psi_ddot])


def st_params_from_dt(p: ParamSet, v: float = 10.0) -> StParams:
    """Single-track parameters consistent with a double-track parameter set.

    Axle cornering stiffness is the zero-slip slope of the lateral tire
    curve at stationary load, summed over the axle's two wheels.
    """
    c_w = cornering_stiffness(p.tire_lat, p.mu, 1.0)
    return StParams(m=p.m, J_z=p.J_z, l_f=p.l_f, l_r=p.l_r, c_alpha_f=2.0 * c_w, c_alpha_r=2.0 * c_w, v=v)


class Model:
    """A model right-hand side bundled with its naming metadata."""

    name = "model"
    state_names: tuple = ()
    input_names: tuple = ()
    param_names: tuple = ()

    @property
    def n_states(self):
        return len(self.state_names)

    @property
    def n_params(self):
        return len(self.param_names)

    def rhs(self, x, u, c, locked=None):
        raise NotImplementedError


class DoubleTrack(Model):
    name = "dt"
    state_names = DT_STATE_NAMES
    input_names = DT_INPUT_NAMES
    param_names = DT_PARAM_NAMES

    def rhs(self, x, u, c, locked=None):
        return dt_rhs(x, u, c, locked)


class SingleTrack(Model):
    name = "st"
    state_names = ST_STATE_NAMES
    input_names = ST_INPUT_NAMES
    param_names = ST_PARAM_NAMES

    def rhs(self, x, u, c, locked=None):
        return st_rhs(x, u, c)


DOUBLE_TRACK = DoubleTrack()
SINGLE_TRACK = SingleTrack()
