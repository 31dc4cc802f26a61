"""Magic Formula tire forces, slip quantities and vertical loads.

All functions accept floats, numpy arrays or :class:`vdsens.ad.Dual` values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ad
from .geometry import ParamView, geometry_tables
from .params import MagicFormulaCoeffs, ParamSet

__all__ = [
    "MagicFormulaCoeffs",
    "WheelKinematics",
    "magic_formula",
    "cornering_stiffness",
    "slip_quantities",
    "vertical_loads",
    "stationary_loads",
]

V_EPS = 0.5
V_EPS_WIDTH = 0.1
LOAD_CLAMP_WIDTH = 50.0


@dataclass(frozen=True)
class WheelKinematics:
    v_x_w: float
    v_y_w: float
    omega: float
    r: float
    delta: float = 0.0


def magic_formula(slip, B, C, D, E, mu=1.0, load_scale=1.0, S=0.0):
    """Pure-slip Magic Formula with friction and load scaling of the peak.

    ``F = mu * load_scale * D * sin(C * atan(b x - E (b x - atan(b x)))) + S``
    with ``b = B / mu``: friction scales the peak force while the slope at
    zero slip stays ``load_scale * B * C * D``, so a lower friction value
    makes the tire saturate earlier without softening its linear range.
    """
    bx = (B / mu) * slip
    return mu * load_scale * D * ad.sin(C * ad.arctan(bx - E * (bx - ad.arctan(bx)))) + S


def magic_formula_c(slip, c: MagicFormulaCoeffs, mu=1.0, load_scale=1.0, S=0.0):
    return magic_formula(slip, c.B, c.C, c.D, c.E, mu, load_scale, S)


def cornering_stiffness(c: MagicFormulaCoeffs, mu=1.0, load_scale=1.0):
    """Slope of :func:`magic_formula` at zero slip [N/rad].

    ``mu`` is accepted for symmetry with :func:`magic_formula`; the slope
    does not depend on it.
    """
    return load_scale * c.B * c.C * c.D


def slip_quantities(v_x_w, v_y_w, omega, r, v_eps=V_EPS, width=V_EPS_WIDTH):
    """Longitudinal slip and slip angle at one contact patch.

    ``lambda = (omega r - v_x_w) / n`` and ``alpha = -atan(v_y_w / n)`` with
    ``n`` a C1 blend of ``max(|v_x_w|, v_eps)``: exact above
    ``v_eps + width``, constant ``v_eps`` below ``v_eps - width``.  Below the
    regularisation speed both slips therefore scale linearly with the contact
    velocities and vanish at standstill.
    """
    n = ad.smooth_max(abs(v_x_w), v_eps, width)
    lam = (omega * r - v_x_w) / n
    alpha = -ad.arctan(v_y_w / n)
    return lam, alpha


def wheel_slips(k: WheelKinematics, v_eps=V_EPS):
    return slip_quantities(k.v_x_w, k.v_y_w, k.omega, k.r, v_eps)


def _stationary(P: ParamView, lp):
    return P.m * P.g * lp / (2.0 * (P.l_f + P.l_r))


def wheel_loads(F_z0, k, d, p, q, z_s, z_s_dot, phi, phi_dot, theta, theta_dot):
    """Raw and clamped tire loads around the stationary loads ``F_z0``.

    The suspension term is stiffness times deflection plus damping times
    deflection rate; deflection at a wheel is ``p phi + q theta - z_s`` so
    positive lift ``z_s`` unloads every wheel.
    """
    raw = F_z0 + k * (p * phi + q * theta - z_s) + d * (p * phi_dot + q * theta_dot - z_s_dot)
    return raw, ad.smooth_max(raw, 0.0, LOAD_CLAMP_WIDTH)


def stationary_loads(p: ParamSet) -> np.ndarray:
    P = ParamView(p.to_vector())
    _, _, lp = geometry_tables(P)
    return np.asarray(_stationary(P, lp), dtype=float)


def vertical_loads(x, p: ParamSet):
    """Tire loads for a double-track state.

    Returns:
        (loads, lifted): clamped loads [N] and a boolean flag per wheel that is
        set whenever the non-negativity clamp modifies the raw load.
    """
    x = np.asarray(x, dtype=float)
    P = ParamView(p.to_vector() if isinstance(p, ParamSet) else np.asarray(p, dtype=float))
    p_, q, lp = geometry_tables(P)
    k = ad.concatenate([P.k_f, P.k_f, P.k_r, P.k_r])
    d = ad.concatenate([P.d_f, P.d_f, P.d_r, P.d_r])
    s = [x[..., i : i + 1] for i in range(3, 9)]
    raw, clamped = wheel_loads(_stationary(P, lp), k, d, p_, q, *s)
    return np.asarray(clamped), np.asarray(raw) < LOAD_CLAMP_WIDTH
