"""Wheel lever-arm tables and Ackermann steering conversion.

Vehicle frame: x forward, y to the right, z down; a positive steering angle
turns the vehicle to the right and a positive yaw rate is a right turn.  The
lateral lever arm ``p_ij`` is positive on the left side, so the wheel sits at
``(q_ij, -p_ij)``.
"""

from __future__ import annotations

import numpy as np

from . import ad
from .params import DT_PARAM_INDEX, ParamSet


class ParamView:
    """Named access into a (possibly batched or dual) parameter vector.

    Scalars come back with a trailing axis of length one and per-wheel
    groups with a trailing axis of length four, so they broadcast against
    each other inside the model equations.
    """

    def __init__(self, c):
        self._c = c

    def __getattr__(self, name):
        i = DT_PARAM_INDEX[name]
        return self._c[..., i : i + 1]

    def quad(self, prefix):
        i = DT_PARAM_INDEX[prefix + "_fl"]
        return self._c[..., i : i + 4]


def geometry_tables(P: ParamView):
    """Return ``(p_ij, q_ij, l'_ij)`` in wheel order fl, fr, rl, rr."""
    half_f, half_r = 0.5 * P.s_f, 0.5 * P.s_r
    p = ad.concatenate([half_f, -half_f, half_r, -half_r])
    q = ad.concatenate([P.l_f, P.l_f, -P.l_r, -P.l_r])
    lp = ad.concatenate([P.l_r, P.l_r, P.l_f, P.l_f])
    return p, q, lp


def axle_to_wheels(delta_f: float, delta_r: float, p: ParamSet) -> np.ndarray:
    """Wheel angles sharing one instantaneous centre with the given axle angles.

    With ``kappa = (tan(delta_f) - tan(delta_r)) / L`` (inverse lateral offset
    of the turning centre) each wheel satisfies
    ``tan(delta_ij) = tan(delta_i) / (1 + p_ij * kappa)``.  Parallel steering
    (``kappa = 0``) returns the axle angles unchanged.
    """
    tf, tr = np.tan(delta_f), np.tan(delta_r)
    kappa = (tf - tr) / p.wheelbase
    lever = np.array([0.5 * p.s_f, -0.5 * p.s_f, 0.5 * p.s_r, -0.5 * p.s_r])
    t_axle = np.array([tf, tf, tr, tr])
    return np.arctan(t_axle / (1.0 + lever * kappa))


def _cot_mean(a: float, b: float) -> float:
    ta, tb = np.tan(a), np.tan(b)
    if ta * tb <= 0.0:
        # straight ahead (or no common turning centre): plain mean
        return float(0.5 * (a + b))
    # cot(delta) = (cot(a) + cot(b)) / 2, written in tangent form to stay exact for small angles
    return float(np.arctan(2.0 * ta * tb / (ta + tb)))


def ackermann_convert(delta_ij, p: ParamSet) -> tuple[float, float]:
    """Convert four wheel angles to equivalent single-track axle angles."""
    d = np.asarray(delta_ij, dtype=float)
    return _cot_mean(d[0], d[1]), _cot_mean(d[2], d[3])
