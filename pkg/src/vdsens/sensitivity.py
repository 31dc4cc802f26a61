"""Direct-method parameter sensitivities.

For a model ``dx/dt = f(x, u, c)`` the sensitivities ``Z[i, k] = dx_i/dc_k``
obey the linear system ``dZ/dt = f_c + J Z`` with ``J = df/dx`` and
``f_c = df/dc``, started from ``Z(0) = 0``.  ``J`` and ``f_c`` are exact
(forward-mode AD); :func:`fd_sensitivity_oracle` is the independent check.
"""

from __future__ import annotations

import numpy as np

from . import ad
from .dynamics import DOUBLE_TRACK, SINGLE_TRACK, Model, _st_entries, prepare_dt, st_matrices, st_rhs
from .params import StParams


def jacobians(rhs, x, u, c, **kw):
    """Evaluate ``(f, J, f_c)`` in one forward-mode pass."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    n, m = x.size, c.size
    out = rhs(ad.seed(x, 0, n + m), u, ad.seed(c, n, n + m), **kw)
    if not isinstance(out, ad.Dual):
        return np.asarray(out), np.zeros((n, n)), np.zeros((n, m))
    J, f_c = out.der[:, :n], out.der[:, n:]
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(f_c))):
        raise FloatingPointError("non-finite Jacobian entries: model evaluated at an invalid state")
    return out.val, np.array(J), np.array(f_c)


def model_jacobian(rhs, x, u, c, **kw) -> np.ndarray:
    """``J[i, j] = df_i/dx_j``, exact to rounding."""
    return jacobians(rhs, x, u, c, **kw)[1]


def param_jacobian(rhs, x, u, c, **kw) -> np.ndarray:
    """``f_c[i, k] = df_i/dc_k``, exact to rounding."""
    return jacobians(rhs, x, u, c, **kw)[2]


def sensitivity_rhs(J, f_c, Z) -> np.ndarray:
    """Right-hand side of the sensitivity system, ``f_c + J Z``."""
    J, f_c, Z = np.asarray(J), np.asarray(f_c), np.asarray(Z)
    n = J.shape[0]
    if J.shape != (n, n) or f_c.shape[0] != n or Z.shape != f_c.shape:
        raise ValueError(f"dimension mismatch: J{J.shape}, f_c{f_c.shape}, Z{Z.shape}")
    return f_c + J @ Z


def beta_sensitivity(v_x, v_y, Z_vx, Z_vy):
    """Side-slip sensitivity from velocity sensitivities via ``beta = atan(v_y/v_x)``."""
    v_x, v_y = np.asarray(v_x, dtype=float), np.asarray(v_y, dtype=float)
    den = v_x * v_x + v_y * v_y
    if np.any(den == 0.0):
        raise ZeroDivisionError("side-slip sensitivity undefined at standstill")
    return (v_x * np.asarray(Z_vy) - v_y * np.asarray(Z_vx)) / den


def fd_jacobians(rhs, x, u, c, rel_step=1e-6, **kw):
    """Central-difference ``(J, f_c)``; step ``rel_step * max(|v|, 1)`` per variable."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)

    def column(vec, k, call):
        step = rel_step * max(abs(vec[k]), 1.0)
        hi, lo = vec.copy(), vec.copy()
        hi[k] += step
        lo[k] -= step
        return (np.asarray(call(hi)) - np.asarray(call(lo))) / (hi[k] - lo[k])

    J = np.column_stack([column(x, j, lambda xx: rhs(xx, u, c, **kw)) for j in range(x.size)])
    F = np.column_stack([column(c, k, lambda cc: rhs(x, u, cc, **kw)) for k in range(c.size)])
    return J, F


class SensitivitySystem:
    """Model plus sensitivity system at a fixed parameter vector.

    Parameter-only quantities are prepared once, both in plain and in
    dual (seeded) form, and reused for every evaluation of a run.
    """

    def __init__(self, model: Model, c):
        self.model = model
        self.c = np.asarray(c, dtype=float)
        self.n, self.m = model.n_states, model.n_params
        if model is DOUBLE_TRACK or model.name == "dt":
            self.prepared = prepare_dt(self.c)
            self._seeded_c = prepare_dt(ad.seed(self.c, self.n, self.n + self.m))
        else:
            self.prepared = self.c
            self._seeded_c = ad.seed(self.c, self.n, self.n + self.m)

    def f(self, x, u, locked=None):
        return self.model.rhs(x, u, self.prepared, locked=locked)

    def derivatives(self, x, u, locked=None):
        """``(f, J, f_c)`` at ``(x, u)``."""
        n = self.n
        out = self.model.rhs(ad.seed(x, 0, n + self.m), u, self._seeded_c, locked=locked)
        return out.val, out.der[:, :n], out.der[:, n:]

    def augmented(self, x, Z, u, locked=None):
        """``(dx/dt, dZ/dt)``."""
        f, J, f_c = self.derivatives(x, u, locked)
        return f, f_c + J @ Z


class SingleTrackSensitivity(SensitivitySystem):
    """Single-track specialisation.

    The model is linear in ``(x, u)``, so ``J = A`` and
    ``f_c = dA/dc x + dB/dc u``; the parameter derivatives of ``A`` and ``B``
    are taken once by forward-mode AD.
    """

    def __init__(self, c):
        super().__init__(SINGLE_TRACK, c)
        sp = StParams.from_vector(self.c)
        self.A, self.B = st_matrices(sp)
        seeded = [ad.seed(self.c, 0, self.m)[i : i + 1] for i in range(self.m)]
        entries = _st_entries(*seeded)
        # T[i, k, j]: d/dc_k of the coefficient multiplying (beta, psi_dot, delta_f, delta_r)[j] in row i
        d = [np.asarray(e.der)[0] for e in entries]
        self._T = np.array([[d[0], d[1], d[4], d[5]], [d[2], d[3], d[6], d[7]]]).transpose(0, 2, 1)
        self._e = [float(np.asarray(e.val)[0]) for e in entries]

    def f(self, x, u, locked=None):
        # same expression order as st_rhs, on cached scalar coefficients
        a11, a12, a21, a22, b11, b12, b21, b22 = self._e
        beta, r, d_f, d_r = float(x[0]), float(x[1]), float(u[0]), float(u[1])
        return np.array([a11 * beta + a12 * r + b11 * d_f + b12 * d_r, a21 * beta + a22 * r + b21 * d_f + b22 * d_r])

    def derivatives(self, x, u, locked=None):
        w = np.concatenate([np.asarray(x, dtype=float), np.asarray(u, dtype=float)])
        return self.f(x, u), self.A, self._T @ w

    def augmented(self, x, Z, u, locked=None):
        f_c = self._T @ np.concatenate([x, np.asarray(u, dtype=float)])
        return self.f(x, u), f_c + self.A @ Z


def sensitivity_system(model: Model, c) -> SensitivitySystem:
    if model.name == "st":
        return SingleTrackSensitivity(c)
    return SensitivitySystem(model, c)


def perturbation(c_k: float, h_rel: float, h_abs: float) -> float:
    return h_rel * abs(c_k) if c_k != 0.0 else h_abs


def fd_sensitivity_oracle(simulate, scenario, c, k: int, h_rel: float = 1e-6, h_abs: float = 1e-6):
    """Central-difference sensitivity trajectory for parameter ``k``.

    Args:
        simulate: ``simulate(scenario, c)`` returns a state trajectory
            ``(K, n)`` on a fixed time grid.  Closed-loop inputs must be
            replayed from the nominal run, not re-computed.
        scenario: passed through to ``simulate``.
        c: nominal parameter vector.
        k: parameter index.
        h_rel: relative perturbation; ``h_abs`` is used when ``c[k] == 0``.
    """
    c = np.asarray(c, dtype=float)
    step = perturbation(c[k], h_rel, h_abs)
    hi, lo = c.copy(), c.copy()
    hi[k] += step
    lo[k] -= step
    return (np.asarray(simulate(scenario, hi)) - np.asarray(simulate(scenario, lo))) / (hi[k] - lo[k])


def fd_sensitivities(simulate_batch, c, h_rel: float = 1e-6, h_abs: float = 1e-6, params=None):
    """Central differences for many parameters in one batched simulation.

    ``simulate_batch`` maps a ``(B, m)`` array of parameter vectors to state
    trajectories ``(B, K, n)``.  Returns ``Z`` with shape ``(K, n, len(params))``.
    """
    c = np.asarray(c, dtype=float)
    params = list(range(c.size)) if params is None else list(params)
    C = np.repeat(c[None, :], 2 * len(params), axis=0)
    width = np.empty(len(params))
    for j, k in enumerate(params):
        step = perturbation(c[k], h_rel, h_abs)
        C[2 * j, k] += step
        C[2 * j + 1, k] -= step
        width[j] = C[2 * j, k] - C[2 * j + 1, k]
    X = np.asarray(simulate_batch(C))
    Z = (X[0::2] - X[1::2]) / width[:, None, None]
    return np.moveaxis(Z, 0, -1)


def steady_state_sensitivity_st(sp: StParams, u_const):
    """Steady state and steady-state sensitivities of the single-track model.

    ``x_ss = -A^-1 B u`` and ``Z_ss = -A^-1 f_c(x_ss, u)``.

    Raises:
        ValueError: if ``A`` is singular.
    """
    A, B = st_matrices(sp)
    u = np.asarray(u_const, dtype=float)
    if abs(np.linalg.det(A)) < 1e-14 * max(1.0, np.abs(A).max() ** 2):
        raise ValueError("single-track system matrix is singular")
    x_ss = -np.linalg.solve(A, B @ u)
    f_c = param_jacobian(st_rhs, x_ss, u, sp.to_vector())
    Z_ss = -np.linalg.solve(A, f_c)
    return x_ss, Z_ss
