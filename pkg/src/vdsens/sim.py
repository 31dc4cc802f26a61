"""Fixed-step integration of the models and their sensitivity systems.

Integration is classical RK4 on a fixed grid ``t_k = k h``.  The input is a
zero-order hold: the controller and the fault overrides are evaluated once at
the start of each step and held for all four stages.  The applied inputs are
recorded per step so that any run can be replayed open loop, which is what
the finite-difference oracle needs.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DOUBLE_TRACK, SINGLE_TRACK, Model, dt_wheel_forces, prepare_dt, st_params_from_dt
from .geometry import axle_to_wheels
from .params import DELTA_MAX, M_MAX, ParamSet, StParams, free_rolling_state, validate_params, validate_st_params
from .scenario import FaultEvent, RefSample, Scenario
from .sensitivity import sensitivity_system, steady_state_sensitivity_st
from .tire import vertical_loads

log = logging.getLogger(__name__)


class SimulationDiverged(RuntimeError):
    """Non-finite state encountered; ``last_time`` is the last finite sample."""

    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last valid time {last_time:.6g} s)")
        self.last_time = last_time


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings.

    Args:
        h: step size [s], in (0, 0.01].
        decimation: keep every ``decimation``-th step in the output.
        sensitivity: co-integrate the sensitivity system.
    """

    h: float = 1e-3
    decimation: int = 1
    sensitivity: bool = True

    def __post_init__(self):
        if not 0.0 < self.h <= 0.01:
            raise ValueError(f"integrator step h out of (0,0.01] (got {self.h})")
        if int(self.decimation) != self.decimation or self.decimation < 1:
            raise ValueError(f"decimation must be an integer >= 1 (got {self.decimation})")


def rk4_step(rhs, x, u, t: float, h: float):
    """One classical Runge-Kutta step of ``dx/dt = rhs(t, x, u)``.

    ``u`` is held constant over the step (zero-order hold); pass a callable
    ``u(t)`` to have it sampled once at the step start.

    Raises:
        SimulationDiverged: if the new state is not finite.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    if callable(u):
        u = u(t)
    k1 = rhs(t, x, u)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1, u)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2, u)
    k4 = rhs(t + h, x + h * k3, u)
    x_new = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_new)):
        raise SimulationDiverged("non-finite state after RK4 step", t)
    return x_new


# --- faults -----------------------------------------------------------------


def apply_faults(u_nominal, faults, t: float, x=None, params: ParamSet | None = None):
    """Override nominal double-track inputs with the active faults.

    Locked steering holds the wheel angle; a free-running wheel gets zero
    torque; a locked wheel is reported through the returned mask (its spin
    is projected to zero by the integrator) and, when ``x`` and ``params``
    are given, its torque entry is set to the implied brake torque
    ``r F_x`` that keeps it at rest.

    Returns:
        (u_effective, locked): input vector and boolean lock mask per wheel.
    """
    u = np.array(u_nominal, dtype=float)
    locked = np.zeros(4, dtype=bool)
    for f in faults:
        if t < f.time:
            continue
        if f.kind == "locked-steering":
            u[f.wheel] = f.angle
        elif f.kind == "free-running-wheel":
            u[4 + f.wheel] = 0.0
        elif f.kind == "locked-wheel":
            locked[f.wheel] = True
    if locked.any() and x is not None and params is not None:
        F_x = np.asarray(dt_wheel_forces(x, u, params)[0])
        r = np.asarray(params.r)
        u[4:8] = np.where(locked, r * F_x, u[4:8])
    return u, locked


class FaultInjector:
    """Stateful wrapper around :func:`apply_faults` that logs each activation once."""

    def __init__(self, faults, params: ParamSet | None = None):
        self.faults = tuple(faults)
        self.params = params
        self.log: list[dict] = []
        self._seen: set[int] = set()

    def __call__(self, u, t, x=None):
        for i, f in enumerate(self.faults):
            if t >= f.time and i not in self._seen:
                self._seen.add(i)
                self.log.append({"time": float(t), "scheduled": f.time, "wheel": f.wheel, "kind": f.kind, "angle": f.angle})
                log.info("fault %s on wheel %d active at t=%.4f", f.kind, f.wheel, t)
        return apply_faults(u, self.faults, t, x, self.params)


# --- controller -------------------------------------------------------------


@dataclass(frozen=True)
class ControllerGains:
    """Tracking controller gains.

    Args:
        kp_v: total wheel torque per speed error [N m / (m/s)].
        ki_v: integral gain on speed error [N m / m].
        k_yaw: front steering per yaw-rate error [rad / (rad/s)].
        ki_yaw: integral gain on yaw-rate error [rad / rad].
        rear_ratio: rear/front steering ratio when rear steering is enabled.
        delta_max: steering saturation [rad].
        torque_max: per-wheel torque saturation [N m].
    """

    kp_v: float = 2000.0
    ki_v: float = 400.0
    k_yaw: float = 1.0
    ki_yaw: float = 1.0
    rear_ratio: float = -0.2
    delta_max: float = DELTA_MAX
    torque_max: float = M_MAX


class TrackingController:
    """PI speed control with equal wheel torques, Ackermann feedforward steering
    from curvature and PI yaw-rate feedback on the front axle.

    Args:
        params: double-track parameters (wheelbase, mass, radii).
        gains: controller gains.
        rear_steering: steer the rear axle with ``gains.rear_ratio``.
    """

    def __init__(self, params: ParamSet, gains: ControllerGains = ControllerGains(), rear_steering: bool = False):
        self.params = params
        self.gains = gains
        self.rear_steering = rear_steering
        self.int_v = 0.0
        self.int_yaw = 0.0

    def _lateral(self, ref: RefSample, v: float, psi_dot: float, h: float):
        g = self.gains
        if ref.delta_f is not None:
            d_r = ref.delta_r if ref.delta_r is not None else 0.0
            return ref.delta_f, d_r
        err = v * ref.kappa - psi_dot
        d_f = np.arctan(self.params.wheelbase * ref.kappa) + g.k_yaw * err + g.ki_yaw * self.int_yaw
        if abs(d_f) < g.delta_max:
            self.int_yaw += err * h
        d_f = float(np.clip(d_f, -g.delta_max, g.delta_max))
        d_r = g.rear_ratio * d_f if self.rear_steering else 0.0
        return d_f, d_r

    def __call__(self, ref: RefSample, x, h: float = 0.0) -> np.ndarray:
        g, p = self.gains, self.params
        if ref.inputs is not None:
            return np.asarray(ref.inputs, dtype=float)
        v_x, psi_dot = float(x[0]), float(x[2])
        e_v = ref.v - v_x
        total = p.m * ref.a_x * float(np.mean(p.r)) + g.kp_v * e_v + g.ki_v * self.int_v
        wheel = total / 4.0
        if abs(wheel) < g.torque_max:
            self.int_v += e_v * h
        wheel = float(np.clip(wheel, -g.torque_max, g.torque_max))
        d_f, d_r = self._lateral(ref, v_x, psi_dot, h)
        delta = np.clip(axle_to_wheels(d_f, d_r, p), -g.delta_max, g.delta_max)
        return np.concatenate([delta, np.full(4, wheel)])


class StTrackingController(TrackingController):
    """Lateral part of :class:`TrackingController` for the single-track model."""

    def __init__(self, params: ParamSet, sp: StParams, gains: ControllerGains = ControllerGains(), rear_steering=False):
        super().__init__(params, gains, rear_steering)
        self.sp = sp

    def __call__(self, ref: RefSample, x, h: float = 0.0) -> np.ndarray:
        if ref.inputs is not None:
            return np.asarray(ref.inputs, dtype=float)
        return np.array(self._lateral(ref, self.sp.v, float(x[1]), h))


def tracking_controller(ref: RefSample, x, gains: ControllerGains, params: ParamSet) -> np.ndarray:
    """Stateless double-track control law (integrators at zero)."""
    return TrackingController(params, gains)(ref, x, 0.0)


# --- runs -------------------------------------------------------------------


@dataclass
class SimOutput:
    """Decimated simulation record; all series share ``t``.

    ``u_steps`` and ``locked_steps`` hold the applied inputs of every
    integration step (not decimated) for open-loop replay.
    """

    model: str
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    Z: np.ndarray | None
    state_names: tuple
    input_names: tuple
    param_names: tuple
    c: np.ndarray
    h: float
    decimation: int
    fault_log: list = field(default_factory=list)
    wheel_lift: np.ndarray | None = None
    pose: np.ndarray | None = None
    steady: dict | None = None
    u_steps: np.ndarray | None = None
    locked_steps: np.ndarray | None = None
    x0: np.ndarray | None = None

    def state(self, name: str) -> np.ndarray:
        return self.x[:, self.state_names.index(name)]

    def sens(self, state: str, param: str) -> np.ndarray:
        if self.Z is None:
            raise ValueError("run has no sensitivity data")
        return self.Z[:, self.state_names.index(state), self.param_names.index(param)]


def _model(name) -> Model:
    if isinstance(name, Model):
        return name
    try:
        return {"dt": DOUBLE_TRACK, "st": SINGLE_TRACK}[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected 'dt' or 'st'") from None


def _pose_rates(model: Model, x, sp: StParams | None):
    if model.name == "dt":
        return x[0], x[1], x[2]
    return sp.v * np.cos(x[0]), sp.v * np.sin(x[0]), x[1]


def run_scenario(
    model,
    scenario: Scenario,
    params: ParamSet = ParamSet(),
    cfg: IntegratorConfig | None = None,
    gains: ControllerGains = ControllerGains(),
    st_params: StParams | None = None,
    controller=None,
    x0=None,
) -> SimOutput:
    """Simulate one scenario.

    Args:
        model: ``"dt"`` or ``"st"``.
        scenario: validated scenario.
        params: double-track parameters (also the source of single-track
            parameters unless ``st_params`` is given).
        cfg: integrator settings; defaults to the scenario's step and
            sensitivity flag.
        gains: controller gains.
        st_params: single-track parameters; default derived from ``params``
            with ``v`` the mean reference speed.
        controller: optional policy ``(ref_sample, x, h) -> u`` replacing the
            built-in tracking controller.
        x0: initial state; default free rolling at the initial reference
            speed (double track) or zero (single track).

    Raises:
        SimulationDiverged: on non-finite states.
    """
    model = _model(model)
    scenario.validate()
    validate_params(params)
    cfg = cfg or IntegratorConfig(h=scenario.h, sensitivity=scenario.sensitivity)
    h, dec = cfg.h, int(cfg.decimation)
    n_steps = int(round(scenario.duration / h))
    ref = scenario.reference

    if model.name == "dt":
        c = params.to_vector()
        x = free_rolling_state(params, float(ref.sample(0.0).v))
        ctrl = controller or TrackingController(params, gains, scenario.rear_steering)
        injector = FaultInjector(scenario.faults, params)
        sp = None
    else:
        sp = st_params or st_params_from_dt(params, v=float(np.mean(ref.v)))
        validate_st_params(sp)
        c = sp.to_vector()
        x = np.zeros(2)
        ctrl = controller or StTrackingController(params, sp, gains, scenario.rear_steering)
        if scenario.faults:
            raise ValueError("fault injection is defined for the double-track model only")
        injector = None

    if x0 is not None:
        x = np.array(x0, dtype=float)
        if x.shape != (len(model.state_names),):
            raise ValueError(f"x0 must have {len(model.state_names)} entries (got shape {x.shape})")
    system = sensitivity_system(model, c)
    n, m = system.n, system.m
    Z = np.zeros((n, m)) if cfg.sensitivity else None
    x0 = x.copy()

    n_out = n_steps // dec + 1
    T = np.empty(n_out)
    X = np.empty((n_out, n))
    U = np.empty((n_out, len(model.input_names)))
    ZZ = np.empty((n_out, n, m)) if cfg.sensitivity else None
    pose = np.empty((n_out, 3))
    lift = np.zeros((n_out, 4), dtype=bool) if model.name == "dt" else None
    u_steps = np.empty((n_steps, len(model.input_names)))
    locked_steps = np.zeros((n_steps, 4), dtype=bool)
    X_w = Y_w = psi = 0.0

    def control(t, x):
        u = ctrl(ref.sample(t), x, h)
        if injector is None:
            return u, None
        return injector(u, t, x)

    def plain(t, xx, args):
        return system.f(xx, args[0], args[1])

    def augmented(t, y, args):
        xdot, zdot = system.augmented(y[:n], y[n:].reshape(n, m), args[0], args[1])
        return np.concatenate([xdot, zdot.ravel()])

    def record(j, t, x, Z, u):
        T[j] = t
        X[j] = x
        U[j] = u
        pose[j] = (X_w, Y_w, psi)
        if ZZ is not None:
            ZZ[j] = Z
        if lift is not None:
            lift[j] = vertical_loads(x, params)[1]

    locked_prev = np.zeros(4, dtype=bool)
    for k in range(n_steps):
        t = k * h
        u, locked = control(t, x)
        if locked is not None and locked.any():
            newly = locked & ~locked_prev
            if newly.any():
                # project spin of newly locked wheels to rest
                x = x.copy()
                x[9:13][newly] = 0.0
                if Z is not None:
                    Z = Z.copy()
                    Z[9:13][newly] = 0.0
            locked_prev = locked
            locked_steps[k] = locked
        lk = locked if locked is not None and locked.any() else None
        u_steps[k] = u
        if k % dec == 0:
            record(k // dec, t, x, Z, u)
        vx0, vy0, r0 = _pose_rates(model, x, sp)
        try:
            if Z is None:
                x = rk4_step(plain, x, (u, lk), t, h)
            else:
                y = rk4_step(augmented, np.concatenate([x, Z.ravel()]), (u, lk), t, h)
                x, Z = y[:n], y[n:].reshape(n, m)
        except (SimulationDiverged, FloatingPointError) as exc:
            raise SimulationDiverged(f"{model.name} run '{scenario.name}' diverged", t) from exc
        vx1, vy1, r1 = _pose_rates(model, x, sp)
        # auxiliary pose: trapezoid on heading, midpoint heading for position
        psi_new = psi + 0.5 * h * (r0 + r1)
        pm = 0.5 * (psi + psi_new)
        vxm, vym = 0.5 * (vx0 + vx1), 0.5 * (vy0 + vy1)
        X_w += h * (vxm * np.cos(pm) - vym * np.sin(pm))
        Y_w += h * (vxm * np.sin(pm) + vym * np.cos(pm))
        psi = psi_new
    if n_steps % dec == 0:
        u_last = u_steps[-1] if n_steps else control(0.0, x)[0]
        record(n_steps // dec, n_steps * h, x, Z, u_last)

    out = SimOutput(
        model=model.name,
        t=T,
        x=X,
        u=U,
        Z=ZZ,
        state_names=model.state_names,
        input_names=model.input_names,
        param_names=model.param_names,
        c=c,
        h=h,
        decimation=dec,
        fault_log=list(injector.log) if injector else [],
        wheel_lift=lift,
        pose=pose,
        u_steps=u_steps,
        locked_steps=locked_steps,
        x0=x0,
    )
    if scenario.kind == "circle":
        out.steady = {"x": X[-1].copy(), "Z": None if ZZ is None else ZZ[-1].copy()}
        if model.name == "st":
            x_ss, Z_ss = steady_state_sensitivity_st(sp, U[-1])
            out.steady.update(x_analytic=x_ss, Z_analytic=Z_ss)
    return out


def replay_batch(model, C, x0, u_steps, locked_steps, h: float, decimation: int = 1) -> np.ndarray:
    """Integrate many parameter vectors under recorded inputs.

    Args:
        model: ``"dt"`` or ``"st"``.
        C: parameter vectors ``(B, m)``.
        x0: initial state shared by all runs.
        u_steps: applied input per step ``(N, n_u)``.
        locked_steps: locked-wheel mask per step ``(N, 4)``.
        h: step size [s].
        decimation: output decimation.

    Returns:
        State trajectories ``(B, K, n)`` on the decimated grid.
    """
    model = _model(model)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    prepared = prepare_dt(C) if model.name == "dt" else C
    n_steps = len(u_steps)
    x = np.repeat(np.asarray(x0, dtype=float)[None, :], C.shape[0], axis=0)
    out = np.empty((C.shape[0], n_steps // decimation + 1, x.shape[1]))

    def rhs(t, xx, args):
        return model.rhs(xx, args[0], prepared, locked=args[1])

    locked_prev = np.zeros(4, dtype=bool)
    for k in range(n_steps):
        locked = np.asarray(locked_steps[k], dtype=bool)
        newly = locked & ~locked_prev
        if newly.any():
            x[:, 9:13][:, newly] = 0.0
        locked_prev = locked
        if k % decimation == 0:
            out[:, k // decimation] = x
        x = rk4_step(rhs, x, (u_steps[k], locked if locked.any() else None), k * h, h)
    if n_steps % decimation == 0:
        out[:, -1] = x
    return out


def fd_oracle_for_run(run: SimOutput, h_rel: float = 1e-6, h_abs: float = 1e-6, params=None) -> np.ndarray:
    """Central-difference sensitivities of a finished run by open-loop replay."""
    from .sensitivity import fd_sensitivities

    return fd_sensitivities(
        lambda C: replay_batch(run.model, C, run.x0, run.u_steps, run.locked_steps, run.h, run.decimation),
        run.c,
        h_rel,
        h_abs,
        params,
    )


def _run_job(job):
    return run_scenario(*job[0], **job[1])


def run_batch(jobs, workers: int | None = None) -> list:
    """Run ``[(args, kwargs), ...]`` through :func:`run_scenario`.

    Results are returned in job order, so the merge is deterministic
    whatever the completion order.  ``workers=1`` runs sequentially.
    """
    jobs = list(jobs)
    if workers == 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


# --- CSV --------------------------------------------------------------------


def csv_columns(out: SimOutput) -> list[str]:
    cols = ["t", *out.state_names, *out.input_names]
    if out.Z is not None:
        cols += [f"Z_{s}_{p}" for s in out.state_names for p in out.param_names]
    return cols


def write_csv(out: SimOutput, path) -> None:
    """One row per decimated sample: t, states, inputs, then ``Z_<state>_<param>``."""
    parts = [out.t[:, None], out.x, out.u]
    if out.Z is not None:
        parts.append(out.Z.reshape(len(out.t), -1))
    np.savetxt(path, np.hstack(parts), delimiter=",", header=",".join(csv_columns(out)), comments="", fmt="%.17g", encoding="utf-8")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Return ``(columns, data)`` of a CSV written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: {len(header)} header columns but {data.shape[1]} data columns")
    return header, data
