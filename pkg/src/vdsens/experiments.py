"""Experiment drivers: circle sweep, fault injection, ODD batch, model consistency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import st_matrices, st_params_from_dt
from .geometry import ackermann_convert
from .params import ParamSet
from .scenario import FaultEvent, Reference, Scenario, odd_scenario, synth_odd_trajectory
from .sensitivity import steady_state_sensitivity_st
from .sim import IntegratorConfig, SimOutput, run_batch, run_scenario

CIRCLE_RADIUS = 200.0
FAULT_ANGLE = float(np.deg2rad(30.0))


@dataclass(frozen=True)
class CirclePoint:
    a_y: float
    v: float
    radius: float
    delta_f: float
    x_ss: np.ndarray
    Z_ss: np.ndarray
    Z_sim: np.ndarray | None = None


def circle_steer(sp, radius: float) -> float:
    """Front steering angle that holds the single-track model on the circle."""
    A, B = st_matrices(sp)
    gain = -np.linalg.solve(A, B @ np.array([1.0, 0.0]))[1]
    return float(sp.v / radius / gain)


def circle_sweep(params: ParamSet, a_y_values, radius: float = CIRCLE_RADIUS, simulate: bool = False, duration: float = 30.0):
    """Steady-state single-track sensitivities on a fixed-radius circle.

    Speed is set from ``v = sqrt(a_y R)``; the steering angle from the
    steady-state yaw gain.  With ``simulate`` the augmented system is also
    integrated under that constant input and its final sensitivities are
    returned alongside the algebraic ones.
    """
    points = []
    for a_y in a_y_values:
        v = float(np.sqrt(a_y * radius))
        sp = st_params_from_dt(params, v=v)
        d = circle_steer(sp, radius)
        x_ss, Z_ss = steady_state_sensitivity_st(sp, [d, 0.0])
        Z_sim = None
        if simulate:
            ref = Reference.constant(v, 1.0 / radius, delta_f=d, delta_r=0.0)
            out = run_scenario("st", Scenario("circle", duration, ref, name=f"circle_{a_y}"), params, st_params=sp)
            Z_sim = out.Z[-1]
        points.append(CirclePoint(a_y, v, radius, d, x_ss, Z_ss, Z_sim))
    return points


def fault_scenarios(v: float = 12.0, radius: float = 100.0, duration: float = 5.0, t_fault: float = 1.0, wheel: int = 0, angle: float = FAULT_ANGLE):
    """Nominal and locked-steering scenario pair on a gentle circle."""
    ref = Reference.constant(v, 1.0 / radius)
    nominal = Scenario("trajectory-replay", duration, ref, name="nominal")
    faulted = Scenario("trajectory-replay", duration, ref, faults=(FaultEvent(t_fault, wheel, "locked-steering", angle),), name="faulted")
    return nominal, faulted


def fault_experiment(params: ParamSet, cfg: IntegratorConfig | None = None, workers: int | None = 1, settle: float = 10.0, **kw):
    """Run the nominal/faulted pair on the double-track model.

    The vehicle first drives ``settle`` seconds on the circle without
    sensitivities; both recorded runs start from that settled state with
    ``Z = 0``, so the nominal run carries no start-up transient.
    """
    cfg = cfg or IntegratorConfig(decimation=10)
    nominal, faulted = fault_scenarios(**kw)
    x0 = None
    if settle > 0:
        pre = Scenario("circle", settle, nominal.reference, name="settle")
        x0 = run_scenario("dt", pre, params, IntegratorConfig(h=cfg.h, sensitivity=False, decimation=int(round(settle / cfg.h)))).x[-1]
    return tuple(run_batch([(("dt", s, params, cfg), {"x0": x0}) for s in (nominal, faulted)], workers))


def odd_batch(params: ParamSet, n: int, seed: int, duration: float = 20.0, model: str = "st", cfg=None, workers: int | None = 1):
    """Closed-loop runs over ``n`` synthetic ODD trajectories (seeds ``seed .. seed+n-1``)."""
    cfg = cfg or IntegratorConfig(decimation=10)
    jobs = [((model, odd_scenario(seed + i, duration), params, cfg), {}) for i in range(n)]
    return run_batch(jobs, workers)


def model_consistency(params: ParamSet, seed: int = 7, duration: float = 10.0, a_limit: float = 3.0, v_range=(11.0, 13.0)):
    """Yaw response of both models on one low-dynamics trajectory.

    The double-track model is tracked in closed loop; its wheel angles are
    converted to axle angles and replayed open loop on the single-track
    model at the mean double-track speed.

    Returns:
        (dt_run, st_run, rms_rel): runs and RMS yaw-rate error relative to
        the RMS double-track yaw rate.
    """
    ref = synth_odd_trajectory(seed, duration, a_limit, v_range=v_range)
    cfg = IntegratorConfig(sensitivity=False, decimation=10)
    dt_run = run_scenario("dt", Scenario("odd-synthetic", duration, ref, name="consistency"), params, cfg)
    axle = np.array([ackermann_convert(u[:4], params) for u in dt_run.u_steps])
    t_steps = np.arange(len(axle)) * dt_run.h
    replay = Reference(t=t_steps, v=np.zeros(len(axle)), kappa=np.zeros(len(axle)), inputs=axle)
    sp = st_params_from_dt(params, v=float(np.mean(dt_run.state("v_x"))))
    st_run = run_scenario("st", Scenario("trajectory-replay", duration, replay), params, cfg, st_params=sp)
    a, b = dt_run.state("psi_dot"), st_run.state("psi_dot")
    rms_rel = float(np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(a**2)))
    return dt_run, st_run, rms_rel


def pooled_abs(outputs: list[SimOutput], state: str, param: str) -> np.ndarray:
    return np.concatenate([np.abs(o.sens(state, param)) for o in outputs])
