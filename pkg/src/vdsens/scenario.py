"""Scenario descriptions: reference motion, faults and synthetic ODD trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import DELTA_MAX

SCENARIO_KINDS = ("circle", "steering-step", "trajectory-replay", "odd-synthetic")
FAULT_KINDS = ("locked-steering", "free-running-wheel", "locked-wheel")
WHEEL_NAMES = ("fl", "fr", "rl", "rr")


class ScenarioError(ValueError):
    """Invalid scenario or fault description."""


@dataclass(frozen=True)
class FaultEvent:
    """Actuator fault switched on at ``time`` and held for the rest of the run.

    Args:
        time: activation time [s].
        wheel: target wheel index (0 fl, 1 fr, 2 rl, 3 rr).
        kind: one of ``FAULT_KINDS``.
        angle: steering angle held by a locked-steering fault [rad].
    """

    time: float
    wheel: int
    kind: str
    angle: float = 0.0

    def __post_init__(self):
        if isinstance(self.wheel, str):
            if self.wheel not in WHEEL_NAMES:
                raise ScenarioError(f"unknown wheel {self.wheel!r}")
            object.__setattr__(self, "wheel", WHEEL_NAMES.index(self.wheel))

    def violations(self, duration: float, delta_max: float = DELTA_MAX) -> list[str]:
        out = []
        if self.kind not in FAULT_KINDS:
            out.append(f"fault kind {self.kind!r} not one of {FAULT_KINDS}")
        if not 0 <= self.wheel <= 3:
            out.append(f"fault wheel index {self.wheel} not in 0..3")
        if not 0.0 <= self.time <= duration:
            out.append(f"fault time {self.time} outside [0, {duration}]")
        if self.kind == "locked-steering" and abs(self.angle) > delta_max:
            out.append(f"locked steering angle {self.angle} exceeds actuator range {delta_max}")
        return out


@dataclass(frozen=True)
class RefSample:
    v: float
    kappa: float
    a_x: float = 0.0
    delta_f: float | None = None
    delta_r: float | None = None
    inputs: np.ndarray | None = None


@dataclass(frozen=True)
class Reference:
    """Time-indexed reference, linearly interpolated between samples.

    Either speed and curvature (tracked by the controller) or explicit axle
    steering angles / full input vectors (applied open loop).
    """

    t: np.ndarray
    v: np.ndarray
    kappa: np.ndarray
    a_x: np.ndarray | None = None
    delta_f: np.ndarray | None = None
    delta_r: np.ndarray | None = None
    inputs: np.ndarray | None = None

    def __post_init__(self):
        for name in ("t", "v", "kappa", "a_x", "delta_f", "delta_r", "inputs"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.asarray(val, dtype=float))
        if self.t.ndim != 1 or self.t.size == 0:
            raise ScenarioError("reference needs at least one sample time")
        if np.any(np.diff(self.t) <= 0):
            raise ScenarioError("reference sample times must be strictly increasing")

    @staticmethod
    def constant(v: float, kappa: float = 0.0, **kw) -> "Reference":
        extra = {k: np.array([val]) for k, val in kw.items()}
        return Reference(t=np.array([0.0]), v=np.array([v]), kappa=np.array([kappa]), **extra)

    def _at(self, arr, t):
        if arr is None:
            return None
        if arr.ndim == 2:
            return np.array([np.interp(t, self.t, col) for col in arr.T])
        return float(np.interp(t, self.t, arr))

    def sample(self, t: float) -> RefSample:
        a_x = self._at(self.a_x, t)
        return RefSample(
            v=self._at(self.v, t),
            kappa=self._at(self.kappa, t),
            a_x=0.0 if a_x is None else a_x,
            delta_f=self._at(self.delta_f, t),
            delta_r=self._at(self.delta_r, t),
            inputs=self._at(self.inputs, t),
        )

    def lateral_acceleration(self) -> np.ndarray:
        return self.v * self.v * self.kappa

    def heading(self) -> np.ndarray:
        """Reference heading by trapezoidal integration of ``v * kappa``."""
        rate = self.v * self.kappa
        return np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(self.t))])


@dataclass(frozen=True)
class Scenario:
    """Declarative experiment description.

    Args:
        kind: one of ``SCENARIO_KINDS``.
        duration: simulated time [s].
        reference: reference motion.
        faults: actuator faults.
        sensitivity: co-integrate the sensitivity system.
        h: integrator step [s].
        rear_steering: let the controller steer the rear axle.
        name: label used in file names.
    """

    kind: str
    duration: float
    reference: Reference
    faults: tuple = ()
    sensitivity: bool = True
    h: float = 1e-3
    rear_steering: bool = False
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "faults", tuple(self.faults))

    def violations(self) -> list[str]:
        out = []
        if self.kind not in SCENARIO_KINDS:
            out.append(f"scenario kind {self.kind!r} not one of {SCENARIO_KINDS}")
        if not self.duration > 0:
            out.append(f"duration must be strictly positive (got {self.duration})")
        if not 0 < self.h <= 0.01:
            out.append(f"integrator step h out of (0,0.01] (got {self.h})")
        for f in self.faults:
            out.extend(f.violations(self.duration))
        return out

    def validate(self) -> "Scenario":
        errs = self.violations()
        if errs:
            raise ScenarioError("; ".join(errs))
        return self


def circle_scenario(radius: float, v: float, duration: float = 20.0, **kw) -> Scenario:
    """Constant-speed circle; positive radius turns right."""
    return Scenario("circle", duration, Reference.constant(v, 1.0 / radius), **kw)


def steering_step_scenario(v: float, delta_f: float, t_step: float = 1.0, duration: float = 10.0, **kw) -> Scenario:
    """Open-loop front-axle steering step at ``t_step``, speed held by the controller."""
    eps = 1e-6
    t = np.array([0.0, t_step, t_step + eps, duration + 1.0])
    ref = Reference(
        t=t,
        v=np.full(4, v),
        kappa=np.zeros(4),
        delta_f=np.array([0.0, 0.0, delta_f, delta_f]),
        delta_r=np.zeros(4),
    )
    return Scenario("steering-step", duration, ref, **kw)


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def synth_odd_trajectory(
    seed: int,
    duration: float,
    a_limit: float = 3.0,
    dt: float = 0.01,
    v_range: tuple = (8.0, 16.0),
    margin: float = 0.9,
) -> Reference:
    """Random speed and curvature profile inside an acceleration envelope.

    Speed and lateral acceleration move between random plateau values with
    smoothstep transitions.  A smoothstep over ``T`` seconds has peak slope
    ``1.5 * jump / T``, so transition times are chosen long enough to keep
    ``|a_x| <= margin * a_limit``; plateaus of lateral acceleration are drawn
    in ``[-margin * a_limit, margin * a_limit]`` and curvature is
    ``a_y / v^2``, so ``|a_y| <= margin * a_limit`` holds at every sample.

    Raises:
        ScenarioError: if ``duration <= 0`` or ``a_limit <= 0``.
    """
    if not duration > 0:
        raise ScenarioError(f"duration must be strictly positive (got {duration})")
    if not a_limit > 0:
        raise ScenarioError(f"a_limit must be strictly positive (got {a_limit})")
    rng = np.random.default_rng(seed)
    t = np.arange(0.0, duration + 0.5 * dt, dt)
    a_max = margin * a_limit

    def profile(lo, hi, min_ramp, slope_cap):
        out = np.empty_like(t)
        level = rng.uniform(lo, hi)
        t0 = 0.0
        out[:] = level
        while t0 < duration:
            hold = rng.uniform(1.0, 4.0)
            target = rng.uniform(lo, hi)
            ramp = max(min_ramp, 1.5 * abs(target - level) / slope_cap) if slope_cap else min_ramp
            ts = t0 + hold
            mask = t >= ts
            out[mask] = level + (target - level) * _smoothstep((t[mask] - ts) / ramp)
            level, t0 = target, ts + ramp
        return out

    v = profile(*v_range, 2.0, a_max)
    a_y = profile(-a_max, a_max, 1.5, None)
    a_x = np.gradient(v, t) if t.size > 1 else np.zeros_like(t)
    return Reference(t=t, v=v, kappa=a_y / (v * v), a_x=a_x)


def odd_scenario(seed: int, duration: float = 20.0, a_limit: float = 3.0, **kw) -> Scenario:
    return Scenario("odd-synthetic", duration, synth_odd_trajectory(seed, duration, a_limit), name=f"odd_{seed}", **kw)
