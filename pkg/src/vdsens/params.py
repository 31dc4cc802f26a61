"""Parameter sets, state/input layouts and validation.

Wheel order is fixed everywhere: front-left, front-right, rear-left,
rear-right (``fl, fr, rl, rr``).

The double-track parameter vector ``c`` has 35 entries, grouped and sorted
alphabetically inside each group::

    body (7)           g, h, l_f, l_r, m, s_f, s_r
    inertia (3)        J_x, J_y, J_z
    wheel inertia (4)  J_w_fl, J_w_fr, J_w_rl, J_w_rr
    wheel radius (4)   r_fl, r_fr, r_rl, r_rr
    suspension (4)     d_f, d_r, k_f, k_r
    friction (1)       mu
    tire (8)           lat_B, lat_C, lat_D, lat_E, lon_B, lon_C, lon_D, lon_E
    tire offset (4)    S_fl, S_fr, S_rl, S_rr

Sensitivity column ``k`` always refers to ``DT_PARAM_NAMES[k]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

WHEELS = ("fl", "fr", "rl", "rr")

DT_PARAM_NAMES = (
    "g", "h", "l_f", "l_r", "m", "s_f", "s_r",
    "J_x", "J_y", "J_z",
    "J_w_fl", "J_w_fr", "J_w_rl", "J_w_rr",
    "r_fl", "r_fr", "r_rl", "r_rr",
    "d_f", "d_r", "k_f", "k_r",
    "mu",
    "lat_B", "lat_C", "lat_D", "lat_E", "lon_B", "lon_C", "lon_D", "lon_E",
    "S_fl", "S_fr", "S_rl", "S_rr",
)  # fmt: skip
DT_PARAM_INDEX = {name: i for i, name in enumerate(DT_PARAM_NAMES)}

DT_STATE_NAMES = (
    "v_x", "v_y", "psi_dot", "z_s", "z_s_dot", "phi", "phi_dot", "theta", "theta_dot",
    "omega_fl", "omega_fr", "omega_rl", "omega_rr",
)  # fmt: skip
DT_INPUT_NAMES = tuple(f"delta_{w}" for w in WHEELS) + tuple(f"M_{w}" for w in WHEELS)

ST_PARAM_NAMES = ("m", "J_z", "l_f", "l_r", "c_alpha_f", "c_alpha_r", "v")
ST_STATE_NAMES = ("beta", "psi_dot")
ST_INPUT_NAMES = ("delta_f", "delta_r")

DELTA_MAX = 0.6
M_MAX = 2000.0


class ParamValidationError(ValueError):
    """Raised with one ``(name, value, constraint)`` entry per violated invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.messages()))

    def messages(self):
        out = []
        for name, val, constraint in self.violations:
            if constraint.startswith("in "):
                out.append(f"{name} out of {constraint[3:]} (got {val!r})")
            else:
                out.append(f"{name} must be {constraint} (got {val!r})")
        return out


@dataclass(frozen=True)
class MagicFormulaCoeffs:
    """Pacejka coefficients: stiffness B, shape C, peak D [N], curvature E."""

    B: float
    C: float
    D: float
    E: float

    def violations(self, prefix: str):
        out = []
        if not self.B > 0:
            out.append((f"{prefix}.B", self.B, "strictly positive"))
        if not 0 < self.C <= 3:
            out.append((f"{prefix}.C", self.C, "in (0,3]"))
        if not self.D > 0:
            out.append((f"{prefix}.D", self.D, "strictly positive"))
        if not self.E <= 1:
            out.append((f"{prefix}.E", self.E, "<= 1"))
        return out


def _quad(x):
    x = tuple(float(v) for v in x)
    if len(x) != 4:
        raise ValueError(f"expected 4 per-wheel values, got {len(x)}")
    return x


@dataclass(frozen=True)
class ParamSet:
    """Physical parameters of the double-track model (SI units).

    The defaults are the shipped reference vehicle: a 1600 kg passenger car
    with the centre of gravity ahead of mid-wheelbase, which makes it
    understeer with identical tires on both axles.
    """

    m: float = 1600.0
    g: float = 9.81
    h: float = 0.55
    l_f: float = 1.2
    l_r: float = 1.8
    s_f: float = 1.6
    s_r: float = 1.6
    J_x: float = 600.0
    J_y: float = 2500.0
    J_z: float = 2800.0
    J_w: tuple = (1.2, 1.2, 1.2, 1.2)
    r: tuple = (0.3, 0.3, 0.3, 0.3)
    k_f: float = 35000.0
    k_r: float = 35000.0
    d_f: float = 3500.0
    d_r: float = 3500.0
    mu: float = 1.0
    tire_lat: MagicFormulaCoeffs = field(default_factory=lambda: MagicFormulaCoeffs(9.5, 1.35, 4000.0, 0.97))
    tire_lon: MagicFormulaCoeffs = field(default_factory=lambda: MagicFormulaCoeffs(12.0, 1.65, 4000.0, 0.3))
    S: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("J_w", "r", "S"):
            object.__setattr__(self, name, _quad(getattr(self, name)))
        for name in ("tire_lat", "tire_lon"):
            v = getattr(self, name)
            if isinstance(v, dict):
                object.__setattr__(self, name, MagicFormulaCoeffs(**v))

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r

    def to_vector(self) -> np.ndarray:
        lat, lon = self.tire_lat, self.tire_lon
        return np.array(
            [self.g, self.h, self.l_f, self.l_r, self.m, self.s_f, self.s_r,
             self.J_x, self.J_y, self.J_z, *self.J_w, *self.r,
             self.d_f, self.d_r, self.k_f, self.k_r, self.mu,
             lat.B, lat.C, lat.D, lat.E, lon.B, lon.C, lon.D, lon.E, *self.S],
            dtype=float,
        )  # fmt: skip

    @classmethod
    def from_vector(cls, c) -> "ParamSet":
        c = [float(v) for v in c]
        if len(c) != len(DT_PARAM_NAMES):
            raise ValueError(f"expected {len(DT_PARAM_NAMES)} parameters, got {len(c)}")
        d = dict(zip(DT_PARAM_NAMES, c))
        return cls(
            m=d["m"], g=d["g"], h=d["h"], l_f=d["l_f"], l_r=d["l_r"], s_f=d["s_f"], s_r=d["s_r"],
            J_x=d["J_x"], J_y=d["J_y"], J_z=d["J_z"],
            J_w=tuple(d[f"J_w_{w}"] for w in WHEELS), r=tuple(d[f"r_{w}"] for w in WHEELS),
            k_f=d["k_f"], k_r=d["k_r"], d_f=d["d_f"], d_r=d["d_r"], mu=d["mu"],
            tire_lat=MagicFormulaCoeffs(d["lat_B"], d["lat_C"], d["lat_D"], d["lat_E"]),
            tire_lon=MagicFormulaCoeffs(d["lon_B"], d["lon_C"], d["lon_D"], d["lon_E"]),
            S=tuple(d[f"S_{w}"] for w in WHEELS),
        )  # fmt: skip

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("J_w", "r", "S"):
            out[k] = list(out[k])
        return out


_POSITIVE = ("m", "g", "h", "l_f", "l_r", "s_f", "s_r", "J_x", "J_y", "J_z", "k_f", "k_r", "d_f", "d_r")


def validate_params(p: ParamSet) -> ParamSet:
    """Check every invariant of ``p`` and return it unchanged.

    Raises:
        ParamValidationError: listing every violation, not only the first.
    """
    bad = []
    for name in _POSITIVE:
        v = getattr(p, name)
        if not (math.isfinite(v) and v > 0):
            bad.append((name, v, "strictly positive"))
    for name in ("J_w", "r"):
        for w, v in zip(WHEELS, getattr(p, name)):
            if not (math.isfinite(v) and v > 0):
                bad.append((f"{name}_{w}", v, "strictly positive"))
    for w, v in zip(WHEELS, p.S):
        if not math.isfinite(v):
            bad.append((f"S_{w}", v, "finite"))
    if not (0 < p.mu <= 2):
        bad.append(("mu", p.mu, "in (0,2]"))
    bad += p.tire_lat.violations("tire_lat")
    bad += p.tire_lon.violations("tire_lon")
    if bad:
        raise ParamValidationError(bad)
    return p


@dataclass(frozen=True)
class StParams:
    """Linear single-track parameters; the speed ``v`` is treated as a parameter."""

    m: float = 1600.0
    J_z: float = 2800.0
    l_f: float = 1.2
    l_r: float = 1.8
    c_alpha_f: float = 102600.0
    c_alpha_r: float = 102600.0
    v: float = 10.0

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in ST_PARAM_NAMES], dtype=float)

    @classmethod
    def from_vector(cls, c) -> "StParams":
        return cls(**{n: float(v) for n, v in zip(ST_PARAM_NAMES, c, strict=True)})

    def replace(self, **kw) -> "StParams":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return StParams(**d)


V_MIN = 1.0


def validate_st_params(sp: StParams) -> StParams:
    bad = [(n, getattr(sp, n), "strictly positive") for n in ST_PARAM_NAMES if not getattr(sp, n) > 0]
    if sp.v < V_MIN:
        bad.append(("v", sp.v, f">= {V_MIN}"))
    if bad:
        raise ParamValidationError(bad)
    return sp


def dt_state(**kw) -> np.ndarray:
    """Build a double-track state vector; unspecified entries are zero."""
    x = np.zeros(len(DT_STATE_NAMES))
    for k, v in kw.items():
        x[DT_STATE_NAMES.index(k)] = v
    return x


def free_rolling_state(p: ParamSet, v_x: float) -> np.ndarray:
    """Straight-line state at speed ``v_x`` with every wheel rolling without slip."""
    x = dt_state(v_x=v_x)
    x[9:13] = v_x / np.asarray(p.r)
    return x


@dataclass(frozen=True)
class ControlInput:
    """Wheel steering angles [rad] and drive torques [N m] for the double-track model."""

    delta: tuple = (0.0, 0.0, 0.0, 0.0)
    M: tuple = (0.0, 0.0, 0.0, 0.0)

    def to_vector(self) -> np.ndarray:
        return np.array([*self.delta, *self.M], dtype=float)

    @classmethod
    def from_vector(cls, u) -> "ControlInput":
        u = [float(v) for v in u]
        return cls(tuple(u[:4]), tuple(u[4:8]))
