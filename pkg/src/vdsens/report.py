"""Boxplot statistics, parameter dominance rankings and fault-shift analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BUCKET_FLOOR = 1e-300


@dataclass(frozen=True)
class SummaryStats:
    """Boxplot statistics of one sample set.

    Quartiles use linear interpolation between order statistics: for sorted
    samples ``s_0 .. s_{n-1}`` the q-quantile is read at fractional rank
    ``(n - 1) q``.  Whiskers stop at the most extreme samples inside
    ``[q1 - 1.5 iqr, q3 + 1.5 iqr]``; samples beyond them are outliers.
    """

    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    mean: float
    outliers: tuple
    n: int
    minimum: float
    maximum: float


def summarize(samples) -> SummaryStats:
    """Boxplot statistics.

    Raises:
        ValueError: on an empty sample set.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("cannot summarize an empty sample set")
    q1, med, q3 = np.quantile(s, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = s[(s >= lo_fence) & (s <= hi_fence)]
    outliers = tuple(float(v) for v in s[(s < lo_fence) | (s > hi_fence)])
    return SummaryStats(
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        iqr=float(iqr),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        mean=float(np.mean(s)),
        outliers=outliers,
        n=int(s.size),
        minimum=float(s[0]),
        maximum=float(s[-1]),
    )


def magnitude_bucket(value: float) -> int:
    """``floor(log10(|value|))`` with zero mapped to the bucket of ``1e-300``."""
    return int(math.floor(math.log10(max(abs(value), BUCKET_FLOOR))))


@dataclass(frozen=True)
class RankingEntry:
    param: str
    median_abs: float
    bucket: int


def _z_samples(outputs, state: str, param_names) -> np.ndarray:
    if not isinstance(outputs, (list, tuple)):
        outputs = [outputs]
    blocks = []
    for o in outputs:
        if o.Z is None:
            raise ValueError("dominance ranking needs sensitivity data")
        blocks.append(np.abs(o.Z[:, o.state_names.index(state), :]))
    return np.concatenate(blocks, axis=0)


def rank_columns(abs_z: np.ndarray, param_names) -> list[RankingEntry]:
    """Rank parameters by median of ``abs_z[:, k]``; ties keep parameter order."""
    med = np.median(abs_z, axis=0)
    order = sorted(range(len(param_names)), key=lambda k: (-med[k], k))
    return [RankingEntry(param_names[k], float(med[k]), magnitude_bucket(med[k])) for k in order]


def dominance_ranking(outputs, state: str) -> list[RankingEntry]:
    """Parameters ordered by median absolute sensitivity of ``state``.

    Args:
        outputs: one :class:`vdsens.sim.SimOutput` or a list of them
            (samples are pooled).
        state: state name.
    """
    first = outputs[0] if isinstance(outputs, (list, tuple)) else outputs
    return rank_columns(_z_samples(outputs, state, first.param_names), first.param_names)


@dataclass(frozen=True)
class FaultShift:
    state: str
    param: str
    fault_time: float
    nominal_mean: float
    nominal_max: float
    faulted_mean: float
    faulted_max: float
    mean_ratio: float
    max_ratio: float
    nominal_full_mean: float
    nominal_full_max: float
    buckets: dict


def _ratio(a: float, b: float) -> float:
    if b == 0.0:
        return 1.0 if a == 0.0 else math.inf
    return a / b


def fault_shift_report(nominal, faulted, state: str, param: str, fault_time: float | None = None) -> FaultShift:
    """Compare ``|Z|`` of one state/parameter pair between a nominal and a faulted run.

    Both runs are evaluated over the post-fault window ``t >= fault_time`` so
    that identical runs give ratios of exactly one; full-run nominal
    statistics are reported alongside.

    Raises:
        ValueError: if the time grids differ or no fault time is known.
    """
    if nominal.t.shape != faulted.t.shape or not np.array_equal(nominal.t, faulted.t):
        raise ValueError("nominal and faulted runs must share the time grid")
    if fault_time is None:
        if not faulted.fault_log:
            raise ValueError("fault time unknown: pass fault_time or a run with a fault log")
        fault_time = min(e["time"] for e in faulted.fault_log)
    w = nominal.t >= fault_time
    a, b = np.abs(nominal.sens(state, param)), np.abs(faulted.sens(state, param))
    nm, nx, fm, fx = float(a[w].mean()), float(a[w].max()), float(b[w].mean()), float(b[w].max())
    return FaultShift(
        state=state,
        param=param,
        fault_time=float(fault_time),
        nominal_mean=nm,
        nominal_max=nx,
        faulted_mean=fm,
        faulted_max=fx,
        mean_ratio=_ratio(fm, nm),
        max_ratio=_ratio(fx, nx),
        nominal_full_mean=float(a.mean()),
        nominal_full_max=float(a.max()),
        buckets={
            "nominal_mean": magnitude_bucket(nm),
            "nominal_max": magnitude_bucket(nx),
            "faulted_mean": magnitude_bucket(fm),
            "faulted_max": magnitude_bucket(fx),
        },
    )


def stats_table(rows: dict) -> str:
    """Plain-text table of ``{label: SummaryStats}``."""
    head = f"{'label':<28}{'n':>8}{'median':>13}{'q1':>13}{'q3':>13}{'mean':>13}{'outliers':>10}"
    lines = [head]
    for label, st in rows.items():
        lines.append(f"{label:<28}{st.n:>8}{st.median:>13.4e}{st.q1:>13.4e}{st.q3:>13.4e}{st.mean:>13.4e}{len(st.outliers):>10}")
    return "\n".join(lines)
