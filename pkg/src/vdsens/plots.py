"""Deterministic SVG boxplots and time-series figures.

Elements carry ``class`` attributes (``iqr-box``, ``median``, ``whisker``,
``mean``, ``outlier`` ...) and boxes carry their statistics as ``data-*``
attributes, so emitted files can be checked structurally.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .report import SummaryStats, summarize

LOG_DECADES = 3.0
_W, _H = 640, 360
_ML, _MR, _MT, _MB = 80, 20, 30, 60


def _f(v: float) -> str:
    return f"{v:.2f}"


def use_log_scale(values) -> bool:
    """Log axis when the positive data span at least three decades."""
    v = np.asarray(values, dtype=float)
    v = v[v > 0]
    return v.size > 1 and math.log10(v.max() / v.min()) >= LOG_DECADES


class _Axis:
    def __init__(self, lo, hi, log, top, bottom):
        self.log = log
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        pad = 0.05 * (hi - lo)
        self.lo, self.hi, self.top, self.bottom = lo - pad, hi + pad, top, bottom

    def __call__(self, v):
        if self.log:
            v = math.log10(max(v, 10.0 ** (self.lo - 10)))
        return self.bottom - (v - self.lo) / (self.hi - self.lo) * (self.bottom - self.top)

    def ticks(self):
        if self.log:
            return [10.0**e for e in range(math.ceil(self.lo), math.floor(self.hi) + 1)]
        return list(np.linspace(self.lo, self.hi, 5))


def _header(w, h, title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text class="title" x="{_f(w / 2)}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]


def _y_axis(ax: _Axis, x0, x1, cls="y-axis"):
    out = [f'<g class="{cls}" data-scale="{"log" if ax.log else "linear"}">']
    out.append(f'<line x1="{_f(x0)}" y1="{_f(ax.top)}" x2="{_f(x0)}" y2="{_f(ax.bottom)}" stroke="black"/>')
    for t in ax.ticks():
        y = ax(t)
        out.append(f'<line x1="{_f(x0 - 4)}" y1="{_f(y)}" x2="{_f(x1)}" y2="{_f(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{_f(x0 - 6)}" y="{_f(y + 4)}" text-anchor="end" font-size="10">{t:.3g}</text>')
    out.append("</g>")
    return out


def boxplot_svg(stats: dict, title: str = "", ylabel: str = "") -> str:
    """SVG boxplot of ``{label: SummaryStats}``, in insertion order."""
    values = []
    for st in stats.values():
        values += [st.whisker_low, st.whisker_high, st.mean, *st.outliers]
    log = use_log_scale(values)
    pos = [v for v in values if v > 0] if log else values
    ax = _Axis(min(pos), max(pos), log, _MT, _H - _MB)
    lines = _header(_W, _H, title)
    lines += _y_axis(ax, _ML, _W - _MR)
    if ylabel:
        lines.append(f'<text x="14" y="{_f(_H / 2)}" transform="rotate(-90 14 {_f(_H / 2)})" text-anchor="middle" font-size="11">{escape(ylabel)}</text>')
    slot = (_W - _ML - _MR) / max(len(stats), 1)
    for i, (label, st) in enumerate(stats.items()):
        cx = _ML + slot * (i + 0.5)
        half = min(0.3 * slot, 30.0)
        yq1, yq3, ym = ax(st.q1), ax(st.q3), ax(st.median)
        attrs = " ".join(
            f'data-{k}="{getattr(st, k):.17g}"' for k in ("median", "q1", "q3", "whisker_low", "whisker_high", "mean")
        )
        lines.append(f'<g class="box" data-label={quoteattr(label)} {attrs}>')
        lines.append(f'<rect class="iqr-box" x="{_f(cx - half)}" y="{_f(yq3)}" width="{_f(2 * half)}" height="{_f(yq1 - yq3)}" fill="#9ecae1" stroke="black"/>')
        lines.append(f'<line class="median" x1="{_f(cx - half)}" y1="{_f(ym)}" x2="{_f(cx + half)}" y2="{_f(ym)}" stroke="black" stroke-width="2"/>')
        for cls, q, wv in (("whisker whisker-low", yq1, st.whisker_low), ("whisker whisker-high", yq3, st.whisker_high)):
            yw = ax(wv)
            lines.append(f'<line class="{cls}" x1="{_f(cx)}" y1="{_f(q)}" x2="{_f(cx)}" y2="{_f(yw)}" stroke="black"/>')
            lines.append(f'<line class="whisker-cap" x1="{_f(cx - half / 2)}" y1="{_f(yw)}" x2="{_f(cx + half / 2)}" y2="{_f(yw)}" stroke="black"/>')
        mx, my = cx, ax(st.mean)
        lines.append(f'<path class="mean" d="M{_f(mx - 4)},{_f(my - 4)} L{_f(mx + 4)},{_f(my + 4)} M{_f(mx - 4)},{_f(my + 4)} L{_f(mx + 4)},{_f(my - 4)}" stroke="#d62728" stroke-width="1.5"/>')
        for o in st.outliers:
            lines.append(f'<circle class="outlier" cx="{_f(cx)}" cy="{_f(ax(o))}" r="2.5" fill="black"/>')
        lines.append(f'<text x="{_f(cx)}" y="{_f(_H - _MB + 16)}" text-anchor="middle" font-size="10">{escape(label)}</text>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _polyline(t, y, tax, yax, cls, colour, dash=""):
    pts = " ".join(f"{_f(tax(a))},{_f(yax(b))}" for a, b in zip(t, y))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline class="{cls}" points="{pts}" fill="none" stroke="{colour}" stroke-width="1.2"{extra}/>'


def timeseries_svg(t, panels: list, fault_time: float | None = None, title: str = "") -> str:
    """Stacked panels sharing the time axis.

    Args:
        t: time grid.
        panels: ``[(ylabel, nominal, faulted_or_None), ...]``.
        fault_time: draws a dashed marker when given.
    """
    t = np.asarray(t, dtype=float)
    h_panel = 200
    height = _MT + len(panels) * (h_panel + 30) + 30
    lines = _header(_W, height, title)
    t0, t1 = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0

    def tax(v):
        return _ML + (v - t0) / (t1 - t0) * (_W - _ML - _MR)

    for i, (label, nom, flt) in enumerate(panels):
        top = _MT + i * (h_panel + 30)
        series = [np.asarray(nom, dtype=float)] + ([np.asarray(flt, dtype=float)] if flt is not None else [])
        allv = np.concatenate(series)
        ax = _Axis(float(allv.min()), float(allv.max()), False, top, top + h_panel)
        lines.append(f'<g class="panel" data-label={quoteattr(label)}>')
        lines += _y_axis(ax, _ML, _W - _MR)
        lines.append(f'<text x="14" y="{_f(top + h_panel / 2)}" transform="rotate(-90 14 {_f(top + h_panel / 2)})" text-anchor="middle" font-size="11">{escape(label)}</text>')
        lines.append(_polyline(t, series[0], tax, ax, "series nominal", "#1f77b4"))
        if flt is not None:
            lines.append(_polyline(t, series[1], tax, ax, "series faulted", "#d62728", "4,3"))
        if fault_time is not None:
            x = tax(fault_time)
            lines.append(f'<line class="fault-marker" x1="{_f(x)}" y1="{_f(top)}" x2="{_f(x)}" y2="{_f(top + h_panel)}" stroke="#ff7f0e" stroke-dasharray="6,4"/>')
        lines.append("</g>")
    lines.append(f'<text x="{_f(_W / 2)}" y="{height - 8}" text-anchor="middle" font-size="11">t [s]</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_plots(outputs, kind: str, path, **kw) -> Path:
    """Write one SVG figure.

    Args:
        outputs: for ``"boxplot"``, a dict ``{label: samples or SummaryStats}``;
            for ``"timeseries"``, a ``(nominal, faulted)`` pair of
            :class:`vdsens.sim.SimOutput` (``faulted`` may be ``None``) plus
            ``state=`` and ``param=`` keyword arguments.
        kind: ``"boxplot"`` or ``"timeseries"``.
        path: output file.
    """
    path = Path(path)
    if kind == "boxplot":
        stats = {k: v if isinstance(v, SummaryStats) else summarize(v) for k, v in outputs.items()}
        svg = boxplot_svg(stats, kw.get("title", ""), kw.get("ylabel", ""))
    elif kind == "timeseries":
        nominal, faulted = outputs
        state, param = kw["state"], kw["param"]
        panels = [
            (state, nominal.state(state), None if faulted is None else faulted.state(state)),
            (f"Z_{state}_{param}", nominal.sens(state, param), None if faulted is None else faulted.sens(state, param)),
        ]
        fault_time = kw.get("fault_time")
        if fault_time is None and faulted is not None and faulted.fault_log:
            fault_time = faulted.fault_log[0]["time"]
        svg = timeseries_svg(nominal.t, panels, fault_time, kw.get("title", ""))
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    return path
