import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdsens.plots import boxplot_svg, emit_plots, use_log_scale
from vdsens.report import dominance_ranking, fault_shift_report, magnitude_bucket, rank_columns, summarize
from vdsens.sim import SimOutput

NS = {"s": "http://www.w3.org/2000/svg"}


def _quantile(sorted_vals, q):
    pos = (len(sorted_vals) - 1) * q
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (pos - lo) * (sorted_vals[hi] - sorted_vals[lo])


def _oracle(values):
    s = sorted(values)
    q1, med, q3 = _quantile(s, 0.25), _quantile(s, 0.5), _quantile(s, 0.75)
    iqr = q3 - q1
    inside = [v for v in s if q1 - 1.5 * iqr <= v <= q3 + 1.5 * iqr]
    return {
        "median": med,
        "q1": q1,
        "q3": q3,
        "whisker_low": inside[0],
        "whisker_high": inside[-1],
        "mean": math.fsum(s) / len(s),
        "outliers": [v for v in s if v < q1 - 1.5 * iqr or v > q3 + 1.5 * iqr],
    }


def test_summarize_examples():
    s = summarize([1, 2, 3, 4, 5])
    assert (s.median, s.q1, s.q3, s.iqr, s.mean) == (3.0, 2.0, 4.0, 2.0, 3.0)
    assert s.outliers == () and (s.whisker_low, s.whisker_high) == (1.0, 5.0)
    s = summarize([1, 2, 3, 4, 100])
    assert s.outliers == (100.0,) and s.whisker_high == 4.0


def test_summarize_single_and_empty():
    s = summarize([7.0])
    assert s.median == s.q1 == s.q3 == s.whisker_low == s.whisker_high == 7.0
    with pytest.raises(ValueError):
        summarize([])


def test_summarize_matches_sort_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        values = list(rng.standard_cauchy(n) if rng.random() < 0.3 else rng.normal(size=n) * 10.0 ** rng.integers(-6, 6))
        got, want = summarize(values), _oracle(values)
        for key in ("median", "q1", "q3", "whisker_low", "whisker_high", "mean"):
            assert getattr(got, key) == pytest.approx(want[key], rel=1e-12, abs=1e-300), key
        assert list(got.outliers) == want["outliers"]


def test_magnitude_bucket():
    assert magnitude_bucket(3.2e-4) == -4
    assert magnitude_bucket(-0.5) == -1
    assert magnitude_bucket(0.0) == -300


def _output(Z, t=None, names=("a", "b", "c"), fault_log=()):
    K = Z.shape[0]
    t = np.linspace(0.0, 1.0, K) if t is None else t
    return SimOutput(
        model="st",
        t=t,
        x=np.zeros((K, 1)),
        u=np.zeros((K, 1)),
        Z=Z,
        state_names=("s",),
        input_names=("u",),
        param_names=names,
        c=np.ones(len(names)),
        h=1e-3,
        decimation=1,
        fault_log=list(fault_log),
    )


def test_ranking_all_zero_keeps_order():
    ranking = dominance_ranking(_output(np.zeros((10, 1, 3))), "s")
    assert [e.param for e in ranking] == ["a", "b", "c"]
    assert all(e.median_abs == 0.0 and e.bucket == -300 for e in ranking)


def test_ranking_single_dominant_column():
    Z = np.full((20, 1, 3), 1e-6)
    Z[:, 0, 2] = -1.0
    ranking = dominance_ranking([_output(Z), _output(Z)], "s")
    assert ranking[0].param == "c" and ranking[0].bucket == 0


@settings(max_examples=50, deadline=None)
@given(st.permutations(range(5)), st.integers(0, 1000))
def test_ranking_permutation_invariant(perm, seed):
    rng = np.random.default_rng(seed)
    names = [f"p{i}" for i in range(5)]
    abs_z = np.abs(rng.normal(size=(30, 5)) * 10.0 ** np.arange(5))
    base = {e.param: e.median_abs for e in rank_columns(abs_z, names)}
    perm = list(perm)
    permuted = {e.param: e.median_abs for e in rank_columns(abs_z[:, perm], [names[i] for i in perm])}
    assert base == permuted


def test_fault_shift_identical_runs():
    Z = np.random.default_rng(3).normal(size=(50, 1, 3))
    run = _output(Z, fault_log=[{"time": 0.5}])
    shift = fault_shift_report(run, run, "s", "b")
    assert shift.mean_ratio == 1.0 and shift.max_ratio == 1.0


def test_fault_shift_scale_invariant():
    rng = np.random.default_rng(4)
    Zn, Zf = rng.normal(size=(50, 1, 3)), rng.normal(size=(50, 1, 3)) * 30
    a = fault_shift_report(_output(Zn), _output(Zf), "s", "a", fault_time=0.2)
    b = fault_shift_report(_output(Zn * 1e3), _output(Zf * 1e3), "s", "a", fault_time=0.2)
    assert a.mean_ratio == pytest.approx(b.mean_ratio, rel=1e-12)
    assert a.max_ratio == pytest.approx(b.max_ratio, rel=1e-12)


def test_fault_shift_grid_mismatch():
    Z = np.zeros((10, 1, 3))
    with pytest.raises(ValueError):
        fault_shift_report(_output(Z), _output(Z, t=np.linspace(0, 2, 10)), "s", "a", fault_time=0.1)


def test_log_scale_rule():
    assert use_log_scale([1e-6, 1e-2])
    assert use_log_scale([1.0, 1000.0])
    assert not use_log_scale([1.0, 999.0])
    assert not use_log_scale([-5.0, 0.0, 1.0])


def _parse(svg):
    return ET.fromstring(svg)


def test_boxplot_structure():
    data = {"a": [1, 2, 3, 4, 5, 6, 7, 8, 50], "b": [2.0, 2.5, 3.0, 3.5]}
    stats = {k: summarize(v) for k, v in data.items()}
    root = _parse(boxplot_svg(stats, "t", "y"))
    boxes = root.findall(".//s:g[@class='box']", NS)
    assert [b.get("data-label") for b in boxes] == ["a", "b"]
    for box, (label, s) in zip(boxes, stats.items()):
        for key in ("median", "q1", "q3", "whisker_low", "whisker_high", "mean"):
            assert float(box.get(f"data-{key}")) == getattr(s, key)
        assert len(box.findall("s:rect[@class='iqr-box']", NS)) == 1
        assert len(box.findall("s:line[@class='median']", NS)) == 1
        assert len(box.findall("s:line[@class='whisker whisker-low']", NS)) == 1
        assert len(box.findall("s:line[@class='whisker whisker-high']", NS)) == 1
        assert len(box.findall("s:path[@class='mean']", NS)) == 1
        assert len(box.findall("s:circle[@class='outlier']", NS)) == len(s.outliers)
        # box spans q1..q3 and the median line lies inside it (y grows downwards)
        rect = box.find("s:rect[@class='iqr-box']", NS)
        y_top, y_bot = float(rect.get("y")), float(rect.get("y")) + float(rect.get("height"))
        y_med = float(box.find("s:line[@class='median']", NS).get("y1"))
        assert y_top <= y_med <= y_bot
    assert stats["a"].outliers == (50.0,)


def test_boxplot_log_axis():
    stats = {"small": summarize([1e-7, 2e-7, 3e-7]), "big": summarize([1e-2, 2e-2])}
    root = _parse(boxplot_svg(stats))
    assert root.find(".//s:g[@class='y-axis']", NS).get("data-scale") == "log"
    stats = {"x": summarize([1.0, 2.0, 3.0])}
    assert _parse(boxplot_svg(stats)).find(".//s:g[@class='y-axis']", NS).get("data-scale") == "linear"


def test_emit_boxplot_deterministic(tmp_path):
    samples = {"l_f": np.linspace(0, 1, 101) ** 3, "m": np.linspace(1e-6, 1e-5, 17)}
    a = emit_plots(samples, "boxplot", tmp_path / "a.svg", title="|Z|").read_bytes()
    b = emit_plots(samples, "boxplot", tmp_path / "b.svg", title="|Z|").read_bytes()
    assert a == b and a.startswith(b"<svg")


def test_emit_timeseries(tmp_path):
    K = 30
    nominal = _output(np.zeros((K, 1, 3)))
    faulted = _output(np.ones((K, 1, 3)), fault_log=[{"time": 0.4}])
    root = _parse(emit_plots((nominal, faulted), "timeseries", tmp_path / "ts.svg", state="s", param="b").read_text())
    assert len(root.findall(".//s:g[@class='panel']", NS)) == 2
    assert len(root.findall(".//s:polyline[@class='series faulted']", NS)) == 2
    assert len(root.findall(".//s:line[@class='fault-marker']", NS)) == 2


def test_emit_unknown_kind(tmp_path):
    with pytest.raises(ValueError):
        emit_plots({}, "pie", tmp_path / "x.svg")
