"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 simulation divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .experiments import FAULT_ANGLE, circle_sweep, fault_experiment, odd_batch
from .params import ParamValidationError
from .plots import emit_plots
from .report import dominance_ranking, fault_shift_report, rank_columns, stats_table, summarize
from .scenario import ScenarioError, WHEEL_NAMES
from .sim import SimulationDiverged, read_csv, run_scenario, write_csv

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    n = len(cfg.params.to_vector()) if cfg.model == "dt" else 7
    print(f"{args.config}: valid ({cfg.model} model, {n} parameters)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if cfg.scenario is None:
        raise ConfigError("simulate needs a 'scenario' section")
    out_dir = _out_dir(args)
    run = run_scenario(cfg.model, cfg.scenario, cfg.params, cfg.integrator, cfg.controller, cfg.st_params)
    csv_path = out_dir / f"{cfg.scenario.name}.csv"
    write_csv(run, csv_path)
    meta = {"model": run.model, "samples": len(run.t), "fault_log": run.fault_log}
    if run.wheel_lift is not None:
        meta["wheel_lift_any"] = dict(zip(WHEEL_NAMES, run.wheel_lift.any(axis=0).tolist()))
    if run.steady is not None:
        meta["steady"] = run.steady
    _dump(out_dir / f"{cfg.scenario.name}.json", meta)
    print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_circle_sweep(args) -> int:
    cfg = load_config(args.config)
    out_dir = _out_dir(args)
    points = circle_sweep(cfg.params, _floats(args.ay), args.radius, simulate=args.simulate)
    state_names, param_names = ("beta", "psi_dot"), ("m", "J_z", "l_f", "l_r", "c_alpha_f", "c_alpha_r", "v")
    zcols = [f"Z_{s}_{p}" for s in state_names for p in param_names]
    header = ["a_y", "v", "radius", "delta_f", "beta_ss", "psi_dot_ss", *zcols]
    rows = [[pt.a_y, pt.v, pt.radius, pt.delta_f, *pt.x_ss, *pt.Z_ss.ravel()] for pt in points]
    np.savetxt(out_dir / "circle_sweep.csv", np.array(rows), delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    print(f"{'a_y':>6}{'v':>9}{'Z_beta,c_af':>15}{'Z_psi_dot,c_af':>17}")
    for pt in points:
        print(f"{pt.a_y:>6.2f}{pt.v:>9.3f}{pt.Z_ss[0, 4]:>15.3e}{pt.Z_ss[1, 4]:>17.3e}")
    return EXIT_OK


def cmd_fault_sweep(args) -> int:
    cfg = load_config(args.config)
    out_dir = _out_dir(args)
    nominal, faulted = fault_experiment(
        cfg.params,
        v=args.speed,
        radius=args.radius,
        duration=args.duration,
        t_fault=args.t_fault,
        wheel=WHEEL_NAMES.index(args.wheel),
        angle=float(np.deg2rad(args.angle_deg)),
    )
    write_csv(nominal, out_dir / "nominal.csv")
    write_csv(faulted, out_dir / "faulted.csv")
    shifts = {p: vars(fault_shift_report(nominal, faulted, args.state, p)) for p in _names(args.params)}
    dev = float(np.max(np.abs(nominal.state(args.state) - faulted.state(args.state))))
    _dump(out_dir / "fault_shift.json", {"max_state_deviation": dev, "fault_log": faulted.fault_log, "shifts": shifts})
    for p in _names(args.params):
        emit_plots((nominal, faulted), "timeseries", out_dir / f"timeseries_{args.state}_{p}.svg", state=args.state, param=p)
    for p, s in shifts.items():
        print(f"Z_{args.state}_{p}: mean {s['nominal_mean']:.3e} -> {s['faulted_mean']:.3e} (x{s['mean_ratio']:.3g}), "
              f"max {s['nominal_max']:.3e} -> {s['faulted_max']:.3e} (x{s['max_ratio']:.3g})")
    return EXIT_OK


def cmd_odd_batch(args) -> int:
    cfg = load_config(args.config)
    out_dir = _out_dir(args)
    runs = odd_batch(cfg.params, args.n, args.seed, args.duration, cfg.model, workers=args.workers)
    for i, run in enumerate(runs):
        write_csv(run, out_dir / f"odd_{args.seed + i}.csv")
    rankings = {}
    for state in runs[0].state_names:
        rankings[state] = [vars(e) for e in dominance_ranking(runs, state)]
    _dump(out_dir / "ranking.json", rankings)
    params = _names(args.params) if args.params else list(runs[0].param_names)
    for state in runs[0].state_names[:3]:
        samples = {p: np.concatenate([np.abs(r.sens(state, p)) for r in runs]) for p in params}
        emit_plots(samples, "boxplot", out_dir / f"boxplot_{state}.svg", title=f"|Z_{state}|", ylabel=f"|Z_{state},k|")
    top = rankings[args.state][:5]
    print(f"dominant parameters for {args.state}: " + ", ".join(f"{e['param']} ({e['median_abs']:.2e})" for e in top))
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = _out_dir(args)
    params = _names(args.params)
    pooled = {p: [] for p in params}
    for path in args.csv:
        header, data = read_csv(path)
        for p in params:
            col = f"Z_{args.state}_{p}"
            if col not in header:
                raise ConfigError(f"{path}: no column {col}")
            pooled[p].append(np.abs(data[:, header.index(col)]))
    samples = {p: np.concatenate(v) for p, v in pooled.items()}
    stats = {p: summarize(v) for p, v in samples.items()}
    ranking = rank_columns(np.column_stack([samples[p] for p in params]), params)
    table = stats_table({f"|Z_{args.state}_{p}|": s for p, s in stats.items()})
    (out_dir / f"report_{args.state}.txt").write_text(table + "\n", encoding="utf-8")
    _dump(out_dir / f"report_{args.state}.json", {"stats": {p: vars(s) for p, s in stats.items()}, "ranking": [vars(e) for e in ranking]})
    emit_plots(stats, "boxplot", out_dir / f"boxplot_{args.state}.svg", title=f"|Z_{args.state}|")
    print(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vdsens", description="Vehicle dynamics parameter sensitivities.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_out(p):
        p.add_argument("--out", default="out", help="output directory")
        return p

    p = sub.add_parser("validate", help="check a configuration file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = with_out(sub.add_parser("simulate", help="run the configured scenario"))
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = with_out(sub.add_parser("circle-sweep", help="steady-state single-track sensitivities on circles"))
    p.add_argument("config")
    p.add_argument("--ay", default="3,4,4.9,6", help="comma-separated lateral accelerations [m/s^2]")
    p.add_argument("--radius", type=float, default=200.0)
    p.add_argument("--simulate", action="store_true", help="also integrate each circle")
    p.set_defaults(func=cmd_circle_sweep)

    p = with_out(sub.add_parser("fault-sweep", help="nominal vs locked-steering double-track runs"))
    p.add_argument("config")
    p.add_argument("--wheel", choices=WHEEL_NAMES, default="fl")
    p.add_argument("--angle-deg", type=float, default=float(np.rad2deg(FAULT_ANGLE)))
    p.add_argument("--t-fault", type=float, default=1.0)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--speed", type=float, default=12.0)
    p.add_argument("--radius", type=float, default=100.0)
    p.add_argument("--state", default="psi_dot")
    p.add_argument("--params", default="mu,l_f")
    p.set_defaults(func=cmd_fault_sweep)

    p = with_out(sub.add_parser("odd-batch", help="closed-loop runs over synthetic ODD trajectories"))
    p.add_argument("config")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=20.0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--state", default="psi_dot")
    p.add_argument("--params", default="")
    p.set_defaults(func=cmd_odd_batch)

    p = with_out(sub.add_parser("report", help="boxplot statistics over CSV outputs"))
    p.add_argument("csv", nargs="+")
    p.add_argument("--state", required=True)
    p.add_argument("--params", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ParamValidationError as exc:
        for msg in exc.messages():
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
