"""Command-line front end: single runs, mass sweeps, trace analysis,
thrust-budget queries.  All outputs are plain CSV; no plotting.

Exit codes: 0 success, 2 configuration error, 3 simulation abort,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import math
import multiprocessing
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .config import (DEFAULT_SWEEP_MASSES, ConfigError, SweepSpec,
                     load_config, load_sweep_spec)
from .dynamics import VehicleParams, cable_offset
from .metrics import (compute_run_metrics, critical_mass_report,
                      max_feasible_accel)
from .simloop import CONTROLLERS, SimConfig, SimLog, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_IO = 4

TRACE_COLUMNS = (
    "t", "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi",
    "p", "q", "r_rate", "load_r", "load_s", "load_zeta",
    "U1", "U2", "U3", "U4", "ref_x", "ref_y", "ref_z",
    "err_x", "err_y", "err_z", "sat_flag",
)

SWEEP_COLUMNS = ("controller", "m_L", "e_max", "phi_max", "theta_max",
                 "t_smax", "failed")


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_trace(log: SimLog, path: str, params: VehicleParams):
    """Emit the trace CSV; aborted runs get a trailing comment marker."""
    L = params.L
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for k in range(log.n_rows):
            q = log.quad[k]
            r, s = log.load[k, 0], log.load[k, 1]
            vals = [log.t[k], *q, r, s, cable_offset(r, s, L),
                    *log.u[k], *log.ref[k], *log.err[k]]
            fh.write(",".join(_fmt(v) for v in vals))
            fh.write(",%d\n" % log.sat[k])
        if log.failed:
            fh.write(f"# aborted: {log.failure_reason}\n")


@dataclass
class Trace:
    """Parsed trace file: one array per column plus the failure marker."""

    columns: dict
    failed: bool
    reason: str

    def to_log(self) -> SimLog:
        # trace files do not carry the load velocities; metrics never
        # read them, so they come back zeroed
        c = self.columns
        n = len(c["t"])
        quad = np.column_stack([c[name] for name in TRACE_COLUMNS[1:13]])
        load = np.column_stack([c["load_r"], c["load_s"],
                                np.zeros(n), np.zeros(n)])
        u = np.column_stack([c["U1"], c["U2"], c["U3"], c["U4"]])
        ref = np.column_stack([c["ref_x"], c["ref_y"], c["ref_z"]])
        err = np.column_stack([c["err_x"], c["err_y"], c["err_z"]])
        return SimLog(t=c["t"], quad=quad, load=load, u=u, ref=ref,
                      err=err, sat=c["sat_flag"].astype(np.int64),
                      failed=self.failed, failure_reason=self.reason)


def read_trace(path: str) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header")
        rows = []
        failed = False
        reason = ""
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# aborted:"):
                    failed = True
                    reason = line[len("# aborted:"):].strip()
                continue
            rows.append([float(v) for v in line.split(",")])
    data = np.array(rows, dtype=float).reshape(len(rows),
                                               len(TRACE_COLUMNS))
    columns = {name: data[:, i] for i, name in enumerate(TRACE_COLUMNS)}
    return Trace(columns=columns, failed=failed, reason=reason)


def write_metrics(log: SimLog, path: str, trajectory: str):
    m = compute_run_metrics(log, trajectory=trajectory)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["e_max", "err_x_max", "err_y_max", "phi_max",
                    "theta_max", "t_smax", "stage_times", "arrival_time",
                    "saturation_count", "failed", "failure_reason"])
        w.writerow([_fmt(m.e_max), _fmt(m.err_x_max), _fmt(m.err_y_max),
                    _fmt(m.phi_max), _fmt(m.theta_max), _fmt(m.t_smax),
                    ";".join(_fmt(v) for v in m.stage_times),
                    _fmt(m.arrival_time), m.saturation_count,
                    int(m.failed), log.failure_reason])


def _sweep_case(case):
    controller, m_L, base = case
    cfg = replace(base, controller=controller, m_L=m_L)
    log = run(cfg)
    met = compute_run_metrics(log, trajectory=cfg.trajectory)
    return (controller, m_L, met.e_max, met.phi_max, met.theta_max,
            met.t_smax, log.failed)


def run_sweep(spec: SweepSpec, jobs: Optional[int] = None):
    """All (controller, mass) cases; failures become flagged rows.

    Rows come back sorted by controller (PD, SMC, MPC) then mass.  Worker
    processes only simulate; the caller writes any files.
    """
    cases = [(c, m, spec.base) for c in spec.controllers
             for m in spec.masses]
    if jobs is None:
        jobs = os.cpu_count() or 1
    jobs = max(1, min(jobs, len(cases)))
    if jobs == 1:
        results = [_sweep_case(c) for c in cases]
    else:
        with multiprocessing.Pool(processes=jobs) as pool:
            results = pool.map(_sweep_case, cases)
    results.sort(key=lambda r: (CONTROLLERS.index(r[0]), r[1]))
    return results


def write_sweep(results, path: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for controller, m_L, e_max, phi_max, theta_max, t_smax, failed in \
                results:
            fh.write("%s,%s,%s,%s,%s,%s,%d\n" % (
                controller, _fmt(m_L), _fmt(e_max), _fmt(phi_max),
                _fmt(theta_max), _fmt(t_smax), int(failed)))


def read_sweep(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            rows.append({
                "controller": row["controller"],
                "m_L": float(row["m_L"]),
                "e_max": float(row["e_max"]),
                "phi_max": float(row["phi_max"]),
                "theta_max": float(row["theta_max"]),
                "t_smax": float(row["t_smax"]),
                "failed": bool(int(row["failed"])),
            })
    return rows


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    log = run(cfg)
    trace_path = os.path.join(args.out, "trace.csv")
    metrics_path = os.path.join(args.out, "metrics.csv")
    write_trace(log, trace_path, cfg.params)
    write_metrics(log, metrics_path, cfg.trajectory)
    print(f"wrote {trace_path}")
    print(f"wrote {metrics_path}")
    if log.failed:
        print(f"run aborted: {log.failure_reason}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.config)
    os.makedirs(args.out, exist_ok=True)
    results = run_sweep(spec, jobs=args.jobs)
    path = os.path.join(args.out, "sweep.csv")
    write_sweep(results, path)
    n_failed = sum(1 for r in results if r[6])
    print(f"wrote {path} ({len(results)} rows, {n_failed} failed)")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    trace = read_trace(args.trace)
    log = trace.to_log()
    m = compute_run_metrics(log, trajectory=args.trajectory)
    print(f"e_max = {m.e_max:.6f}")
    print(f"err_x_max = {m.err_x_max:.6f}")
    print(f"err_y_max = {m.err_y_max:.6f}")
    print(f"phi_max = {m.phi_max:.6f}")
    print(f"theta_max = {m.theta_max:.6f}")
    print(f"t_smax = {m.t_smax:.6f}")
    print("stage_times = " + ";".join(f"{v:.6f}" for v in m.stage_times))
    print(f"arrival_time = {m.arrival_time:.6f}")
    print(f"saturation_count = {m.saturation_count}")
    print(f"failed = {int(m.failed)}")
    return EXIT_OK


def _cmd_critical_mass(args) -> int:
    if args.u1max <= 0.0:
        raise ConfigError("--u1max must be positive")
    if args.accel < 0.0:
        raise ConfigError("--accel must be non-negative")
    rep = critical_mass_report(args.u1max, args.accel, m_q=args.m_q,
                               g=args.g)
    state = "feasible" if rep.feasible else "infeasible"
    print(f"m_cm = {rep.m_cm:.6f} kg ({state})")
    print(f"a_cm = {rep.a_cm:.6f} m/s^2")
    print("m_L,a_max")
    for m_L in DEFAULT_SWEEP_MASSES:
        try:
            a = max_feasible_accel(args.u1max, args.m_q, m_L, args.g)
            print(f"{m_L:.3f},{a:.6f}")
        except ValueError:
            print(f"{m_L:.3f},infeasible")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slungsim",
        description="Quadrotor slung-load control benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run the load-mass sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("analyze", help="recompute metrics from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--trajectory", default="square",
                   choices=("square", "single_leg", "hover"))
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("critical-mass",
                       help="thrust-budget mass and acceleration table")
    p.add_argument("--u1max", type=float, required=True)
    p.add_argument("--accel", type=float, required=True)
    p.add_argument("--m-q", type=float, default=1.0)
    p.add_argument("--g", type=float, default=9.81)
    p.set_defaults(func=_cmd_critical_mass)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
