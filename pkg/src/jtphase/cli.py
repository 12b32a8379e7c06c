"""Command-line entry point: ``jtphase <subcommand> ...``.

Exit codes: 0 success, 1 numerical or tolerance failure, 2 usage error.
Every subcommand also accepts ``--config file.json``; flags given on the
command line take precedence over keys in the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import exactdiag, jahnteller, tdse
from .functionals import gradient_norm, integrated_phase
from .numerics import RadialGrid

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

# per-scenario validation setup: (n, dt, t_final) at the finest level
VALIDATE_DEFAULTS = {
    "ho_ground": (4001, 0.0025, 2.0 * math.pi),
    "ho_coherent": (8001, 0.00125, 1.0),
    "free_gaussian": (8001, 0.00125, 1.0),
}
RESIDUAL_TOL = 1e-5
RESIDUAL_FLOOR = 1e-8
RATIO_WINDOW = (3.0, 5.0)
PHASE_GAP_TOL = 1e-4
STATIONARY_PHASE_TOL = 2e-3
NORM_TOL = 1e-8
ENERGY_TOL = 1e-6
RESIDUAL_KEYS = ("roi", "continuity", "hj", "form_gap")

DEFAULTS = {
    "sweep": dict(kmin=0.0, kmax=4.0, steps=81, nodes=400, out=None),
    "phase": dict(k=None, method="closed", ntime=400, nodes=400, drive=1.0, branch="minus"),
    "deltak": dict(k="0.5,1,2,3,5", phi="0,0.3,2.1", nodes=400, out=None),
    "validate": dict(scenario=None, refine=0, n=None, dt=None, tf=None, samples=None),
    "tdse": dict(scenario=None, n=2001, dt=0.005, tf=1.0, stride=None, out=None),
    "diag": dict(k=None, omega=1.0, cutoff=30, out=None),
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from exc


def _write_csv(header, rows, out):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True, allow_nan=True) + "\n")


def _threads(value) -> int:
    if value is None:
        env = os.environ.get("JTPHASE_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError as exc:
                raise UsageError(f"JTPHASE_THREADS is not an integer: {env!r}") from exc
        else:
            value = os.cpu_count() or 1
    if int(value) < 1:
        raise UsageError("--threads must be >= 1")
    return int(value)


def cmd_sweep(cfg) -> int:
    kmin, kmax, steps = float(cfg["kmin"]), float(cfg["kmax"]), int(cfg["steps"])
    if not (0 <= kmin < kmax) or steps < 2:
        raise UsageError("sweep needs 0 <= kmin < kmax and steps >= 2")
    res = jahnteller.sweep_phase(kmin, kmax, steps, int(cfg["nodes"]), threads=cfg["threads"])
    _write_csv(["k", "phase_quadrature", "phase_closed", "abs_diff"], res.rows(), cfg["out"])
    return EXIT_OK


def cmd_phase(cfg) -> int:
    if cfg["k"] is None:
        raise UsageError("phase needs --k")
    k = float(cfg["k"])
    method = cfg["method"]
    if k < 0 or float(cfg["drive"]) <= 0:
        raise UsageError("phase needs k >= 0 and drive > 0")
    if method not in ("quad", "closed", "trajectory"):
        raise UsageError(f"unknown method {method!r}")
    if cfg["branch"] not in jahnteller.BRANCHES:
        raise UsageError(f"unknown branch {cfg['branch']!r}")
    params = jahnteller.JTParams(k, drive=float(cfg["drive"]))
    grid = RadialGrid.for_coupling(k, int(cfg["nodes"]))
    sign = 1.0 if cfg["branch"] == "minus" else -1.0
    result = {"k": k, "method": method, "branch": cfg["branch"]}
    if method == "closed":
        phase = sign * jahnteller.mean_phase_closed_form(k)
    elif method == "quad":
        phase = jahnteller.mean_phase_quadrature(params, grid, cfg["branch"])
    else:
        ntime = int(cfg["ntime"])
        if ntime < 8:
            raise UsageError("--ntime must be >= 8")
        traj = jahnteller.cycle_trajectory(params, grid, ntime, cfg["branch"], scaled=True)
        br = integrated_phase(traj, params.m, normalize_each_step=True)
        phase = br.dynamic_term
        result.update(ntime=ntime, delta_k_term=br.delta_k_term, total=br.total)
    result.update(phase_rad=phase, phase_over_pi=phase / math.pi)
    _emit_json(result)
    return EXIT_OK


def cmd_deltak(cfg) -> int:
    ks, phis = _floats(cfg["k"]), _floats(cfg["phi"])
    if not ks or min(ks) < 0:
        raise UsageError("deltak needs a list of k >= 0")
    rows = []
    for k in ks:
        params = jahnteller.JTParams(k)
        grid = RadialGrid.for_coupling(k, int(cfg["nodes"]))
        for phi in phis:
            field = jahnteller.build_doublet(params, grid, phi)[0]
            dk = jahnteller.delta_k_jt(params, grid, phi)
            phase_part, rest = jahnteller.delta_k_jt_split(params, grid, phi)
            scale = gradient_norm(field)
            rows.append((k, phi, dk, scale, dk / scale if scale else 0.0, phase_part, rest))
    _write_csv(["k", "phi", "delta_k", "grad_norm", "ratio", "phase_gradient_part", "remainder"],
               rows, cfg["out"])
    return EXIT_OK


def validation_checks(scenario_id: str, reports: list[dict]) -> list[tuple[str, bool, str]]:
    """(name, passed, detail) for every documented tolerance."""
    fine = reports[-1]
    checks = []
    for key in RESIDUAL_KEYS:
        checks.append((f"{key}<= {RESIDUAL_TOL:g}", fine[key] <= RESIDUAL_TOL, fmt(fine[key])))
    for coarse, finer in zip(reports, reports[1:]):
        for key in RESIDUAL_KEYS:
            a, b = coarse[key], finer[key]
            if a <= RESIDUAL_FLOOR and b <= RESIDUAL_FLOOR:
                checks.append((f"{key} ratio (at floor)", True, f"{fmt(a)} -> {fmt(b)}"))
                continue
            r = a / b if b else math.inf
            ok = RATIO_WINDOW[0] <= r <= RATIO_WINDOW[1]
            checks.append((f"{key} ratio level {coarse['level']}->{finer['level']}", ok, fmt(r)))
    checks.append(("phase_gap", fine["phase_gap"] <= PHASE_GAP_TOL, fmt(fine["phase_gap"])))
    checks.append(("norm_drift", fine["norm_drift"] <= NORM_TOL, fmt(fine["norm_drift"])))
    checks.append(("energy_drift", fine["energy_drift"] <= ENERGY_TOL, fmt(fine["energy_drift"])))
    if scenario_id == "ho_ground":
        target = -0.5 * fine["t_final"]
        err = abs(fine["integrated_phase"] - target)
        checks.append(("stationary phase -E t_f", err <= STATIONARY_PHASE_TOL, fmt(err)))
    return checks


def cmd_validate(cfg) -> int:
    sid = cfg["scenario"]
    if sid not in tdse.SCENARIOS:
        raise UsageError(f"unknown scenario {sid!r}; choose from {', '.join(tdse.SCENARIOS)}")
    refine = int(cfg["refine"])
    if refine < 0:
        raise UsageError("--refine must be >= 0")
    n, dt, tf = VALIDATE_DEFAULTS[sid]
    n = int(cfg["n"]) if cfg["n"] is not None else n
    dt = float(cfg["dt"]) if cfg["dt"] is not None else dt
    tf = float(cfg["tf"]) if cfg["tf"] is not None else tf
    if n < 3 or dt <= 0 or tf <= 0:
        raise UsageError("need n >= 3, dt > 0, tf > 0")
    coarse_n = (n - 1) // 2 ** refine + 1
    if (coarse_n - 1) * 2 ** refine != n - 1 or coarse_n < 5:
        raise UsageError(f"n - 1 = {n - 1} is not divisible by 2**{refine}")
    samples = None if cfg["samples"] is None else int(cfg["samples"])
    scenario = tdse.Scenario(sid)
    reports = tdse.convergence_study(scenario, coarse_n, dt * 2 ** refine, tf, refine, samples)
    checks = validation_checks(sid, reports)
    failed = [c for c in checks if not c[1]]
    _emit_json({
        "scenario": sid,
        "levels": reports,
        "checks": [{"name": c[0], "passed": c[1], "value": c[2]} for c in checks],
        "passed": not failed,
    })
    if failed:
        sys.stderr.write(f"tolerance violated: {failed[0][0]} ({failed[0][2]})\n")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_tdse(cfg) -> int:
    sid = cfg["scenario"]
    if sid not in tdse.SCENARIOS:
        raise UsageError(f"unknown scenario {sid!r}; choose from {', '.join(tdse.SCENARIOS)}")
    n, dt, tf = int(cfg["n"]), float(cfg["dt"]), float(cfg["tf"])
    if n < 3 or dt <= 0 or tf <= 0:
        raise UsageError("need n >= 3, dt > 0, tf > 0")
    traj = tdse.run_scenario(tdse.Scenario(sid), n, dt, tf)
    stride = cfg["stride"]
    stride = max(1, (len(traj) - 1) // 100) if stride is None else int(stride)
    if stride < 1:
        raise UsageError("--stride must be >= 1")
    x = traj.grid.nodes

    def rows():
        for i in range(0, len(traj), stride):
            psi = traj.values[i]
            t = traj.times[i]
            for xj, v in zip(x, psi):
                yield (t, xj, v.real, v.imag)

    _write_csv(["t", "x", "re_psi", "im_psi"], rows(), cfg["out"])
    return EXIT_OK


def cmd_diag(cfg) -> int:
    if cfg["k"] is None:
        raise UsageError("diag needs --k")
    ks = _floats(cfg["k"])
    omega, cutoff = float(cfg["omega"]), int(cfg["cutoff"])
    if min(ks) < 0 or omega <= 0 or cutoff < 1:
        raise UsageError("diag needs k >= 0, omega > 0, cutoff >= 1")
    if exactdiag.FockBasis(cutoff).dimension > exactdiag.MAX_DIMENSION:
        raise UsageError(f"cutoff {cutoff} exceeds the memory budget")
    rows = []
    for k in ks:
        e0, e1, _ = exactdiag.ground_doublet(k, omega, cutoff)
        _, captured = exactdiag.fock_expand_guessed(k, cutoff)
        eg = exactdiag.guessed_energy(k, omega, cutoff) if captured >= exactdiag.MIN_CAPTURED_NORM else math.nan
        rows.append((k, e0, e1, eg, captured, cutoff))
    _write_csv(["k", "E0", "E1", "guessed_energy", "captured_norm", "cutoff"], rows, cfg["out"])
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "phase": cmd_phase,
    "deltak": cmd_deltak,
    "validate": cmd_validate,
    "tdse": cmd_tdse,
    "diag": cmd_diag,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jtphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with default values for this subcommand")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $JTPHASE_THREADS or all cores)")

    p = sub.add_parser("sweep", help="mean phase against coupling (CSV)")
    p.add_argument("--kmin", type=float)
    p.add_argument("--kmax", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--nodes", type=int, help="radial quadrature nodes per row")
    p.add_argument("--out")
    common(p)

    p = sub.add_parser("phase", help="mean phase at one coupling (JSON)")
    p.add_argument("--k", type=float)
    p.add_argument("--method", choices=["quad", "closed", "trajectory"])
    p.add_argument("--ntime", type=int)
    p.add_argument("--nodes", type=int)
    p.add_argument("--drive", type=float, help="angular drive rate")
    p.add_argument("--branch", choices=list(jahnteller.BRANCHES))
    common(p)

    p = sub.add_parser("deltak", help="delta K of the doublet on a list of couplings (CSV)")
    p.add_argument("--k", help="comma-separated couplings")
    p.add_argument("--phi", help="comma-separated angles")
    p.add_argument("--nodes", type=int)
    p.add_argument("--out")
    common(p)

    p = sub.add_parser("validate", help="identity residuals on a propagated fixture (JSON)")
    p.add_argument("--scenario")
    p.add_argument("--refine", type=int, help="number of halvings ending at the finest level")
    p.add_argument("--n", type=int, help="grid nodes at the finest level")
    p.add_argument("--dt", type=float, help="time step at the finest level")
    p.add_argument("--tf", type=float, help="final time")
    p.add_argument("--samples", type=int, help="interior snapshots to sample (default: all)")
    common(p)

    p = sub.add_parser("tdse", help="propagate a fixture and export psi (CSV)")
    p.add_argument("--scenario")
    p.add_argument("--n", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--tf", type=float)
    p.add_argument("--stride", type=int, help="export every stride-th snapshot")
    p.add_argument("--out")
    common(p)

    p = sub.add_parser("diag", help="exact ground doublet and guessed-state energy (CSV)")
    p.add_argument("--k", help="coupling or comma-separated couplings")
    p.add_argument("--omega", type=float)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--out")
    common(p)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command-line flags."""
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(cfg) - {"threads"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None or key not in cfg:
            cfg[key] = value
    cfg["threads"] = _threads(cfg.get("threads"))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](resolve(args))
    except UsageError as exc:
        sys.stderr.write(f"jtphase {args.command}: {exc}\n")
        return EXIT_USAGE
    except (ValueError, TypeError) as exc:
        sys.stderr.write(f"jtphase {args.command}: invalid input: {exc}\n")
        return EXIT_USAGE
    except (RuntimeError, ArithmeticError, MemoryError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"jtphase {args.command}: numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
