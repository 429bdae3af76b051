"""Command-line front end.

Exit codes
----------
0  success
2  invalid scenario or arguments (message starts with ``file:line``)
3  fatal solver error (inadmissible start, non-coercive problem, ...)
4  oracle parameters on a regime boundary
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import oracle as orc
from .dissipation import (CombinatorialError, DissipationSpec, NonCoerciveError,
                          check_coercive_regularity, check_star, check_time_dependent)
from .scenario import Scenario, ScenarioError, load_scenario
from .solver import InadmissibleStateError, Trajectory, simulate
from .stasis import build_geometry
from .timeprog import DomainError

EXIT_OK, EXIT_SCHEMA, EXIT_SOLVER, EXIT_BOUNDARY = 0, 2, 3, 4


class BoundaryExit(Exception):
    """Raised when an oracle reports a regime boundary."""


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- simulation ---------------------------------------------------------------------------

def run_simulation(sc: Scenario) -> Trajectory:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return simulate(sc.model, sc.solver, sc.initial_state, sc.t0, sc.t1)


def cycle_report(sc: Scenario, traj: Trajectory) -> dict:
    """Displacement of every complete cycle and slip onsets of the last one."""
    if not sc.period:
        return {}
    T = sc.period
    n = int(np.floor((sc.t1 - sc.t0) / T + 1e-9))
    disp = [traj.displacement(sc.t0 + c * T, sc.t0 + (c + 1) * T) for c in range(n)]
    last = sc.t0 + (n - 1) * T
    onsets = [o["t"] - last for o in traj.slip_onsets() if last - 1e-12 <= o["t"] < last + T]
    return {"period": T, "per_cycle_displacement": disp,
            "steady_displacement": disp[-1] if disp else None,
            "switch_times": onsets}


def write_stasis(sc: Scenario, out: Path) -> dict:
    d = DissipationSpec.from_model(sc.model)
    data = {"name": sc.name, "geometries": []}
    for i, t in enumerate(sc.stasis_times):
        geo = build_geometry(d, t)
        data["geometries"].append(geo.to_json())
        if "plotdata" in sc.outputs and geo.dim == 2 and geo.vertices is not None and len(geo.vertices):
            P = geo.polygon()
            P = np.vstack([P, P[:1]])
            np.savetxt(out / f"{sc.name}_stasis_{i}.dat", P, fmt="%.17g",
                       header="zeta1 zeta2")
    _dump(data, out / f"{sc.name}_stasis.json")
    return data


def do_simulate(sc: Scenario, out: Path) -> dict:
    traj = run_simulation(sc)
    if "trajectory_csv" in sc.outputs:
        traj.to_csv(out / f"{sc.name}_trajectory.csv")
    summary = {"name": sc.name, **traj.summary(), **cycle_report(sc, traj)}
    if "summary_json" in sc.outputs:
        _dump(summary, out / f"{sc.name}_summary.json")
    if "plotdata" in sc.outputs:
        cols = np.column_stack([traj.times, traj.y, traj.z, traj.tension_sh])
        n1 = traj.n_points - 1
        header = " ".join(["t", "y"] + [f"z{i + 1}" for i in range(n1)]
                          + [f"sigma{i + 1}" for i in range(n1)])
        np.savetxt(out / f"{sc.name}_plot.dat", cols, fmt="%.17g", header=header)
    if "stasis_json" in sc.outputs:
        write_stasis(sc, out)
    return summary


# -- oracle -------------------------------------------------------------------------------

def evaluate_oracle(kind: str, params: dict) -> dict:
    """Closed-form result as a JSON-ready dict; raises OracleBoundaryError on boundaries."""
    p = dict(params)
    try:
        if kind == "two_point_constant":
            res = orc.two_point_constant(p["k"], p["mu_minus"], p["mu_plus"], p["dL"]).to_json()
        elif kind == "strategy":
            res = orc.strategy_result(p["which"], p["k"], p["mu"], p["L_max"]).to_json()
        elif kind == "continuum_homogeneous":
            res = {"per_cycle_displacement": orc.continuum_homogeneous(
                p["k"], p["l"], p["mu_minus"], p["mu_plus"], p["d_eps"]), "boundary": False}
        elif kind == "three_point_regime":
            res = {"regime": orc.three_point_regime(p["mu_minus"], p["mu_plus"]), "boundary": False}
        else:
            raise ValueError(f"unknown oracle kind {kind!r}")
    except KeyError as exc:
        raise ValueError(f"oracle {kind!r} needs parameter {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ValueError(f"oracle {kind!r}: {exc}") from None
    return {"kind": kind, "params": params, **res}


def do_compare(sc: Scenario, out: Path) -> dict:
    if sc.oracle is None:
        raise ScenarioError(f"{sc.name}: compare needs an 'oracle' block")
    ref = evaluate_oracle(sc.oracle["kind"], sc.oracle["params"])
    summary = do_simulate(sc, out)
    report = {"name": sc.name, "oracle": ref}
    if "per_cycle_displacement" in ref and summary.get("steady_displacement") is not None:
        sim, exact = summary["steady_displacement"], ref["per_cycle_displacement"]
        err = abs(sim - exact)
        report.update(simulated=sim, expected=exact, abs_error=err,
                      rel_error=err / abs(exact) if exact != 0 else None)
    switch = ref.get("switch_times") or {}
    if switch and summary.get("switch_times"):
        onsets = np.array(summary["switch_times"])
        report["switch_time_errors"] = {
            name: float(np.min(np.abs(onsets - (t % sc.period)))) for name, t in switch.items()}
    _dump(report, out / f"{sc.name}_compare.json")
    if ref.get("boundary"):
        raise BoundaryExit(f"{sc.name}: oracle parameters sit on a regime boundary")
    return report


def do_check(sc: Scenario, out: Path, seed: int | None) -> dict:
    d = DissipationSpec.from_model(sc.model)
    star = check_star(d, sc.t0, sample=100000, rng=seed)
    report = {"name": sc.name, "check_star": star.to_json()}
    try:
        diamond, reg = check_time_dependent(d, sc.t0, sc.t1)
        report["diamond"] = diamond.to_json()
        report["psi_regularity"] = reg.to_json()
        report["diamond2"] = check_coercive_regularity(d).to_json()
    except CombinatorialError as exc:
        report["diamond"] = {"holds": None, "error": str(exc)}
    _dump(report, out / f"{sc.name}_check.json")
    return report


# -- dispatch -----------------------------------------------------------------------------

def _run_one(command: str, path: str, out: str, steps, elements, seed) -> dict:
    sc = load_scenario(path, steps, elements)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if command == "simulate":
        return do_simulate(sc, out_dir)
    if command == "compare":
        return do_compare(sc, out_dir)
    if command == "stasis":
        return write_stasis(sc, out_dir)
    if command == "check":
        return do_check(sc, out_dir, seed)
    raise ValueError(command)


def _sweep_job(job):
    path, out, steps, elements, seed = job
    sc_out = str(Path(out) / Path(path).stem)
    try:
        data = json.loads(Path(path).read_text())
        command = "compare" if isinstance(data, dict) and "oracle" in data else "simulate"
        _run_one(command, path, sc_out, steps, elements, seed)
        return path, EXIT_OK, ""
    except Exception as exc:   # reported per scenario; the sweep continues
        return path, _exit_code(exc), str(exc)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ScenarioError, json.JSONDecodeError)):
        return EXIT_SCHEMA
    if isinstance(exc, (orc.OracleBoundaryError, BoundaryExit)):
        return EXIT_BOUNDARY
    if isinstance(exc, (InadmissibleStateError, NonCoerciveError, DomainError,
                        CombinatorialError, np.linalg.LinAlgError)):
        return EXIT_SOLVER
    if isinstance(exc, ValueError):
        return EXIT_SCHEMA
    return EXIT_SOLVER


def _threads() -> int:
    raw = os.environ.get("CRAWLER_RIS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crawler-ris",
                                 description="Quasistatic crawlers with dry friction.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, many=False):
        if many:
            p.add_argument("--scenario", nargs="+", required=True, metavar="PATH")
        else:
            p.add_argument("--scenario", required=True, metavar="PATH")
        p.add_argument("--out", default=".", metavar="DIR")
        p.add_argument("--steps", type=int, metavar="N", help="steps per unit time")
        p.add_argument("--elements", type=int, metavar="N", help="continuum element count")
        p.add_argument("--seed", type=int, default=None)

    common(sub.add_parser("simulate", help="trajectory CSV and JSON summary"))
    common(sub.add_parser("stasis", help="stasis-domain geometry"))
    common(sub.add_parser("check", help="uniqueness and regularity checks"))
    common(sub.add_parser("compare", help="simulate and compare with a closed form"))
    common(sub.add_parser("sweep", help="run several scenarios in parallel"), many=True)
    p = sub.add_parser("oracle", help="closed-form results")
    p.add_argument("--scenario", metavar="PATH")
    p.add_argument("--kind", choices=["two_point_constant", "three_point_regime",
                                      "continuum_homogeneous", "strategy"])
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--seed", type=int, default=None)
    return ap


def _oracle_command(args) -> dict:
    if args.scenario:
        sc = load_scenario(args.scenario)
        if sc.oracle is None:
            raise ScenarioError(f"{args.scenario}: no 'oracle' block")
        kind, params = sc.oracle["kind"], sc.oracle["params"]
    elif args.kind:
        kind, params = args.kind, dict(args.param)
    else:
        raise ScenarioError("oracle needs --scenario or --kind")
    return evaluate_oracle(kind, params)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            res = _oracle_command(args)
            text = json.dumps(res, indent=2, sort_keys=True)
            print(text)
            if args.out:
                _dump(res, _out_dir(args) / f"oracle_{res['kind']}.json")
            return EXIT_BOUNDARY if res.get("boundary") else EXIT_OK
        if args.command == "sweep":
            jobs = [(p, args.out, args.steps, args.elements, args.seed) for p in args.scenario]
            workers = min(_threads(), len(jobs))
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_sweep_job, jobs))
            else:
                results = [_sweep_job(j) for j in jobs]
            worst = EXIT_OK
            for path, code, msg in results:
                print(f"{path}: {'ok' if code == EXIT_OK else f'exit {code}: {msg}'}")
                worst = max(worst, code)
            return worst
        res = _run_one(args.command, args.scenario, args.out, args.steps, args.elements, args.seed)
        print(json.dumps(res, indent=2, sort_keys=True, default=_jsonable))
        return EXIT_OK
    except Exception as exc:
        code = _exit_code(exc)
        if code == EXIT_SOLVER and not isinstance(exc, (InadmissibleStateError, NonCoerciveError,
                                                        DomainError, CombinatorialError,
                                                        np.linalg.LinAlgError)):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
