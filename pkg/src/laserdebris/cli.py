"""Command-line front end.

Verbs: ``run``, ``sweep``, ``validate-config``, ``export-lp``, ``oracle-check``.
Set ``LASERDEBRIS_LOG`` (e.g. ``INFO``) for log output.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import ilp
from .report import (RunReport, build_report, format_table, sweep_matrix, write_outputs,
                     write_sweep)
from .rhs import SchedulerError, run_rhs
from .scenario import (CONOPS_KINDS, ConfigError, ScenarioConfig, build_mission, dump_scenario,
                       load_scenario, rhs_config, with_overrides)

log = logging.getLogger("laserdebris")


class CheckFailed(RuntimeError):
    pass


class _StopRun(Exception):
    pass


def _load(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario)
    return with_overrides(cfg, seed=getattr(args, "seed", None),
                          window_length=getattr(args, "window_length", None),
                          budget=getattr(args, "budget", None),
                          conops=getattr(args, "conops", None))


def _objectives_match(a: float, b: float) -> bool:
    return round(a, 9) == round(b, 9) or math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


def execute(cfg: ScenarioConfig, out_dir=None, brute_force_check: bool = False,
            dump_windows: bool = False):
    """Run one scenario; returns (report, log)."""
    mission = build_mission(cfg)
    mismatches = []
    checked = [0]
    out = Path(out_dir) if out_dir is not None else None

    def on_window(k, model, sol):
        if dump_windows and out is not None:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"solution_window{k}.lp.json").write_text(
                json.dumps(sol.to_dict(model), indent=2, sort_keys=True) + "\n")
        if brute_force_check:
            try:
                res = ilp.brute_force_solve(model.instance)
            except ilp.GuardExceeded:
                return
            checked[0] += 1
            if not _objectives_match(res.objective, sol.objective):
                mismatches.append((k, sol.objective, res.objective))

    start = time.perf_counter()
    mlog = run_rhs(mission, rhs_config(cfg), on_window=on_window)
    wall = time.perf_counter() - start
    report = build_report(cfg, mlog, wall)
    if out is not None:
        write_outputs(out, cfg, mlog, report)
    if brute_force_check:
        print(f"brute-force check: {checked[0]} window(s) compared, {len(mismatches)} mismatch(es)")
        if mismatches:
            for k, a, b in mismatches:
                print(f"  window {k}: solver {a!r} vs brute force {b!r}")
            raise CheckFailed("solver and brute-force objectives differ")
    return report, mlog


def cmd_run(args) -> int:
    cfg = _load(args)
    report, _ = execute(cfg, args.out_dir, args.brute_force_check, args.dump_windows)
    baseline = None
    if args.baseline_report:
        baseline = RunReport.from_json(Path(args.baseline_report).read_text())
    print(format_table([report], baseline))
    if args.out_dir:
        print(f"outputs written to {args.out_dir}")
    return 0


def _parse_values(text: str, axis: str) -> list:
    conv = int if axis == "L" else float
    return [conv(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    base = _load(args)
    values = _parse_values(args.values, args.axis)
    kinds = args.kinds.split(",") if args.kinds else list(CONOPS_KINDS)
    for k in kinds:
        if k not in CONOPS_KINDS:
            raise ConfigError(f"unknown CONOPS {k!r}")
    cells = {}
    out = Path(args.out_dir) if args.out_dir else None
    for v in values:
        for kind in kinds:
            over = {"window_length": v} if args.axis == "L" else {"budget": v}
            try:
                cfg = with_overrides(base, conops=kind, **over)
                cell_dir = out / f"{args.axis}_{v}_{kind}" if out else None
                cells[(v, kind)], _ = execute(cfg, cell_dir)
            except Exception as exc:
                raise RuntimeError(f"sweep cell {args.axis}={v}, conops={kind}: {exc}") from exc
            print(f"{args.axis}={v} {kind}: V={cells[(v, kind)].value:,.2f}", flush=True)
    axis_name = "window_length" if args.axis == "L" else "dv_budget"
    rows = sweep_matrix(cells, axis_name, values, kinds)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_sweep(out / "sweep.csv", rows)
    for row in rows:
        print(", ".join(f"{k}={v}" for k, v in row.items()))
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    if args.canonical:
        sys.stdout.write(dump_scenario(cfg))
    else:
        n_debris = len(build_mission(cfg).debris) if args.build else None
        extra = f", {n_debris} debris" if n_debris is not None else ""
        print(f"{cfg.name}: ok ({cfg.time.steps} steps of {cfg.time.step_seconds:g} s, "
              f"{len(cfg.platforms)} platforms{extra}, conops={cfg.conops.kind})")
    return 0


def _capture_window(cfg: ScenarioConfig, index: int):
    captured = {}

    def grab(k, model, sol):
        if k == index:
            captured["model"], captured["sol"] = model, sol
            raise _StopRun

    try:
        run_rhs(build_mission(cfg), rhs_config(cfg), on_window=grab)
    except _StopRun:
        pass
    if "model" not in captured:
        raise SchedulerError(f"window {index} does not exist")
    return captured["model"], captured["sol"]


def cmd_export(args) -> int:
    cfg = _load(args)
    model, _ = _capture_window(cfg, args.window)
    text = ilp.export_model(model)
    if args.out:
        Path(args.out).write_text(text)
        print(f"window {args.window}: {model.n_vars} variables, {len(model.rows)} rows -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_oracle(args) -> int:
    """Compare branch and bound, HiGHS MILP and (when small) brute force."""
    cfg = _load(args)
    failures = 0

    def check(k, model, sol):
        nonlocal failures
        if k >= args.windows:
            raise _StopRun
        bnb = ilp.solve(model, method="bnb", node_limit=args.node_limit)
        highs = ilp.solve(model, method="highs")
        parsed, _ = ilp.solve_parsed_milp(ilp.parse_lp(ilp.export_model(model)))
        ref = [("bnb", bnb.objective if bnb.status == "optimal" else None),
               ("highs", highs.objective), ("lp-text", parsed)]
        try:
            ref.append(("brute", ilp.brute_force_solve(model.instance).objective))
        except ilp.GuardExceeded:
            pass
        vals = [v for _, v in ref if v is not None]
        ok = all(_objectives_match(vals[0], v) for v in vals)
        failures += not ok
        print(f"window {k}: " + ", ".join(f"{n}={v!r}" for n, v in ref) + ("" if ok else "  MISMATCH"))

    try:
        run_rhs(build_mission(cfg), rhs_config(cfg), on_window=check)
    except _StopRun:
        pass
    return 1 if failures else 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laserdebris", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, overrides=True):
        p.add_argument("--scenario", required=True, help="scenario TOML file")
        p.add_argument("--seed", type=int)
        if overrides:
            p.add_argument("--window-length", type=int)
            p.add_argument("--budget", type=float, help="per-platform Δv budget, km/s")
            p.add_argument("--conops", choices=CONOPS_KINDS)

    p = sub.add_parser("run", help="run the receding-horizon scheduler")
    common(p)
    p.add_argument("--out-dir")
    p.add_argument("--baseline-report", help="report.json to compare against")
    p.add_argument("--brute-force-check", action="store_true",
                   help="re-solve every small window by exhaustive search")
    p.add_argument("--dump-windows", action="store_true",
                   help="write solution_windowN.lp.json per window")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="CONOPS matrix over L or budget")
    common(p, overrides=False)
    p.add_argument("--axis", choices=("L", "budget"), required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--kinds", help="comma-separated CONOPS (default: all three)")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-config", help="check a scenario file")
    common(p)
    p.add_argument("--canonical", action="store_true", help="print the canonical form")
    p.add_argument("--build", action="store_true", help="also sample the debris")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-lp", help="write one window model as LP text")
    common(p)
    p.add_argument("--window", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("oracle-check", help="cross-check solvers on the first windows")
    common(p)
    p.add_argument("--windows", type=int, default=3)
    p.add_argument("--node-limit", type=int, default=20000)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LASERDEBRIS_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"scenario: {exc}", file=sys.stderr)
    except SchedulerError as exc:
        print(f"rhs: {exc}", file=sys.stderr)
    except CheckFailed as exc:
        print(f"ilp: {exc}", file=sys.stderr)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
