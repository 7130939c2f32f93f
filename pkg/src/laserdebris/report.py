"""Run reports, CSV series and the improvement table."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .rhs import MissionLog
from .scenario import ScenarioConfig

REPORT_FILE = "report.json"
TIMESERIES_FILE = "timeseries.csv"
SCHEDULE_FILE = "schedule.csv"
TIMING_FILE = "timing.json"


@dataclass
class RunReport:
    scenario: str
    conops: str
    seed: int
    window_length: int
    budget: float
    value: float
    deorbits: int
    engagements: int
    dv_consumed: list[float]
    window_gaps: list[float]
    windows: int
    steps: int
    solver: str
    wall_time: float | None = field(default=None, compare=False)

    def to_json(self) -> str:
        data = asdict(self)
        data.pop("wall_time")
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        data = json.loads(text)
        return cls(**data)


def build_report(cfg: ScenarioConfig, log: MissionLog, wall_time: float | None = None) -> RunReport:
    return RunReport(
        scenario=cfg.name,
        conops=cfg.conops.kind,
        seed=cfg.seed,
        window_length=cfg.scheduler.window_length,
        budget=cfg.conops.dv_budget,
        value=log.value,
        deorbits=log.deorbits,
        engagements=log.engagements,
        dv_consumed=log.consumed,
        window_gaps=[w.gap for w in log.windows],
        windows=len(log.windows),
        steps=cfg.time.steps,
        solver=cfg.scheduler.solver,
        wall_time=wall_time,
    )


def timeseries_rows(log: MissionLog, n_steps: int) -> list[dict]:
    """One row per step; step 0 holds the initial (zero) totals."""
    n_p = len(log.initial_budgets)
    rows = [{"step": 0, "V_cumulative": 0.0, "engagements_cumulative": 0, "deorbits_cumulative": 0,
             **{f"budget_p{p}": log.initial_budgets[p] for p in range(n_p)}}]
    for rec in log.steps:
        rows.append({"step": rec.t + 1, "V_cumulative": rec.value,
                     "engagements_cumulative": rec.engagements_cum,
                     "deorbits_cumulative": rec.deorbits_cum,
                     **{f"budget_p{p}": rec.budgets[p] for p in range(n_p)}})
    if len(rows) != n_steps:
        raise ValueError(f"timeseries has {len(rows)} rows for {n_steps} steps")
    return rows


def schedule_rows(log: MissionLog) -> list[dict]:
    """Committed actions: maneuvers (Δv spent) and firings (Δv imparted)."""
    rows = []
    for rec in log.steps:
        for p, s, w, cost in rec.moves:
            if s != w:
                rows.append({"t": rec.t, "platform": p, "action": "move",
                             "target": f"slot{w}", "dv": cost})
        for (p, s, d), dv in zip(rec.engagements, rec.fire_dv):
            rows.append({"t": rec.t, "platform": p, "action": "fire",
                         "target": f"debris{d}", "dv": dv})
    return rows


def _write_csv(path: Path, rows: list[dict], header: Sequence[str]):
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(header), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_outputs(out_dir, cfg: ScenarioConfig, log: MissionLog, report: RunReport):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_FILE).write_text(report.to_json())
    ts = timeseries_rows(log, cfg.time.steps)
    _write_csv(out / TIMESERIES_FILE, ts, list(ts[0]))
    _write_csv(out / SCHEDULE_FILE, schedule_rows(log), ["t", "platform", "action", "target", "dv"])
    if report.wall_time is not None:
        (out / TIMING_FILE).write_text(json.dumps({"wall_time_s": report.wall_time}) + "\n")


def read_schedule(path) -> list[dict]:
    with Path(path).open() as fh:
        return [{"t": int(r["t"]), "platform": int(r["platform"]), "action": r["action"],
                 "target": r["target"], "dv": float(r["dv"])} for r in csv.DictReader(fh)]


def improvement(value: float, baseline: float) -> float:
    """Percentage gain over a baseline value."""
    if baseline == 0:
        return math.inf if value > 0 else 0.0
    return (value - baseline) / baseline * 100.0


def format_table(reports: Sequence[RunReport], baseline: RunReport | None = None) -> str:
    head = f"{'CONOPS':<16}{'V':>14}{'Deorbits':>10}{'Engagements':>13}{'Improvement':>14}"
    lines = [head, "-" * len(head)]
    rows = ([baseline] if baseline is not None else []) + list(reports)
    for r in rows:
        if baseline is None or r is baseline:
            imp = "-"
        else:
            imp = f"{improvement(r.value, baseline.value):,.2f} %"
        lines.append(f"{r.conops:<16}{r.value:>14,.2f}{r.deorbits:>10d}{r.engagements:>13d}{imp:>14}")
    return "\n".join(lines)


def sweep_matrix(cells: dict[tuple, RunReport], axis_name: str, axis_values: Sequence,
                 kinds: Sequence[str]) -> list[dict]:
    """Rows per axis value; V per CONOPS plus % increase over the baseline."""
    rows = []
    for v in axis_values:
        row = {axis_name: v}
        base = cells.get((v, "baseline"))
        for kind in kinds:
            row[kind] = cells[(v, kind)].value
        for kind in kinds:
            if kind != "baseline" and base is not None:
                row[f"{kind}_increase_pct"] = round(improvement(cells[(v, kind)].value, base.value), 2)
        rows.append(row)
    return rows


def write_sweep(path, rows: list[dict]):
    _write_csv(Path(path), rows, list(rows[0]))
