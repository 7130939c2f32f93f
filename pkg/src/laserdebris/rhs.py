"""Receding-horizon scheduler.

Each window of ``L`` transitions starting at step ``l`` is rebuilt from the
committed platform slots, remaining budgets and debris states, solved
exactly, and only its first transition is committed.  The final window
``T-1-L .. T-1`` commits all of its transitions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import astro, ilp
from .astro import StateVector
from .pla import apply_cooperative_engagement, delta_v_engagement
from .teg import DebrisBody, DebrisTeg, PlatformSlotGrid, TegSettings, generate_debris_teg, periapsis_reward

log = logging.getLogger(__name__)


class SchedulerError(RuntimeError):
    pass


@dataclass
class Mission:
    """Everything the scheduler needs, already resolved from a scenario."""

    n_steps: int
    grid: PlatformSlotGrid
    debris: list[DebrisBody]
    budgets: list[float]
    settings: TegSettings
    strict: bool = True

    @property
    def step(self) -> float:
        return self.grid.step


@dataclass(frozen=True)
class RhsConfig:
    window_length: int
    time_limit: float | None = None
    node_limit: int | None = None
    method: str = "bnb"
    min_dv: bool = False

    def check(self, n_steps: int):
        if not 2 <= self.window_length <= n_steps - 1:
            raise SchedulerError(
                f"window_length={self.window_length} must lie in [2, T-1={n_steps - 1}]")


@dataclass
class StepRecord:
    t: int
    moves: list[tuple[int, int, int, float]] = field(default_factory=list)
    engagements: list[tuple[int, int, int]] = field(default_factory=list)
    fire_dv: list[float] = field(default_factory=list)
    rewards: list[tuple[int, float]] = field(default_factory=list)
    deorbits: list[int] = field(default_factory=list)
    value: float = 0.0
    engagements_cum: int = 0
    deorbits_cum: int = 0
    budgets: list[float] = field(default_factory=list)


@dataclass
class WindowRecord:
    t0: int
    n_steps: int
    status: str
    objective: float
    gap: float
    nodes: int
    n_vars: int
    n_rows: int


@dataclass
class MissionLog:
    steps: list[StepRecord] = field(default_factory=list)
    windows: list[WindowRecord] = field(default_factory=list)
    initial_budgets: list[float] = field(default_factory=list)
    final_slots: list[int] = field(default_factory=list)
    states: list[dict[int, StateVector]] = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.steps[-1].value if self.steps else 0.0

    @property
    def engagements(self) -> int:
        return self.steps[-1].engagements_cum if self.steps else 0

    @property
    def deorbits(self) -> int:
        return self.steps[-1].deorbits_cum if self.steps else 0

    @property
    def consumed(self) -> list[float]:
        out = [0.0] * len(self.initial_budgets)
        for rec in self.steps:
            for p, _, _, c in rec.moves:
                out[p] += c
        return out


# ---------------------------------------------------------------------------
# State updates

def update_platform_budget(budgets: Sequence[float], moves: Sequence[tuple[int, int, int, float]],
                           tol: float = 1e-9) -> list[float]:
    """Subtract committed transfer costs; ``moves`` holds (p, s, w, cost)."""
    out = list(budgets)
    for p, _, _, cost in moves:
        out[p] -= cost
    for p, b in enumerate(out):
        if b < -tol:
            raise SchedulerError(f"platform {p} budget overdrawn ({b:.3e} km/s)")
        out[p] = max(b, 0.0)
    return out


def update_debris_state(state: StateVector, engagements: Sequence[np.ndarray], mu_d: float,
                        settings: TegSettings) -> tuple[StateVector, float]:
    """Next-step state and periapsis reward after the committed engagements.

    ``engagements`` are platform positions firing at the debris this step.
    """
    if state.is_sentinel:
        if engagements:
            raise SchedulerError("engagement committed on a deorbited object")
        return state, 0.0
    if not engagements:
        return astro.propagate_two_body(state, settings.step, settings.mu), 0.0
    dvs = [delta_v_engagement(settings.laser, pos, state, mu_d) for pos in engagements]
    post = apply_cooperative_engagement(state, dvs)
    gamma = periapsis_reward(astro.periapsis_radius(post, settings.mu), settings.r_deorbit)
    if gamma >= 1.0:
        return StateVector.sentinel(), gamma
    return astro.propagate_two_body(post, settings.step, settings.mu), gamma


# ---------------------------------------------------------------------------
# Windows

def _debris_span(body: DebrisBody, t0: int, t1: int, n_steps: int) -> tuple[int, int]:
    stop = n_steps - 1 if body.stop is None else min(body.stop, n_steps - 1)
    return max(t0, body.start), min(t1, stop)


def build_window(mission: Mission, t0: int, n_steps: int, slots: Sequence[int],
                 budgets: Sequence[float], states: dict[int, StateVector]) -> ilp.WindowInstance:
    """Window instance: reachable platform edges plus one TEG per present debris."""
    grid = mission.grid
    edges_only = ilp.WindowInstance.from_grid(grid, t0, n_steps, [], slots, budgets)
    tegs: list[DebrisTeg] = []
    for body in mission.debris:
        a, b = _debris_span(body, t0, t0 + n_steps, mission.n_steps)
        if b - a <= 0:
            continue
        root = states.get(body.id) if a == t0 else body.state
        if root is None:
            continue
        layers = []
        for t in range(a, b):
            k = t - t0
            layer = {}
            for p in range(grid.n_platforms):
                ids = edges_only.slots(p, k)
                pos = grid.states(p, t)[0][ids] if ids else np.zeros((0, 3))
                layer[p] = (ids, pos)
            layers.append(layer)
        tegs.append(generate_debris_teg(body, layers, mission.settings, start=a, root=root))
    return ilp.WindowInstance(t0, n_steps, tegs, edges_only.edges, list(slots), list(budgets))


def solve_window(inst: ilp.WindowInstance, strict: bool, config: RhsConfig):
    model = ilp.build_model(inst, strict=strict)
    sol = ilp.solve(model, time_limit=config.time_limit, node_limit=config.node_limit,
                    min_dv=config.min_dv, method=config.method)
    if sol.status == "infeasible" or not math.isfinite(sol.objective):
        raise SchedulerError(f"window at step {inst.t0} has no feasible solution")
    return model, sol


def run_rhs(mission: Mission, config: RhsConfig, on_window=None,
            keep_states: bool = False) -> MissionLog:
    """Slide the window over the mission and commit actions step by step.

    ``on_window(index, model, solution)`` is called after every solve.
    ``keep_states`` stores every present debris state per step in the log.
    """
    T, L = mission.n_steps, config.window_length
    config.check(T)
    P = mission.grid.n_platforms
    slots = [0] * P
    budgets = list(mission.budgets)
    states: dict[int, StateVector] = {b.id: b.state for b in mission.debris if b.start == 0}
    bodies = {b.id: b for b in mission.debris}
    log_ = MissionLog(initial_budgets=list(budgets))
    totals = {"value": 0.0, "eng": 0, "deo": 0}

    def commit(model, sol, inst, t):
        nonlocal slots, budgets
        rec = StepRecord(t)
        for key in sol.selected(model, "z"):
            _, tt, p, s, w = key
            if tt == t:
                rec.moves.append((p, s, w, model.costs[model.index[key]]))
        rec.moves.sort()
        rec.engagements = sorted((p, s, d) for (_, tt, p, s, d) in sol.selected(model, "y") if tt == t)
        positions = {p: mission.grid.states(p, t)[0] for p in range(P)}
        chosen = {d: (i, j) for (_, tt, d, i, j) in sol.selected(model, "x") if tt == t}
        teg_by_id = {teg.debris_id: teg for teg in inst.tegs}
        fire_dv = {}
        for d in sorted(chosen):
            teg = teg_by_id[d]
            k = t - teg.start
            i, j = chosen[d]
            node = teg.layers[k + 1][j]
            state = states[d]
            fire = [positions[p][s] for p, s in node.combo]
            for (p, s), pos in zip(node.combo, fire):
                dv = delta_v_engagement(mission.settings.laser, pos, state, bodies[d].mu_d)
                fire_dv[(p, s, d)] = float(np.linalg.norm(dv))
            new_state, gamma = update_debris_state(state, fire, bodies[d].mu_d, mission.settings)
            if new_state != node.state:
                raise SchedulerError(f"debris {d} update disagrees with its TEG at step {t}")
            states[d] = new_state
            if node.reward:
                rec.rewards.append((d, node.reward))
            if node.combo and new_state.is_sentinel:
                rec.deorbits.append(d)
        rec.fire_dv = [fire_dv.get(e, 0.0) for e in rec.engagements]
        for p, s, w, _ in rec.moves:
            slots[p] = w
        budgets = update_platform_budget(budgets, rec.moves)
        # debris entering or leaving the mission at the next step
        for body in mission.debris:
            if body.start == t + 1:
                states[body.id] = body.state
            if body.stop is not None and body.stop == t + 1:
                states.pop(body.id, None)
        for _, r in rec.rewards:
            totals["value"] += r
        totals["eng"] += len(rec.engagements)
        totals["deo"] += len(rec.deorbits)
        rec.value = totals["value"]
        rec.engagements_cum = totals["eng"]
        rec.deorbits_cum = totals["deo"]
        rec.budgets = list(budgets)
        log_.steps.append(rec)
        if keep_states:
            log_.states.append(dict(states))

    def window(t0, n):
        inst = build_window(mission, t0, n, slots, budgets, states)
        model, sol = solve_window(inst, mission.strict, config)
        log_.windows.append(WindowRecord(t0, n, sol.status, sol.objective, sol.gap, sol.nodes,
                                         model.n_vars, len(model.rows)))
        if on_window is not None:
            on_window(len(log_.windows) - 1, model, sol)
        return inst, model, sol

    if keep_states:
        log_.states.append(dict(states))
    for l in range(0, T - L - 1):
        inst, model, sol = window(l, L)
        commit(model, sol, inst, l)
    t_final = T - 1 - L
    inst, model, sol = window(t_final, L)
    for t in range(t_final, T - 1):
        commit(model, sol, inst, t)
    log_.final_slots = list(slots)
    return log_
