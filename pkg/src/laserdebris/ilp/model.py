"""Windowed engagement/reconfiguration ILP.

Variables (all binary):

* ``x`` -- debris ``d`` moves from TEG node ``i`` to child ``j`` at step ``t``
* ``y`` -- platform ``p`` at slot ``s`` fires at debris ``d`` at step ``t``
* ``z`` -- platform ``p`` moves from slot ``s`` to slot ``w`` over step ``t``

Steps are absolute mission steps.  A window covers ``n_steps`` transitions
starting at ``t0``; each platform starts the window in a single slot.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from ..teg import DebrisTeg, PlatformSlotGrid


class ModelError(ValueError):
    pass


@dataclass
class WindowInstance:
    """Data for one window: debris trees, platform edges, budgets.

    ``edges[p][k]`` maps ``(s, w)`` to the transfer cost at step ``t0 + k``.
    ``start_slots[p]`` is the platform's slot at ``t0``.
    """

    t0: int
    n_steps: int
    tegs: list[DebrisTeg]
    edges: list[list[dict[tuple[int, int], float]]]
    start_slots: list[int]
    budgets: list[float]

    def __post_init__(self):
        if len(self.edges) != len(self.start_slots) or len(self.budgets) != len(self.start_slots):
            raise ModelError("platform data lengths differ")
        for p, per_step in enumerate(self.edges):
            if len(per_step) != self.n_steps:
                raise ModelError(f"platform {p} edges do not span the window")
        for teg in self.tegs:
            off = teg.start - self.t0
            if off < 0 or off + teg.n_transitions > self.n_steps:
                raise ModelError(f"debris {teg.debris_id} TEG does not fit the window")

    @property
    def n_platforms(self) -> int:
        return len(self.start_slots)

    def slots(self, p: int, k: int) -> list[int]:
        """Slots platform ``p`` can occupy at window layer ``k``."""
        if k == 0:
            return [self.start_slots[p]]
        return sorted({w for (_, w) in self.edges[p][k - 1]})

    @classmethod
    def from_grid(cls, grid: PlatformSlotGrid, t0: int, n_steps: int, tegs: list[DebrisTeg],
                  start_slots: Sequence[int], budgets: Sequence[float]) -> WindowInstance:
        """Edges restricted to slots reachable within each platform's budget."""
        edges = []
        for p in range(grid.n_platforms):
            reach = grid.reachable(p, t0, [start_slots[p]], n_steps, budgets[p])
            per_step = []
            for k in range(n_steps):
                step_edges = {}
                for s, spent in reach[k].items():
                    row = grid.cost_row(p, t0 + k, s)
                    for w in np.nonzero(row <= budgets[p] - spent + 1e-12)[0]:
                        step_edges[(s, int(w))] = float(row[w])
                per_step.append(step_edges)
            edges.append(per_step)
        return cls(t0, n_steps, tegs, edges, list(start_slots), list(budgets))

    def layer_slots(self, k: int) -> dict[int, list[int]]:
        return {p: self.slots(p, k) for p in range(self.n_platforms)}


@dataclass
class Row:
    coefs: dict[int, float]
    sense: str  # "<=", ">=", "="
    rhs: float
    family: str


@dataclass
class IlpModel:
    instance: WindowInstance
    keys: list[tuple] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    costs: dict[int, float] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    index: dict[tuple, int] = field(default_factory=dict)
    strict: bool = True

    def add_var(self, key: tuple, obj: float = 0.0) -> int:
        if key in self.index:
            raise ModelError(f"duplicate variable {key}")
        idx = len(self.keys)
        self.keys.append(key)
        self.objective.append(obj)
        self.index[key] = idx
        return idx

    def add_row(self, coefs: dict[int, float], sense: str, rhs: float, family: str):
        coefs = {i: c for i, c in coefs.items() if c != 0}
        if coefs:
            self.rows.append(Row(coefs, sense, rhs, family))

    @property
    def n_vars(self) -> int:
        return len(self.keys)

    def name(self, idx: int) -> str:
        return var_name(self.keys[idx])

    def family_counts(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for row in self.rows:
            out[row.family] += 1
        return dict(out)

    def matrices(self):
        """Sparse (A_ub, b_ub, A_eq, b_eq) with ``>=`` rows negated."""
        ub_r, ub_c, ub_v, b_ub = [], [], [], []
        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        for row in self.rows:
            if row.sense == "=":
                r = len(b_eq)
                for i, c in row.coefs.items():
                    eq_r.append(r); eq_c.append(i); eq_v.append(c)
                b_eq.append(row.rhs)
            else:
                sign = 1.0 if row.sense == "<=" else -1.0
                r = len(b_ub)
                for i, c in row.coefs.items():
                    ub_r.append(r); ub_c.append(i); ub_v.append(sign * c)
                b_ub.append(sign * row.rhs)
        n = self.n_vars
        a_ub = sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n))
        a_eq = sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n))
        return a_ub, np.array(b_ub, dtype=float), a_eq, np.array(b_eq, dtype=float)

    def evaluate(self, values: Sequence[float]) -> float:
        return math.fsum(self.objective[i] * values[i] for i in range(self.n_vars) if values[i])

    def violations(self, values: Sequence[float], tol: float = 1e-9) -> list[Row]:
        bad = []
        for row in self.rows:
            lhs = math.fsum(c * values[i] for i, c in row.coefs.items())
            if row.sense == "<=" and lhs > row.rhs + tol:
                bad.append(row)
            elif row.sense == ">=" and lhs < row.rhs - tol:
                bad.append(row)
            elif row.sense == "=" and abs(lhs - row.rhs) > tol:
                bad.append(row)
        return bad


def var_name(key: tuple) -> str:
    kind, t, a, b, c = key
    if kind == "x":
        return f"x_t{t}_d{a}_i{b}_j{c}"
    if kind == "y":
        return f"y_t{t}_p{a}_s{b}_d{c}"
    if kind == "z":
        return f"z_t{t}_p{a}_s{b}_w{c}"
    raise ValueError(kind)


def parse_var_name(name: str) -> tuple:
    kind, *parts = name.split("_")
    vals = [int(p[1:]) for p in parts]
    return (kind, *vals)


def build_model(instance: WindowInstance, strict: bool = True) -> IlpModel:
    """Objective and constraint families over one window.

    ``strict`` adds, per (step, debris), equality between the engagements
    fired and the engagement set of the chosen TEG edge.
    """
    m = IlpModel(instance, strict=strict)
    inst = instance
    t0 = inst.t0

    # platform transfers
    for p in range(inst.n_platforms):
        for k in range(inst.n_steps):
            for (s, w), c in sorted(inst.edges[p][k].items()):
                idx = m.add_var(("z", t0 + k, p, s, w))
                m.costs[idx] = c

    # debris transfers and the engagements they need
    y_keys: set[tuple] = set()
    for teg in inst.tegs:
        off = teg.start - t0
        for k in range(teg.n_transitions):
            t = t0 + off + k
            for j, node in enumerate(teg.layers[k + 1]):
                m.add_var(("x", t, teg.debris_id, node.parent, j), node.reward)
                for p, s in node.combo:
                    y_keys.add(("y", t, p, s, teg.debris_id))
    for key in sorted(y_keys):
        m.add_var(key)

    ix = m.index
    z_by = defaultdict(list)        # (t, p, s) -> z out of s
    z_into = defaultdict(list)      # (t, p, w) -> z into w (transfer at t)
    z_move = defaultdict(list)      # (t, p) -> z with s != w
    for idx, key in enumerate(m.keys):
        if key[0] == "z":
            _, t, p, s, w = key
            z_by[(t, p, s)].append(idx)
            z_into[(t, p, w)].append(idx)
            if s != w:
                z_move[(t, p)].append(idx)
    y_by_slot = defaultdict(list)   # (t, p, s) -> y
    y_by_plat = defaultdict(list)   # (t, p) -> y
    y_by_debris = defaultdict(list)  # (t, d) -> y
    for key in sorted(y_keys):
        _, t, p, s, d = key
        y_by_slot[(t, p, s)].append(ix[key])
        y_by_plat[(t, p)].append(ix[key])
        y_by_debris[(t, d)].append(ix[key])

    for teg in inst.tegs:
        d = teg.debris_id
        off = teg.start - t0
        if teg.n_transitions == 0:
            continue
        t_first = t0 + off
        m.add_row({ix[("x", t_first, d, 0, j)]: 1.0 for j in range(len(teg.layers[1]))},
                  "=", 1.0, "flow_debris_init")
        for k in range(1, teg.n_transitions):
            t = t0 + off + k
            cmap = teg.child_map(k)
            for j, node in enumerate(teg.layers[k]):
                coefs = {ix[("x", t, d, j, c)]: 1.0 for c in cmap[j]}
                coefs[ix[("x", t - 1, d, node.parent, j)]] = -1.0
                m.add_row(coefs, "=", 0.0, "flow_debris")
        for k in range(teg.n_transitions):
            t = t0 + off + k
            exact: dict[int, float] = {}
            for j, node in enumerate(teg.layers[k + 1]):
                if not node.combo:
                    continue
                xi = ix[("x", t, d, node.parent, j)]
                coefs = {ix[("y", t, p, s, d)]: 1.0 for p, s in node.combo}
                coefs[xi] = -float(len(node.combo))
                m.add_row(coefs, ">=", 0.0, "engage_cover")
                exact[xi] = -float(len(node.combo))
            if strict and y_by_debris.get((t, d)):
                coefs = {i: 1.0 for i in y_by_debris[(t, d)]}
                coefs.update(exact)
                m.add_row(coefs, "=", 0.0, "engage_exact")

    for k in range(inst.n_steps):
        t = t0 + k
        for p in range(inst.n_platforms):
            for (tt, pp, s), ys in sorted(y_by_slot.items()):
                if (tt, pp) != (t, p):
                    continue
                coefs = {i: 1.0 for i in ys}
                for i in z_by.get((t, p, s), []):
                    coefs[i] = -1.0
                m.add_row(coefs, "<=", 0.0, "engage_slot")
            ys = y_by_plat.get((t, p), [])
            if ys:
                m.add_row({i: 1.0 for i in ys}, "<=", 1.0, "engage_once")
            coefs = {i: 1.0 for i in ys}
            coefs.update({i: 1.0 for i in z_move.get((t, p), [])})
            m.add_row(coefs, "<=", 1.0, "move_or_fire")

    for p in range(inst.n_platforms):
        s0 = inst.start_slots[p]
        m.add_row({i: 1.0 for i in z_by.get((t0, p, s0), [])}, "=", 1.0, "flow_platform_init")
        for k in range(1, inst.n_steps):
            t = t0 + k
            for s in inst.slots(p, k):
                coefs = {i: 1.0 for i in z_by.get((t, p, s), [])}
                for i in z_into.get((t - 1, p, s), []):
                    coefs[i] = coefs.get(i, 0.0) - 1.0
                m.add_row(coefs, "=", 0.0, "flow_platform")
        budget_coefs = {i: c for i, c in m.costs.items() if m.keys[i][2] == p}
        m.add_row(budget_coefs, "<=", inst.budgets[p], "budget")
    return m
