"""Branch and bound for the binary window model.

LP relaxations are solved with HiGHS through :func:`scipy.optimize.linprog`;
the search itself (best-bound node order, most-fractional branching with
lowest-index ties, incumbent pruning) lives here.
"""
from __future__ import annotations

import dataclasses
import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import IlpModel, Row

log = logging.getLogger(__name__)

INT_TOL = 1e-6
PRUNE_TOL = 1e-9


@dataclass
class Solution:
    status: str  # "optimal" | "infeasible" | "cap-exceeded"
    objective: float
    values: list[int]
    bound: float
    nodes: int = 0
    dv_consumed: dict[int, float] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        if self.status == "optimal":
            return 0.0
        if not math.isfinite(self.objective):
            return math.inf
        return max(0.0, self.bound - self.objective)

    def selected(self, model: IlpModel, kind: str | None = None) -> list[tuple]:
        return [model.keys[i] for i, v in enumerate(self.values)
                if v and (kind is None or model.keys[i][0] == kind)]

    def to_dict(self, model: IlpModel) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "gap": self.gap,
            "nodes": self.nodes,
            "dv_consumed": {str(p): v for p, v in sorted(self.dv_consumed.items())},
            "variables": [model.name(i) for i, v in enumerate(self.values) if v],
        }


def _consumed(model: IlpModel, values) -> dict[int, float]:
    out = {p: 0.0 for p in range(model.instance.n_platforms)}
    for i, c in model.costs.items():
        if values[i]:
            out[model.keys[i][2]] += c
    return out


class _Relaxation:
    def __init__(self, model: IlpModel):
        self.c = -np.asarray(model.objective, dtype=float)
        self.a_ub, self.b_ub, self.a_eq, self.b_eq = model.matrices()
        self.n = model.n_vars

    def solve(self, lo: np.ndarray, hi: np.ndarray):
        kwargs = {}
        if self.a_ub.shape[0]:
            kwargs.update(A_ub=self.a_ub, b_ub=self.b_ub)
        if self.a_eq.shape[0]:
            kwargs.update(A_eq=self.a_eq, b_eq=self.b_eq)
        res = linprog(self.c, bounds=np.column_stack([lo, hi]), method="highs", **kwargs)
        if res.status != 0:
            return None, None
        return -res.fun, res.x


METHODS = ("bnb", "highs")


def solve(model: IlpModel, time_limit: float | None = None, node_limit: int | None = None,
          min_dv: bool = False, method: str = "bnb") -> Solution:
    """Maximise the model objective over binary variables.

    ``method="bnb"`` runs the branch and bound below; ``"highs"`` hands the
    same matrices to HiGHS' MILP solver.  With ``min_dv`` an optimal schedule
    that spends Δv is re-optimised for the least total transfer cost at the
    same objective.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    run = _solve_bnb if method == "bnb" else _solve_highs
    sol = run(model, time_limit, node_limit)
    if not min_dv or sol.status != "optimal" or not any(sol.values[i] and c > 0
                                                        for i, c in model.costs.items()):
        return sol
    tol = 1e-9 * max(1.0, abs(sol.objective))
    keep = Row({i: c for i, c in enumerate(model.objective) if c}, ">=", sol.objective - tol,
               "objective_floor")
    cheap = dataclasses.replace(model, objective=[-model.costs.get(i, 0.0) for i in range(model.n_vars)],
                                rows=model.rows + [keep])
    alt = run(cheap, time_limit, node_limit)
    if alt.status != "optimal" or model.evaluate(alt.values) < sol.objective - tol:
        return sol
    return Solution("optimal", model.evaluate(alt.values), alt.values, model.evaluate(alt.values),
                    sol.nodes + alt.nodes, _consumed(model, alt.values))


def _solve_highs(model: IlpModel, time_limit: float | None, node_limit: int | None) -> Solution:
    if model.n_vars == 0:
        return Solution("optimal", 0.0, [], 0.0)
    a_ub, b_ub, a_eq, b_eq = model.matrices()
    cons = []
    if a_ub.shape[0]:
        cons.append(LinearConstraint(a_ub, -np.inf, b_ub))
    if a_eq.shape[0]:
        cons.append(LinearConstraint(a_eq, b_eq, b_eq))
    options = {"mip_rel_gap": 0.0}
    if time_limit is not None:
        options["time_limit"] = time_limit
    if node_limit is not None:
        options["node_limit"] = node_limit
    res = milp(-np.asarray(model.objective, dtype=float), constraints=cons,
               integrality=np.ones(model.n_vars), bounds=Bounds(0, 1), options=options)
    if res.x is None:
        status = "infeasible" if res.status == 2 else "cap-exceeded"
        return Solution(status, -math.inf, [0] * model.n_vars, -math.inf)
    vals = [int(round(v)) for v in res.x]
    obj = model.evaluate(vals)
    bound = -getattr(res, "mip_dual_bound", -obj) if res.status != 0 else obj
    status = "optimal" if res.status == 0 else "cap-exceeded"
    return Solution(status, obj, vals, max(bound, obj), int(getattr(res, "mip_node_count", 0) or 0),
                    _consumed(model, vals))


def _solve_bnb(model: IlpModel, time_limit: float | None, node_limit: int | None) -> Solution:
    start = time.monotonic()
    if model.n_vars == 0:
        return Solution("optimal", 0.0, [], 0.0)
    relax = _Relaxation(model)
    lo0 = np.zeros(model.n_vars)
    hi0 = np.ones(model.n_vars)

    best_obj = -math.inf
    best_vals: list[int] | None = None
    counter = itertools.count()
    heap: list = []
    nodes = 0

    bound, x = relax.solve(lo0, hi0)
    if bound is None:
        return Solution("infeasible", -math.inf, [0] * model.n_vars, -math.inf)
    heapq.heappush(heap, (-bound, next(counter), lo0, hi0, x))
    root_bound = bound
    capped = False

    while heap:
        neg_bound, _, lo, hi, x = heapq.heappop(heap)
        bound = -neg_bound
        if bound <= best_obj + PRUNE_TOL:
            continue
        nodes += 1
        frac = np.abs(x - np.round(x))
        branch = _pick_branch(frac)
        if branch is None:
            vals = [int(round(v)) for v in x]
            obj = model.evaluate(vals)
            if obj > best_obj + PRUNE_TOL and not model.violations(vals, 1e-6):
                best_obj, best_vals = obj, vals
            continue
        if (time_limit is not None and time.monotonic() - start > time_limit) or \
                (node_limit is not None and nodes >= node_limit):
            heapq.heappush(heap, (neg_bound, next(counter), lo, hi, x))
            capped = True
            break
        for value in (1.0, 0.0):
            clo, chi = lo.copy(), hi.copy()
            clo[branch] = chi[branch] = value
            cb, cx = relax.solve(clo, chi)
            if cb is None or cb <= best_obj + PRUNE_TOL:
                continue
            heapq.heappush(heap, (-cb, next(counter), clo, chi, cx))

    if best_vals is None:
        status = "cap-exceeded" if capped else "infeasible"
        return Solution(status, -math.inf, [0] * model.n_vars, root_bound, nodes)
    if capped:
        open_bound = max(-h[0] for h in heap)
        return Solution("cap-exceeded", best_obj, best_vals, max(open_bound, best_obj), nodes,
                        _consumed(model, best_vals))
    log.debug("solved %d vars / %d rows in %d nodes", model.n_vars, len(model.rows), nodes)
    return Solution("optimal", best_obj, best_vals, best_obj, nodes, _consumed(model, best_vals))


def _pick_branch(frac: np.ndarray) -> int | None:
    """Most fractional variable, lowest index on ties."""
    cand = frac > INT_TOL
    if not cand.any():
        return None
    score = np.where(cand, np.round(frac, 9), -1.0)
    return int(np.argmax(score))
