"""Exhaustive search over a window instance (test oracle).

Walks the window step by step.  At each step every platform either stays
(and may fire) or takes one affordable transfer; every present debris takes
one child edge whose engagement set is fired exactly by staying platforms at
the listed slots, each platform firing at most once.  Repeated states are
memoised, which keeps the search exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

from .model import WindowInstance

GUARD = 10_000_000


class GuardExceeded(RuntimeError):
    pass


@dataclass
class BruteResult:
    objective: float
    platform_paths: list[list[int]]
    debris_paths: dict[int, list[int]]


def search_space_size(inst: WindowInstance) -> float:
    """Crude upper bound on joint assignments explored."""
    total = 1.0
    for k in range(inst.n_steps):
        for p in range(inst.n_platforms):
            outs = max((sum(1 for (s, _) in inst.edges[p][k] if s == s0)
                        for s0 in inst.slots(p, k)), default=1)
            total *= max(outs, 1)
        for teg in inst.tegs:
            kk = k - (teg.start - inst.t0)
            if 0 <= kk < teg.n_transitions:
                widest = max(len(v) for v in teg.child_map(kk).values())
                total *= max(widest, 1)
    return total


def brute_force_solve(inst: WindowInstance, guard: float = GUARD) -> BruteResult:
    size = search_space_size(inst)
    if size > guard:
        raise GuardExceeded(f"search space {size:.3g} exceeds guard {guard:.3g}")
    P = inst.n_platforms
    tegs = list(inst.tegs)
    child_maps = [[t.child_map(k) for k in range(t.n_transitions)] for t in tegs]

    @lru_cache(maxsize=None)
    def best(k: int, slots: tuple, spent: tuple, nodes: tuple):
        if k == inst.n_steps:
            return 0.0, ()
        t = inst.t0 + k
        # per debris: candidate (child, reward, combo)
        options = []
        for d, teg in enumerate(tegs):
            kk = k - (teg.start - inst.t0)
            if not 0 <= kk < teg.n_transitions:
                options.append([(None, 0.0, ())])
                continue
            i = 0 if kk == 0 else nodes[d]
            opts = []
            for j in child_maps[d][kk][i]:
                node = teg.layers[kk + 1][j]
                if all(slots[p] == s for p, s in node.combo):
                    opts.append((j, node.reward, node.combo))
            options.append(opts)
        result = (-math.inf, ())
        for choice in itertools.product(*options):
            firing = [p for _, _, combo in choice for p, _ in combo]
            if len(firing) != len(set(firing)):
                continue
            fired = set(firing)
            gain = math.fsum(r for _, r, _ in choice)
            new_nodes = tuple(c[0] if c[0] is not None else nodes[d] for d, c in enumerate(choice))
            moves = []
            for p in range(P):
                s = slots[p]
                cands = []
                for (a, w), c in sorted(inst.edges[p][k].items()):
                    if a != s or spent[p] + c > inst.budgets[p] + 1e-12:
                        continue
                    if p in fired and w != s:
                        continue
                    cands.append((w, c))
                moves.append(cands)
            for move in itertools.product(*moves):
                nslots = tuple(w for w, _ in move)
                nspent = tuple(spent[p] + move[p][1] for p in range(P))
                sub, path = best(k + 1, nslots, nspent, new_nodes)
                if gain + sub > result[0]:
                    result = (gain + sub, ((nslots, new_nodes),) + path)
        return result

    value, path = best(0, tuple(inst.start_slots), tuple(0.0 for _ in range(P)),
                       tuple(0 for _ in tegs))
    best.cache_clear()
    platform_paths = [[inst.start_slots[p]] + [step[0][p] for step in path] for p in range(P)]
    debris_paths = {}
    for d, teg in enumerate(tegs):
        off = teg.start - inst.t0
        seq = [0] + [step[1][d] for step in path[off:off + teg.n_transitions]]
        debris_paths[teg.debris_id] = seq
    return BruteResult(value, platform_paths, debris_paths)
