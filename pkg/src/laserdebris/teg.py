"""Platform slot grids and per-debris time-expanded graphs.

A platform's candidate orbits ("slots") are fixed orbits indexed by ``s``;
slot 0 is the platform's initial orbit.  At step ``t`` a slot is that orbit
propagated ``t`` steps from the epoch.  Transfer costs between slot ``s`` at
``t`` and slot ``w`` at ``t + 1`` come from a one-step Lambert arc.

A debris TEG is a tree of debris states, one layer per step.  Each layer
starts every parent's children with the no-engagement continuation, then one
child per cooperative engagement that strictly lowers periapsis.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import astro
from .astro import EARTH, KeplerianElements, StateVector
from .pla import LaserSystem, apply_cooperative_engagement, delta_v_engagement, feasible_mask

log = logging.getLogger(__name__)

DEORBIT_REWARD = 100.0
DEFAULT_R_DEORBIT = EARTH.r_earth + 200.0
DEFAULT_ALPHA = 1e6
DEFAULT_K_MAX = 3
DEFAULT_NODE_CAP = 50_000

Combo = tuple[tuple[int, int], ...]


class GridError(ValueError):
    pass


class TegOverflowError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Slot grids

def phase_offsets(n_phases: int) -> list[float]:
    return [k * 360.0 / n_phases for k in range(n_phases)]


def build_plane_change_grid(initial: KeplerianElements, dv_budget: float, beta: float = 0.8,
                            n_phases: int = 36, n_planes: int = 5,
                            mu: float = astro.MU_EARTH) -> list[KeplerianElements]:
    """Slots over ``n_planes`` orbital planes times ``n_phases`` phases.

    Plane levels ``j = 1..m`` (``m = (n_planes - 1) / 2``) alternate between
    an inclination offset and a RAAN offset of ``j / m`` times the maximum
    change the budget allows, each applied with both signs.
    """
    if n_planes < 1 or n_planes % 2 == 0:
        raise GridError("n_planes must be a positive odd number")
    if n_phases < 1:
        raise GridError("n_phases must be positive")
    if dv_budget < 0:
        raise GridError("dv_budget must be non-negative")
    delta_inc = astro.max_inclination_change(dv_budget, initial.semi_major_axis, beta, mu)
    if delta_inc.clamped:
        raise GridError(f"dv_budget={dv_budget} exceeds twice the circular speed")
    try:
        delta_raan = astro.max_raan_change(math.radians(delta_inc.degrees),
                                           initial.inclination, beta=1.0, form="cosine")
    except ValueError as exc:
        raise GridError(f"inclination={initial.inclination}: {exc}") from None

    m = (n_planes - 1) // 2
    planes = [(0.0, 0.0)]
    for j in range(1, m + 1):
        frac = j / m
        if j % 2 == 1:
            off = frac * delta_inc.degrees
            planes += [(off, 0.0), (-off, 0.0)]
        else:
            off = frac * delta_raan.degrees
            planes += [(0.0, off), (0.0, -off)]

    slots = []
    for d_inc, d_raan in planes:
        inc = min(180.0, max(0.0, initial.inclination + d_inc))
        for dphase in phase_offsets(n_phases):
            slots.append(initial.replace(
                inclination=inc,
                raan=initial.raan + d_raan,
                argument_of_latitude=initial.argument_of_latitude + dphase))
    return slots


def build_altitude_change_grid(initial: KeplerianElements, n_phases: int = 36, n_layers: int = 7,
                               layer_step: float = 50.0, direction: str = "both",
                               constants: astro.EarthConstants = EARTH) -> list[KeplerianElements]:
    """Slots over altitude layers times phases.

    ``direction="both"`` needs an odd ``n_layers`` and spreads layers
    symmetrically (order 0, +1, -1, +2, ...); ``"up"`` stacks ``n_layers``
    layers starting at the initial orbit.
    """
    if n_phases < 1 or n_layers < 1:
        raise GridError("n_phases and n_layers must be positive")
    if direction == "both":
        if n_layers % 2 == 0:
            raise GridError("n_layers must be odd for symmetric layers")
        ks = [0]
        for k in range(1, (n_layers - 1) // 2 + 1):
            ks += [k, -k]
    elif direction == "up":
        ks = list(range(n_layers))
    else:
        raise GridError(f"unknown direction {direction!r}")
    lowest = initial.semi_major_axis + min(ks) * layer_step
    if lowest <= constants.horizon_radius:
        raise GridError(f"lowest layer {lowest:.3f} km is below the grazing radius")
    return [initial.replace(semi_major_axis=initial.semi_major_axis + k * layer_step,
                            argument_of_latitude=initial.argument_of_latitude + dphase)
            for k in ks for dphase in phase_offsets(n_phases)]


@dataclass
class PlatformSlotGrid:
    """Candidate orbits per platform and one-step transfer costs.

    ``orbits[p][s]`` is slot ``s`` of platform ``p``.  At ``t = 0`` only slot
    0 exists.  Orbits must be circular.
    """

    orbits: list[list[KeplerianElements]]
    step: float
    mu: float = astro.MU_EARTH
    _pos_cache: dict = field(default_factory=dict, repr=False)
    _cost_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.step > 0:
            raise GridError("step must be positive")
        for p, orbs in enumerate(self.orbits):
            if not orbs:
                raise GridError(f"platform {p} has no slots")
            if any(o.eccentricity != 0 for o in orbs):
                raise GridError("slot orbits must be circular")

    @classmethod
    def static(cls, initial: Sequence[KeplerianElements], step: float,
               mu: float = astro.MU_EARTH) -> PlatformSlotGrid:
        return cls([[el] for el in initial], step, mu)

    @property
    def n_platforms(self) -> int:
        return len(self.orbits)

    def n_slots(self, p: int, t: int) -> int:
        return 1 if t == 0 else len(self.orbits[p])

    def slot_ids(self, p: int, t: int) -> range:
        return range(self.n_slots(p, t))

    def states(self, p: int, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Positions and velocities of every orbit of platform ``p`` at ``t``."""
        key = (p, t)
        if key not in self._pos_cache:
            self._pos_cache[key] = astro.circular_positions(self.orbits[p], t * self.step, self.mu)
        return self._pos_cache[key]

    def state(self, p: int, s: int, t: int) -> StateVector:
        pos, vel = self.states(p, t)
        return StateVector(pos[s], vel[s])

    def cost_row(self, p: int, t: int, s: int) -> np.ndarray:
        """Costs from slot ``s`` at ``t`` to every slot at ``t + 1``."""
        key = (p, t, s)
        row = self._cost_cache.get(key)
        if row is None:
            pos0, vel0 = self.states(p, t)
            pos1, vel1 = self.states(p, t + 1)
            n_to = self.n_slots(p, t + 1)
            row = astro.transfer_cost_batch(pos0[s][None], vel0[s][None],
                                            pos1[:n_to], vel1[:n_to], self.step, self.mu)
            if s < n_to:
                row[s] = 0.0
            row.flags.writeable = False
            self._cost_cache[key] = row
        return row

    def cost(self, p: int, t: int, s: int, w: int) -> float:
        return float(self.cost_row(p, t, s)[w])

    def reachable(self, p: int, t0: int, start: Sequence[int], n_steps: int,
                  budget: float) -> list[dict[int, float]]:
        """Slots reachable from ``start`` at ``t0`` within ``budget``.

        Returns per window layer a map slot -> cheapest cost to get there.
        """
        layers = [{s: 0.0 for s in start}]
        for k in range(n_steps):
            nxt: dict[int, float] = {}
            for s, spent in layers[-1].items():
                row = self.cost_row(p, t0 + k, s)
                ok = np.nonzero(row <= budget - spent + 1e-12)[0]
                for w in ok:
                    c = spent + float(row[w])
                    if c < nxt.get(int(w), math.inf):
                        nxt[int(w)] = c
            layers.append(dict(sorted(nxt.items())))
        return layers


# ---------------------------------------------------------------------------
# Active spacecraft and rewards

@dataclass(frozen=True)
class ActiveSpacecraft:
    """Protected spacecraft with an RTN-aligned conjunction ellipsoid (km)."""

    id: int
    elements: KeplerianElements
    semi_axes: tuple[float, float, float] = (2.0, 25.0, 25.0)

    def __post_init__(self):
        if len(self.semi_axes) != 3 or min(self.semi_axes) <= 0:
            raise ValueError("semi_axes must be three positive lengths")

    def state_at(self, seconds: float, mu: float = astro.MU_EARTH) -> StateVector:
        st = astro.elements_to_state(self.elements, mu)
        return astro.propagate_two_body(st, seconds, mu) if seconds > 0 else st

    def contains(self, point, seconds: float, mu: float = astro.MU_EARTH) -> bool:
        sc = self.state_at(seconds, mu)
        return inside_rtn_ellipsoid(point, sc, self.semi_axes)


def inside_rtn_ellipsoid(point, center: StateVector, semi_axes) -> bool:
    r_hat = center.r / np.linalg.norm(center.r)
    h = np.cross(center.r, center.v)
    n_hat = h / np.linalg.norm(h)
    t_hat = np.cross(n_hat, r_hat)
    rel = np.asarray(point, dtype=float) - center.r
    comps = np.array([rel @ r_hat, rel @ t_hat, rel @ n_hat])
    return float(np.sum((comps / np.asarray(semi_axes)) ** 2)) <= 1.0


@dataclass(frozen=True)
class Reward:
    total: float
    gamma: float
    penalty: float

    @property
    def deorbits(self) -> bool:
        return self.gamma >= 1.0


def periapsis_reward(r_peri_post: float, r_deorbit: float) -> float:
    if r_peri_post <= r_deorbit:
        return DEORBIT_REWARD
    return (r_deorbit / r_peri_post) ** 3


def transfer_reward(parent_state: StateVector, post_state: StateVector, r_deorbit: float,
                    active: Sequence[ActiveSpacecraft] = (), t: int = 0, alpha: float = DEFAULT_ALPHA,
                    step: float = 180.0, mu: float = astro.MU_EARTH) -> Reward:
    """Edge reward: periapsis term plus conjunction penalty at step ``t + 1``."""
    if parent_state.is_sentinel:
        raise ValueError("parent state is the deorbit sentinel")
    if post_state == parent_state:
        return Reward(0.0, 0.0, 0.0)
    r_pre = astro.periapsis_radius(parent_state, mu)
    r_post = astro.periapsis_radius(post_state, mu)
    if r_post > r_pre:
        raise ValueError("engagement raised periapsis; node must not exist")
    if r_post == r_pre:
        return Reward(0.0, 0.0, 0.0)
    gamma = periapsis_reward(r_post, r_deorbit)
    penalty = 0.0
    if active:
        nxt = astro.propagate_two_body(post_state, step, mu).r
        seconds = (t + 1) * step
        if any(sc.contains(nxt, seconds, mu) for sc in active):
            penalty = -alpha
    return Reward(gamma + penalty, gamma, penalty)


# ---------------------------------------------------------------------------
# Engagement combinations

SlotLayer = Mapping[int, tuple[Sequence[int], np.ndarray]]
"""Platform -> (slot ids, slot positions) available at one step."""


def feasible_pairs(debris_pos, layer: SlotLayer, laser: LaserSystem,
                   eps: float = EARTH.grazing_altitude) -> list[tuple[int, int]]:
    pairs = []
    for p in sorted(layer):
        ids, pos = layer[p]
        if len(ids) == 0:
            continue
        mask = feasible_mask(pos, debris_pos, laser, eps)
        pairs.extend((p, int(ids[k])) for k in np.nonzero(mask)[0])
    return pairs


def combos_from_pairs(pairs: Sequence[tuple[int, int]], k_max: int) -> list[Combo]:
    out: list[Combo] = []
    for size in range(1, k_max + 1):
        for combo in itertools.combinations(pairs, size):
            platforms = [p for p, _ in combo]
            if len(set(platforms)) == size:
                out.append(tuple(combo))
    return out


def enumerate_feasible_combos(debris_state: StateVector, layer: SlotLayer, laser: LaserSystem,
                              k_max: int = DEFAULT_K_MAX,
                              eps: float = EARTH.grazing_altitude) -> list[Combo]:
    """All (platform, slot) sets with distinct platforms, each pair feasible."""
    if debris_state.is_sentinel:
        raise ValueError("sentinel debris cannot be engaged")
    return combos_from_pairs(feasible_pairs(debris_state.r, layer, laser, eps), k_max)


# ---------------------------------------------------------------------------
# Debris TEG

@dataclass(frozen=True)
class TegNode:
    state: StateVector
    parent: int | None
    reward: float = 0.0
    combo: Combo = ()
    gamma: float = 0.0
    penalty: float = 0.0

    @property
    def deorbited(self) -> bool:
        return self.state.is_sentinel


@dataclass
class DebrisBody:
    id: int
    mu_d: float
    state: StateVector
    start: int = 0
    stop: int | None = None

    def __post_init__(self):
        if not self.mu_d > 0:
            raise ValueError("surface mass density must be positive")


@dataclass
class DebrisTeg:
    """Layered debris tree; layer ``k`` sits at absolute step ``start + k``."""

    debris_id: int
    start: int
    layers: list[list[TegNode]]
    mu_d: float = 0.2
    truncated: bool = False

    @property
    def n_transitions(self) -> int:
        return len(self.layers) - 1

    def children(self, k: int, i: int) -> list[int]:
        return [j for j, node in enumerate(self.layers[k + 1]) if node.parent == i]

    def child_map(self, k: int) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {i: [] for i in range(len(self.layers[k]))}
        for j, node in enumerate(self.layers[k + 1]):
            out[node.parent].append(j)
        return out

    @property
    def n_nodes(self) -> int:
        return sum(len(layer) for layer in self.layers)


@dataclass
class TegSettings:
    laser: LaserSystem = field(default_factory=LaserSystem)
    step: float = 180.0
    r_deorbit: float = DEFAULT_R_DEORBIT
    alpha: float = DEFAULT_ALPHA
    k_max: int = DEFAULT_K_MAX
    eps: float = EARTH.grazing_altitude
    node_cap: int = DEFAULT_NODE_CAP
    on_overflow: str = "truncate"
    active: Sequence[ActiveSpacecraft] = ()
    mu: float = astro.MU_EARTH


def _propagate(state: StateVector, settings: TegSettings) -> StateVector:
    return astro.propagate_two_body(state, settings.step, settings.mu)


def generate_debris_teg(debris: DebrisBody, layers: Sequence[SlotLayer], settings: TegSettings,
                        start: int | None = None, root: StateVector | None = None) -> DebrisTeg:
    """Build the debris tree over ``len(layers)`` transitions.

    ``layers[k]`` lists the platform slots available at step ``start + k``.
    ``root`` overrides the debris state at ``start``.
    """
    start = debris.start if start is None else start
    state0 = debris.state if root is None else root
    tree = [[TegNode(state0, None)]]
    total = 1
    truncated = False
    for k, layer in enumerate(layers):
        t = start + k
        new: list[TegNode] = []
        for i, node in enumerate(tree[-1]):
            if node.deorbited:
                new.append(TegNode(node.state, i))
                continue
            new.append(TegNode(_propagate(node.state, settings), i))
            r_pre = astro.periapsis_radius(node.state, settings.mu)
            for combo in enumerate_feasible_combos(node.state, layer, settings.laser,
                                                   settings.k_max, settings.eps):
                dvs = [delta_v_engagement(settings.laser, _slot_position(layer, p, s),
                                          node.state, debris.mu_d) for p, s in combo]
                post = apply_cooperative_engagement(node.state, dvs)
                if not astro.periapsis_radius(post, settings.mu) < r_pre:
                    continue
                rw = transfer_reward(node.state, post, settings.r_deorbit, settings.active, t,
                                     settings.alpha, settings.step, settings.mu)
                nxt = StateVector.sentinel() if rw.deorbits else _propagate(post, settings)
                new.append(TegNode(nxt, i, rw.total, combo, rw.gamma, rw.penalty))
        if total + len(new) > settings.node_cap:
            if settings.on_overflow == "raise":
                raise TegOverflowError(
                    f"debris {debris.id}: node cap {settings.node_cap} exceeded at step {t + 1}")
            new = _truncate(new, settings.node_cap - total)
            log.warning("debris %s TEG truncated at step %d", debris.id, t + 1)
            truncated = True
        total += len(new)
        tree.append(new)
    return DebrisTeg(debris.id, start, tree, debris.mu_d, truncated)


def _slot_position(layer: SlotLayer, p: int, s: int) -> np.ndarray:
    ids, pos = layer[p]
    idx = list(ids).index(s)
    return pos[idx]


def _truncate(nodes: list[TegNode], room: int) -> list[TegNode]:
    """Keep every continuation and the best-rewarded engagement children."""
    keep = {i for i, n in enumerate(nodes) if not n.combo}
    extra = [i for i, n in enumerate(nodes) if n.combo]
    extra.sort(key=lambda i: (-nodes[i].reward, i))
    keep.update(extra[:max(0, room - len(keep))])
    return [nodes[i] for i in sorted(keep)]
