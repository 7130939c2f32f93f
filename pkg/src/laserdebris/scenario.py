"""Scenario files, debris populations and breakup fragments.

Scenarios are TOML.  Every table maps onto a dataclass below and unknown
keys are rejected.  Randomness comes from one integer seed split into named
substreams, so the population drawn for a seed does not depend on which
CONOPS or window length is being run.
"""
from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from . import astro
from .astro import EarthConstants, KeplerianElements
from .pla import LaserSystem
from .rhs import Mission, RhsConfig
from .teg import (ActiveSpacecraft, DebrisBody, PlatformSlotGrid, TegSettings,
                  build_altitude_change_grid, build_plane_change_grid)

CONOPS_KINDS = ("baseline", "plane_change", "altitude_change")
STREAMS = {"population": 1, "breakup": 2}

# Illustrative LEO altitude shares (km bins).  Not survey data: edit or
# replace with a real catalogue-derived histogram.
DEFAULT_ALTITUDE_EDGES = [400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0, 1100.0, 1200.0]
DEFAULT_ALTITUDE_FREQUENCIES = [0.10, 0.14, 0.13, 0.15, 0.19, 0.14, 0.09, 0.06]


class ConfigError(ValueError):
    pass


def _positive(obj, *names):
    for name in names:
        if not getattr(obj, name) > 0:
            raise ConfigError(f"{name} must be strictly positive")


@dataclass
class TimeConfig:
    steps: int
    step_seconds: float = 180.0
    epoch: str = "2025-08-01T12:00:00Z"

    def __post_init__(self):
        if self.steps < 3:
            raise ConfigError("steps must be at least 3")
        _positive(self, "step_seconds")
        try:
            datetime.fromisoformat(self.epoch.replace("Z", "+00:00"))
        except ValueError:
            raise ConfigError(f"epoch {self.epoch!r} is not an ISO-8601 timestamp") from None


@dataclass
class SchedulerConfig:
    window_length: int = 3
    solver: str = "bnb"
    strict_engagement: bool = True
    time_limit: float | None = None
    node_limit: int | None = None
    # among equally good window schedules, prefer the one spending least Δv
    min_dv_tiebreak: bool = False

    def __post_init__(self):
        if self.window_length < 2:
            raise ConfigError("window_length must be at least 2")
        if self.solver not in ("bnb", "highs"):
            raise ConfigError("solver must be 'bnb' or 'highs'")


@dataclass
class PhysicsConfig:
    r_deorbit: float = astro.R_EARTH + 200.0
    grazing_altitude: float = astro.GRAZING_ALTITUDE
    alpha: float = 1e6
    k_max: int = 3
    beta: float = 0.8
    node_cap: int = 50_000
    mu_earth: float = astro.MU_EARTH
    r_earth: float = astro.R_EARTH

    def __post_init__(self):
        _positive(self, "r_deorbit", "grazing_altitude", "alpha", "k_max", "node_cap",
                  "mu_earth", "r_earth")
        if not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1]")

    @property
    def earth(self) -> EarthConstants:
        return EarthConstants(self.mu_earth, self.r_earth, self.grazing_altitude)


@dataclass
class ConopsConfig:
    kind: str = "baseline"
    dv_budget: float = 2.0
    n_phases: int = 36
    n_planes: int = 5
    n_layers: int = 7
    layer_step: float = 50.0
    layer_direction: str = "both"

    def __post_init__(self):
        if self.kind not in CONOPS_KINDS:
            raise ConfigError(f"kind must be one of {CONOPS_KINDS}, got {self.kind!r}")
        if self.dv_budget < 0:
            raise ConfigError("dv_budget must be non-negative")
        _positive(self, "n_phases", "n_planes", "n_layers", "layer_step")
        if self.layer_direction not in ("both", "up"):
            raise ConfigError("layer_direction must be 'both' or 'up'")
        if self.kind == "plane_change" and self.n_planes % 2 == 0:
            raise ConfigError("n_planes must be odd")
        if self.kind == "altitude_change" and self.layer_direction == "both" \
                and self.n_layers % 2 == 0:
            raise ConfigError("n_layers must be odd when layer_direction is 'both'")


@dataclass
class OrbitConfig:
    """Circular orbit; angles in degrees."""

    semi_major_axis: float
    inclination: float = 0.0
    raan: float = 0.0
    argument_of_latitude: float = 0.0

    def __post_init__(self):
        _positive(self, "semi_major_axis")
        if not 0 <= self.inclination <= 180:
            raise ConfigError("inclination must lie in [0, 180]")

    def elements(self) -> KeplerianElements:
        return KeplerianElements(self.semi_major_axis, 0.0, self.inclination,
                                 self.raan % 360.0, self.argument_of_latitude % 360.0)


@dataclass
class DebrisObject(OrbitConfig):
    surface_density: float = 0.2
    start_step: int = 0

    def __post_init__(self):
        super().__post_init__()
        _positive(self, "surface_density")
        if self.start_step < 0:
            raise ConfigError("start_step must be non-negative")


@dataclass
class ActiveConfig(OrbitConfig):
    semi_axes: list[float] = field(default_factory=lambda: [2.0, 25.0, 25.0])

    def __post_init__(self):
        super().__post_init__()
        if len(self.semi_axes) != 3 or min(self.semi_axes) <= 0:
            raise ConfigError("semi_axes must be three positive lengths (km)")


@dataclass
class DebrisPopulationSpec:
    """Circular debris with altitudes from a histogram (km above R_earth).

    ``altitude_edges`` has one more entry than ``frequencies``; a zero-width
    bin yields that exact altitude.
    """

    count: int
    altitude_edges: list[float] = field(default_factory=lambda: list(DEFAULT_ALTITUDE_EDGES))
    frequencies: list[float] = field(default_factory=lambda: list(DEFAULT_ALTITUDE_FREQUENCIES))
    inclination_range: list[float] = field(default_factory=lambda: [0.0, 180.0])
    inclination_count: int = 181
    raan_count: int = 360
    arg_lat_count: int = 360
    surface_density: float = 0.2

    def __post_init__(self):
        _positive(self, "count", "inclination_count", "raan_count", "arg_lat_count",
                  "surface_density")
        if not self.frequencies:
            raise ConfigError("altitude histogram is empty")
        if len(self.altitude_edges) != len(self.frequencies) + 1:
            raise ConfigError("altitude_edges needs exactly one more entry than frequencies")
        if any(b < a for a, b in zip(self.altitude_edges, self.altitude_edges[1:])):
            raise ConfigError("altitude_edges must be nondecreasing")
        if min(self.frequencies) < 0 or abs(math.fsum(self.frequencies) - 1.0) > 1e-9:
            raise ConfigError("frequencies must be non-negative and sum to 1")
        lo, hi = (self.inclination_range + [None, None])[:2]
        if len(self.inclination_range) != 2 or not 0 <= lo <= hi <= 180:
            raise ConfigError("inclination_range must be [lo, hi] within [0, 180]")


@dataclass
class BreakupEvent:
    """A parent object that fragments ``trigger_time`` seconds after epoch."""

    parent: OrbitConfig
    trigger_time: float
    fragments: int
    max_sma_deviation: float = 10.0
    max_angle_deviation: float = 4.0
    surface_density: float = 0.2
    include_parent: bool = True

    def __post_init__(self):
        if self.trigger_time < 0:
            raise ConfigError("trigger_time must be non-negative")
        _positive(self, "fragments", "surface_density")
        if self.max_sma_deviation < 0 or self.max_angle_deviation < 0:
            raise ConfigError("deviations must be non-negative")


@dataclass
class DebrisConfig:
    population: DebrisPopulationSpec | None = None
    breakup: BreakupEvent | None = None
    objects: list[DebrisObject] = field(default_factory=list)


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    time: TimeConfig
    platforms: list[OrbitConfig]
    debris: DebrisConfig = field(default_factory=DebrisConfig)
    conops: ConopsConfig = field(default_factory=ConopsConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    laser: LaserSystem = field(default_factory=LaserSystem)
    active: list[ActiveConfig] = field(default_factory=list)

    def __post_init__(self):
        if not self.platforms:
            raise ConfigError("at least one platform is required")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        horizon = self.physics.r_earth + self.physics.grazing_altitude
        for k, p in enumerate(self.platforms):
            if p.semi_major_axis <= horizon:
                raise ConfigError(f"platforms[{k}].semi_major_axis is below R_earth + grazing altitude")
        pop = self.debris.population
        if pop is not None and self.physics.r_earth + pop.altitude_edges[0] <= horizon:
            raise ConfigError("debris.population.altitude_edges start below R_earth + grazing altitude")
        for k, d in enumerate(self.debris.objects):
            if d.semi_major_axis <= horizon:
                raise ConfigError(f"debris.objects[{k}].semi_major_axis is below R_earth + grazing altitude")
            if d.start_step >= self.time.steps:
                raise ConfigError(f"debris.objects[{k}].start_step lies beyond the horizon")
        ev = self.debris.breakup
        if ev is not None:
            if ev.trigger_time > (self.time.steps - 1) * self.time.step_seconds:
                raise ConfigError("debris.breakup.trigger_time lies beyond the horizon")
            if ev.parent.semi_major_axis - ev.max_sma_deviation <= horizon:
                raise ConfigError("debris.breakup fragments could fall below R_earth + grazing altitude")
        if self.scheduler.window_length > self.time.steps - 1:
            raise ConfigError("scheduler.window_length must not exceed time.steps - 1")

    @property
    def horizon_seconds(self) -> float:
        return (self.time.steps - 1) * self.time.step_seconds


# ---------------------------------------------------------------------------
# Strict loading / canonical dumping

def _unwrap_optional(tp):
    args = typing.get_args(tp)
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType) and type(None) in args:
        rest = [a for a in args if a is not type(None)]
        return rest[0], True
    return tp, False


def _convert(tp, value, path: str):
    tp, optional = _unwrap_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{path}: value required")
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a table")
        return _build(tp, value, path)
    origin = typing.get_origin(tp)
    if origin is list:
        (item,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected an array")
        return [_convert(item, v, f"{path}[{k}]") for k, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported type {tp}")


def _build(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown field {where}{unknown[0]}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _convert(hints[name], value, f"{path}.{name}" if path else name)
    missing = [n for n, f in fields.items() if n not in kwargs
               and f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    if missing:
        where = f"{path}." if path else ""
        raise ConfigError(f"missing field {where}{missing[0]}")
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}" if path else str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from None


def scenario_from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data)


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario file, filling defaults."""
    path = Path(path)
    try:
        data = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(data)


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_strip_none(v) for v in obj]
    return obj


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    return _strip_none(dataclasses.asdict(cfg))


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Canonical TOML with every default spelled out."""
    return tomli_w.dumps(scenario_to_dict(cfg))


def with_overrides(cfg: ScenarioConfig, seed: int | None = None, window_length: int | None = None,
                   budget: float | None = None, conops: str | None = None) -> ScenarioConfig:
    """Copy of ``cfg`` with CLI-style overrides applied (revalidated)."""
    data = scenario_to_dict(cfg)
    if seed is not None:
        data["seed"] = seed
    if window_length is not None:
        data["scheduler"]["window_length"] = window_length
    if budget is not None:
        data["conops"]["dv_budget"] = budget
    if conops is not None:
        data["conops"]["kind"] = conops
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# Sampling

def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)))


def sample_population_elements(spec: DebrisPopulationSpec, rng: np.random.Generator,
                               r_earth: float = astro.R_EARTH) -> list[KeplerianElements]:
    edges = np.asarray(spec.altitude_edges, dtype=float)
    cdf = np.cumsum(spec.frequencies)
    cdf /= cdf[-1]
    n = spec.count
    u_bin = rng.random(n)
    u_in = rng.random(n)
    # inverse CDF: first bin whose cumulative share exceeds the draw
    bins = np.minimum(np.searchsorted(cdf, u_bin, side="right"), len(cdf) - 1)
    alt = edges[bins] + u_in * (edges[bins + 1] - edges[bins])
    lo, hi = spec.inclination_range
    inc_grid = np.linspace(lo, hi, spec.inclination_count)
    inc = inc_grid[rng.integers(0, spec.inclination_count, n)]
    raan = rng.integers(0, spec.raan_count, n) * (360.0 / spec.raan_count)
    arg = rng.integers(0, spec.arg_lat_count, n) * (360.0 / spec.arg_lat_count)
    return [KeplerianElements(float(r_earth + alt[k]), 0.0, float(inc[k]), float(raan[k]),
                              float(arg[k])) for k in range(n)]


def sample_debris_population(spec: DebrisPopulationSpec, seed: int, first_id: int = 0,
                             mu: float = astro.MU_EARTH,
                             r_earth: float = astro.R_EARTH) -> list[DebrisBody]:
    els = sample_population_elements(spec, substream(seed, "population"), r_earth)
    return [DebrisBody(first_id + k, spec.surface_density, astro.elements_to_state(el, mu))
            for k, el in enumerate(els)]


def breakup_parent_at_trigger(event: BreakupEvent, mu: float = astro.MU_EARTH) -> KeplerianElements:
    el = event.parent.elements()
    n_deg = math.degrees(math.sqrt(mu / el.semi_major_axis ** 3))
    return el.replace(argument_of_latitude=el.argument_of_latitude + n_deg * event.trigger_time)


def breakup_fragment_elements(event: BreakupEvent, rng: np.random.Generator,
                              mu: float = astro.MU_EARTH) -> list[KeplerianElements]:
    """Fragment orbits at the trigger time, perturbed around the parent."""
    base = breakup_parent_at_trigger(event, mu)
    n = event.fragments
    da = rng.uniform(-1.0, 1.0, n) * event.max_sma_deviation
    dang = rng.uniform(-1.0, 1.0, (n, 3)) * event.max_angle_deviation
    out = []
    for k in range(n):
        inc = min(180.0, max(0.0, base.inclination + dang[k, 0]))
        out.append(base.replace(semi_major_axis=base.semi_major_axis + da[k],
                                inclination=inc,
                                raan=base.raan + dang[k, 1],
                                argument_of_latitude=base.argument_of_latitude + dang[k, 2]))
    return out


def breakup_start_step(event: BreakupEvent, step_seconds: float) -> int:
    return math.ceil(event.trigger_time / step_seconds - 1e-9)


def generate_breakup(event: BreakupEvent, seed: int, step_seconds: float, first_id: int = 0,
                     mu: float = astro.MU_EARTH) -> list[DebrisBody]:
    """Parent (until the breakup step) followed by its fragments.

    Fragments join at the first step at or after the trigger time.  The
    fragment set does not depend on what happens to the parent beforehand.
    """
    start = breakup_start_step(event, step_seconds)
    lag = start * step_seconds - event.trigger_time
    bodies = []
    next_id = first_id
    if event.include_parent and start > 0:
        state = astro.elements_to_state(event.parent.elements(), mu)
        bodies.append(DebrisBody(next_id, event.surface_density, state, start=0, stop=start))
        next_id += 1
    for el in breakup_fragment_elements(event, substream(seed, "breakup"), mu):
        state = astro.circular_state(el, lag, mu)
        bodies.append(DebrisBody(next_id, event.surface_density, state, start=start))
        next_id += 1
    return bodies


# ---------------------------------------------------------------------------
# Mission assembly

def build_debris(cfg: ScenarioConfig) -> list[DebrisBody]:
    mu, step = cfg.physics.mu_earth, cfg.time.step_seconds
    bodies: list[DebrisBody] = []
    if cfg.debris.population is not None:
        bodies += sample_debris_population(cfg.debris.population, cfg.seed, 0, mu,
                                           cfg.physics.r_earth)
    for obj in cfg.debris.objects:
        state = astro.circular_state(obj.elements(), obj.start_step * step, mu)
        bodies.append(DebrisBody(len(bodies), obj.surface_density, state, start=obj.start_step))
    if cfg.debris.breakup is not None:
        bodies += generate_breakup(cfg.debris.breakup, cfg.seed, step, len(bodies), mu)
    return bodies


def build_grid(cfg: ScenarioConfig) -> PlatformSlotGrid:
    c, phys = cfg.conops, cfg.physics
    initial = [p.elements() for p in cfg.platforms]
    step = cfg.time.step_seconds
    if c.kind == "baseline":
        return PlatformSlotGrid.static(initial, step, phys.mu_earth)
    if c.kind == "plane_change":
        orbits = [build_plane_change_grid(el, c.dv_budget, phys.beta, c.n_phases, c.n_planes,
                                          phys.mu_earth) for el in initial]
    else:
        orbits = [build_altitude_change_grid(el, c.n_phases, c.n_layers, c.layer_step,
                                             c.layer_direction, phys.earth) for el in initial]
    return PlatformSlotGrid(orbits, step, phys.mu_earth)


def rhs_config(cfg: ScenarioConfig) -> RhsConfig:
    s = cfg.scheduler
    return RhsConfig(s.window_length, s.time_limit, s.node_limit, s.solver, s.min_dv_tiebreak)


def build_mission(cfg: ScenarioConfig) -> Mission:
    phys = cfg.physics
    settings = TegSettings(
        laser=cfg.laser, step=cfg.time.step_seconds, r_deorbit=phys.r_deorbit, alpha=phys.alpha,
        k_max=phys.k_max, eps=phys.grazing_altitude, node_cap=phys.node_cap,
        active=tuple(ActiveSpacecraft(k, a.elements(), tuple(a.semi_axes))
                     for k, a in enumerate(cfg.active)),
        mu=phys.mu_earth)
    budgets = [cfg.conops.dv_budget] * len(cfg.platforms)
    return Mission(cfg.time.steps, build_grid(cfg), build_debris(cfg), budgets, settings,
                   cfg.scheduler.strict_engagement)
