"""Pulsed-laser-ablation engagement physics.

Fluence on target, the impulse a platform imparts per time step, the
cooperative (vector-summed) post-engagement state and the line-of-sight and
range feasibility test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .astro import EARTH, StateVector

# c_m is quoted in N/MW; 1 N/MW = 1e-6 N/W = 1e-6 N*s/J
N_PER_MW = 1e-6


class InfeasibleEngagementError(ValueError):
    pass


@dataclass(frozen=True)
class LaserSystem:
    """Laser platform parameters (defaults: L'ADROIT).

    Lengths: ``u_max``/``u_min`` in km, ``mirror_diameter`` and
    ``wavelength`` in m.  ``coupling`` is c_m in N/MW, ``pulse_energy`` in J.
    """

    u_max: float = 325.0
    u_min: float = 175.0
    mirror_diameter: float = 1.5
    beam_quality: float = 2.0
    diffraction_constant: float = 1.27
    wavelength: float = 355e-9
    coupling: float = 100.0
    pulse_energy: float = 380.0
    eta1: float = 0.5
    eta2: float = 0.5
    pulses_per_step: int = 560

    def __post_init__(self):
        positive = ("u_max", "u_min", "mirror_diameter", "beam_quality",
                    "diffraction_constant", "wavelength", "coupling",
                    "pulse_energy", "pulses_per_step")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"laser.{name} must be strictly positive")
        if not self.u_min < self.u_max:
            raise ValueError("laser.u_min must be smaller than laser.u_max")
        for name in ("eta1", "eta2"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"laser.{name} must lie in (0, 1]")


def fluence(laser: LaserSystem, range_u: float) -> float:
    """Fluence on target in J/m^2 at range ``range_u`` km."""
    if not range_u > 0:
        raise ValueError("range must be positive")
    u_m = range_u * 1e3
    spot = 2.0 * laser.mirror_diameter / (
        laser.beam_quality * laser.diffraction_constant * laser.wavelength * u_m)
    return laser.eta2 * laser.pulse_energy / math.pi * spot * spot


def delta_v_magnitude(laser: LaserSystem, range_u: float, mu_d: float) -> float:
    """Per-step impulse magnitude in km/s delivered at range ``range_u``."""
    if not mu_d > 0:
        raise ValueError("surface mass density must be positive")
    c_m = laser.coupling * N_PER_MW  # N*s/J
    dv_ms = laser.pulses_per_step * laser.eta1 * c_m * fluence(laser, range_u) / mu_d
    return dv_ms * 1e-3


def delta_v_engagement(laser: LaserSystem, platform_pos, debris_state: StateVector,
                       mu_d: float) -> np.ndarray:
    """Impulse vector (km/s) along the platform-to-debris line of sight."""
    u_vec = debris_state.r - np.asarray(platform_pos, dtype=float)
    u = float(np.linalg.norm(u_vec))
    if not laser.u_min <= u <= laser.u_max:
        raise InfeasibleEngagementError(
            f"range {u:.3f} km outside [{laser.u_min}, {laser.u_max}]")
    return delta_v_magnitude(laser, u, mu_d) * (u_vec / u)


def apply_cooperative_engagement(debris_state: StateVector,
                                 dvs: Iterable[np.ndarray]) -> StateVector:
    """Instantaneous impulses: position kept, velocity plus summed dvs."""
    if debris_state.is_sentinel:
        raise ValueError("cannot engage a deorbited object")
    dvs = [np.asarray(dv, dtype=float) for dv in dvs]
    if not dvs:
        raise ValueError("at least one impulse is required")
    total = np.zeros(3)
    for dv in dvs:
        total = total + dv
    return StateVector(debris_state.r, debris_state.v + total)


def engagement_feasible(platform_pos, debris_pos, laser: LaserSystem,
                        eps: float = EARTH.grazing_altitude,
                        r_earth: float = EARTH.r_earth) -> bool:
    """Line of sight above the grazing radius and range within limits."""
    p = np.asarray(platform_pos, dtype=float)
    d = np.asarray(debris_pos, dtype=float)
    horizon = r_earth + eps
    rp = float(np.linalg.norm(p))
    rd = float(np.linalg.norm(d))
    if rp <= horizon or rd <= horizon:
        return False
    u = float(np.linalg.norm(d - p))
    visible = math.sqrt(rp * rp - horizon * horizon) + math.sqrt(rd * rd - horizon * horizon) - u >= 0
    return visible and laser.u_min <= u <= laser.u_max


def feasible_mask(platform_pos: np.ndarray, debris_pos, laser: LaserSystem,
                  eps: float = EARTH.grazing_altitude,
                  r_earth: float = EARTH.r_earth) -> np.ndarray:
    """Vectorised :func:`engagement_feasible` over rows of ``platform_pos``."""
    p = np.atleast_2d(np.asarray(platform_pos, dtype=float))
    d = np.asarray(debris_pos, dtype=float)
    horizon = r_earth + eps
    rp = np.linalg.norm(p, axis=1)
    rd = float(np.linalg.norm(d))
    if rd <= horizon:
        return np.zeros(len(p), dtype=bool)
    u = np.linalg.norm(p - d, axis=1)
    above = rp > horizon
    leg_p = np.sqrt(np.where(above, rp * rp - horizon * horizon, 0.0))
    visible = leg_p + math.sqrt(rd * rd - horizon * horizon) - u >= 0
    return above & visible & (u >= laser.u_min) & (u <= laser.u_max)
