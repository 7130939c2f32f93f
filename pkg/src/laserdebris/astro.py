"""Two-body orbital mechanics.

Propagation (universal variables), element conversions, periapsis radius,
single-revolution Lambert transfers and the maximum plane-change angles used
to lay out plane-change slot grids.

Units are km, km/s, seconds and degrees unless a name says otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

MU_EARTH = 398600.4418  # km^3/s^2
R_EARTH = 6378.137  # km
GRAZING_ALTITUDE = 100.0  # km, default line-of-sight margin

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50
LAMBERT_ITER = 120


class DegenerateOrbitError(ValueError):
    """Raised for states with (numerically) zero angular momentum."""


@dataclass(frozen=True)
class EarthConstants:
    mu: float = MU_EARTH
    r_earth: float = R_EARTH
    grazing_altitude: float = GRAZING_ALTITUDE

    def __post_init__(self):
        for name in ("mu", "r_earth", "grazing_altitude"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def horizon_radius(self) -> float:
        return self.r_earth + self.grazing_altitude


EARTH = EarthConstants()


@dataclass(frozen=True, eq=False)
class StateVector:
    """ECI position (km) and velocity (km/s).

    The all-zero state is reserved for deorbited objects; use
    ``StateVector.sentinel()`` and ``is_sentinel``.
    """

    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        r = np.array(self.r, dtype=float).reshape(3)
        v = np.array(self.v, dtype=float).reshape(3)
        r.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    @classmethod
    def sentinel(cls) -> StateVector:
        return cls(np.zeros(3), np.zeros(3))

    @property
    def is_sentinel(self) -> bool:
        return not (self.r.any() or self.v.any())

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return bool(np.array_equal(self.r, other.r) and np.array_equal(self.v, other.v))

    def __hash__(self):
        return hash((self.r.tobytes(), self.v.tobytes()))

    def as_list(self) -> list[float]:
        return [*map(float, self.r), *map(float, self.v)]


@dataclass(frozen=True)
class KeplerianElements:
    """Orbital elements with angles in degrees.

    ``argument_of_latitude`` is measured from the ascending node; for
    eccentric orbits it equals ``arg_perigee + true_anomaly``.
    """

    semi_major_axis: float
    eccentricity: float = 0.0
    inclination: float = 0.0
    raan: float = 0.0
    argument_of_latitude: float = 0.0
    arg_perigee: float = field(default=0.0)

    def __post_init__(self):
        if not self.semi_major_axis > 0:
            raise ValueError("semi_major_axis must be positive")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError("eccentricity must lie in [0, 1)")
        if not 0.0 <= self.inclination <= 180.0:
            raise ValueError("inclination must lie in [0, 180] deg")

    def replace(self, **changes) -> KeplerianElements:
        values = {
            "semi_major_axis": self.semi_major_axis,
            "eccentricity": self.eccentricity,
            "inclination": self.inclination,
            "raan": self.raan,
            "argument_of_latitude": self.argument_of_latitude,
            "arg_perigee": self.arg_perigee,
        }
        values.update(changes)
        values["raan"] %= 360.0
        values["argument_of_latitude"] %= 360.0
        return KeplerianElements(**values)


# ---------------------------------------------------------------------------
# Stumpff functions

def _c2(psi):
    psi = np.asarray(psi, dtype=float)
    out = np.empty_like(psi)
    pos = psi > 1e-6
    neg = psi < -1e-6
    small = ~(pos | neg)
    sp = np.sqrt(psi[pos])
    out[pos] = (1.0 - np.cos(sp)) / psi[pos]
    sn = np.sqrt(-psi[neg])
    out[neg] = (np.cosh(sn) - 1.0) / -psi[neg]
    ps = psi[small]
    out[small] = 0.5 - ps / 24.0 + ps**2 / 720.0 - ps**3 / 40320.0
    return out


def _c3(psi):
    psi = np.asarray(psi, dtype=float)
    out = np.empty_like(psi)
    pos = psi > 1e-6
    neg = psi < -1e-6
    small = ~(pos | neg)
    sp = np.sqrt(psi[pos])
    out[pos] = (sp - np.sin(sp)) / (sp * psi[pos])
    sn = np.sqrt(-psi[neg])
    out[neg] = (np.sinh(sn) - sn) / (sn * -psi[neg])
    ps = psi[small]
    out[small] = 1.0 / 6.0 - ps / 120.0 + ps**2 / 5040.0 - ps**3 / 362880.0
    return out


def _stumpff(psi: float) -> tuple[float, float]:
    arr = np.array([psi])
    return float(_c2(arr)[0]), float(_c3(arr)[0])


# ---------------------------------------------------------------------------
# Element conversions

def elements_to_state(el: KeplerianElements, mu: float = MU_EARTH) -> StateVector:
    a, e = el.semi_major_axis, el.eccentricity
    inc = math.radians(el.inclination)
    raan = math.radians(el.raan)
    argp = math.radians(el.arg_perigee)
    nu = math.radians(el.argument_of_latitude) - argp
    p = a * (1.0 - e * e)
    r = p / (1.0 + e * math.cos(nu))
    pos_pf = np.array([r * math.cos(nu), r * math.sin(nu), 0.0])
    k = math.sqrt(mu / p)
    vel_pf = np.array([-k * math.sin(nu), k * (e + math.cos(nu)), 0.0])
    rot = _perifocal_to_eci(raan, inc, argp)
    return StateVector(rot @ pos_pf, rot @ vel_pf)


def _perifocal_to_eci(raan: float, inc: float, argp: float) -> np.ndarray:
    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array([
        [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
        [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
        [sw * si, cw * si, ci],
    ])


def state_to_elements(state: StateVector, mu: float = MU_EARTH,
                      circular_tol: float = 1e-10) -> KeplerianElements:
    """Inverse of :func:`elements_to_state` for bound orbits.

    Equatorial orbits report RAAN 0 with the argument of latitude measured
    from the x axis; circular orbits report argument of perigee 0.
    """
    r, v = state.r, state.v
    rn = np.linalg.norm(r)
    h = np.cross(r, v)
    hn = np.linalg.norm(h)
    if hn < 1e-12 * rn * max(np.linalg.norm(v), 1.0):
        raise DegenerateOrbitError("angular momentum is zero")
    energy = 0.5 * v @ v - mu / rn
    if energy >= 0:
        raise ValueError("orbit is not bound")
    a = -mu / (2.0 * energy)
    e_vec = np.cross(v, h) / mu - r / rn
    e = float(np.linalg.norm(e_vec))
    inc = math.acos(max(-1.0, min(1.0, h[2] / hn)))

    n_vec = np.array([-h[1], h[0], 0.0])
    nn = np.linalg.norm(n_vec)
    equatorial = nn < 1e-12 * hn
    if equatorial:
        node = np.array([1.0, 0.0, 0.0])
        raan = 0.0
    else:
        node = n_vec / nn
        raan = math.atan2(node[1], node[0])
    # in-plane basis: node direction and its 90 deg rotation along motion
    w_hat = h / hn
    q_hat = np.cross(w_hat, node)
    u = math.atan2(r @ q_hat, r @ node)
    if e < circular_tol:
        e = 0.0
        argp = 0.0
    else:
        argp = math.atan2(e_vec @ q_hat, e_vec @ node)
    return KeplerianElements(
        semi_major_axis=a,
        eccentricity=e,
        inclination=math.degrees(inc),
        raan=math.degrees(raan) % 360.0,
        argument_of_latitude=math.degrees(u) % 360.0,
        arg_perigee=math.degrees(argp) % 360.0,
    )


def circular_speed(radius: float, mu: float = MU_EARTH) -> float:
    return math.sqrt(mu / radius)


def circular_state(el: KeplerianElements, dt: float = 0.0, mu: float = MU_EARTH) -> StateVector:
    """State of a circular orbit ``dt`` seconds after its epoch (exact)."""
    n = math.sqrt(mu / el.semi_major_axis**3)
    u = el.argument_of_latitude + math.degrees(n * dt)
    return elements_to_state(el.replace(argument_of_latitude=u % 360.0), mu)


def circular_positions(elements: list[KeplerianElements], dt: float,
                       mu: float = MU_EARTH) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised positions and velocities of circular orbits at ``dt``."""
    a = np.array([e.semi_major_axis for e in elements])
    inc = np.radians([e.inclination for e in elements])
    raan = np.radians([e.raan for e in elements])
    n = np.sqrt(mu / a**3)
    u = np.radians([e.argument_of_latitude for e in elements]) + n * dt
    cO, sO = np.cos(raan), np.sin(raan)
    ci, si = np.cos(inc), np.sin(inc)
    cu, su = np.cos(u), np.sin(u)
    p_hat = np.stack([cO, sO, np.zeros_like(cO)], axis=1)
    q_hat = np.stack([-sO * ci, cO * ci, si], axis=1)
    pos = a[:, None] * (cu[:, None] * p_hat + su[:, None] * q_hat)
    speed = np.sqrt(mu / a)
    vel = speed[:, None] * (-su[:, None] * p_hat + cu[:, None] * q_hat)
    return pos, vel


# ---------------------------------------------------------------------------
# Propagation

def propagate_two_body(state: StateVector, dt: float, mu: float = MU_EARTH) -> StateVector:
    """Keplerian propagation by ``dt`` seconds (universal-variable form)."""
    if state.is_sentinel:
        raise ValueError("cannot propagate the deorbit sentinel")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    r0v, v0v = state.r, state.v
    r0 = float(np.linalg.norm(r0v))
    v0 = float(np.linalg.norm(v0v))
    if np.linalg.norm(np.cross(r0v, v0v)) < 1e-10 * r0 * max(v0, 1e-12):
        raise DegenerateOrbitError("angular momentum is zero")
    sqmu = math.sqrt(mu)
    vr0 = float(r0v @ v0v) / r0
    alpha = 2.0 / r0 - v0 * v0 / mu

    if alpha > 1e-12:
        period = 2.0 * math.pi / math.sqrt(mu * alpha**3)
        dt = math.fmod(dt, period)
        if dt == 0.0:
            return state

    chi = _solve_universal_anomaly(r0, vr0, alpha, dt, mu)
    psi = alpha * chi * chi
    c2, c3 = _stumpff(psi)
    f = 1.0 - chi * chi / r0 * c2
    g = dt - chi**3 * c3 / sqmu
    r_vec = f * r0v + g * v0v
    r = float(np.linalg.norm(r_vec))
    fdot = sqmu / (r * r0) * (psi * c3 - 1.0) * chi
    gdot = 1.0 - chi * chi / r * c2
    v_vec = fdot * r0v + gdot * v0v
    return StateVector(r_vec, v_vec)


def _solve_universal_anomaly(r0, vr0, alpha, dt, mu):
    sqmu = math.sqrt(mu)
    if alpha > 1e-12:
        chi = sqmu * alpha * dt
    elif alpha < -1e-12:
        a = 1.0 / alpha
        sign = 1.0 if dt >= 0 else -1.0
        num = -2.0 * mu * alpha * dt
        den = r0 * vr0 + sign * math.sqrt(-mu * a) * (1.0 - r0 * alpha)
        chi = sign * math.sqrt(-a) * math.log(max(num / den, 1e-300)) if den != 0 else sqmu * dt / r0
    else:
        chi = sqmu * dt / r0
    for _ in range(KEPLER_MAX_ITER):
        psi = alpha * chi * chi
        c2, c3 = _stumpff(psi)
        r = chi * chi * c2 + r0 * vr0 / sqmu * chi * (1.0 - psi * c3) + r0 * (1.0 - psi * c2)
        t_chi = (chi**3 * c3 + r0 * vr0 / sqmu * chi * chi * c2 + r0 * chi * (1.0 - psi * c3)) / sqmu
        step = (dt - t_chi) * sqmu / r
        chi += step
        if abs(step) <= KEPLER_TOL * max(1.0, abs(chi)):
            return chi
    raise RuntimeError("universal anomaly iteration did not converge")


# ---------------------------------------------------------------------------
# Periapsis

class Periapsis(NamedTuple):
    radius: float
    eccentricity: float
    hyperbolic: bool


def periapsis(state: StateVector, mu: float = MU_EARTH) -> Periapsis:
    """Periapsis radius |r x v|^2 / (mu (1 + e)) with the eccentricity used."""
    if state.is_sentinel:
        raise ValueError("the deorbit sentinel has no periapsis")
    r, v = state.r, state.v
    h = np.cross(r, v)
    h2 = float(h @ h)
    e_vec = np.cross(v, h) / mu - r / np.linalg.norm(r)
    e = float(np.linalg.norm(e_vec))
    return Periapsis(h2 / (mu * (1.0 + e)), e, e >= 1.0)


def periapsis_radius(state: StateVector, mu: float = MU_EARTH) -> float:
    return periapsis(state, mu).radius


def specific_energy(state: StateVector, mu: float = MU_EARTH) -> float:
    return float(0.5 * state.v @ state.v - mu / np.linalg.norm(state.r))


# ---------------------------------------------------------------------------
# Lambert problem

def lambert_batch(r1: np.ndarray, r2: np.ndarray, tof: float, prograde_axis: np.ndarray,
                  mu: float = MU_EARTH) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-revolution Lambert solutions for stacks of endpoint pairs.

    ``prograde_axis`` gives, per pair, the angular-momentum direction the
    transfer must follow (normally the departure orbit's ``r x v``).
    Returns departure velocities, arrival velocities and a success mask.
    Bisection on the universal variable psi (Vallado's formulation).
    """
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))
    r2 = np.atleast_2d(np.asarray(r2, dtype=float))
    axis = np.atleast_2d(np.asarray(prograde_axis, dtype=float))
    n = max(len(r1), len(r2))
    r1 = np.broadcast_to(r1, (n, 3))
    r2 = np.broadcast_to(r2, (n, 3))
    axis = np.broadcast_to(axis, (n, 3))
    m1 = np.linalg.norm(r1, axis=1)
    m2 = np.linalg.norm(r2, axis=1)
    cos_dnu = np.clip(np.einsum("ij,ij->i", r1, r2) / (m1 * m2), -1.0, 1.0)
    short_way = np.einsum("ij,ij->i", np.cross(r1, r2), axis) >= 0.0
    tm = np.where(short_way, 1.0, -1.0)
    A = tm * np.sqrt(m1 * m2 * (1.0 + cos_dnu))
    ok = np.abs(A) > 1e-9 * np.sqrt(m1 * m2)

    sqmu = math.sqrt(mu)
    low = np.full(n, -4.0 * math.pi)
    up = np.full(n, 4.0 * math.pi**2)
    for _ in range(LAMBERT_ITER):
        psi = 0.5 * (low + up)
        c2, c3 = _c2(psi), _c3(psi)
        y = m1 + m2 + A * (psi * c3 - 1.0) / np.sqrt(c2)
        ypos = y > 0
        chi = np.sqrt(np.where(ypos, y, 0.0) / c2)
        t = (chi**3 * c3 + A * np.sqrt(np.where(ypos, y, 0.0))) / sqmu
        raise_low = (~ypos) | (t <= tof)
        low = np.where(raise_low, psi, low)
        up = np.where(raise_low, up, psi)
    psi = 0.5 * (low + up)
    c2, c3 = _c2(psi), _c3(psi)
    y = m1 + m2 + A * (psi * c3 - 1.0) / np.sqrt(c2)
    ok &= y > 0
    y = np.where(ok, y, 1.0)
    chi = np.sqrt(y / c2)
    t = (chi**3 * c3 + A * np.sqrt(y)) / sqmu
    ok &= np.abs(t - tof) <= 1e-6 * tof
    ok &= up - low < 1e-6
    A_safe = np.where(ok, A, 1.0)
    f = 1.0 - y / m1
    g = A_safe * np.sqrt(y / mu)
    gdot = 1.0 - y / m2
    v1 = (r2 - f[:, None] * r1) / g[:, None]
    v2 = (gdot[:, None] * r2 - r1) / g[:, None]
    v1[~ok] = np.nan
    v2[~ok] = np.nan
    return v1, v2, ok


def lambert(r1, r2, tof: float, prograde_axis=(0.0, 0.0, 1.0), mu: float = MU_EARTH):
    v1, v2, ok = lambert_batch(np.asarray(r1)[None], np.asarray(r2)[None], tof,
                               np.asarray(prograde_axis, dtype=float)[None], mu)
    if not ok[0]:
        raise RuntimeError("Lambert solver did not converge")
    return v1[0], v2[0]


def transfer_cost_batch(r_from, v_from, r_to, v_to, tof: float, mu: float = MU_EARTH) -> np.ndarray:
    """Two-impulse Lambert cost per pair; ``inf`` where the solver fails."""
    r_from = np.atleast_2d(r_from)
    v_from = np.atleast_2d(v_from)
    axis = np.cross(r_from, v_from)
    v1, v2, ok = lambert_batch(r_from, r_to, tof, axis, mu)
    cost = (np.linalg.norm(v1 - v_from, axis=1)
            + np.linalg.norm(np.atleast_2d(v_to) - v2, axis=1))
    return np.where(ok, cost, np.inf)


def transfer_cost(slot_from: StateVector, slot_to: StateVector, tof: float,
                  mu: float = MU_EARTH) -> float:
    """Impulsive cost (km/s) to move between two slots in ``tof`` seconds.

    Identical states cost exactly zero; solver failure gives ``inf``.
    """
    if slot_from.is_sentinel or slot_to.is_sentinel:
        raise ValueError("sentinel states have no transfer cost")
    if not tof > 0:
        raise ValueError("tof must be positive")
    if slot_from == slot_to:
        return 0.0
    cost = transfer_cost_batch(slot_from.r[None], slot_from.v[None],
                               slot_to.r[None], slot_to.v[None], tof, mu)
    return float(cost[0])


# ---------------------------------------------------------------------------
# Maximum plane-change angles

class AngleLimit(NamedTuple):
    degrees: float
    clamped: bool


def max_inclination_change(dv_budget: float, orbit_radius: float, beta: float = 0.8,
                           mu: float = MU_EARTH) -> AngleLimit:
    """Largest inclination change 2*beta*asin(dv / (2 v_circ)) in degrees."""
    if dv_budget < 0:
        raise ValueError("dv_budget must be non-negative")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    arg = dv_budget / (2.0 * circular_speed(orbit_radius, mu))
    if arg > 1.0:
        return AngleLimit(180.0 * beta, True)
    return AngleLimit(math.degrees(2.0 * beta * math.asin(arg)), False)


def max_raan_change(delta: float, inclination: float, beta: float = 0.8,
                    form: str = "verbatim") -> AngleLimit:
    """Largest RAAN change for a plane rotation of ``delta`` radians.

    ``form="verbatim"`` evaluates beta*acos((delta - cos^2 i) / sin^2 i) with
    ``delta`` in radians as printed.  ``form="cosine"`` uses the spherical
    triangle relation cos(delta) = cos^2 i + sin^2 i cos(dRAAN), i.e.
    beta*acos((cos(delta) - cos^2 i) / sin^2 i).
    """
    s2 = math.sin(math.radians(inclination)) ** 2
    if s2 < 1e-15:
        raise ValueError("RAAN change undefined for equatorial orbits")
    c2 = math.cos(math.radians(inclination)) ** 2
    if form == "verbatim":
        arg = (delta - c2) / s2
    elif form == "cosine":
        arg = (math.cos(delta) - c2) / s2
    else:
        raise ValueError(f"unknown form {form!r}")
    clamped = arg > 1.0 or arg < -1.0
    arg = max(-1.0, min(1.0, arg))
    return AngleLimit(math.degrees(beta * math.acos(arg)), clamped)
