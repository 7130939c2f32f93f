import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laserdebris import astro
from laserdebris.astro import KeplerianElements, StateVector
from laserdebris.pla import LaserSystem
from laserdebris.teg import (DEORBIT_REWARD, ActiveSpacecraft, DebrisBody, GridError,
                             PlatformSlotGrid, TegOverflowError, TegSettings,
                             build_altitude_change_grid, build_plane_change_grid,
                             combos_from_pairs, enumerate_feasible_combos, generate_debris_teg,
                             inside_rtn_ellipsoid, transfer_reward)

from oracles import tree_by_rules, circular_rv, kepler_propagate, random_teg_instance, teg_paths

P1 = KeplerianElements(7104.8, 0.0, 38.66, 0.0, 192.0)
LASER = LaserSystem()


# --- slot grids ----------------------------------------------------------------

def test_plane_grid_size():
    assert len(build_plane_change_grid(P1, 2.0, 0.8, 36, 5)) == 180


def test_plane_grid_zero_budget_is_phasing_only():
    slots = build_plane_change_grid(P1, 0.0, 0.8, 36, 5)
    assert {(s.inclination, s.raan) for s in slots} == {(P1.inclination, P1.raan)}


def test_plane_grid_offsets_reach_validation_final_planes():
    # final planes reached in the validation case: p3 -6.14 deg inclination,
    # p5 +6.20 deg inclination, p6 -17.29 deg RAAN
    p3 = KeplerianElements(7104.8, 0.0, 53.33, 0.0, 192.0)
    p5 = KeplerianElements(7244.8, 0.0, 42.33, 192.0, 0.0)
    p6 = KeplerianElements(7244.8, 0.0, 46.0, 192.0, 0.0)

    def planes(el):
        return {(round(s.inclination, 6), round(s.raan, 6))
                for s in build_plane_change_grid(el, 2.0, 0.8, 36, 5)}

    assert any(abs(i - 47.19) < 0.05 and r == 0.0 for i, r in planes(p3))
    assert any(abs(i - 48.53) < 0.05 and r == 192.0 for i, r in planes(p5))
    assert any(i == 46.0 and abs(r - 174.71) < 0.05 for i, r in planes(p6))


def test_plane_grid_rejects_even_planes_and_excess_budget():
    with pytest.raises(GridError):
        build_plane_change_grid(P1, 2.0, 0.8, 36, 4)
    with pytest.raises(GridError):
        build_plane_change_grid(P1, 20.0, 0.8, 36, 5)
    with pytest.raises(GridError, match="inclination"):
        build_plane_change_grid(P1.replace(inclination=0.0), 2.0, 0.8, 36, 5)


def test_altitude_grid_layers():
    slots = build_altitude_change_grid(P1, 36, 7, 50.0)
    assert len(slots) == 252
    assert {round(s.semi_major_axis - P1.semi_major_axis, 9) for s in slots} == {
        -150.0, -100.0, -50.0, 0.0, 50.0, 100.0, 150.0}
    assert len(build_altitude_change_grid(P1, 36, 1, 50.0)) == 36
    up = build_altitude_change_grid(KeplerianElements(6750.0), 31, 13, 90.0, "up")
    assert len(up) == 403
    assert max(s.semi_major_axis for s in up) == pytest.approx(6750.0 + 12 * 90.0)


def test_altitude_grid_rejects_low_layers():
    with pytest.raises(GridError, match="below"):
        build_altitude_change_grid(KeplerianElements(6600.0), 4, 7, 50.0)
    with pytest.raises(GridError):
        build_altitude_change_grid(P1, 4, 6, 50.0)


def test_slot_zero_follows_initial_orbit():
    grid = PlatformSlotGrid([build_plane_change_grid(P1, 2.0, 0.8, 6, 5)], 180.0)
    start = astro.elements_to_state(P1)
    for t in range(4):
        natural = astro.propagate_two_body(start, t * 180.0)
        assert np.allclose(grid.state(0, 0, t).r, natural.r, atol=1e-6)
        assert grid.n_slots(0, t) == (1 if t == 0 else 30)


def test_stay_edges_are_free_and_every_slot_reachable():
    grid = PlatformSlotGrid([build_altitude_change_grid(P1, 4, 3, 50.0)], 180.0)
    for t in range(3):
        for s in grid.slot_ids(0, t):
            row = grid.cost_row(0, t, s)
            if t > 0:
                assert row[s] == 0.0
        reach = np.min([grid.cost_row(0, t, s) for s in grid.slot_ids(0, t)], axis=0)
        if t > 0:
            assert np.all(np.isfinite(reach))
    # from the single slot at t = 0 a half-orbit phase jump has no one-step arc
    first = grid.cost_row(0, 0, 0)
    assert first[0] == 0.0 and not np.isfinite(first[2])


def test_reachable_respects_budget():
    grid = PlatformSlotGrid([build_altitude_change_grid(P1, 4, 3, 50.0)], 180.0)
    layers = grid.reachable(0, 0, [0], 3, 0.0)
    assert all(list(layer) == [0] for layer in layers)
    wide = grid.reachable(0, 0, [0], 3, 5.0)
    assert all(cost <= 5.0 for layer in wide for cost in layer.values())
    assert len(wide[2]) > 1


# --- engagement combinations --------------------------------------------------------

def _layer(debris_pos, offsets):
    """One slot per (platform, offset vector) pair."""
    layer = {}
    for p, offs in offsets.items():
        layer[p] = (list(range(len(offs))), np.array([debris_pos + o for o in offs]).reshape(-1, 3))
    return layer


def test_no_platform_in_range_gives_no_combo():
    s = StateVector([7000.0, 0, 0], [0, 7.5, 0])
    layer = _layer(s.r, {0: [np.array([0, 1000.0, 0])]})
    assert enumerate_feasible_combos(s, layer, LASER) == []


def test_two_platforms_give_three_combos():
    s = StateVector([7000.0, 0, 0], [0, 7.5, 0])
    layer = _layer(s.r, {0: [np.array([0, 250.0, 0])], 1: [np.array([0, -250.0, 0])]})
    combos = enumerate_feasible_combos(s, layer, LASER, k_max=2)
    assert sorted(combos) == sorted([((0, 0),), ((1, 0),), ((0, 0), (1, 0))])


def test_same_platform_slots_never_combine():
    s = StateVector([7000.0, 0, 0], [0, 7.5, 0])
    layer = _layer(s.r, {0: [np.array([0, 250.0, 0]), np.array([0, 0, 250.0])],
                         1: [np.array([0, -250.0, 0])]})
    combos = enumerate_feasible_combos(s, layer, LASER, k_max=3)
    pairs = [(0, 0), (0, 1), (1, 0)]
    oracle = []
    for mask in range(1, 8):
        pick = tuple(pairs[b] for b in range(3) if mask >> b & 1)
        if len({p for p, _ in pick}) == len(pick):
            oracle.append(pick)
    assert sorted(combos) == sorted(oracle)
    assert len(combos) == 5


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), unique=True, max_size=6),
       st.integers(1, 4))
def test_combos_are_distinct_platform_subsets(pairs, k_max):
    combos = combos_from_pairs(pairs, k_max)
    assert len(set(combos)) == len(combos)
    for c in combos:
        assert 1 <= len(c) <= k_max
        assert len({p for p, _ in c}) == len(c)


def test_sentinel_cannot_be_engaged():
    with pytest.raises(ValueError):
        enumerate_feasible_combos(StateVector.sentinel(), {}, LASER)


# --- rewards ---------------------------------------------------------------------

def _circ(a=7000.0):
    return StateVector(*circular_rv(a, 50.0, 20.0, 0.0))


def test_deorbit_reward():
    s = _circ()
    post = StateVector(s.r, s.v * 0.8)
    rw = transfer_reward(s, post, 6578.137)
    assert rw.total == DEORBIT_REWARD and rw.deorbits


def test_same_orbit_reward_is_zero():
    s = _circ()
    assert transfer_reward(s, s, 6578.137).total == 0.0


def test_lowering_reward_and_penalty():
    s = _circ()
    # tangential speed giving periapsis 6800 km at the opposite side
    r = 7000.0
    v_t = math.sqrt(398600.4418 * 2 * 6800.0 / (r * (r + 6800.0)))
    post = StateVector(s.r, s.v / np.linalg.norm(s.v) * v_t)
    rw = transfer_reward(s, post, 6578.0)
    assert rw.gamma == pytest.approx((6578.0 / 6800.0) ** 3, rel=1e-9)
    assert rw.penalty == 0.0
    # a protected spacecraft sitting where the object will be one step later
    later_r, later_v = kepler_propagate(post.r, post.v, 180.0)
    sc = ActiveSpacecraft(0, _epoch_elements(later_r, later_v, 180.0), (5.0, 5.0, 5.0))
    hit = transfer_reward(s, post, 6578.0, [sc], t=0, alpha=1e6)
    assert hit.penalty == -1e6
    assert hit.total == pytest.approx(rw.gamma - 1e6)


def _epoch_elements(r, v, seconds):
    """Elements at epoch of the orbit that passes (r, v) after ``seconds``."""
    period_state = StateVector(r, v)
    a = -398600.4418 / (2 * astro.specific_energy(period_state))
    period = 2 * math.pi * math.sqrt(a**3 / 398600.4418)
    back = astro.propagate_two_body(period_state, period - seconds)
    return astro.state_to_elements(back)


def test_raised_periapsis_is_rejected():
    apo = astro.elements_to_state(KeplerianElements(7000.0, 0.05, 30.0, 0.0, 180.0))
    with pytest.raises(ValueError):
        transfer_reward(apo, StateVector(apo.r, apo.v * 1.01), 6578.0)


def test_rtn_ellipsoid_membership():
    center = StateVector([7000.0, 0, 0], [0, 7.5, 0])
    axes = (2.0, 25.0, 10.0)
    assert inside_rtn_ellipsoid([7001.5, 0, 0], center, axes)
    assert not inside_rtn_ellipsoid([7002.5, 0, 0], center, axes)
    assert inside_rtn_ellipsoid([7000.0, 24.0, 0], center, axes)
    assert not inside_rtn_ellipsoid([7000.0, 0, 11.0], center, axes)


# --- debris trees ----------------------------------------------------------------

def _body(mu_d=0.2):
    return DebrisBody(0, mu_d, _circ(6900.0))


def test_no_engagement_gives_continuation_chain():
    body = _body()
    teg = generate_debris_teg(body, [{0: ([], np.zeros((0, 3)))}] * 3, TegSettings())
    assert [len(layer) for layer in teg.layers] == [1, 1, 1, 1]
    assert all(n.reward == 0.0 and not n.combo for layer in teg.layers for n in layer)


def test_single_deorbit_opportunity():
    body = _body()
    v_hat = body.state.v / np.linalg.norm(body.state.v)
    ahead = body.state.r + 250.0 * v_hat  # firing backwards along the track
    layers = [{0: ([0], ahead[None])}, {0: ([], np.zeros((0, 3)))}, {0: ([], np.zeros((0, 3)))}]
    teg = generate_debris_teg(body, layers, TegSettings())
    assert len(teg.layers[1]) == 2
    dead = teg.layers[1][1]
    assert dead.reward == DEORBIT_REWARD and dead.state.is_sentinel
    for k in (2, 3):
        kids = [n for n in teg.layers[k] if n.state.is_sentinel]
        assert len(kids) == 1 and kids[0].reward == 0.0


def test_two_platforms_add_three_children_matching_oracle():
    body = _body(mu_d=20.0)
    r, v = body.state.r, body.state.v
    v_hat = v / np.linalg.norm(v)
    up = r / np.linalg.norm(r)
    layer = {0: ([3], (r + 250.0 * v_hat)[None]), 1: ([14], (r + 200.0 * v_hat + 80.0 * up)[None])}
    settings_ = TegSettings(k_max=2)
    teg = generate_debris_teg(body, [layer], settings_)
    combos = sorted(n.combo for n in teg.layers[1] if n.combo)
    assert combos == [((0, 3),), ((0, 3), (1, 14)), ((1, 14),)]
    ref = tree_by_rules((r, v), 20.0, [layer], settings_)
    for key, (state, reward) in teg_paths(teg).items():
        want_state, want_reward = ref[key]
        assert reward == pytest.approx(want_reward, rel=1e-9)
        if state is not None:
            assert np.allclose(state[0], want_state[0], atol=1e-6)


def test_node_cap_truncates_or_raises():
    body = _body(mu_d=50.0)
    r, v = body.state.r, body.state.v
    v_hat = v / np.linalg.norm(v)
    layer = {p: ([0, 1], np.array([r + (220.0 + 20 * p) * v_hat, r + (230.0 + 20 * p) * v_hat]))
             for p in range(3)}
    capped = TegSettings(node_cap=10)
    teg = generate_debris_teg(body, [layer], capped)
    assert teg.truncated and teg.n_nodes <= 10
    assert not teg.layers[1][0].combo
    with pytest.raises(TegOverflowError, match="step 1"):
        generate_debris_teg(body, [layer], TegSettings(node_cap=10, on_overflow="raise"))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tree_invariants(seed):
    rng = np.random.default_rng(seed)
    root, mu_d, layers = random_teg_instance(rng)
    teg = generate_debris_teg(DebrisBody(0, mu_d, root), layers, TegSettings(k_max=2))
    ref = tree_by_rules((root.r, root.v), mu_d, layers, TegSettings(k_max=2))
    assert set(teg_paths(teg)) == set(ref)
    for k in range(1, len(teg.layers)):
        first = teg.layers[k][0]
        assert first.reward == 0.0 and not first.combo
        for node in teg.layers[k]:
            parent = teg.layers[k - 1][node.parent]
            if parent.deorbited:
                assert node.deorbited and node.reward == 0.0 and not node.combo
            if node.combo:
                assert 0.0 < node.gamma < 1.0 or node.gamma == DEORBIT_REWARD
                assert node.penalty in (0.0, -TegSettings().alpha)
                # the post-engagement periapsis is below the parent's
                rp_parent = astro.periapsis_radius(parent.state)
                if not node.deorbited:
                    assert astro.periapsis_radius(node.state) < rp_parent


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_subtree_rebuild_is_identical(seed):
    rng = np.random.default_rng(seed)
    root, mu_d, layers = random_teg_instance(rng)
    s = TegSettings(k_max=2)
    teg = generate_debris_teg(DebrisBody(0, mu_d, root), layers, s)
    for j, node in enumerate(teg.layers[1]):
        if node.deorbited:
            continue
        sub = generate_debris_teg(DebrisBody(0, mu_d, node.state), layers[1:], s, start=1)
        # children of j in the full tree, two levels deep
        kids = teg.children(1, j)
        assert [teg.layers[2][c].state for c in kids] == [n.state for n in sub.layers[1]]
        assert [teg.layers[2][c].reward for c in kids] == [n.reward for n in sub.layers[1]]
