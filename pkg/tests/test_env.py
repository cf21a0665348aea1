import math

import numpy as np
import pytest

from furnish import env as envmod
from furnish.env import EnvError, EpisodeConfig, decode_action, observe, reset, step
from furnish.geometry import intersection_area, contains, vec2
from furnish.scene import DEFAULT_SELECTIONS, default_catalog, default_room


def config_for(count=4, shape="square", **kw):
    return EpisodeConfig(
        room=default_room(shape),
        catalog=default_catalog(),
        furniture_ids=tuple(DEFAULT_SELECTIONS[count]),
        **kw,
    )


def raw_for(room, x, y, k):
    """Inverse of decode_action for exact targeting in tests."""
    ax = math.atanh(2 * x / room.n - 1)
    ay = math.atanh(2 * y / room.m - 1)
    ak = math.atanh(np.clip(2 * (k + 0.5) / 4 - 1, -0.999999, 0.999999))
    return np.array([ax, ay, ak])


def test_decode_action_midpoint():
    room = default_room("square")  # 6x6
    pos, k = decode_action(np.zeros(3), room)
    assert np.allclose(pos, [3, 3])
    assert k == 2


def test_decode_action_limits():
    room = default_room("square")
    pos, k = decode_action(np.array([-40.0, -40.0, -40.0]), room)
    assert np.allclose(pos, [0, 0], atol=1e-6)
    assert k == 0
    pos, k = decode_action(np.array([40.0, 40.0, 40.0]), room)
    assert np.allclose(pos, [6, 6], atol=1e-6)
    assert k == 3  # floor clamp at the +1 asymptote


def test_decode_action_k_buckets():
    room = default_room("square")
    for k in range(4):
        _, got = decode_action(raw_for(room, 3, 3, k), room)
        assert got == k


def test_reset_observation():
    cfg = config_for(4)
    state, obs = reset(cfg)
    assert state.cursor == 0 and not state.done and state.placed == ()
    specs = cfg.specs()
    assert [s.id for s in specs[:2]] == ["bed", "desk"]
    from furnish.scene import descriptor

    assert np.allclose(obs.current, descriptor(specs[0], cfg.room))
    assert np.allclose(obs.upcoming, descriptor(specs[1], cfg.room))
    assert obs.grid.shape == (64, 64)
    assert obs.grid.sum() == 0  # square room: no padding, nothing placed


def test_reset_single_item_sentinel():
    cfg = EpisodeConfig(room=default_room("square"), catalog=default_catalog(), furniture_ids=("bed",))
    _, obs = reset(cfg)
    assert np.array_equal(obs.upcoming, np.zeros(12))


def test_reset_deterministic():
    cfg = config_for(6)
    s1, o1 = reset(cfg)
    s2, o2 = reset(cfg)
    assert np.array_equal(o1.grid, o2.grid)
    assert np.array_equal(o1.current, o2.current)
    assert s1.placed == s2.placed == ()


def test_observation_grid_marks_outside_room():
    cfg = config_for(4, shape="l_shape")
    _, obs = reset(cfg)
    # north-east quadrant of the 8x8 L-room is outside
    assert obs.grid[-1, -1] == 1
    assert obs.grid[0, 0] == 0


def test_observation_grid_padding_for_rectangle():
    cfg = config_for(4, shape="rectangle")  # 8x5
    _, obs = reset(cfg)
    nrows = int(np.ceil(5 / (8 / 64)))
    assert np.all(obs.grid[nrows:, :] == 1)
    assert np.all(obs.grid[: nrows - 1, :] == 0)


def test_valid_step_places_and_rewards():
    cfg = config_for(4)
    state, _ = reset(cfg)
    out = step(cfg, state, raw_for(cfg.room, 2.0, 4.5, 0))
    assert not out.invalid and not out.done
    assert out.state.cursor == 1 and len(out.state.placed) == 1
    assert out.breakdown is not None
    assert out.reward == pytest.approx(out.breakdown.r_composite)
    assert -1 <= out.reward <= 1


def test_invalid_step_penalty_and_termination():
    cfg = config_for(4)
    state, _ = reset(cfg)
    out = step(cfg, state, raw_for(cfg.room, 1.0, 4.5, 0))
    # place the next item right on top of the first -> invalid
    out2 = step(cfg, out.state, raw_for(cfg.room, 1.0, 4.5, 0))
    assert out2.invalid and out2.done
    assert out2.reward == -10.0
    assert len(out2.state.placed) == 1  # nothing new placed
    with pytest.raises(EnvError):
        step(cfg, out2.state, np.zeros(3))


def test_out_of_room_is_invalid():
    cfg = config_for(4, shape="l_shape")
    state, _ = reset(cfg)
    # bed centered inside the missing quadrant of the L-shape
    out = step(cfg, state, raw_for(cfg.room, 7.0, 7.0, 0))
    assert out.invalid and out.reward == -10.0


def test_episode_length_bounded_and_final_done():
    cfg = config_for(4)
    spots = [(1.0, 4.8), (4.8, 1.0), (1.0, 1.0), (4.8, 4.8)]
    state, _ = reset(cfg)
    for i, (x, y) in enumerate(spots):
        out = step(cfg, state, raw_for(cfg.room, x, y, 0))
        assert not out.invalid
        state = out.state
        assert out.done == (i == 3)
    assert state.done and state.cursor == 4


def test_placement_invariants_after_steps():
    cfg = config_for(6)
    rng = np.random.default_rng(5)
    for _ in range(20):
        state, _ = reset(cfg)
        while not state.done:
            out = step(cfg, state, rng.normal(size=3))
            state = out.state
        fps = [p.footprint for p in state.placed]
        for i, f in enumerate(fps):
            assert contains(cfg.room.boundary, f)
            for g in fps[i + 1 :]:
                assert intersection_area(f, g) <= 1e-9


def test_trajectory_determinism():
    cfg = config_for(6)
    rng = np.random.default_rng(31)
    actions = [rng.normal(size=3) for _ in range(6)]

    def run():
        state, _ = reset(cfg)
        rewards = []
        for a in actions:
            if state.done:
                break
            out = step(cfg, state, a)
            rewards.append(out.reward)
            state = out.state
        return rewards, state

    r1, s1 = run()
    r2, s2 = run()
    assert r1 == r2
    assert len(s1.placed) == len(s2.placed)
    for p, q in zip(s1.placed, s2.placed):
        assert np.array_equal(p.position, q.position) and p.k == q.k


def test_reward_range_per_step():
    cfg = config_for(4)
    rng = np.random.default_rng(8)
    for _ in range(30):
        state, _ = reset(cfg)
        while not state.done:
            out = step(cfg, state, rng.normal(size=3) * 1.5)
            assert (-1 - 1e-9 <= out.reward <= 1 + 1e-9) or out.reward == cfg.penalty
            state = out.state


def test_ascending_order():
    cfg = config_for(4, order="ascending")
    specs = cfg.specs()
    areas = [s.area for s in specs]
    assert areas == sorted(areas)


def test_observe_after_done_raises():
    cfg = EpisodeConfig(room=default_room("square"), catalog=default_catalog(), furniture_ids=("chair",))
    state, _ = reset(cfg)
    out = step(cfg, state, raw_for(cfg.room, 3, 3, 0))
    assert out.done
    with pytest.raises(EnvError):
        observe(cfg, out.state)
