"""Scripted expert controller and its drift-corrupted variant."""

from __future__ import annotations

import math

import numpy as np
import pytest

import lookahead as la
from lookahead.policies import DriftPolicy, ExpertPolicy, expert_action
from lookahead.world import waypoint_positions


def _rollout(policy, task, seed, horizon=None):
    obs = la.reset(task, seed)
    policy.reset(seed)
    h = horizon if horizon is not None else task.horizon
    while obs.step_index < h and not la.is_success(obs):
        for a in policy.propose(obs).actions:
            obs = la.step(obs, a)
            if obs.step_index >= h or la.is_success(obs):
                break
    return obs


def test_expert_solves_stack(stack_task):
    wins = sum(la.is_success(_rollout(ExpertPolicy(), stack_task, s))
               for s in range(200))
    assert wins >= 190


def test_expert_solves_other_tasks():
    for kind in (la.PickPlace(), la.FollowCircle()):
        task = la.TaskSpec(kind=kind)
        wins = sum(la.is_success(_rollout(ExpertPolicy(), task, s))
                   for s in range(50))
        assert wins >= 48


def test_expert_first_action_points_at_hover(stack_task):
    obs = la.reset(stack_task, 0)
    src = obs.objects[stack_task.kind.src]
    a = expert_action(obs)
    hover = (src.pos[0], src.pos[1], src.pos[2] + 0.08)
    before = math.dist(obs.gripper_pos, hover)
    after = math.dist(la.step(obs, a).gripper_pos, hover)
    assert after < before
    assert a.grip == 0.0


def test_expert_follow_circle_tracks_waypoints():
    task = la.TaskSpec(kind=la.FollowCircle())
    obs = la.reset(task, 1)
    wp = waypoint_positions(task)[0]
    a = expert_action(obs)
    after = la.step(obs, a)
    assert math.dist(after.gripper_pos, wp) < math.dist(obs.gripper_pos, wp)


def test_expert_done_emits_zero_action():
    task = la.TaskSpec(kind=la.FollowCircle())
    obs = _rollout(ExpertPolicy(), task, 2)
    assert la.is_success(obs)
    assert expert_action(obs) == la.Action.zero()


def test_expert_reopens_after_missed_grasp(stack_task):
    import dataclasses

    obs = la.reset(stack_task, 3)
    closed = dataclasses.replace(obs, grip_closed=True)  # closed but empty
    a = expert_action(closed)
    assert a.grip == 0.0
    assert a.delta == (0.0, 0.0, 0.0)


def test_expert_is_stateless_across_resets(stack_task):
    p = ExpertPolicy()
    obs = la.reset(stack_task, 4)
    p.reset(4)
    first = p.propose(obs)
    p.reset(999)
    assert p.propose(obs) == first


def test_chunk_rolls_out_open_loop(stack_task):
    obs = la.reset(stack_task, 5)
    chunk = ExpertPolicy(chunk_len=4).propose(obs)
    assert len(chunk.actions) == 4
    cur = obs
    for a in chunk.actions:
        assert a == expert_action(cur)
        cur = la.step(cur, a)


def test_drift_zero_noise_matches_expert(stack_task):
    drift = DriftPolicy(eta=0.0, sigma=0.0)
    drift.reset(6)
    obs = la.reset(stack_task, 6)
    for _ in range(30):
        a = drift.propose(obs).actions[0]
        assert a == expert_action(obs)
        obs = la.step(obs, a)


def test_drift_first_action_is_expert_plus_noise_only(stack_task):
    # bias updates after emission, so the first post-reset action carries
    # white noise but no accumulated bias
    drift = DriftPolicy(eta=0.05, sigma=0.0)
    drift.reset(7)
    obs = la.reset(stack_task, 7)
    a = drift.propose(obs).actions[0]
    assert a == expert_action(obs)
    b = drift.propose(obs).actions[0]
    assert a != b  # second call carries one bias step


def test_drift_same_seed_same_stream(stack_task):
    obs = la.reset(stack_task, 8)
    seqs = []
    for _ in range(2):
        d = DriftPolicy()
        d.reset(8)
        seqs.append([d.propose(obs).actions[0] for _ in range(20)])
    assert seqs[0] == seqs[1]
    d = DriftPolicy()
    d.reset(9)
    other = [d.propose(obs).actions[0] for _ in range(20)]
    assert other != seqs[0]


def test_drift_grip_channel_untouched(stack_task):
    drift = DriftPolicy(eta=0.01, sigma=0.01)
    drift.reset(10)
    obs = la.reset(stack_task, 10)
    for _ in range(40):
        a = drift.propose(obs).actions[0]
        assert a.grip == expert_action(obs).grip
        obs = la.step(obs, a)


def test_drift_bias_grows_like_sqrt_t():
    # random-walk bias: RMS norm after t steps is eta * sqrt(t)
    eta, t, runs = 0.004, 64, 1000
    task = la.TaskSpec(kind=la.FollowCircle())
    obs = la.reset(task, 0)
    sq = 0.0
    for r in range(runs):
        d = DriftPolicy(eta=eta, sigma=0.0)
        d.reset(r)
        for _ in range(t):
            d.propose(obs)
        sq += float(d._bias @ d._bias)
    rms = math.sqrt(sq / runs)
    assert abs(rms / (eta * math.sqrt(t)) - 1.0) < 0.30


def test_drift_hurts_success_rate(stack_task):
    expert_wins = sum(la.is_success(_rollout(ExpertPolicy(), stack_task, s))
                      for s in range(100))
    drift_wins = sum(la.is_success(_rollout(DriftPolicy(), stack_task, s))
                     for s in range(100))
    assert drift_wins < expert_wins
    assert 0 < drift_wins  # corrupted, not incapacitated


def test_drift_validation():
    with pytest.raises(ValueError):
        DriftPolicy(eta=-0.01)
    with pytest.raises(ValueError):
        DriftPolicy(sigma=-0.01)
    with pytest.raises(ValueError):
        DriftPolicy(chunk_len=0)
    with pytest.raises(ValueError):
        ExpertPolicy(chunk_len=9)


def test_drift_deltas_respect_bounds(stack_task):
    drift = DriftPolicy(eta=0.05, sigma=0.05)  # exaggerated corruption
    drift.reset(11)
    obs = la.reset(stack_task, 11)
    for _ in range(50):
        a = drift.propose(obs).actions[0]
        assert all(abs(d) <= 0.05 for d in a.delta)
        obs = la.step(obs, a)
