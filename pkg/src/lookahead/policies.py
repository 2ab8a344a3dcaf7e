"""Scripted expert waypoint controller and a drift-corrupted wrapper.

The expert is stateless: every action is recomputed from the observation, so
a missed grasp simply triggers another attempt. The drift policy adds an
accumulating random-walk bias plus white noise to the expert's deltas, which
models a miscalibrated imitation policy whose error compounds over a rollout.
"""

from __future__ import annotations

import math

import numpy as np

from .actions import Action, ActionChunk, DELTA_BOUND, MAX_CHUNK_LEN
from .seeding import rng_from
from .world import FollowCircle, Observation, PickPlace, Stack, step, waypoint_positions

HOVER_HEIGHT = 0.08  # approach height above a grasp target
SAFE_HEIGHT = 0.18  # transport height while carrying
ALIGN_TOL = 0.018  # horizontal alignment threshold between phases
DESCEND_TOL = 0.022  # within this 3-D distance of the target, close the grip
PLACE_SLACK = 0.006  # vertical slack before releasing over the placement point


def _move_toward(pos: tuple[float, float, float], target: tuple[float, float, float],
                 grip: float) -> Action:
    # componentwise clamp of the offset to one step
    d = tuple(max(-DELTA_BOUND, min(DELTA_BOUND, t - p)) for p, t in zip(pos, target))
    return Action(d, grip)


def expert_action(obs: Observation) -> Action:
    """The scripted controller's action for the current state."""
    task = obs.task
    kind = task.kind
    gp = obs.gripper_pos

    if isinstance(kind, FollowCircle):
        if obs.waypoints_hit >= kind.n_waypoints:
            return Action.zero()
        wp = waypoint_positions(task)[obs.waypoints_hit]
        return _move_toward(gp, wp, 0.0)

    src_idx = kind.src
    src = obs.objects[src_idx]

    if obs.held_object != src_idx:
        if obs.grip_closed:
            return Action.zero(grip=0.0)  # missed grasp: reopen, then retry
        horiz = math.hypot(gp[0] - src.pos[0], gp[1] - src.pos[1])
        if horiz > ALIGN_TOL:
            return _move_toward(gp, (src.pos[0], src.pos[1], src.pos[2] + HOVER_HEIGHT), 0.0)
        if math.dist(gp, src.pos) > DESCEND_TOL:
            return _move_toward(gp, src.pos, 0.0)
        return Action.zero(grip=1.0)

    if isinstance(kind, Stack):
        dst = obs.objects[kind.dst]
        place = (dst.pos[0], dst.pos[1], dst.pos[2] + dst.half_size + src.half_size)
    else:
        zc = kind.zone_center
        place = (zc[0], zc[1], src.half_size + 0.03)  # release just above the table

    horiz = math.hypot(gp[0] - place[0], gp[1] - place[1])
    if horiz > ALIGN_TOL:
        if gp[2] < SAFE_HEIGHT - 1e-9:
            return _move_toward(gp, (gp[0], gp[1], SAFE_HEIGHT), 1.0)
        return _move_toward(gp, (place[0], place[1], SAFE_HEIGHT), 1.0)
    if abs(gp[2] - place[2]) > PLACE_SLACK:
        return _move_toward(gp, place, 1.0)
    return Action.zero(grip=0.0)  # release; the block settles onto its support


class ExpertPolicy:
    """Stateless scripted controller; chunks are rolled out open loop."""

    def __init__(self, chunk_len: int = 1):
        if not 1 <= chunk_len <= MAX_CHUNK_LEN:
            raise ValueError(f"chunk_len must be in [1, {MAX_CHUNK_LEN}]")
        self.chunk_len = chunk_len

    def reset(self, episode_seed: int) -> None:
        pass  # nothing to reset

    def propose(self, obs: Observation) -> ActionChunk:
        actions = []
        cur = obs
        for i in range(self.chunk_len):
            a = expert_action(cur)
            actions.append(a)
            if i + 1 < self.chunk_len:
                cur = step(cur, a)
        return ActionChunk(tuple(actions))


class DriftPolicy:
    """Expert actions corrupted by accumulated bias plus Gaussian noise.

    Per emitted action the bias takes one random-walk step of size eta, so its
    norm grows like eta * sqrt(t). Only the position deltas are corrupted; the
    grip channel passes through untouched.
    """

    def __init__(self, eta: float = 0.004, sigma: float = 0.005,
                 chunk_len: int = 1, stream: int = 0):
        if eta < 0 or sigma < 0:
            raise ValueError("eta and sigma must be non-negative")
        if not 1 <= chunk_len <= MAX_CHUNK_LEN:
            raise ValueError(f"chunk_len must be in [1, {MAX_CHUNK_LEN}]")
        self.eta = eta
        self.sigma = sigma
        self.chunk_len = chunk_len
        self.stream = stream
        self._bias = np.zeros(3)
        self._rng = rng_from("drift", stream, 0)

    def reset(self, episode_seed: int) -> None:
        self._bias = np.zeros(3)
        self._rng = rng_from("drift", self.stream, episode_seed)

    def propose(self, obs: Observation) -> ActionChunk:
        actions = []
        cur = obs
        for i in range(self.chunk_len):
            base = expert_action(cur)
            noise = self._rng.normal(0.0, self.sigma, size=3)
            delta = np.clip(np.asarray(base.delta) + self._bias + noise,
                            -DELTA_BOUND, DELTA_BOUND)
            a = Action(tuple(delta), base.grip)
            # bias update happens after the action, so a fresh reset emits
            # the expert action plus noise alone
            u = self._rng.normal(size=3)
            norm = float(np.linalg.norm(u))
            if norm > 0.0:
                self._bias = self._bias + self.eta * (u / norm)
            actions.append(a)
            if i + 1 < self.chunk_len:
                cur = step(cur, a)
        return ActionChunk(tuple(actions))
