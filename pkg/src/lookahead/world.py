"""Deterministic tabletop world: analytic transitions plus an error-injected twin.

The workspace is the unit cube. Objects are axis-aligned blocks that either
rest on a support (table or another block) or ride along with the gripper
once grasped. ``step`` is a pure function of (observation, action);
``imperfect_step`` adds a bounded, hash-keyed perturbation so search can run
against a world model that disagrees with the real transition by at most
epsilon per coordinate.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from typing import Union

import numpy as np

from .actions import Action, DELTA_BOUND
from .seeding import derive_seed, rng_from

GRASP_RADIUS = 0.03  # closing within this distance of a center attaches the object
OBJECT_HALF_SIZE = 0.02
HOME_POSE = (0.5, 0.5, 0.25)
RESET_JITTER = 0.03  # +/- uniform horizontal jitter applied to nominal layouts
_Z_ATOL = 1e-9  # resting heights are computed analytically, so exact up to float noise


@dataclasses.dataclass(frozen=True)
class Stack:
    """Place object ``src`` on top of object ``dst``."""

    src: int = 0
    dst: int = 1


@dataclasses.dataclass(frozen=True)
class PickPlace:
    """Carry object ``src`` into a circular zone on the table."""

    src: int = 0
    zone_center: tuple[float, float, float] = (0.65, 0.5, 0.0)
    zone_radius: float = 0.05


@dataclasses.dataclass(frozen=True)
class FollowCircle:
    """Visit waypoints on a horizontal circle, in order."""

    center: tuple[float, float, float] = (0.5, 0.5, 0.12)
    radius: float = 0.12
    n_waypoints: int = 8


TaskKind = Union[Stack, PickPlace, FollowCircle]

# nominal (x, y) table positions per task kind, jittered at reset
_NOMINAL_XY = {
    Stack: ((0.35, 0.5), (0.65, 0.5)),
    PickPlace: ((0.35, 0.5),),
    FollowCircle: (),
}

_KIND_IDS = {Stack: "stack", PickPlace: "pick-place", FollowCircle: "follow-circle"}
_ID_KINDS = {v: k for k, v in _KIND_IDS.items()}


@dataclasses.dataclass(frozen=True)
class TaskSpec:
    """A task kind plus the episode horizon and success tolerance."""

    kind: TaskKind
    horizon: int = 80
    tolerance: float = 0.04

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (math.isfinite(self.tolerance) and self.tolerance > 0):
            raise ValueError("tolerance must be a positive real")
        kind = self.kind
        n_obj = len(_NOMINAL_XY[type(kind)])
        if isinstance(kind, Stack):
            if not (0 <= kind.src < n_obj and 0 <= kind.dst < n_obj) or kind.src == kind.dst:
                raise ValueError("stack needs two distinct valid object indices")
        elif isinstance(kind, PickPlace):
            if not 0 <= kind.src < n_obj:
                raise ValueError("pick-place src index out of range")
            if kind.zone_radius <= 0:
                raise ValueError("zone_radius must be positive")
        elif isinstance(kind, FollowCircle):
            if kind.radius <= 0 or kind.n_waypoints < 1:
                raise ValueError("circle needs a positive radius and at least one waypoint")
        else:
            raise TypeError(f"unknown task kind {type(kind).__name__}")

    @property
    def task_id(self) -> str:
        return _KIND_IDS[type(self.kind)]

    @property
    def n_objects(self) -> int:
        return len(_NOMINAL_XY[type(self.kind)])

    def to_dict(self) -> dict:
        doc: dict = {"kind": self.task_id}
        if isinstance(self.kind, Stack):
            doc.update(src=self.kind.src, dst=self.kind.dst)
        elif isinstance(self.kind, PickPlace):
            doc.update(src=self.kind.src, zone_center=list(self.kind.zone_center),
                       zone_radius=self.kind.zone_radius)
        else:
            doc.update(center=list(self.kind.center), radius=self.kind.radius,
                       n_waypoints=self.kind.n_waypoints)
        doc.update(horizon=self.horizon, tolerance=self.tolerance)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskSpec":
        kind_id = doc["kind"]
        if kind_id not in _ID_KINDS:
            raise ValueError(f"unknown task kind {kind_id!r}")
        kcls = _ID_KINDS[kind_id]
        if kcls is Stack:
            kind: TaskKind = Stack(src=doc.get("src", 0), dst=doc.get("dst", 1))
        elif kcls is PickPlace:
            kind = PickPlace(
                src=doc.get("src", 0),
                zone_center=tuple(doc.get("zone_center", PickPlace.zone_center)),
                zone_radius=doc.get("zone_radius", PickPlace.zone_radius),
            )
        else:
            kind = FollowCircle(
                center=tuple(doc.get("center", FollowCircle.center)),
                radius=doc.get("radius", FollowCircle.radius),
                n_waypoints=doc.get("n_waypoints", FollowCircle.n_waypoints),
            )
        return cls(kind=kind, horizon=doc.get("horizon", 80), tolerance=doc.get("tolerance", 0.04))


@dataclasses.dataclass(frozen=True)
class ObjectState:
    pos: tuple[float, float, float]
    half_size: float


@dataclasses.dataclass(frozen=True)
class Observation:
    """Full world state. ``waypoints_hit`` keeps circle progress Markov."""

    gripper_pos: tuple[float, float, float]
    grip_closed: bool
    held_object: int | None
    objects: tuple[ObjectState, ...]
    task: TaskSpec
    step_index: int
    waypoints_hit: int = 0

    def to_dict(self) -> dict:
        return {
            "gripper_pos": list(self.gripper_pos),
            "grip_closed": self.grip_closed,
            "held_object": self.held_object,
            "objects": [{"pos": list(o.pos), "half_size": o.half_size} for o in self.objects],
            "task": self.task.to_dict(),
            "step_index": self.step_index,
            "waypoints_hit": self.waypoints_hit,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Observation":
        return cls(
            gripper_pos=tuple(doc["gripper_pos"]),
            grip_closed=doc["grip_closed"],
            held_object=doc["held_object"],
            objects=tuple(ObjectState(tuple(o["pos"]), o["half_size"]) for o in doc["objects"]),
            task=TaskSpec.from_dict(doc["task"]),
            step_index=doc["step_index"],
            waypoints_hit=doc.get("waypoints_hit", 0),
        )

    def canonical_bytes(self) -> bytes:
        parts = [
            struct.pack(">3d?i", *self.gripper_pos, self.grip_closed,
                        -1 if self.held_object is None else self.held_object),
        ]
        for o in self.objects:
            parts.append(struct.pack(">4d", *o.pos, o.half_size))
        parts.append(struct.pack(">2i", self.step_index, self.waypoints_hit))
        parts.append(json.dumps(self.task.to_dict(), sort_keys=True).encode("utf-8"))
        return b"".join(parts)


def waypoint_positions(task: TaskSpec) -> list[tuple[float, float, float]]:
    """Waypoints of a FollowCircle task, counterclockwise from angle zero."""
    kind = task.kind
    if not isinstance(kind, FollowCircle):
        raise ValueError("waypoints are only defined for follow-circle tasks")
    cx, cy, cz = kind.center
    out = []
    for i in range(kind.n_waypoints):
        theta = 2.0 * math.pi * i / kind.n_waypoints
        out.append((cx + kind.radius * math.cos(theta), cy + kind.radius * math.sin(theta), cz))
    return out


def reset(task: TaskSpec, seed: int) -> Observation:
    """Initial state for an episode: home gripper, jittered object layout."""
    rng = rng_from("reset", task.task_id, seed)
    objects = []
    for x, y in _NOMINAL_XY[type(task.kind)]:
        jx, jy = rng.uniform(-RESET_JITTER, RESET_JITTER, size=2)
        objects.append(ObjectState((x + jx, y + jy, OBJECT_HALF_SIZE), OBJECT_HALF_SIZE))
    return Observation(
        gripper_pos=HOME_POSE,
        grip_closed=False,
        held_object=None,
        objects=tuple(objects),
        task=task,
        step_index=0,
        waypoints_hit=0,
    )


def _clip01(v: float) -> float:
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)


def _settle(objects: list[ObjectState], idx: int, tolerance: float,
            exclude: int | None = None) -> ObjectState:
    """Resting state for object ``idx`` at its current (x, y).

    Within horizontal tolerance of another block it rests on the highest such
    top, otherwise it drops to the table. z = support top + half_size.
    """
    me = objects[idx]
    x, y = me.pos[0], me.pos[1]
    support_top = 0.0
    for j, other in enumerate(objects):
        if j == idx or j == exclude:
            continue
        if math.hypot(other.pos[0] - x, other.pos[1] - y) <= tolerance:
            top = other.pos[2] + other.half_size
            if top > support_top:
                support_top = top
    return ObjectState((x, y, support_top + me.half_size), me.half_size)


def step(obs: Observation, action: Action) -> Observation:
    """One transition. Pure: same (obs, action) always yields the same state."""
    if any(abs(d) > DELTA_BOUND + 1e-12 for d in action.delta):
        raise ValueError("action delta outside the per-step bound")
    if not 0.0 <= action.grip <= 1.0:
        raise ValueError("action grip outside [0, 1]")

    gx = _clip01(obs.gripper_pos[0] + action.delta[0])
    gy = _clip01(obs.gripper_pos[1] + action.delta[1])
    gz = _clip01(obs.gripper_pos[2] + action.delta[2])
    gp = (gx, gy, gz)

    objects = list(obs.objects)
    held = obs.held_object
    if held is not None:
        objects[held] = ObjectState(gp, objects[held].half_size)

    closed_now = action.grip_closed
    if closed_now and not obs.grip_closed and held is None:
        # grasp: nearest object center within reach attaches; ties go to the
        # lowest index via the strict comparison
        best, best_d = None, math.inf
        for i, o in enumerate(objects):
            d = math.dist(o.pos, gp)
            if d <= GRASP_RADIUS and d < best_d:
                best, best_d = i, d
        if best is not None:
            held = best
            objects[held] = ObjectState(gp, objects[held].half_size)
    elif not closed_now and obs.grip_closed and held is not None:
        objects[held] = _settle(objects, held, obs.task.tolerance)
        held = None

    hit = obs.waypoints_hit
    if isinstance(obs.task.kind, FollowCircle):
        wps = waypoint_positions(obs.task)
        while hit < len(wps) and math.dist(gp, wps[hit]) <= obs.task.tolerance:
            hit += 1

    return Observation(
        gripper_pos=gp,
        grip_closed=closed_now,
        held_object=held,
        objects=tuple(objects),
        task=obs.task,
        step_index=obs.step_index + 1,
        waypoints_hit=hit,
    )


def is_success(obs: Observation) -> bool:
    kind = obs.task.kind
    tol = obs.task.tolerance
    if isinstance(kind, Stack):
        if obs.grip_closed or obs.held_object == kind.src:
            return False
        src, dst = obs.objects[kind.src], obs.objects[kind.dst]
        horiz = math.hypot(src.pos[0] - dst.pos[0], src.pos[1] - dst.pos[1])
        resting_z = dst.pos[2] + dst.half_size + src.half_size
        return horiz <= tol and abs(src.pos[2] - resting_z) <= _Z_ATOL
    if isinstance(kind, PickPlace):
        if obs.grip_closed or obs.held_object == kind.src:
            return False
        src = obs.objects[kind.src]
        horiz = math.hypot(src.pos[0] - kind.zone_center[0], src.pos[1] - kind.zone_center[1])
        return horiz <= kind.zone_radius and abs(src.pos[2] - src.half_size) <= _Z_ATOL
    return obs.waypoints_hit >= kind.n_waypoints


def _resettle_free(objects: list[ObjectState], held: int | None, tolerance: float) -> list[ObjectState]:
    # process free objects bottom-up so each rests on already-settled ones
    order = sorted((i for i in range(len(objects)) if i != held),
                   key=lambda i: objects[i].pos[2])
    settled: dict[int, ObjectState] = {}
    for idx in order:
        me = objects[idx]
        x, y = me.pos[0], me.pos[1]
        support_top = 0.0
        for j, other in settled.items():
            if math.hypot(other.pos[0] - x, other.pos[1] - y) <= tolerance:
                top = other.pos[2] + other.half_size
                if top > support_top:
                    support_top = top
        settled[idx] = ObjectState((x, y, support_top + me.half_size), me.half_size)
    out = list(objects)
    for idx, st in settled.items():
        out[idx] = st
    return out


def imperfect_step(obs: Observation, action: Action, epsilon: float, model_seed: int) -> Observation:
    """``step`` plus a deterministic perturbation of up to epsilon per coordinate.

    The perturbation is keyed by a stable hash of (obs, action, model_seed),
    so re-simulating the same transition always lands on the same state, in
    any process. epsilon = 0 short-circuits to the exact ``step``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    base = step(obs, action)
    if epsilon == 0.0:
        return base
    key = derive_seed("model", obs.canonical_bytes(),
                      struct.pack(">4d", *action.delta, action.grip), model_seed)
    rng = np.random.default_rng(key)
    off = rng.uniform(-epsilon, epsilon, size=3 + 3 * len(base.objects))
    gp = (_clip01(base.gripper_pos[0] + off[0]),
          _clip01(base.gripper_pos[1] + off[1]),
          _clip01(base.gripper_pos[2] + off[2]))
    objects = []
    for i, o in enumerate(base.objects):
        if i == base.held_object:
            objects.append(ObjectState(gp, o.half_size))  # held rides the gripper
            continue
        j = 3 + 3 * i
        objects.append(ObjectState(
            (_clip01(o.pos[0] + off[j]), _clip01(o.pos[1] + off[j + 1]), _clip01(o.pos[2] + off[j + 2])),
            o.half_size,
        ))
    objects = _resettle_free(objects, base.held_object, obs.task.tolerance)
    return Observation(
        gripper_pos=gp,
        grip_closed=base.grip_closed,
        held_object=base.held_object,
        objects=tuple(objects),
        task=base.task,
        step_index=base.step_index,
        waypoints_hit=base.waypoints_hit,
    )


def feature_length(task: TaskSpec) -> int:
    return 9 + 6 * task.n_objects


def render_features(obs: Observation) -> np.ndarray:
    """Fixed-layout feature vector for reward learning.

    Layout: gripper position (3), grip flag (1), held flag (1), each object
    position (3n), gripper-to-object offsets (3n), goal offset (3), progress
    height (1). Offsets are differences of positions, so translating the whole
    scene leaves them unchanged.
    """
    kind = obs.task.kind
    gp = obs.gripper_pos
    feats: list[float] = [gp[0], gp[1], gp[2],
                          1.0 if obs.grip_closed else 0.0,
                          1.0 if obs.held_object is not None else 0.0]
    for o in obs.objects:
        feats.extend(o.pos)
    for o in obs.objects:
        feats.extend((gp[0] - o.pos[0], gp[1] - o.pos[1], gp[2] - o.pos[2]))
    if isinstance(kind, Stack):
        src, dst = obs.objects[kind.src], obs.objects[kind.dst]
        feats.extend((dst.pos[0] - src.pos[0], dst.pos[1] - src.pos[1], dst.pos[2] - src.pos[2]))
        feats.append(src.pos[2] - src.half_size)  # src bottom height above the table
    elif isinstance(kind, PickPlace):
        src = obs.objects[kind.src]
        zc = kind.zone_center
        feats.extend((zc[0] - src.pos[0], zc[1] - src.pos[1], zc[2] - src.pos[2]))
        feats.append(src.pos[2] - src.half_size)
    else:
        if obs.waypoints_hit < kind.n_waypoints:
            wp = waypoint_positions(obs.task)[obs.waypoints_hit]
            feats.extend((wp[0] - gp[0], wp[1] - gp[1], wp[2] - gp[2]))
        else:
            feats.extend((0.0, 0.0, 0.0))
        feats.append(obs.waypoints_hit / kind.n_waypoints)
    return np.array(feats, dtype=float)


def validate_observation(obs: Observation) -> None:
    """Raise if a state violates the world's structural invariants.

    The interpenetration check covers free objects only: a held object is
    attached to the gripper, not resting, and the world has no collision
    dynamics for it.
    """
    for v in obs.gripper_pos:
        if not 0.0 <= v <= 1.0:
            raise ValueError("gripper outside the workspace")
    for o in obs.objects:
        for v in o.pos:
            if not 0.0 <= v <= 1.0:
                raise ValueError("object outside the workspace")
    if obs.held_object is not None:
        if not obs.grip_closed:
            raise ValueError("held object requires a closed grip")
        if obs.objects[obs.held_object].pos != obs.gripper_pos:
            raise ValueError("held object must ride the gripper")
    tol = obs.task.tolerance
    for i, o in enumerate(obs.objects):
        if i == obs.held_object:
            continue
        # resting height: table, or the top of some block within tolerance
        ok = abs(o.pos[2] - o.half_size) <= _Z_ATOL
        for j, other in enumerate(obs.objects):
            if ok or j == i:
                continue
            horiz = math.hypot(other.pos[0] - o.pos[0], other.pos[1] - o.pos[1])
            if horiz <= tol and abs(o.pos[2] - (other.pos[2] + other.half_size + o.half_size)) <= _Z_ATOL:
                ok = True
        if not ok:
            raise ValueError(f"object {i} is not resting on a support")
    free = [i for i in range(len(obs.objects)) if i != obs.held_object]
    for a_i in range(len(free)):
        for b_i in range(a_i + 1, len(free)):
            a, b = obs.objects[free[a_i]], obs.objects[free[b_i]]
            lim = a.half_size + b.half_size - 1e-6
            horiz = math.hypot(a.pos[0] - b.pos[0], a.pos[1] - b.pos[1])
            if horiz < lim and abs(a.pos[2] - b.pos[2]) < lim:
                raise ValueError(f"objects {free[a_i]} and {free[b_i]} interpenetrate")
