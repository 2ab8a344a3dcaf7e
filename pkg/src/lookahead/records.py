"""Trajectory and episode records with their line-delimited JSON encoding.

One trajectory per line: {"task_id", "seed", "success", "frames": [...]} where
each frame is {"obs": {...}, "action": [d0, d1, d2, g]}. Floats are written at
full precision so a round-trip reproduces every value bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .actions import Action
from .errors import DataError


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """A recorded episode: (observation, action) frames plus its outcome."""

    task_id: str
    frames: tuple[tuple[Any, Action], ...]
    success: bool
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple((o, a) for o, a in self.frames))
        if not self.frames:
            raise ValueError("a trajectory needs at least one frame")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def observations(self) -> list[Any]:
        return [o for o, _ in self.frames]

    @property
    def actions(self) -> list[Action]:
        return [a for _, a in self.frames]


@dataclasses.dataclass(frozen=True)
class EpisodeResult:
    """Outcome of one seeded episode.

    ``wall_time`` is measured, not derived from the seed, so it is kept out of
    every serialized report (reports must be byte-identical across re-runs).
    """

    task_id: str
    success: bool
    steps_taken: int
    final_reward: float
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.final_reward <= 1.0:
            raise ValueError("final_reward must lie in [0, 1]")
        if self.steps_taken < 0:
            raise ValueError("steps_taken must be non-negative")

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "success": self.success,
            "steps_taken": self.steps_taken,
            "final_reward": self.final_reward,
        }


def trajectory_record(traj: Trajectory) -> dict:
    """The JSON document for one trajectory; field order is part of the format."""
    return {
        "task_id": traj.task_id,
        "seed": traj.seed,
        "success": traj.success,
        "frames": [
            {"obs": obs.to_dict(), "action": [*act.delta, act.grip]}
            for obs, act in traj.frames
        ],
    }


def record_to_trajectory(record: dict, obs_decoder: Callable[[dict], Any]) -> Trajectory:
    frames = tuple(
        (obs_decoder(f["obs"]), Action(delta=tuple(f["action"][:3]), grip=f["action"][3]))
        for f in record["frames"]
    )
    return Trajectory(
        task_id=record["task_id"],
        frames=frames,
        success=record["success"],
        seed=record["seed"],
    )


def write_trajectories(path: str | Path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_record(traj)) + "\n")


def read_trajectories(path: str | Path, obs_decoder: Callable[[dict], Any]) -> list[Trajectory]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_to_trajectory(json.loads(line), obs_decoder))
    return out


def action_matrix(trajectories: Iterable[Trajectory], chunk_len: int = 1) -> np.ndarray:
    """Stack demo actions as rows of flattened chunks.

    With ``chunk_len`` > 1 consecutive actions are grouped into chunks and any
    partial tail chunk is dropped, so every row has the same dimension.
    """
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    rows = []
    for traj in trajectories:
        acts = traj.actions
        for i in range(0, len(acts) - chunk_len + 1, chunk_len):
            rows.append(np.concatenate([a.to_vector() for a in acts[i:i + chunk_len]]))
    if not rows:
        raise DataError("no complete chunks in the demo set")
    return np.stack(rows)
