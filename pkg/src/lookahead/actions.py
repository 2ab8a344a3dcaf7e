"""Action types and the vector arithmetic shared by the search engine.

An action is three bounded position deltas plus a gripper command in [0, 1].
The search engine itself only sees flattened vectors, so chunks of several
actions flatten to one long vector and back without loss.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterator, Sequence

import numpy as np

DELTA_BOUND = 0.05  # per-axis position delta limit, workspace units per step
GRIP_THRESHOLD = 0.5  # grip values at or above this count as closed
ACTION_DIM = 4  # three deltas plus one grip channel
MAX_CHUNK_LEN = 8  # longest chunk treated as a single search entity


@dataclasses.dataclass(frozen=True)
class Action:
    """One control step: a position delta plus a gripper command."""

    delta: tuple[float, float, float]
    grip: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))
        object.__setattr__(self, "grip", float(self.grip))
        if len(self.delta) != 3:
            raise ValueError(f"delta needs 3 components, got {len(self.delta)}")
        if not all(math.isfinite(d) for d in self.delta) or not math.isfinite(self.grip):
            raise ValueError("action components must be finite")
        if any(abs(d) > DELTA_BOUND + 1e-12 for d in self.delta):
            raise ValueError(f"delta component outside the per-step bound {DELTA_BOUND}")
        if not 0.0 <= self.grip <= 1.0:
            raise ValueError("grip must lie in [0, 1]")

    @property
    def grip_closed(self) -> bool:
        return self.grip >= GRIP_THRESHOLD

    def to_vector(self) -> np.ndarray:
        return np.array([*self.delta, self.grip], dtype=float)

    @classmethod
    def from_vector(cls, vec: Sequence[float] | np.ndarray) -> "Action":
        arr = np.asarray(vec, dtype=float)
        if arr.shape != (ACTION_DIM,):
            raise ValueError(f"expected a {ACTION_DIM}-vector, got shape {arr.shape}")
        return cls(delta=(arr[0], arr[1], arr[2]), grip=arr[3])

    @staticmethod
    def zero(grip: float = 0.0) -> "Action":
        return Action((0.0, 0.0, 0.0), grip)


@dataclasses.dataclass(frozen=True)
class ActionChunk:
    """A short committed sequence of actions, searched as one entity."""

    actions: tuple[Action, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        if not 1 <= len(self.actions) <= MAX_CHUNK_LEN:
            raise ValueError(f"chunk length must be in [1, {MAX_CHUNK_LEN}], got {len(self.actions)}")
        if not all(isinstance(a, Action) for a in self.actions):
            raise TypeError("chunk entries must be Action instances")

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)

    def __getitem__(self, i: int) -> Action:
        return self.actions[i]

    @classmethod
    def single(cls, action: Action) -> "ActionChunk":
        return cls((action,))


def action_bounds(chunk_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise (lo, hi) bounds for a flattened chunk of ``chunk_len`` actions."""
    if not 1 <= chunk_len <= MAX_CHUNK_LEN:
        raise ValueError(f"chunk_len must be in [1, {MAX_CHUNK_LEN}]")
    lo = np.tile([-DELTA_BOUND, -DELTA_BOUND, -DELTA_BOUND, 0.0], chunk_len)
    hi = np.tile([DELTA_BOUND, DELTA_BOUND, DELTA_BOUND, 1.0], chunk_len)
    return lo, hi


def euclidean_distance(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Euclidean distance between two equally shaped flat vectors."""
    av = np.asarray(a, dtype=float).ravel()
    bv = np.asarray(b, dtype=float).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    return float(np.linalg.norm(av - bv))


def blend_vectors(
    proposal: np.ndarray,
    searched: np.ndarray,
    alpha: float,
    lo: np.ndarray | None = None,
    hi: np.ndarray | None = None,
) -> np.ndarray:
    """alpha * proposal + (1 - alpha) * searched, optionally clamped to [lo, hi]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    av = np.asarray(proposal, dtype=float)
    bv = np.asarray(searched, dtype=float)
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    out = alpha * av + (1.0 - alpha) * bv
    if lo is not None or hi is not None:
        out = np.clip(out, lo, hi)
    return out


def blend_actions(proposal: Action, searched: Action, alpha: float) -> Action:
    """Blend the policy action with the searched action; alpha=1 keeps the policy."""
    lo, hi = action_bounds(1)
    return Action.from_vector(blend_vectors(proposal.to_vector(), searched.to_vector(), alpha, lo, hi))


def flatten_chunk(chunk: ActionChunk) -> np.ndarray:
    """Concatenate a chunk's actions into one vector of length 4 * len(chunk)."""
    return np.concatenate([a.to_vector() for a in chunk])


def unflatten_chunk(vec: Sequence[float] | np.ndarray, n_actions: int) -> ActionChunk:
    """Inverse of :func:`flatten_chunk` for a known chunk length."""
    arr = np.asarray(vec, dtype=float).ravel()
    if n_actions < 1 or arr.size != n_actions * ACTION_DIM:
        raise ValueError(f"cannot split a {arr.size}-vector into {n_actions} actions")
    return ActionChunk(tuple(Action.from_vector(arr[i * ACTION_DIM:(i + 1) * ACTION_DIM]) for i in range(n_actions)))
