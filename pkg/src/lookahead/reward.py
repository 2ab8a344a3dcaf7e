"""Progress labels from demonstrations and a linear reward head over features.

Frames of a successful demo are labeled with linear progress i/(M-1), so the
first frame scores 0 and the last scores 1 (a 10-frame demo gives its index-5
frame 5/9). A ridge regression from rendered state features to those labels
then scores arbitrary states during search. A nearest-demo-frame lookup is
kept as the ablation baseline.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .records import Trajectory
from .world import Observation, render_features

# lambda used when a rank-deficient design is fit with ridge_lambda = 0
DEGENERATE_FALLBACK_LAMBDA = 1e-6


@dataclasses.dataclass(frozen=True)
class LabeledFrame:
    """One training pair: rendered features and a progress label in [0, 1]."""

    features: np.ndarray
    label: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float).ravel())
        if not 0.0 <= self.label <= 1.0:
            raise ValueError("label must lie in [0, 1]")


@dataclasses.dataclass(frozen=True)
class RewardModel:
    """Linear reward head: weights over features plus a trailing bias."""

    task_kind: str
    weights: np.ndarray
    ridge_lambda: float
    train_mse: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())
        if self.weights.size < 2:
            raise ValueError("weights must cover at least one feature plus the bias")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be non-negative")


def downsample(traj: Trajectory, stride: int) -> list[Observation]:
    """Every stride-th observation, always keeping the final frame.

    A 10-frame trajectory at stride 4 keeps indices {0, 4, 8, 9}.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if len(traj) == 0:
        raise DataError("cannot downsample an empty trajectory")
    idx = list(range(0, len(traj), stride))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    return [traj.frames[i][0] for i in idx]


def label_progress(frames: Sequence[Observation]) -> list[LabeledFrame]:
    """Linear progress labels i/(M-1) over an ordered frame sequence."""
    m = len(frames)
    if m < 2:
        raise DataError("need at least 2 frames to label progress")
    return [LabeledFrame(render_features(obs), i / (m - 1)) for i, obs in enumerate(frames)]


def fit_reward(
    data: Sequence[LabeledFrame],
    ridge_lambda: float = DEGENERATE_FALLBACK_LAMBDA,
    task_kind: str = "generic",
) -> RewardModel:
    """Ridge regression of labels on [features, 1] via the normal equations.

    Solves (X^T X + lambda I) w = X^T y with one refinement pass, so the
    stationarity residual ||X^T (X w - y) + lambda w||_inf stays near machine
    precision. A rank-deficient design at lambda = 0 falls back to a small
    positive lambda with a warning instead of failing.
    """
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be non-negative")
    if not data:
        raise DataError("cannot fit a reward model on an empty dataset")
    feat_dim = data[0].features.size
    if any(f.features.size != feat_dim for f in data):
        raise ValueError("inconsistent feature lengths in the training data")
    if len(data) < feat_dim + 1:
        raise DataError(f"need at least {feat_dim + 1} frames to fit {feat_dim + 1} weights")

    x = np.column_stack([np.stack([f.features for f in data]), np.ones(len(data))])
    y = np.array([f.label for f in data])
    lam = float(ridge_lambda)
    if lam == 0.0 and np.linalg.matrix_rank(x) < x.shape[1]:
        warnings.warn(
            f"design matrix is rank deficient; refitting with lambda={DEGENERATE_FALLBACK_LAMBDA}",
            RuntimeWarning,
            stacklevel=2,
        )
        lam = DEGENERATE_FALLBACK_LAMBDA

    a = x.T @ x + lam * np.eye(x.shape[1])
    b = x.T @ y
    w = np.linalg.solve(a, b)
    for _ in range(2):  # iterative refinement keeps the gradient residual tiny
        w = w + np.linalg.solve(a, b - a @ w)
    mse = float(np.mean((x @ w - y) ** 2))
    return RewardModel(task_kind=task_kind, weights=w, ridge_lambda=lam, train_mse=mse)


def predict_reward(model: RewardModel, obs: Observation) -> float:
    """Predicted progress for a state, clamped to [0, 1]."""
    feats = render_features(obs)
    if feats.size + 1 != model.weights.size:
        raise ValueError(
            f"feature length {feats.size} does not match model with {model.weights.size - 1} feature weights"
        )
    raw = float(feats @ model.weights[:-1] + model.weights[-1])
    return min(1.0, max(0.0, raw))


def nearest_frame_reward(demo_bank: Sequence[LabeledFrame], obs: Observation) -> float:
    """Label of the demo frame nearest in feature space; ties take the lowest index."""
    if not demo_bank:
        raise DataError("the demo bank is empty")
    feats = render_features(obs)
    bank = np.stack([f.features for f in demo_bank])
    if bank.shape[1] != feats.size:
        raise ValueError("bank feature length does not match the observation")
    dists = np.linalg.norm(bank - feats[None, :], axis=1)
    return demo_bank[int(np.argmin(dists))].label


class FrameBankScorer:
    """Prestacked nearest-frame lookup, for the hot path of reward ablations."""

    def __init__(self, demo_bank: Sequence[LabeledFrame]):
        if not demo_bank:
            raise DataError("the demo bank is empty")
        self.features = np.stack([f.features for f in demo_bank])
        self.labels = np.array([f.label for f in demo_bank])

    @classmethod
    def from_arrays(cls, features: np.ndarray, labels: np.ndarray) -> "FrameBankScorer":
        scorer = cls.__new__(cls)
        scorer.features = np.asarray(features, dtype=float)
        scorer.labels = np.asarray(labels, dtype=float)
        if scorer.features.ndim != 2 or scorer.features.shape[0] != scorer.labels.size:
            raise ValueError("features and labels must align")
        return scorer

    def __call__(self, obs: Observation) -> float:
        diff = self.features - render_features(obs)
        d2 = np.einsum("nd,nd->n", diff, diff)
        return float(self.labels[int(np.argmin(d2))])


def model_to_json(model: RewardModel) -> str:
    return json.dumps({
        "task_kind": model.task_kind,
        "ridge_lambda": model.ridge_lambda,
        "weights": model.weights.tolist(),
    })


def model_from_json(text: str) -> RewardModel:
    doc = json.loads(text)
    return RewardModel(
        task_kind=doc["task_kind"],
        weights=np.asarray(doc["weights"], dtype=float),
        ridge_lambda=doc["ridge_lambda"],
    )


def save_model(model: RewardModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> RewardModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
