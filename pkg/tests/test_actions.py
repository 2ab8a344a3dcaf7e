"""Action arithmetic: bounds, blending, distances, chunk flattening."""

from __future__ import annotations

import math

import numpy as np
import pytest

from lookahead.actions import (
    ACTION_DIM,
    DELTA_BOUND,
    Action,
    ActionChunk,
    action_bounds,
    blend_actions,
    blend_vectors,
    euclidean_distance,
    flatten_chunk,
    unflatten_chunk,
)


def test_action_validates_bounds():
    Action((0.05, -0.05, 0.0), 1.0)  # boundary values are legal
    with pytest.raises(ValueError):
        Action((0.051, 0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        Action((0.0, 0.0, 0.0), 1.5)
    with pytest.raises(ValueError):
        Action((float("nan"), 0.0, 0.0), 0.0)


def test_grip_threshold():
    assert Action((0, 0, 0), 0.5).grip_closed
    assert not Action((0, 0, 0), 0.49).grip_closed


def test_vector_round_trip():
    a = Action((0.01, -0.02, 0.03), 0.7)
    assert Action.from_vector(a.to_vector()) == a


def test_blend_alpha_one_returns_proposal_exactly():
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = Action(tuple(rng.uniform(-0.05, 0.05, 3)), float(rng.uniform(0, 1)))
        r = Action(tuple(rng.uniform(-0.05, 0.05, 3)), float(rng.uniform(0, 1)))
        assert blend_actions(v, r, 1.0) == v
        assert blend_actions(v, r, 0.0) == r


def test_blend_hand_value():
    v = Action((0.04, 0.0, 0.0), 0.0)
    r = Action((0.00, 0.02, 0.0), 0.0)
    out = blend_actions(v, r, 0.6)
    assert abs(out.delta[0] - 0.024) < 1e-9
    assert abs(out.delta[1] - 0.008) < 1e-9
    assert abs(out.delta[2]) < 1e-9


def test_blend_stays_on_segment_without_clamping():
    rng = np.random.default_rng(1)
    for _ in range(100):
        v = rng.uniform(-0.05, 0.05, 3)
        r = rng.uniform(-0.05, 0.05, 3)
        alpha = float(rng.uniform(0, 1))
        out = blend_actions(Action(tuple(v), 0.2), Action(tuple(r), 0.8), alpha)
        expect = alpha * v + (1 - alpha) * r
        assert np.allclose(out.delta, expect, atol=1e-12)
        assert abs(out.grip - (alpha * 0.2 + (1 - alpha) * 0.8)) < 1e-12


def test_blend_rejects_bad_alpha():
    a = Action.zero()
    with pytest.raises(ValueError):
        blend_actions(a, a, -0.1)
    with pytest.raises(ValueError):
        blend_actions(a, a, 1.1)


def test_blend_vectors_shape_check():
    with pytest.raises(ValueError):
        blend_vectors(np.zeros(4), np.zeros(8), 0.5)


def test_distance_identity_and_345():
    a = np.zeros(4)
    assert euclidean_distance(a, a) == 0.0
    b = np.array([0.03, 0.04, 0.0, 0.0])
    assert abs(euclidean_distance(a, b) - 0.05) < 1e-12


def test_distance_symmetry_and_triangle():
    rng = np.random.default_rng(2)
    for _ in range(100):
        a, b, c = rng.normal(size=(3, 4))
        assert euclidean_distance(a, b) == euclidean_distance(b, a)
        assert euclidean_distance(a, c) <= (
            euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12
        )


def test_distance_shape_mismatch():
    with pytest.raises(ValueError):
        euclidean_distance(np.zeros(4), np.zeros(8))


def test_chunk_length_limits():
    one = Action.zero()
    ActionChunk((one,) * 8)
    with pytest.raises(ValueError):
        ActionChunk(())
    with pytest.raises(ValueError):
        ActionChunk((one,) * 9)


def test_flatten_ordering_and_round_trip():
    a = Action((0.01, 0.02, 0.03), 0.4)
    b = Action((-0.01, -0.02, -0.03), 0.9)
    chunk = ActionChunk((a, b))
    flat = flatten_chunk(chunk)
    assert flat.shape == (8,)
    assert np.array_equal(flat[:4], a.to_vector())
    assert np.array_equal(flat[4:], b.to_vector())
    assert unflatten_chunk(flat, 2) == chunk

    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        actions = tuple(
            Action(tuple(rng.uniform(-0.05, 0.05, 3)), float(rng.uniform(0, 1)))
            for _ in range(n)
        )
        c = ActionChunk(actions)
        assert unflatten_chunk(flatten_chunk(c), n) == c


def test_action_bounds_layout():
    lo, hi = action_bounds(2)
    assert lo.shape == hi.shape == (2 * ACTION_DIM,)
    assert lo[0] == -DELTA_BOUND and hi[0] == DELTA_BOUND
    assert lo[3] == 0.0 and hi[3] == 1.0  # grip channel
    assert math.isclose(hi[4], DELTA_BOUND)
