"""Shared fixtures: one default demo corpus, prior, and reward model.

Everything is session-scoped because the artifacts are deterministic: the
same seeds always produce the same files, so tests may share them freely.
"""

from __future__ import annotations

import pytest

import lookahead as la


@pytest.fixture(scope="session")
def stack_task() -> la.TaskSpec:
    return la.TaskSpec(kind=la.Stack())


@pytest.fixture(scope="session")
def run_config() -> la.RunConfig:
    # the shipped defaults: Stack, 200 episodes, alpha 0.6
    return la.RunConfig()


@pytest.fixture(scope="session")
def demo_files(tmp_path_factory, run_config):
    root = tmp_path_factory.mktemp("demos")
    demos = root / "demos.jsonl"
    failures = root / "failures.jsonl"
    summary = la.generate_demos(run_config.task, run_config.demo_count,
                                run_config.demo_seed, demos, failures)
    return demos, failures, summary


@pytest.fixture(scope="session")
def demos(demo_files):
    return la.load_demos(demo_files[0])


@pytest.fixture(scope="session")
def prior(demos, run_config) -> la.KdePrior:
    return la.demo_prior(demos, chunk_len=run_config.policy.chunk_len,
                         bandwidth=run_config.prior_bandwidth)


@pytest.fixture(scope="session")
def reward_model(demos, run_config) -> la.RewardModel:
    return la.demo_reward_model(demos, run_config.reward_stride,
                                run_config.ridge_lambda, run_config.task.task_id)
