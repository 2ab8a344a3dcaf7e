"""Demo pipeline, paired episodes, reports, and the sweep protocols."""

from __future__ import annotations

import dataclasses
import json

import pytest

import lookahead as la
from lookahead.bench import (
    CSV_HEADER,
    ArmResult,
    BenchReport,
    PolicyParams,
    episode_seeds,
    resolve_workers,
    write_report,
)
from lookahead.errors import DataError
from lookahead.records import EpisodeResult


def _tiny_config(run_config, n=6, **search_kw):
    search = dataclasses.replace(run_config.search, pool_size=32,
                                 visit_budget=16, max_depth=2, **search_kw)
    return dataclasses.replace(run_config, n_episodes=n, search=search)


def _reward_fn(reward_model):
    return lambda obs: la.predict_reward(reward_model, obs)


# --- config and seeds -------------------------------------------------------


def test_run_config_validation():
    with pytest.raises(ValueError):
        la.RunConfig(n_episodes=0)
    with pytest.raises(ValueError):
        la.RunConfig(demo_count=0)
    with pytest.raises(ValueError):
        la.RunConfig(prior_bandwidth="gauss")
    with pytest.raises(ValueError):
        la.RunConfig(prior_bandwidth=-0.1)
    with pytest.raises(ValueError):
        la.RunConfig(reward_stride=0)
    with pytest.raises(ValueError):
        la.RunConfig(ridge_lambda=-1.0)
    with pytest.raises(ValueError):
        PolicyParams(eta=-0.1)


def test_run_config_dict_round_trip(run_config):
    assert la.RunConfig.from_dict(run_config.to_dict()) == run_config
    # partial documents fall back to defaults field by field
    partial = la.RunConfig.from_dict({"bench": {"n_episodes": 9}})
    assert partial.n_episodes == 9
    assert partial.task == run_config.task
    assert partial.prior_bandwidth == run_config.prior_bandwidth


def test_episode_seeds_are_stable_and_distinct(run_config):
    seeds = episode_seeds(run_config)
    assert seeds == episode_seeds(run_config)
    assert len(set(seeds)) == run_config.n_episodes
    other = dataclasses.replace(run_config, base_seed=1)
    assert episode_seeds(other) != seeds


# --- demo generation --------------------------------------------------------


def test_generate_demos_expert_competence(demo_files, run_config):
    _, _, summary = demo_files
    assert summary["attempted"] == run_config.demo_count
    assert summary["kept"] >= 45  # the scripted expert rarely misses
    assert len(la.load_demos(demo_files[0])) == summary["kept"]


def test_generate_demos_kept_end_in_success(demos, stack_task):
    for traj in demos:
        assert traj.success
        last_obs = traj.frames[-1][0]
        assert la.is_success(last_obs)
        assert traj.frames[-1][1] == la.Action.zero()  # terminal anchor frame


def test_generate_demos_byte_identical(tmp_path, stack_task):
    paths = []
    for tag in ("a", "b"):
        d, f = tmp_path / f"{tag}.jsonl", tmp_path / f"{tag}_fail.jsonl"
        stats = la.generate_demos(stack_task, 10, 3, d, f)
        assert stats["attempted"] == 10
        assert stats["kept"] + stats["failed"] == 10
        paths.append((d, f))
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
    assert paths[0][1].read_bytes() == paths[1][1].read_bytes()


def test_generate_demos_failure_split(tmp_path):
    # an impossible horizon forces failures into the failure file
    task = la.TaskSpec(kind=la.Stack(), horizon=3)
    d, f = tmp_path / "demos.jsonl", tmp_path / "failures.jsonl"
    with pytest.raises(DataError):
        la.generate_demos(task, 5, 0, d, f)
    failures = la.read_trajectories(f, la.Observation.from_dict)
    assert len(failures) == 5
    assert not any(t.success for t in failures)


def test_demo_reward_data_skips_failures(demos, run_config):
    data = la.demo_reward_data(demos, run_config.reward_stride)
    assert all(0.0 <= f.label <= 1.0 for f in data)
    n_success = sum(1 for t in demos if t.success)
    assert len(data) >= n_success * 2  # at least first+last frame per demo


# --- run_episode ------------------------------------------------------------


def test_run_episode_clean_policy_succeeds(run_config):
    clean = dataclasses.replace(run_config, policy=PolicyParams(eta=0.0, sigma=0.0))
    result = la.run_episode(clean, episode_seeds(clean)[0], use_reasoner=False)
    assert result.success
    assert result.final_reward == 1.0


def test_run_episode_deterministic(run_config):
    seed = episode_seeds(run_config)[1]
    a = la.run_episode(run_config, seed, use_reasoner=False)
    b = la.run_episode(run_config, seed, use_reasoner=False)
    assert a.to_record() == b.to_record()  # wall_time is informational only


def test_run_episode_alpha_one_matches_baseline(run_config, prior, reward_model):
    cfg = _tiny_config(run_config, alpha=1.0)
    fn = _reward_fn(reward_model)
    for seed in episode_seeds(cfg)[:4]:
        base = la.run_episode(cfg, seed, use_reasoner=False)
        mixed = la.run_episode(cfg, seed, use_reasoner=True, prior=prior,
                               reward_fn=fn)
        assert mixed.success == base.success
        assert mixed.steps_taken == base.steps_taken


def test_run_episode_reasoner_needs_prior(run_config):
    with pytest.raises(ValueError):
        la.run_episode(run_config, 1, use_reasoner=True)


def test_run_episode_reasoner_deterministic(run_config, prior, reward_model):
    cfg = _tiny_config(run_config)
    fn = _reward_fn(reward_model)
    seed = episode_seeds(cfg)[2]
    a = la.run_episode(cfg, seed, use_reasoner=True, prior=prior, reward_fn=fn)
    b = la.run_episode(cfg, seed, use_reasoner=True, prior=prior, reward_fn=fn)
    assert a.success == b.success and a.steps_taken == b.steps_taken
    assert a.final_reward == b.final_reward


# --- results and reports ----------------------------------------------------


def _fake_arm(name, flags, alpha=1.0):
    eps = tuple(EpisodeResult(task_id="stack", success=s, steps_taken=10 + i,
                              final_reward=1.0 if s else 0.3, wall_time=0.5)
                for i, s in enumerate(flags))
    return ArmResult(arm=name, alpha=alpha, epsilon=0.0,
                     seeds=tuple(range(len(flags))), episodes=eps)


def test_arm_result_exact_fraction():
    arm = _fake_arm("baseline", [True, False, True, False, False, True, True, True])
    assert arm.success_rate == 5 / 8
    assert arm.n == 8
    assert arm.mean_steps == sum(10 + i for i in range(8)) / 8


def test_arm_result_alignment_enforced():
    with pytest.raises(ValueError):
        ArmResult(arm="x", alpha=1.0, epsilon=0.0, seeds=(1, 2),
                  episodes=(EpisodeResult("stack", True, 5, 1.0, 0.1),))


def test_report_json_has_no_wall_time(run_config):
    arms = (_fake_arm("baseline", [True, False]),
            _fake_arm("reasoner", [True, True], alpha=0.6))
    report = BenchReport(kind="benchmark", config=run_config, arms=arms,
                         wall_time=123.4)
    doc = json.loads(report.to_json())
    assert "wall_time" not in json.dumps(doc)
    assert doc["paired_diff"] == pytest.approx(0.5)
    assert doc["arms"][0]["episodes"][0].keys() >= {"seed", "success", "steps_taken"}


def test_report_csv_shape(run_config):
    arms = (_fake_arm("baseline", [True, False, True]),
            _fake_arm("reasoner", [True, True, True], alpha=0.6))
    report = BenchReport(kind="benchmark", config=run_config, arms=arms)
    lines = report.to_csv().splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("baseline,1.0,0.0,")
    assert lines[2].startswith("reasoner,0.6,0.0,")
    # repr floats round-trip exactly
    assert float(lines[1].split(",")[3]) == 2 / 3


def test_report_arm_lookup(run_config):
    arms = (_fake_arm("baseline", [True]),
            _fake_arm("reasoner", [True], alpha=0.2),
            _fake_arm("reasoner", [False], alpha=0.8))
    report = BenchReport(kind="alpha-sweep", config=run_config, arms=arms)
    assert report.arm("reasoner", alpha=0.8).success_rate == 0.0
    with pytest.raises(KeyError):
        report.arm("reasoner", alpha=0.5)
    assert report.paired_diff is None  # ambiguous: two reasoner arms


def test_write_report_round_trip(tmp_path, run_config):
    arms = (_fake_arm("baseline", [True, False]),)
    report = BenchReport(kind="benchmark", config=run_config, arms=arms)
    jp, cp = tmp_path / "report.json", tmp_path / "report.csv"
    write_report(report, jp, cp)
    assert json.loads(jp.read_text())["kind"] == "benchmark"
    assert cp.read_text() == report.to_csv()


# --- workers and reproducibility ---------------------------------------------


def test_resolve_workers_env_cap(monkeypatch):
    monkeypatch.delenv("REASONER_THREADS", raising=False)
    assert resolve_workers(3) == 3
    monkeypatch.setenv("REASONER_THREADS", "2")
    assert resolve_workers(8) == 2
    assert resolve_workers(1) == 1
    monkeypatch.setenv("REASONER_THREADS", "0")
    assert resolve_workers(8) == 1  # floor at one worker
    monkeypatch.delenv("REASONER_THREADS")
    assert resolve_workers() >= 1


def test_benchmark_byte_identical_across_workers(run_config, prior, reward_model):
    cfg = _tiny_config(run_config, n=4)
    serial = la.run_benchmark(cfg, prior, reward_model, workers=1)
    parallel = la.run_benchmark(cfg, prior, reward_model, workers=2)
    assert serial.to_json() == parallel.to_json()
    assert serial.to_csv() == parallel.to_csv()


def test_benchmark_rerun_byte_identical(run_config, prior, reward_model):
    cfg = _tiny_config(run_config, n=4)
    a = la.run_benchmark(cfg, prior, reward_model, workers=1)
    b = la.run_benchmark(cfg, prior, reward_model, workers=1)
    assert a.to_json() == b.to_json()


# --- sweeps and ablations (structure at tiny n) -------------------------------


def test_benchmark_report_structure(run_config, prior, reward_model):
    cfg = _tiny_config(run_config, n=4)
    report = la.run_benchmark(cfg, prior, reward_model, workers=1)
    assert [a.arm for a in report.arms] == ["baseline", "reasoner"]
    assert report.kind == "benchmark"
    assert all(a.n == 4 for a in report.arms)
    assert report.paired_diff == (report.arm("reasoner").success_rate
                                  - report.arm("baseline").success_rate)
    base = report.arm("baseline")
    assert base.success_rate == sum(e.success for e in base.episodes) / base.n


def test_sweep_alpha_structure(run_config, prior, reward_model):
    cfg = _tiny_config(run_config, n=3)
    report = la.sweep_alpha(cfg, prior, reward_model, alphas=(0.0, 1.0), workers=1)
    assert report.kind == "alpha-sweep"
    assert [a.arm for a in report.arms] == ["baseline", "reasoner", "reasoner"]
    assert [a.alpha for a in report.arms] == [1.0, 0.0, 1.0]
    # the alpha=1.0 reasoner arm must replicate the baseline seed by seed
    base = report.arm("baseline")
    degenerate = report.arm("reasoner", alpha=1.0)
    for e0, e1 in zip(base.episodes, degenerate.episodes):
        assert e0.success == e1.success
        assert e0.steps_taken == e1.steps_taken


def test_ablate_sampling_structure(run_config, prior, reward_model):
    cfg = _tiny_config(run_config, n=3)
    report = la.ablate_sampling(cfg, prior, reward_model, workers=1)
    assert report.kind == "sampling-ablation"
    assert [a.arm for a in report.arms] == ["kde", "noise"]
    assert all(a.n == 3 for a in report.arms)


def test_ablate_reward_structure(run_config, prior, reward_model, demos):
    cfg = _tiny_config(run_config, n=3)
    bank = la.demo_reward_data(demos, cfg.reward_stride)
    report = la.ablate_reward(cfg, prior, reward_model, bank, workers=1)
    assert report.kind == "reward-ablation"
    assert [a.arm for a in report.arms] == ["regressor", "nearest-frame"]
    with pytest.raises(DataError):
        la.ablate_reward(cfg, prior, reward_model, [], workers=1)


def test_sweep_model_error_structure(run_config, prior, reward_model):
    cfg = _tiny_config(run_config, n=3)
    report = la.sweep_model_error(cfg, prior, reward_model,
                                  epsilons=(0.0, 0.02), workers=1)
    assert report.kind == "model-error-sweep"
    assert [a.arm for a in report.arms] == ["baseline", "reasoner", "reasoner"]
    assert [a.epsilon for a in report.arms] == [0.0, 0.0, 0.02]


def test_sweep_rejects_empty_grids(run_config, prior, reward_model):
    with pytest.raises(ValueError):
        la.sweep_alpha(run_config, prior, reward_model, alphas=())
    with pytest.raises(ValueError):
        la.sweep_model_error(run_config, prior, reward_model, epsilons=())
