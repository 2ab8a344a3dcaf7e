"""Demo generation, seeded episodes, paired benchmarks, sweeps, and ablations.

Every comparison is paired: each arm replays the same derived episode seeds,
so arm differences are differences in behavior, not in luck. Reports carry no
wall-clock timestamps, which keeps re-runs byte-identical regardless of how
many worker processes executed the episodes. REASONER_THREADS caps workers.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .actions import Action, MAX_CHUNK_LEN
from .errors import DataError
from .kde import KdePrior, fit_kde
from .policies import DriftPolicy, ExpertPolicy
from .records import EpisodeResult, Trajectory, action_matrix, read_trajectories, write_trajectories
from .reward import (
    FrameBankScorer,
    LabeledFrame,
    RewardModel,
    downsample,
    fit_reward,
    label_progress,
    predict_reward,
)
from .search import SearchConfig, act
from .seeding import derive_seed
from .world import Observation, Stack, TaskSpec, imperfect_step, is_success, reset, step

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PolicyParams:
    """Drift-policy knobs for the benchmarked base policy."""

    eta: float = 0.004
    sigma: float = 0.005
    chunk_len: int = 1

    def __post_init__(self) -> None:
        if self.eta < 0 or self.sigma < 0:
            raise ValueError("eta and sigma must be non-negative")
        if not 1 <= self.chunk_len <= MAX_CHUNK_LEN:
            raise ValueError(f"chunk_len must be in [1, {MAX_CHUNK_LEN}]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """One experiment: a task, a policy, search knobs, and evaluation scale."""

    task: TaskSpec = dataclasses.field(default_factory=lambda: TaskSpec(kind=Stack()))
    policy: PolicyParams = dataclasses.field(default_factory=PolicyParams)
    search: SearchConfig = dataclasses.field(default_factory=SearchConfig)
    n_episodes: int = 200
    base_seed: int = 0
    demo_count: int = 50
    demo_seed: int = 7
    # calibrated pipeline defaults: a fixed prior bandwidth matched to the
    # delta scale (the rule-based bandwidths are inflated by the binary grip
    # channel), and a strong ridge so the reward field stays smooth off the
    # demo manifold
    prior_bandwidth: str | float = 0.01
    reward_stride: int = 4
    ridge_lambda: float = 1.0
    alphas: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    epsilons: tuple[float, ...] = (0.0, 0.005, 0.01, 0.02, 0.05)

    def __post_init__(self) -> None:
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        if self.demo_count < 1:
            raise ValueError("demo_count must be >= 1")
        if isinstance(self.prior_bandwidth, str):
            if self.prior_bandwidth not in ("scott", "silverman"):
                raise ValueError("prior_bandwidth must be positive or scott/silverman")
        elif not self.prior_bandwidth > 0:
            raise ValueError("prior_bandwidth must be positive or scott/silverman")
        if self.reward_stride < 1:
            raise ValueError("reward_stride must be >= 1")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be non-negative")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))

    def to_dict(self) -> dict:
        return {
            "task": self.task.to_dict(),
            "policy": self.policy.to_dict(),
            "search": self.search.to_dict(),
            "bench": {"n_episodes": self.n_episodes, "base_seed": self.base_seed},
            "demos": {"n": self.demo_count, "seed": self.demo_seed},
            "prior": {"bandwidth": self.prior_bandwidth},
            "reward": {"stride": self.reward_stride, "ridge_lambda": self.ridge_lambda},
            "sweeps": {"alphas": list(self.alphas), "epsilons": list(self.epsilons)},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        bench = doc.get("bench", {})
        demos = doc.get("demos", {})
        prior = doc.get("prior", {})
        rew = doc.get("reward", {})
        sweeps = doc.get("sweeps", {})
        defaults = cls()
        return cls(
            task=TaskSpec.from_dict(doc["task"]) if "task" in doc else TaskSpec(kind=Stack()),
            policy=PolicyParams(**doc.get("policy", {})),
            search=SearchConfig.from_dict(doc.get("search", {})),
            n_episodes=bench.get("n_episodes", defaults.n_episodes),
            base_seed=bench.get("base_seed", defaults.base_seed),
            demo_count=demos.get("n", defaults.demo_count),
            demo_seed=demos.get("seed", defaults.demo_seed),
            prior_bandwidth=prior.get("bandwidth", defaults.prior_bandwidth),
            reward_stride=rew.get("stride", defaults.reward_stride),
            ridge_lambda=rew.get("ridge_lambda", defaults.ridge_lambda),
            alphas=tuple(sweeps.get("alphas", defaults.alphas)),
            epsilons=tuple(sweeps.get("epsilons", defaults.epsilons)),
        )


def episode_seeds(config: RunConfig) -> list[int]:
    """The shared per-episode seeds every arm replays."""
    return [derive_seed(config.base_seed, "episode", i) for i in range(config.n_episodes)]


def generate_demos(task: TaskSpec, n: int, seed: int,
                   demos_path: str | Path, failures_path: str | Path) -> dict:
    """Run the scripted expert n times; split episodes by outcome.

    Successes go to ``demos_path`` and drive prior/reward fitting; failures
    are recorded to ``failures_path`` for inspection but are never labeled.
    """
    expert = ExpertPolicy(chunk_len=1)
    kept: list[Trajectory] = []
    failed: list[Trajectory] = []
    for i in range(n):
        ep_seed = derive_seed(seed, "demo", i)
        expert.reset(ep_seed)
        obs = reset(task, ep_seed)
        frames = []
        steps = 0
        success = is_success(obs)
        while not success and steps < task.horizon:
            a = expert.propose(obs)[0]
            frames.append((obs, a))
            obs = step(obs, a)
            steps += 1
            success = is_success(obs)
        # keep the terminal state as a zero-action frame so progress 1.0
        # is anchored at the state that actually completed the task
        frames.append((obs, Action.zero()))
        traj = Trajectory(task.task_id, tuple(frames), success, ep_seed)
        (kept if success else failed).append(traj)
    write_trajectories(demos_path, kept)
    write_trajectories(failures_path, failed)
    if not kept:
        raise DataError("the expert produced no successful demonstrations")
    return {"attempted": n, "kept": len(kept), "failed": len(failed)}


def load_demos(path: str | Path) -> list[Trajectory]:
    trajs = read_trajectories(path, Observation.from_dict)
    if not trajs:
        raise DataError(f"no trajectories in {path}")
    return trajs


def demo_prior(trajs: Sequence[Trajectory], chunk_len: int = 1,
               bandwidth: str | float = "scott") -> KdePrior:
    return fit_kde(action_matrix(trajs, chunk_len), bandwidth)


def demo_reward_data(trajs: Sequence[Trajectory], stride: int) -> list[LabeledFrame]:
    data: list[LabeledFrame] = []
    for traj in trajs:
        if not traj.success:
            continue  # failed rollouts carry no usable progress signal
        data.extend(label_progress(downsample(traj, stride)))
    if not data:
        raise DataError("no successful demonstrations to label")
    return data


def demo_reward_model(trajs: Sequence[Trajectory], stride: int,
                      ridge_lambda: float, task_kind: str) -> RewardModel:
    return fit_reward(demo_reward_data(trajs, stride), ridge_lambda, task_kind=task_kind)


def run_episode(
    config: RunConfig,
    episode_seed: int,
    use_reasoner: bool,
    prior: KdePrior | None = None,
    reward_fn: Callable[[Observation], float] | None = None,
    search: SearchConfig | None = None,
) -> EpisodeResult:
    """One seeded episode; the reasoner arm needs a prior and a reward scorer."""
    cfg = search if search is not None else config.search
    if use_reasoner and (prior is None or reward_fn is None):
        raise ValueError("the reasoner arm needs a fitted prior and reward scorer")
    t0 = time.perf_counter()
    policy = DriftPolicy(eta=config.policy.eta, sigma=config.policy.sigma,
                         chunk_len=config.policy.chunk_len)
    policy.reset(episode_seed)
    obs = reset(config.task, episode_seed)
    if use_reasoner:
        eps = cfg.epsilon_model
        if eps == 0.0:
            world_fn = step
        else:
            model_seed = derive_seed(episode_seed, "model")
            world_fn = lambda o, a: imperfect_step(o, a, eps, model_seed)  # noqa: E731

    steps = 0
    invocations = 0
    success = is_success(obs)
    while not success and steps < config.task.horizon:
        if use_reasoner:
            chunk = act(obs, policy, prior, world_fn, reward_fn, cfg,
                        invocations, derive_seed(episode_seed, "search", invocations))
        else:
            chunk = policy.propose(obs)
        invocations += 1
        for a in chunk:
            obs = step(obs, a)
            steps += 1
            success = is_success(obs)
            if success or steps >= config.task.horizon:
                break
    if reward_fn is not None:
        final_reward = min(1.0, max(0.0, float(reward_fn(obs))))
    else:
        final_reward = 1.0 if success else 0.0
    return EpisodeResult(
        task_id=config.task.task_id,
        success=success,
        steps_taken=steps,
        final_reward=final_reward,
        wall_time=time.perf_counter() - t0,
    )


@dataclasses.dataclass(frozen=True)
class _EpisodeJob:
    config: RunConfig
    search: SearchConfig
    episode_seed: int
    use_reasoner: bool
    prior: KdePrior | None
    reward_model: RewardModel | None
    bank_features: np.ndarray | None = None
    bank_labels: np.ndarray | None = None
    reward_kind: str = "model"  # "model" | "nearest"


def _job_reward_fn(job: _EpisodeJob) -> Callable[[Observation], float] | None:
    if job.reward_kind == "nearest":
        scorer = FrameBankScorer.from_arrays(job.bank_features, job.bank_labels)
        return scorer
    if job.reward_model is None:
        return None
    model = job.reward_model
    return lambda obs: predict_reward(model, obs)


def _run_job(job: _EpisodeJob) -> EpisodeResult:
    return run_episode(job.config, job.episode_seed, job.use_reasoner,
                       prior=job.prior, reward_fn=_job_reward_fn(job), search=job.search)


def resolve_workers(requested: int | None = None) -> int:
    """Worker process count; the REASONER_THREADS env var is a hard cap."""
    workers = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("REASONER_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def _run_jobs(jobs: list[_EpisodeJob], workers: int | None) -> list[EpisodeResult]:
    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    chunk = max(1, len(jobs) // (n_workers * 4))
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_run_job, jobs, chunksize=chunk))


@dataclasses.dataclass(frozen=True)
class ArmResult:
    """All paired episodes of one arm, in seed order."""

    arm: str
    alpha: float
    epsilon: float
    seeds: tuple[int, ...]
    episodes: tuple[EpisodeResult, ...]

    def __post_init__(self) -> None:
        if len(self.seeds) != len(self.episodes):
            raise ValueError("seeds and episodes must align")

    @property
    def n(self) -> int:
        return len(self.episodes)

    @property
    def success_rate(self) -> float:
        return sum(1 for e in self.episodes if e.success) / self.n

    @property
    def mean_steps(self) -> float:
        return sum(e.steps_taken for e in self.episodes) / self.n

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "success_rate": self.success_rate,
            "n": self.n,
            "mean_steps": self.mean_steps,
            "episodes": [{"seed": s, **e.to_record()} for s, e in zip(self.seeds, self.episodes)],
        }

    def csv_row(self) -> str:
        return ",".join([self.arm, repr(self.alpha), repr(self.epsilon),
                         repr(self.success_rate), str(self.n), repr(self.mean_steps)])


CSV_HEADER = "arm,alpha,epsilon,success_rate,n,mean_steps"


@dataclasses.dataclass(frozen=True)
class BenchReport:
    """A set of paired arms plus the config that produced them.

    ``wall_time`` is informational only and never serialized: reports must be
    byte-identical across re-runs and worker counts.
    """

    kind: str
    config: RunConfig
    arms: tuple[ArmResult, ...]
    wall_time: float = 0.0

    def arm(self, name: str, **match: float) -> ArmResult:
        for a in self.arms:
            if a.arm == name and all(getattr(a, k) == v for k, v in match.items()):
                return a
        raise KeyError(f"no arm {name!r} matching {match}")

    @property
    def paired_diff(self) -> float | None:
        names = [a.arm for a in self.arms]
        if "baseline" in names and "reasoner" in names and names.count("reasoner") == 1:
            return self.arm("reasoner").success_rate - self.arm("baseline").success_rate
        return None

    def to_json_dict(self) -> dict:
        doc: dict = {
            "kind": self.kind,
            "config": self.config.to_dict(),
            "arms": [a.to_dict() for a in self.arms],
        }
        diff = self.paired_diff
        if diff is not None:
            doc["paired_diff"] = diff
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER, *[a.csv_row() for a in self.arms]]) + "\n"


def write_report(report: BenchReport, json_path: str | Path, csv_path: str | Path) -> None:
    Path(json_path).write_text(report.to_json() + "\n", encoding="utf-8")
    Path(csv_path).write_text(report.to_csv(), encoding="utf-8")


def _arm(config: RunConfig, name: str, use_reasoner: bool, prior: KdePrior | None,
         reward_model: RewardModel | None, search: SearchConfig, workers: int | None,
         reward_kind: str = "model", bank: tuple[np.ndarray, np.ndarray] | None = None) -> ArmResult:
    seeds = episode_seeds(config)
    jobs = [
        _EpisodeJob(config=config, search=search, episode_seed=s, use_reasoner=use_reasoner,
                    prior=prior if use_reasoner else None, reward_model=reward_model,
                    bank_features=bank[0] if bank else None,
                    bank_labels=bank[1] if bank else None,
                    reward_kind=reward_kind)
        for s in seeds
    ]
    episodes = _run_jobs(jobs, workers)
    alpha = search.alpha if use_reasoner else 1.0
    epsilon = search.epsilon_model if use_reasoner else 0.0
    arm = ArmResult(arm=name, alpha=alpha, epsilon=epsilon,
                    seeds=tuple(seeds), episodes=tuple(episodes))
    log.info("arm %-14s alpha=%.2f epsilon=%.3f success=%.3f n=%d",
             name, alpha, epsilon, arm.success_rate, arm.n)
    return arm


def run_benchmark(config: RunConfig, prior: KdePrior, reward_model: RewardModel,
                  workers: int | None = None) -> BenchReport:
    """Paired baseline-vs-reasoner evaluation over the same episode seeds."""
    if prior is None or reward_model is None:
        raise ValueError("run_benchmark needs a fitted prior and reward model")
    t0 = time.perf_counter()
    baseline = _arm(config, "baseline", False, None, reward_model, config.search, workers)
    reasoner = _arm(config, "reasoner", True, prior, reward_model, config.search, workers)
    return BenchReport(kind="benchmark", config=config, arms=(baseline, reasoner),
                       wall_time=time.perf_counter() - t0)


def sweep_alpha(config: RunConfig, prior: KdePrior, reward_model: RewardModel,
                alphas: Sequence[float] | None = None,
                workers: int | None = None) -> BenchReport:
    """Baseline plus one reasoner arm per alpha, all over the same seeds."""
    grid = tuple(alphas) if alphas is not None else config.alphas
    if not grid:
        raise ValueError("alpha grid must be non-empty")
    t0 = time.perf_counter()
    arms = [_arm(config, "baseline", False, None, reward_model, config.search, workers)]
    for a in grid:
        search = dataclasses.replace(config.search, alpha=float(a))
        arms.append(_arm(config, "reasoner", True, prior, reward_model, search, workers))
    return BenchReport(kind="alpha-sweep", config=config, arms=tuple(arms),
                       wall_time=time.perf_counter() - t0)


def ablate_sampling(config: RunConfig, prior: KdePrior, reward_model: RewardModel,
                    workers: int | None = None) -> BenchReport:
    """KDE expansion vs Gaussian-noise expansion at matched sigma and pool size."""
    t0 = time.perf_counter()
    kde_search = dataclasses.replace(config.search, sampler="kde")
    noise_search = dataclasses.replace(config.search, sampler="noise",
                                       noise_sigma=prior.bandwidth)
    arms = (
        _arm(config, "kde", True, prior, reward_model, kde_search, workers),
        _arm(config, "noise", True, prior, reward_model, noise_search, workers),
    )
    return BenchReport(kind="sampling-ablation", config=config, arms=arms,
                       wall_time=time.perf_counter() - t0)


def ablate_reward(config: RunConfig, prior: KdePrior, reward_model: RewardModel,
                  demo_bank: Sequence[LabeledFrame],
                  workers: int | None = None) -> BenchReport:
    """Learned linear reward vs nearest-demo-frame lookup, same seeds."""
    if not demo_bank:
        raise DataError("the demo bank is empty")
    t0 = time.perf_counter()
    bank = (np.stack([f.features for f in demo_bank]),
            np.array([f.label for f in demo_bank]))
    arms = (
        _arm(config, "regressor", True, prior, reward_model, config.search, workers),
        _arm(config, "nearest-frame", True, prior, None, config.search, workers,
             reward_kind="nearest", bank=bank),
    )
    return BenchReport(kind="reward-ablation", config=config, arms=arms,
                       wall_time=time.perf_counter() - t0)


def sweep_model_error(config: RunConfig, prior: KdePrior, reward_model: RewardModel,
                      epsilons: Sequence[float] | None = None,
                      workers: int | None = None) -> BenchReport:
    """Baseline plus one reasoner arm per world-model error level."""
    grid = tuple(epsilons) if epsilons is not None else config.epsilons
    if not grid:
        raise ValueError("epsilon grid must be non-empty")
    t0 = time.perf_counter()
    arms = [_arm(config, "baseline", False, None, reward_model, config.search, workers)]
    for eps in grid:
        search = dataclasses.replace(config.search, epsilon_model=float(eps))
        arms.append(_arm(config, "reasoner", True, prior, reward_model, search, workers))
    return BenchReport(kind="model-error-sweep", config=config, arms=tuple(arms),
                       wall_time=time.perf_counter() - t0)
