"""PPO training on the placement environment.

Rollouts are collected from a batch of episodes stepped in lockstep, GAE runs
over the flattened transitions with terminal bootstraps of zero, and updates
use the clipped surrogate with per-update advantage normalization.  The value
head trains on its own learning rate and its gradient stays off the shared
trunk, which is driven by the policy objective alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import env as envmod
from .env import EpisodeConfig, Observation
from .nn import (
    AdamState,
    NetConfig,
    PolicyParams,
    adam_step,
    backward,
    forward,
    gaussian_entropy,
    gaussian_logprob,
    gaussian_logprob_grads,
    sample_action,
    zero_grads,
)

ConfigSampler = Callable[[np.random.Generator], EpisodeConfig]


class TrainingDiverged(RuntimeError):
    """A parameter became non-finite during optimization."""


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    epochs: int = 1000
    episodes_per_update: int = 32
    minibatch_size: int = 256
    ppo_epochs_per_update: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError("lambda must be in [0, 1]")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be positive")


# --- advantage estimation -------------------------------------------------------


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward GAE recurrence over flat arrays with episode-final done flags.

    The value after a terminal step bootstraps to zero.  Returns are the
    lambda-returns advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError("rewards, values and dones must have equal length")
    n = len(rewards)
    advantages = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        next_value = values[t + 1] if (not dones[t] and t + 1 < n) else 0.0
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        advantages[t] = last
    return advantages, advantages + values


# --- losses ----------------------------------------------------------------------


def clipped_loss(
    logprob_new: np.ndarray,
    logprob_old: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
) -> float:
    """Mean clipped surrogate objective (to maximize)."""
    ratio = np.exp(logprob_new - logprob_old)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    return float(np.mean(np.minimum(surr1, surr2)))


def clipped_loss_grad(
    logprob_new: np.ndarray,
    logprob_old: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
) -> np.ndarray:
    """d(mean objective)/d logprob_new per sample; exactly zero in the clipped regimes."""
    ratio = np.exp(logprob_new - logprob_old)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    active = surr1 <= surr2
    return np.where(active, ratio * advantages, 0.0) / len(logprob_new)


def total_loss(policy_obj: float, value_loss: float, entropy: float, c_v: float, c_e: float) -> float:
    return -policy_obj + c_v * value_loss - c_e * entropy


# --- rollout collection ------------------------------------------------------------


@dataclass
class RolloutBuffer:
    obs_cur: np.ndarray
    obs_nxt: np.ndarray
    obs_grid: np.ndarray
    raw: np.ndarray
    logprob_old: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    episode_final_rewards: list[float] = field(default_factory=list)
    episode_lengths: list[int] = field(default_factory=list)
    episode_invalid: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass
class EvalStats:
    episodes: int
    mean_reward: float
    invalid_rate: float
    mean_episode_length: float
    wall_time_s: float

    def as_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "mean_reward": self.mean_reward,
            "invalid_rate": self.invalid_rate,
            "mean_episode_length": self.mean_episode_length,
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class EvalResult:
    stats: EvalStats
    layouts: list[tuple[EpisodeConfig, tuple]]  # (config, placed items) per episode


def _stack_obs(observations: list[Observation]):
    return (
        np.stack([o.current for o in observations]),
        np.stack([o.upcoming for o in observations]),
        np.stack([o.grid for o in observations]),
    )


def collect_rollouts(
    params: PolicyParams,
    sample_config: ConfigSampler,
    n_episodes: int,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> RolloutBuffer:
    """Run n_episodes to termination, stepping all live episodes in lockstep."""
    runs = []
    for _ in range(n_episodes):
        config = sample_config(rng)
        state, obs = envmod.reset(config)
        runs.append({"config": config, "state": state, "obs": obs, "traj": []})
    active = list(range(n_episodes))
    finals: dict[int, tuple[float, bool]] = {}
    while active:
        cur, nxt, grid = _stack_obs([runs[i]["obs"] for i in active])
        mu, logstd, value, _ = forward(params, cur, nxt, grid)
        if deterministic:
            raw = mu
            logprob = gaussian_logprob(mu, logstd, raw)
        else:
            raw, logprob = sample_action(mu, logstd, rng)
        next_active = []
        for row, i in enumerate(active):
            run = runs[i]
            out = envmod.step(run["config"], run["state"], raw[row])
            run["traj"].append(
                (run["obs"], raw[row], float(logprob[row]), out.reward, float(value[row]), out.done)
            )
            run["state"] = out.state
            if out.done:
                finals[i] = (out.reward, out.invalid)
            else:
                run["obs"] = envmod.observe(run["config"], out.state)
                next_active.append(i)
        active = next_active
    obs_all, raws, logps, rewards, values, dones = [], [], [], [], [], []
    ep_finals, ep_lengths, ep_invalid = [], [], []
    for i, run in enumerate(runs):
        for obs, raw_a, logp, reward, value, done in run["traj"]:
            obs_all.append(obs)
            raws.append(raw_a)
            logps.append(logp)
            rewards.append(reward)
            values.append(value)
            dones.append(done)
        final_reward, invalid = finals[i]
        ep_finals.append(final_reward)
        ep_lengths.append(len(run["traj"]))
        ep_invalid.append(invalid)
    cur, nxt, grid = _stack_obs(obs_all)
    return RolloutBuffer(
        obs_cur=cur,
        obs_nxt=nxt,
        obs_grid=grid,
        raw=np.stack(raws),
        logprob_old=np.array(logps),
        rewards=np.array(rewards),
        values=np.array(values),
        dones=np.array(dones, dtype=bool),
        episode_final_rewards=ep_finals,
        episode_lengths=ep_lengths,
        episode_invalid=ep_invalid,
    )


# --- training ------------------------------------------------------------------------


@dataclass
class TrainResult:
    params: PolicyParams
    metrics: list[dict]
    wall_time_s: float


def learning_rate_map(net: PolicyParams, cfg: TrainConfig) -> dict[str, float]:
    """Critic head trains at the critic rate; encoders, CNN and actor heads at the actor rate."""
    return {
        name: (cfg.lr_critic if name.startswith("value_") else cfg.lr_actor)
        for name in net.tensors
    }


def train(
    sample_config: ConfigSampler,
    cfg: TrainConfig,
    net_config: NetConfig | None = None,
    progress: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Run the full PPO loop; fully deterministic for a fixed seed and config."""
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    params = PolicyParams.initialize(net_config or NetConfig(), rng)
    adam = AdamState.for_params(params, learning_rate_map(params, cfg))
    metrics: list[dict] = []
    for epoch in range(cfg.epochs):
        buf = collect_rollouts(params, sample_config, cfg.episodes_per_update, rng)
        advantages, returns = compute_gae(buf.rewards, buf.values, buf.dones, cfg.gamma, cfg.lam)
        std = advantages.std()
        norm_adv = (advantages - advantages.mean()) / (std + 1e-8)
        n = len(buf)
        policy_objs, value_losses = [], []
        for _ in range(cfg.ppo_epochs_per_update):
            order = rng.permutation(n)
            for lo in range(0, n, cfg.minibatch_size):
                idx = order[lo : lo + cfg.minibatch_size]
                obj, v_loss = _update_minibatch(params, adam, cfg, buf, norm_adv, returns, idx)
                policy_objs.append(obj)
                value_losses.append(v_loss)
        row = {
            "epoch": epoch,
            "mean_reward": float(np.mean(buf.episode_final_rewards)),
            "p_loss": abs(float(np.mean(policy_objs))),
            "v_loss": float(np.mean(value_losses)),
        }
        metrics.append(row)
        if progress is not None:
            progress(row)
    return TrainResult(params=params, metrics=metrics, wall_time_s=time.perf_counter() - started)


def _update_minibatch(params, adam, cfg, buf, norm_adv, returns, idx) -> tuple[float, float]:
    mb = len(idx)
    mu, logstd, value, cache = forward(params, buf.obs_cur[idx], buf.obs_nxt[idx], buf.obs_grid[idx])
    logp_new = gaussian_logprob(mu, logstd, buf.raw[idx])
    adv = norm_adv[idx]
    obj = clipped_loss(logp_new, buf.logprob_old[idx], adv, cfg.clip_eps)
    dobj_dlogp = clipped_loss_grad(logp_new, buf.logprob_old[idx], adv, cfg.clip_eps)

    dlogp_dmu, dlogp_dlogstd = gaussian_logprob_grads(mu, logstd, buf.raw[idx])
    # actor minimizes -(objective + c_e * mean entropy)
    dmu = -dobj_dlogp[:, None] * dlogp_dmu
    dlogstd = -dobj_dlogp[:, None] * dlogp_dlogstd - cfg.entropy_coef / mb

    err = value - returns[idx]
    v_loss = float(np.mean(err * err))
    dvalue = cfg.value_coef * 2.0 * err / mb

    grads = backward(params, cache, dmu, dlogstd, dvalue, value_to_trunk=False)
    adam_step(params, grads, adam)
    if not params.all_finite():
        raise TrainingDiverged("non-finite parameter after optimizer step")
    return obj, v_loss


def evaluate(
    params: PolicyParams,
    sample_config: ConfigSampler,
    episodes: int,
    seed: int = 0,
    deterministic: bool = True,
) -> EvalResult:
    """Greedy (or sampled) evaluation; mean_reward averages each episode's final-step reward."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    finals, lengths, invalids = [], [], []
    layouts = []
    for _ in range(episodes):
        config = sample_config(rng)
        state, obs = envmod.reset(config)
        length = 0
        final_reward = 0.0
        invalid = False
        while not state.done:
            mu, logstd, _, _ = forward(params, obs.current, obs.upcoming, obs.grid)
            if deterministic:
                raw = mu[0]
            else:
                raw, _ = sample_action(mu, logstd, rng)
                raw = raw[0]
            out = envmod.step(config, state, raw)
            state = out.state
            length += 1
            final_reward = out.reward
            invalid = out.invalid
            if not state.done:
                obs = envmod.observe(config, state)
        finals.append(final_reward)
        lengths.append(length)
        invalids.append(invalid)
        layouts.append((config, state.placed))
    stats = EvalStats(
        episodes=episodes,
        mean_reward=float(np.mean(finals)),
        invalid_rate=float(np.mean(invalids)),
        mean_episode_length=float(np.mean(lengths)),
        wall_time_s=time.perf_counter() - started,
    )
    return EvalResult(stats=stats, layouts=layouts)
