"""Clipped-surrogate policy optimization with a centralized critic.

Decentralized actors consume per-vehicle observations; one critic consumes
the concatenated global state and provides the baseline for every agent's
generalized advantage estimate.  One episode feeds one update of several
epochs.  Two actor arrangements exist: one network per traffic class (the
class's vehicles share weights and their gradients are averaged) or one
network per vehicle.

Actor heads factorize the action: an in-slice subchannel head and a power
head, independent softmaxes whose joint log-probability is the sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    POWER_LEVELS_DBM,
    EpisodeMetrics,
    JointAction,
    PolicyMode,
    TrafficClass,
    obs_dim as obs_dim_of,
    state_dim as state_dim_of,
)
from ..env import EnvConfig, SidelinkEnv
from . import nets
from .nets import AdamOptimizer, MlpParams


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    lr: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip_norm: float = 0.5
    entropy_start: float = 0.05
    entropy_end: float = 0.001
    total_episodes: int = 3000
    anneal_episodes: int | None = None   # entropy anneal horizon; None = total_episodes
    epochs_per_update: int = 4
    value_loss_weight: float = 0.5
    actor_hidden: int = 128
    critic_hidden: int = 256
    advantage_norm_eps: float = 1e-8


def entropy_coef(cfg: TrainConfig, episode_index: int) -> float:
    """Linear anneal from entropy_start at episode 0 to entropy_end at the horizon."""
    horizon = cfg.anneal_episodes if cfg.anneal_episodes is not None else cfg.total_episodes
    frac = min(max(episode_index, 0) / horizon, 1.0)
    return cfg.entropy_start + (cfg.entropy_end - cfg.entropy_start) * frac


# ----------------------------------------------------------------- the bundle

@dataclass
class PolicyBundle:
    """Everything the joint policy needs: actors, critic, and the wiring."""

    mode: PolicyMode
    actors: list[MlpParams]
    actor_of: list[int]          # vehicle id -> index into actors
    sub_slice_of: list[range]    # vehicle id -> absolute subchannel slice
    actor_k_sub: list[int]       # actor index -> subchannel head width
    critic: MlpParams
    n_vehicles: int
    m_subchannels: int
    obs_dim: int
    state_dim: int

    def validate(self) -> None:
        expected = 2 if self.mode is PolicyMode.PER_CLASS else self.n_vehicles
        if len(self.actors) != expected:
            raise ValueError(f"{self.mode} expects {expected} actors, got {len(self.actors)}")
        for i, a in enumerate(self.actors):
            want = self.actor_k_sub[i] + len(POWER_LEVELS_DBM)
            if a.w2.shape[1] != want:
                raise ValueError(f"actor {i} head width {a.w2.shape[1]} != {want}")
        if self.critic.w1.shape[0] != self.state_dim:
            raise ValueError("critic input width mismatch")


def make_bundle(
    env_cfg: EnvConfig,
    mode: PolicyMode,
    cfg: TrainConfig,
    rng: np.random.Generator,
    zero_init: bool = False,
) -> PolicyBundle:
    layout = env_cfg.layout()
    n = env_cfg.n_vehicles
    m = env_cfg.m_subchannels
    od = obs_dim_of(m)
    sd = state_dim_of(n, m)
    from ..core import m0_count
    n_m0 = m0_count(n)
    classes = [TrafficClass.M0 if i < n_m0 else TrafficClass.M1 for i in range(n)]
    slices = [layout.slice_for(c) for c in classes]
    n_pow = len(POWER_LEVELS_DBM)
    if mode is PolicyMode.PER_CLASS:
        k_subs = [len(layout.m0_slice), len(layout.m1_slice)]
        actors = [nets.init_actor(od, cfg.actor_hidden, k + n_pow, rng) for k in k_subs]
        actor_of = [0 if c is TrafficClass.M0 else 1 for c in classes]
    else:
        k_subs = [len(slices[i]) for i in range(n)]
        actors = [nets.init_actor(od, cfg.actor_hidden, k + n_pow, rng) for k in k_subs]
        actor_of = list(range(n))
    critic = nets.init_critic(sd, cfg.critic_hidden, rng)
    if zero_init:
        actors = [nets.zero_like_params(a) for a in actors]
        critic = nets.zero_like_params(critic)
    bundle = PolicyBundle(
        mode=mode, actors=actors, actor_of=actor_of, sub_slice_of=slices,
        actor_k_sub=k_subs, critic=critic, n_vehicles=n, m_subchannels=m,
        obs_dim=od, state_dim=sd,
    )
    bundle.validate()
    return bundle


# -------------------------------------------------------------------- sampling

class _ClassGroup:
    """Per-class sampling view: either one shared actor or stacked per-vehicle ones."""

    def __init__(self, bundle: PolicyBundle, vehicle_ids: np.ndarray):
        self.ids = vehicle_ids
        first = int(vehicle_ids[0])
        self.k_sub = bundle.actor_k_sub[bundle.actor_of[first]]
        self.slice_start = bundle.sub_slice_of[first].start
        actor_idx = [bundle.actor_of[int(i)] for i in vehicle_ids]
        self.shared = len(set(actor_idx)) == 1
        if self.shared:
            self.params = bundle.actors[actor_idx[0]]
        else:
            acts = [bundle.actors[a] for a in actor_idx]
            self.w1 = np.stack([a.w1 for a in acts])
            self.b1 = np.stack([a.b1 for a in acts])
            self.w2 = np.stack([a.w2 for a in acts])
            self.b2 = np.stack([a.b2 for a in acts])

    def logits(self, obs_rows: np.ndarray) -> np.ndarray:
        if self.shared:
            z1 = obs_rows @ self.params.w1 + self.params.b1
            h = np.maximum(z1, 0.0)
            return h @ self.params.w2 + self.params.b2
        z1 = np.einsum("vi,vih->vh", obs_rows, self.w1) + self.b1
        h = np.maximum(z1, 0.0)
        return np.einsum("vh,vho->vo", h, self.w2) + self.b2


def make_groups(bundle: PolicyBundle) -> list[_ClassGroup]:
    """One group per traffic class, in class order; rebuilt after each update."""
    from ..core import m0_count
    n_m0 = m0_count(bundle.n_vehicles)
    groups = [_ClassGroup(bundle, np.arange(0, n_m0))]
    if bundle.n_vehicles > n_m0:
        groups.append(_ClassGroup(bundle, np.arange(n_m0, bundle.n_vehicles)))
    return groups


def sample_actions(
    groups: list[_ClassGroup],
    observations: np.ndarray,
    rng: np.random.Generator,
    n_vehicles: int,
) -> tuple[JointAction, np.ndarray, np.ndarray, np.ndarray]:
    """Draw one joint action.  Returns (action, slice-relative subchannels,
    power indices, joint log-probabilities)."""
    sub_abs = np.empty(n_vehicles, dtype=np.int64)
    sub_rel = np.empty(n_vehicles, dtype=np.int64)
    pow_idx = np.empty(n_vehicles, dtype=np.int64)
    logp = np.empty(n_vehicles)
    for g in groups:
        logits = g.logits(observations[g.ids])
        logp_s = nets.log_softmax(logits[:, :g.k_sub])
        logp_p = nets.log_softmax(logits[:, g.k_sub:])
        s = nets.sample_categorical(logp_s, rng)
        p = nets.sample_categorical(logp_p, rng)
        rows = np.arange(g.ids.size)
        sub_rel[g.ids] = s
        sub_abs[g.ids] = g.slice_start + s
        pow_idx[g.ids] = p
        logp[g.ids] = logp_s[rows, s] + logp_p[rows, p]
    return JointAction(sub_abs, pow_idx), sub_rel, pow_idx, logp


# ------------------------------------------------------------------- rollouts

@dataclass
class EpisodeRollout:
    obs: np.ndarray            # (T, N, obs_dim)
    global_states: np.ndarray  # (T+1, state_dim)
    sub_rel: np.ndarray        # (T, N)
    pow_idx: np.ndarray        # (T, N)
    logp: np.ndarray           # (T, N)
    rewards: np.ndarray        # (T, N)


def collect_episode(
    env: SidelinkEnv,
    bundle: PolicyBundle,
    episode_seed: int,
    action_rng: np.random.Generator,
    groups: list[_ClassGroup] | None = None,
) -> EpisodeRollout:
    if groups is None:
        groups = make_groups(bundle)
    T = env.cfg.episode_len_ttis
    n = env.n
    res = env.reset(episode_seed)
    obs = np.empty((T, n, env.obs_dim))
    gs = np.empty((T + 1, res.global_state.shape[0]))
    sub_rel = np.empty((T, n), dtype=np.int64)
    pow_idx = np.empty((T, n), dtype=np.int64)
    logp = np.empty((T, n))
    rewards = np.empty((T, n))
    for t in range(T):
        obs[t] = res.observations
        gs[t] = res.global_state
        action, sr, pi, lp = sample_actions(groups, res.observations, action_rng, n)
        res = env.step(action)
        sub_rel[t] = sr
        pow_idx[t] = pi
        logp[t] = lp
        rewards[t] = res.rewards
    gs[T] = res.global_state
    return EpisodeRollout(obs, gs, sub_rel, pow_idx, logp, rewards)


# ------------------------------------------------------------------ advantage

def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation for one agent's reward stream.

    ``values`` are the critic's estimates for the T visited states;
    ``bootstrap_value`` stands in for the state after the last step.
    Returns (advantages, returns) where returns = advantages + values.
    """
    if rewards.shape != values.shape:
        raise ValueError("rewards and values must align")
    T = rewards.shape[0]
    next_values = np.append(values[1:], bootstrap_value)
    deltas = rewards + gamma * next_values - values
    adv = np.empty(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv, adv + values


# ----------------------------------------------------------------- loss/grads

@dataclass
class ActorBatch:
    obs: np.ndarray       # (B, obs_dim)
    sub_rel: np.ndarray   # (B,)
    pow_idx: np.ndarray   # (B,)
    logp_old: np.ndarray  # (B,)
    adv: np.ndarray       # (B,) already normalized
    k_sub: int


def actor_loss_and_grads(
    params: MlpParams,
    batch: ActorBatch,
    clip_eps: float,
    ent_coef: float,
) -> tuple[float, dict[str, np.ndarray], dict[str, float]]:
    """Clipped-surrogate loss with entropy bonus, plus exact parameter gradients."""
    B = batch.obs.shape[0]
    rows = np.arange(B)
    logits, cache = nets.actor_forward(params, batch.obs)
    k = batch.k_sub
    logp_s = nets.log_softmax(logits[:, :k])
    logp_p = nets.log_softmax(logits[:, k:])
    p_s = np.exp(logp_s)
    p_p = np.exp(logp_p)
    logp_new = logp_s[rows, batch.sub_rel] + logp_p[rows, batch.pow_idx]
    ratio = np.exp(logp_new - batch.logp_old)
    unclipped = ratio * batch.adv
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * batch.adv
    surr = np.minimum(unclipped, clipped)
    h_s = nets.categorical_entropy(logp_s)
    h_p = nets.categorical_entropy(logp_p)
    entropy = h_s + h_p
    loss = float(-surr.mean() - ent_coef * entropy.mean())

    # d loss / d logp_new: only where the unclipped branch is active.
    active = unclipped <= clipped
    dlogp = -(active * ratio * batch.adv) / B
    dlogits = np.zeros_like(logits)
    dlogits[:, :k] = dlogp[:, None] * (-p_s)
    dlogits[rows, batch.sub_rel] += dlogp
    dlogits[:, k:] = dlogp[:, None] * (-p_p)
    dlogits[rows, k + batch.pow_idx] += dlogp
    # Entropy bonus: d(-coef*mean(H))/dz = coef/B * p * (logp + H).
    dlogits[:, :k] += (ent_coef / B) * p_s * (logp_s + h_s[:, None])
    dlogits[:, k:] += (ent_coef / B) * p_p * (logp_p + h_p[:, None])
    grads = nets.actor_backward(params, cache, dlogits)
    stats = {
        "entropy": float(entropy.mean()),
        "clip_fraction": float(((ratio < 1.0 - clip_eps) | (ratio > 1.0 + clip_eps)).mean()),
        "pg_loss": float(-surr.mean()),
    }
    return loss, grads, stats


def critic_loss_and_grads(
    params: MlpParams,
    states: np.ndarray,    # (B, state_dim)
    targets: np.ndarray,   # (B,) or (B, A): one return column per agent
    weight: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted MSE of the scalar value against every agent's return."""
    v, cache = nets.critic_forward(params, states)
    t = targets if targets.ndim == 2 else targets[:, None]
    err = v[:, None] - t
    loss = float(weight * (err ** 2).mean())
    dv = weight * 2.0 * err.sum(axis=1) / err.size
    grads = nets.critic_backward(params, cache, dv)
    return loss, grads


# --------------------------------------------------------------------- update

@dataclass
class LossReport:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    actor_grad_norm: float
    critic_grad_norm: float
    entropy_coef: float


def make_optimizers(bundle: PolicyBundle, cfg: TrainConfig) -> dict[str, AdamOptimizer]:
    opts = {
        f"actor_{i}": AdamOptimizer(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        for i in range(len(bundle.actors))
    }
    opts["critic"] = AdamOptimizer(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return opts


def ppo_update(
    bundle: PolicyBundle,
    rollout: EpisodeRollout,
    cfg: TrainConfig,
    episode_index: int,
    optimizers: dict[str, AdamOptimizer] | None = None,
) -> LossReport:
    """One full update (several epochs) from one episode's rollout."""
    if optimizers is None:
        optimizers = make_optimizers(bundle, cfg)
    T, n = rollout.rewards.shape
    coef = entropy_coef(cfg, episode_index)

    # Advantages and return targets from the pre-update critic.
    values_all, _ = nets.critic_forward(bundle.critic, rollout.global_states)
    values, bootstrap = values_all[:T], float(values_all[T])
    adv = np.empty((T, n))
    returns = np.empty((T, n))
    for i in range(n):
        adv[:, i], returns[:, i] = gae_advantages(
            rollout.rewards[:, i], values, bootstrap, cfg.gamma, cfg.gae_lambda)
    adv = (adv - adv.mean()) / (adv.std() + cfg.advantage_norm_eps)

    # Per-actor constant views of the batch.
    actor_vehicles: dict[int, list[int]] = {}
    for veh, a in enumerate(bundle.actor_of):
        actor_vehicles.setdefault(a, []).append(veh)
    batches: dict[int, ActorBatch] = {}
    for a, vehs in actor_vehicles.items():
        cols = np.array(vehs)
        batches[a] = ActorBatch(
            obs=rollout.obs[:, cols, :].reshape(T * cols.size, -1),
            sub_rel=rollout.sub_rel[:, cols].reshape(-1),
            pow_idx=rollout.pow_idx[:, cols].reshape(-1),
            logp_old=rollout.logp[:, cols].reshape(-1),
            adv=adv[:, cols].reshape(-1),
            k_sub=bundle.actor_k_sub[a],
        )

    pol_losses, val_losses, entropies, clip_fracs = [], [], [], []
    actor_norms, critic_norms = [], []
    for _ in range(cfg.epochs_per_update):
        for a, batch in batches.items():
            loss, grads, stats = actor_loss_and_grads(
                bundle.actors[a], batch, cfg.clip_eps, coef)
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite actor loss at episode {episode_index}")
            actor_norms.append(nets.clip_grads_(grads, cfg.grad_clip_norm))
            optimizers[f"actor_{a}"].step(bundle.actors[a].tensors(), grads)
            pol_losses.append(stats["pg_loss"])
            entropies.append(stats["entropy"])
            clip_fracs.append(stats["clip_fraction"])
        vloss, vgrads = critic_loss_and_grads(
            bundle.critic, rollout.global_states[:T], returns, cfg.value_loss_weight)
        if not np.isfinite(vloss):
            raise RuntimeError(f"non-finite critic loss at episode {episode_index}")
        critic_norms.append(nets.clip_grads_(vgrads, cfg.grad_clip_norm))
        optimizers["critic"].step(bundle.critic.tensors(), vgrads)
        val_losses.append(vloss)

    return LossReport(
        policy_loss=float(np.mean(pol_losses)),
        value_loss=float(np.mean(val_losses)),
        entropy=float(np.mean(entropies)),
        clip_fraction=float(np.mean(clip_fracs)),
        actor_grad_norm=float(np.mean(actor_norms)),
        critic_grad_norm=float(np.mean(critic_norms)),
        entropy_coef=coef,
    )


# ------------------------------------------------------------ train / evaluate

def train(
    env_cfg: EnvConfig,
    mode: PolicyMode,
    cfg: TrainConfig,
    seed: int,
) -> tuple[PolicyBundle, list[EpisodeMetrics]]:
    """Train for cfg.total_episodes episodes; returns the bundle and the
    per-episode training metrics series."""
    ss = np.random.SeedSequence(seed)
    init_ss, action_ss, env_ss = ss.spawn(3)
    init_rng = np.random.default_rng(init_ss)
    action_rng = np.random.default_rng(action_ss)
    episode_seeds = [int(s) for s in env_ss.generate_state(cfg.total_episodes)]
    bundle = make_bundle(env_cfg, mode, cfg, init_rng)
    optimizers = make_optimizers(bundle, cfg)
    env = SidelinkEnv(env_cfg)
    series: list[EpisodeMetrics] = []
    for e in range(cfg.total_episodes):
        groups = make_groups(bundle)
        rollout = collect_episode(env, bundle, episode_seeds[e], action_rng, groups)
        series.append(env.finalize_metrics(e, episode_seeds[e]))
        ppo_update(bundle, rollout, cfg, e, optimizers)
    return bundle, series


def evaluate(
    bundle: PolicyBundle,
    env_cfg: EnvConfig,
    episodes: int,
    seed: int,
    trace_path: str | None = None,
) -> EpisodeMetrics:
    """Run frozen-policy episodes (still sampling stochastically) and average.

    Scalar fields are averaged across episodes; the intra-episode tail
    percentile is computed per episode and then averaged.  The aggregate
    carries episode_index -1.  When ``trace_path`` is given the per-TTI
    trace of every evaluation episode is written there as CSV.
    """
    if episodes < 1:
        raise ValueError("need at least one evaluation episode")
    ss = np.random.SeedSequence(seed)
    action_ss, env_ss = ss.spawn(2)
    action_rng = np.random.default_rng(action_ss)
    episode_seeds = [int(s) for s in env_ss.generate_state(episodes)]
    env = SidelinkEnv(env_cfg)
    if trace_path is not None:
        env.enable_trace()
    groups = make_groups(bundle)
    per_ep: list[EpisodeMetrics] = []
    for e in range(episodes):
        res = env.reset(episode_seeds[e])
        for _ in range(env_cfg.episode_len_ttis):
            action, _, _, _ = sample_actions(groups, res.observations, action_rng, env.n)
            res = env.step(action)
        per_ep.append(env.finalize_metrics(e, episode_seeds[e]))
    if trace_path is not None:
        env.dump_trace_csv(trace_path)
    return EpisodeMetrics(
        m0_pdr_mean=float(np.mean([m.m0_pdr_mean for m in per_ep])),
        m1_pdr_mean=float(np.mean([m.m1_pdr_mean for m in per_ep])),
        m0_collision_rate=float(np.mean([m.m0_collision_rate for m in per_ep])),
        m0_within_pool_collision_rate=float(
            np.mean([m.m0_within_pool_collision_rate for m in per_ep])),
        m0_sinr_mean_db=float(np.mean([m.m0_sinr_mean_db for m in per_ep])),
        m0_pdr_p05_intra=float(np.mean([m.m0_pdr_p05_intra for m in per_ep])),
        episode_index=-1,
        seed=seed,
    )
