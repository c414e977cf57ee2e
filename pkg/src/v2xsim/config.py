"""Flat key-value configuration: defaults, file overrides, digests.

Every tunable constant of the simulator and the trainer is exposed under a
dotted flat key (``channel.noise_dbm``, ``train.lr``, ...).  A config file
is a JSON object mapping those keys to values; unknown keys are rejected so
typos fail loudly.  Run structure (vehicle count, pool size, partition,
mode, seeds) is not part of this schema; it arrives via CLI flags or phase
presets and is folded into the digest separately.
"""

from __future__ import annotations

import hashlib
import json

from .channel import ChannelConfig
from .core import PoolPartition
from .env import EnvConfig, RewardConfig
from .mobility import MobilityConfig
from .marl.ppo import TrainConfig

_SECTIONS = {
    "mobility": (MobilityConfig, "mobility"),
    "channel": (ChannelConfig, "channel"),
    "reward": (RewardConfig, "reward"),
}

_ENV_KEYS = ("episode_len_ttis", "ema_keep", "ema_proxy_free_db", "queue_horizon_ttis")


def flat_defaults() -> dict:
    """The full default key space, one flat dict."""
    out: dict = {}
    for prefix, (cls, _) in _SECTIONS.items():
        for name, value in vars(cls()).items():
            out[f"{prefix}.{name}"] = value
    env = EnvConfig()
    for name in _ENV_KEYS:
        out[f"env.{name}"] = getattr(env, name)
    for name, value in vars(TrainConfig()).items():
        out[f"train.{name}"] = value
    return out


def load_config_file(path: str) -> dict:
    """Read a flat JSON override file; every key must exist in the defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config file must be a JSON object of flat keys")
    known = flat_defaults()
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def resolve(overrides: dict | None = None) -> dict:
    """Defaults with overrides applied."""
    flat = flat_defaults()
    if overrides:
        unknown = sorted(set(overrides) - set(flat))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        flat.update(overrides)
    return flat


def _section(flat: dict, prefix: str) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in flat.items() if k.startswith(prefix + ".")}


def build_env_config(
    flat: dict,
    n_vehicles: int,
    m_subchannels: int,
    partition: PoolPartition,
    m0_pool: int | None = None,
) -> EnvConfig:
    env_kwargs = _section(flat, "env")
    return EnvConfig(
        n_vehicles=n_vehicles,
        m_subchannels=m_subchannels,
        partition=partition,
        m0_pool=m0_pool,
        episode_len_ttis=int(env_kwargs["episode_len_ttis"]),
        mobility=MobilityConfig(**_section(flat, "mobility")),
        channel=ChannelConfig(**_section(flat, "channel")),
        reward=RewardConfig(**_section(flat, "reward")),
        ema_keep=float(env_kwargs["ema_keep"]),
        ema_proxy_free_db=float(env_kwargs["ema_proxy_free_db"]),
        queue_horizon_ttis=int(env_kwargs["queue_horizon_ttis"]),
    )


def build_train_config(
    flat: dict,
    total_episodes: int | None = None,
    anneal_episodes: int | None = None,
) -> TrainConfig:
    kwargs = _section(flat, "train")
    if total_episodes is not None:
        kwargs["total_episodes"] = total_episodes
    if anneal_episodes is not None:
        kwargs["anneal_episodes"] = anneal_episodes
    kwargs["total_episodes"] = int(kwargs["total_episodes"])
    for int_key in ("epochs_per_update", "actor_hidden", "critic_hidden"):
        kwargs[int_key] = int(kwargs[int_key])
    if kwargs.get("anneal_episodes") is not None:
        kwargs["anneal_episodes"] = int(kwargs["anneal_episodes"])
    return TrainConfig(**kwargs)


def env_config_to_run_params(cfg: EnvConfig) -> dict:
    return {
        "n_vehicles": cfg.n_vehicles,
        "m_subchannels": cfg.m_subchannels,
        "partition": cfg.partition.value,
        "m0_pool": cfg.m0_pool,
    }


def config_digest(flat: dict, run_params: dict | None = None) -> str:
    """sha256 over the canonical JSON of resolved constants plus run structure."""
    payload = {"constants": flat, "run": run_params or {}}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
