"""Checkpoint persistence: one .npz per bundle, bit-exact round trips.

Arrays go in under stable names (``actor_{i}_{tensor}``, ``critic_{tensor}``)
and a single JSON metadata blob carries the wiring (mode, slices, dims) plus
the training constants and run parameters needed to rebuild the configs.
"""

from __future__ import annotations

import json

import numpy as np

from ..core import PolicyMode
from .nets import MlpParams
from .ppo import PolicyBundle, TrainConfig

CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str,
    bundle: PolicyBundle,
    train_cfg: TrainConfig,
    flat_config: dict,
    run_params: dict,
) -> None:
    arrays: dict[str, np.ndarray] = {}
    for i, actor in enumerate(bundle.actors):
        for name, t in actor.tensors().items():
            arrays[f"actor_{i}_{name}"] = t
    for name, t in bundle.critic.tensors().items():
        arrays[f"critic_{name}"] = t
    meta = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "mode": bundle.mode.value,
        "n_vehicles": bundle.n_vehicles,
        "m_subchannels": bundle.m_subchannels,
        "obs_dim": bundle.obs_dim,
        "state_dim": bundle.state_dim,
        "actor_of": bundle.actor_of,
        "actor_k_sub": bundle.actor_k_sub,
        "sub_slices": [[s.start, s.stop] for s in bundle.sub_slice_of],
        "n_actors": len(bundle.actors),
        "train": vars(train_cfg).copy(),
        "flat_config": flat_config,
        "run_params": run_params,
    }
    arrays["meta_json"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_checkpoint(path: str) -> tuple[PolicyBundle, TrainConfig, dict, dict]:
    """Returns (bundle, train_cfg, flat_config, run_params)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta_json"]))
        if meta["checkpoint_version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['checkpoint_version']}")
        actors = []
        for i in range(meta["n_actors"]):
            actors.append(MlpParams(
                w1=data[f"actor_{i}_w1"], b1=data[f"actor_{i}_b1"],
                w2=data[f"actor_{i}_w2"], b2=data[f"actor_{i}_b2"],
            ))
        critic = MlpParams(
            w1=data["critic_w1"], b1=data["critic_b1"],
            w2=data["critic_w2"], b2=data["critic_b2"],
            layer_norm=True,
            ln_gain=data["critic_ln_gain"], ln_bias=data["critic_ln_bias"],
        )
    bundle = PolicyBundle(
        mode=PolicyMode(meta["mode"]),
        actors=actors,
        actor_of=list(meta["actor_of"]),
        sub_slice_of=[range(a, b) for a, b in meta["sub_slices"]],
        actor_k_sub=list(meta["actor_k_sub"]),
        critic=critic,
        n_vehicles=meta["n_vehicles"],
        m_subchannels=meta["m_subchannels"],
        obs_dim=meta["obs_dim"],
        state_dim=meta["state_dim"],
    )
    bundle.validate()
    train_cfg = TrainConfig(**meta["train"])
    return bundle, train_cfg, meta["flat_config"], meta["run_params"]
