"""Experiment presets, the run-and-record pipeline, and the comparison report.

Four preset phases cover the run matrix: A sweeps fleet size on a shared
pool with per-class actors, B sweeps pool supply at fixed fleet, C applies
demand separation with per-class actors across fleet sizes, D applies
demand separation with per-vehicle actors.  Desk and full scale differ only
in episode counts and seed lists, never in any model constant.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import analytics, config, ledger
from .core import PolicyMode, PoolPartition, m0_count
from .marl.ppo import evaluate, train


@dataclass(frozen=True)
class RunSpec:
    phase: str
    n_vehicles: int
    m_subchannels: int
    partition: PoolPartition
    m0_pool: int | None
    mode: PolicyMode

    def run_id(self, seed: int, scale: str) -> str:
        pool = f"-p{self.m0_pool}" if self.m0_pool is not None else ""
        return (f"{self.phase}-N{self.n_vehicles}-M{self.m_subchannels}{pool}"
                f"-{self.partition.value}-{self.mode.value}-s{seed}-{scale}")


@dataclass(frozen=True)
class PhasePreset:
    name: str
    runs: tuple[RunSpec, ...]


@dataclass(frozen=True)
class ScaleSpec:
    name: str
    train_episodes: int
    eval_episodes: int
    seeds: tuple[int, ...]
    # Entropy anneal horizon in episodes; None anneals across the whole run.
    # Desk scale front-loads the anneal so the post-exploration stretch is
    # long enough for policies to sharpen within the reduced budget.
    anneal_episodes: int | None = None


SCALES = {
    "desk": ScaleSpec("desk", train_episodes=1000, eval_episodes=50,
                      seeds=(101, 202, 303), anneal_episodes=500),
    "full": ScaleSpec("full", train_episodes=3000, eval_episodes=100,
                      seeds=(101, 202, 303, 404, 505)),
}


def _shared(phase: str, n: int, m: int, mode: PolicyMode) -> RunSpec:
    return RunSpec(phase, n, m, PoolPartition.SHARED, None, mode)


def _separated(phase: str, n: int, m: int, m0_pool: int, mode: PolicyMode) -> RunSpec:
    return RunSpec(phase, n, m, PoolPartition.SEPARATED, m0_pool, mode)


PHASES = {
    "A": PhasePreset("A", tuple(
        _shared("A", n, 5, PolicyMode.PER_CLASS) for n in (2, 3, 4, 5, 7, 10))),
    "B": PhasePreset("B", tuple(
        _shared("B", 4, m, PolicyMode.PER_CLASS) for m in (3, 7, 10))),
    "C": PhasePreset("C", tuple(
        _separated("C", n, 5, 2, PolicyMode.PER_CLASS) for n in (4, 7, 10))),
    "D": PhasePreset("D", tuple(
        _separated("D", n, 5, 2, PolicyMode.PER_VEHICLE) for n in (4, 10))),
}


def analysis_columns(spec: RunSpec) -> dict:
    """Closed-form reference values recorded next to each run's metrics."""
    n_m0 = m0_count(spec.n_vehicles)
    pool = spec.m0_pool if spec.m0_pool is not None else spec.m_subchannels
    return {
        "nash_floor": analytics.nash_floor(spec.m_subchannels, spec.n_vehicles),
        "within_pool_ceiling": analytics.within_pool_ceiling(pool, n_m0),
        "rho_pool": analytics.rho_pool(n_m0, pool),
        "pigeonhole_min_fraction": analytics.pigeonhole_min_colliding_fraction(n_m0, pool),
        "cross_class_residual": analytics.cross_class_residual(
            spec.m_subchannels, spec.n_vehicles - n_m0),
    }


def run_single(
    spec: RunSpec,
    seed: int,
    scale: ScaleSpec,
    flat: dict,
    ledger_path: str | None = None,
) -> tuple[dict, object]:
    """Train and evaluate one run; returns (ledger entry, trained bundle).

    The entry is appended to ``ledger_path`` when one is given.
    """
    env_cfg = config.build_env_config(
        flat, spec.n_vehicles, spec.m_subchannels, spec.partition, spec.m0_pool)
    train_cfg = config.build_train_config(
        flat, total_episodes=scale.train_episodes,
        anneal_episodes=scale.anneal_episodes)
    digest = config.config_digest(flat, {
        **config.env_config_to_run_params(env_cfg),
        "mode": spec.mode.value,
        "train_episodes": scale.train_episodes,
        "anneal_episodes": scale.anneal_episodes,
        "eval_episodes": scale.eval_episodes,
        "seed": seed,
    })
    t0 = time.perf_counter()
    bundle, _series = train(env_cfg, spec.mode, train_cfg, seed)
    agg = evaluate(bundle, env_cfg, scale.eval_episodes, seed=seed + 7919)
    wall = time.perf_counter() - t0
    entry = {
        "schema_version": ledger.SCHEMA_VERSION,
        "run_id": spec.run_id(seed, scale.name),
        "phase": spec.phase,
        "scale": scale.name,
        "n_vehicles": spec.n_vehicles,
        "n_m0": m0_count(spec.n_vehicles),
        "m_subchannels": spec.m_subchannels,
        "m0_pool": spec.m0_pool,
        "partition": spec.partition.value,
        "mode": spec.mode.value,
        "seed": seed,
        "train_episodes": scale.train_episodes,
        "eval_episodes": scale.eval_episodes,
        "config_digest": digest,
        "wall_time_s": round(wall, 3),
        "metrics": {
            "m0_pdr_mean": agg.m0_pdr_mean,
            "m1_pdr_mean": agg.m1_pdr_mean,
            "m0_collision_rate": agg.m0_collision_rate,
            "m0_within_pool_collision_rate": agg.m0_within_pool_collision_rate,
            "m0_sinr_mean_db": agg.m0_sinr_mean_db,
            "m0_pdr_p05_intra": agg.m0_pdr_p05_intra,
        },
        "analysis": analysis_columns(spec),
    }
    if ledger_path is not None:
        ledger.append_entry(ledger_path, entry)
    return entry, bundle


def run_phase(
    phase_name: str,
    scale_name: str,
    flat: dict,
    ledger_path: str,
    progress=None,
) -> list[dict]:
    if phase_name not in PHASES:
        raise ValueError(f"unknown phase {phase_name!r}; choose from {sorted(PHASES)}")
    if scale_name not in SCALES:
        raise ValueError(f"unknown scale {scale_name!r}; choose desk or full")
    preset = PHASES[phase_name]
    scale = SCALES[scale_name]
    entries = []
    for spec in preset.runs:
        for seed in scale.seeds:
            entry, _bundle = run_single(spec, seed, scale, flat, ledger_path)
            entries.append(entry)
            if progress is not None:
                progress(entry)
    return entries


# ---------------------------------------------------------------------- report

_CONFIG_KEY = ("phase", "n_vehicles", "m_subchannels", "m0_pool", "partition", "mode")


def _group_by_config(entries: list[dict]) -> dict[tuple, list[dict]]:
    groups: dict[tuple, list[dict]] = {}
    for e in entries:
        key = tuple(e[k] for k in _CONFIG_KEY)
        groups.setdefault(key, []).append(e)
    return groups


def _median_metric(group: list[dict], key: str) -> float:
    return float(np.median([e["metrics"][key] for e in group]))


def pareto_status(m0_delta: float, m1_delta: float) -> str:
    if m0_delta > 0.0 and m1_delta > 0.0:
        return "strict Pareto"
    if m0_delta > 0.0 and m1_delta <= 0.0:
        return "M0-prioritising trade"
    if m0_delta < 0.0:
        return "anti-Pareto for M0"
    return "no gain"


def report(ledger_path: str) -> str:
    """Comparison table of every configuration against the shared-pool baseline.

    The baseline is the median over seeds of the phase-A N=4 M=5 run.  Raises
    when that run is absent.
    """
    entries = ledger.read_ledger(ledger_path)
    if not entries:
        raise ValueError(f"ledger {ledger_path} is empty")
    groups = _group_by_config(entries)
    base_key = None
    for key in groups:
        if key[0] == "A" and key[1] == 4 and key[2] == 5:
            base_key = key
            break
    if base_key is None:
        raise ValueError("report needs the phase-A N=4 M=5 baseline run in the ledger")
    base = groups[base_key]
    base_m0 = _median_metric(base, "m0_pdr_mean")
    base_m1 = _median_metric(base, "m1_pdr_mean")
    lines = [
        f"baseline: phase A N=4 M=5 shared (median of {len(base)} seeds): "
        f"m0_pdr={base_m0:.3f} m1_pdr={base_m1:.3f}",
        "",
        f"{'config':<34} {'rho':>5} {'m0_pdr':>7} {'dM0':>7} {'m1_pdr':>7} "
        f"{'dM1':>7} {'p05':>6}  status",
    ]
    for key in sorted(groups):
        group = groups[key]
        phase, n, m, m0_pool, partition, mode = key
        n_m0 = m0_count(n)
        pool = m0_pool if m0_pool is not None else m
        rho = analytics.rho_pool(n_m0, pool)
        m0_pdr = _median_metric(group, "m0_pdr_mean")
        m1_pdr = _median_metric(group, "m1_pdr_mean")
        p05 = _median_metric(group, "m0_pdr_p05_intra")
        d0 = m0_pdr - base_m0
        d1 = m1_pdr - base_m1
        status = "baseline" if key == base_key else pareto_status(d0, d1)
        pool_txt = f"/{m0_pool}" if m0_pool is not None else ""
        cfg_txt = f"{phase} N={n} M={m}{pool_txt} {partition} {mode}"
        lines.append(
            f"{cfg_txt:<34} {rho:>5.2f} {m0_pdr:>7.3f} {d0:>+7.3f} {m1_pdr:>7.3f} "
            f"{d1:>+7.3f} {p05:>6.3f}  {status}")
    return "\n".join(lines)
