"""Shared fixtures: synthetic ledgers shaped like real campaign output.

The analytical columns are computed here from first principles (the
closed forms are short enough to restate) so the tests never import the
simulator package; agreement between these local values and the ledger's
recorded ones is exactly what the overlay checks assert.
"""

from __future__ import annotations

import json

import pytest

SEEDS = (101, 202, 303)


def nash_floor(m: int, n: int) -> float:
    return 1.0 - ((m - 1) / m) ** (n - 1)


def cross_residual(m: int, n_others: int) -> float:
    return 1.0 - ((m - 1) / m) ** n_others


def pigeonhole_min(k: int, pool: int) -> float:
    if k <= pool:
        return 0.0
    return (k - (pool - 1)) / k


def m0_of(n: int) -> int:
    return max(1, n // 2)


def analysis_of(n: int, m: int, m0_pool: int | None) -> dict:
    k = m0_of(n)
    pool = m0_pool if m0_pool is not None else m
    return {
        "nash_floor": nash_floor(m, n),
        "within_pool_ceiling": nash_floor(pool, k),
        "rho_pool": k / pool,
        "pigeonhole_min_fraction": pigeonhole_min(k, pool),
        "cross_class_residual": cross_residual(m, n - k),
    }


def _entry(*, n=4, m=5, m0_pool=None, partition="shared", mode="0a",
           seed=101, phase="A", scale="desk", **overrides) -> dict:
    pool_tag = f"-p{m0_pool}" if m0_pool is not None else ""
    jitter = 0.001 * SEEDS.index(seed) if seed in SEEDS else 0.0
    floor = nash_floor(m, n)
    metrics = {
        "m0_pdr_mean": max(0.0, 1.0 - 0.6 * floor) + jitter,
        "m1_pdr_mean": max(0.0, 0.9 - 0.4 * floor) + jitter,
        "m0_collision_rate": floor + jitter,
        "m0_within_pool_collision_rate": 0.5 * floor + jitter,
        "m0_sinr_mean_db": 18.0 + jitter,
        "m0_pdr_p05_intra": max(0.0, 0.8 - 0.7 * floor) + jitter,
    }
    metrics.update(overrides.pop("metrics", {}))
    entry = {
        "schema_version": 1,
        "run_id": f"{phase}-N{n}-M{m}{pool_tag}-{partition}-{mode}-s{seed}-{scale}",
        "phase": phase,
        "scale": scale,
        "n_vehicles": n,
        "n_m0": m0_of(n),
        "m_subchannels": m,
        "m0_pool": m0_pool,
        "partition": partition,
        "mode": mode,
        "seed": seed,
        "train_episodes": 1000,
        "eval_episodes": 50,
        "config_digest": "0" * 64,
        "wall_time_s": 12.5,
        "metrics": metrics,
        "analysis": analysis_of(n, m, m0_pool),
    }
    entry.update(overrides)
    return entry


def _campaign() -> list[dict]:
    """A full synthetic campaign: every figure can be built from it."""
    entries = []
    for seed in SEEDS:
        for n in (2, 3, 4, 5, 7, 10):
            entries.append(_entry(n=n, seed=seed, phase="A"))
        for m in (3, 7, 10):
            entries.append(_entry(n=4, m=m, seed=seed, phase="B"))
        for n in (4, 7, 10):
            entries.append(_entry(n=n, m0_pool=2, partition="separated",
                                  seed=seed, phase="C"))
        for n in (4, 10):
            entries.append(_entry(n=n, m0_pool=2, partition="separated",
                                  mode="0c", seed=seed, phase="D"))
        entries.append(_entry(n=4, mode="0c", seed=seed, phase="X"))
    return entries


def _write_ledger(path, entries) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return str(path)


def _write_series(path, episodes=5) -> str:
    header = ("episode_index,m0_pdr_mean,m1_pdr_mean,m0_collision_rate,"
              "m0_within_pool_collision_rate,m0_sinr_mean_db,m0_pdr_p05_intra")
    lines = [header]
    for i in range(episodes):
        ramp = i / max(1, episodes - 1)
        lines.append(f"{i},{0.3 + 0.6 * ramp},{0.4 + 0.4 * ramp},"
                     f"{0.7 - 0.5 * ramp},{0.3 - 0.2 * ramp},"
                     f"{5.0 + 12.0 * ramp},{0.1 + 0.6 * ramp}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def local_analysis():
    return analysis_of


@pytest.fixture
def make_entry():
    return _entry


@pytest.fixture
def campaign():
    return _campaign()


@pytest.fixture
def write_ledger():
    return _write_ledger


@pytest.fixture
def write_series():
    return _write_series


@pytest.fixture
def campaign_ledger(tmp_path):
    return _write_ledger(tmp_path / "campaign.jsonl", _campaign())


@pytest.fixture
def series_csv(tmp_path):
    return _write_series(tmp_path / "series.csv")
