"""Shared fixtures: a factory for valid ledger entries."""

import pytest

from v2xsim import analytics
from v2xsim.ledger import SCHEMA_VERSION


def _entry(run_id="A-N4-M5-shared-0a-s101-desk", **over):
    n, m = over.pop("n_vehicles", 4), over.pop("m_subchannels", 5)
    metrics = {
        "m0_pdr_mean": 0.69,
        "m1_pdr_mean": 0.55,
        "m0_collision_rate": 0.50,
        "m0_within_pool_collision_rate": 0.50,
        "m0_sinr_mean_db": 11.8,
        "m0_pdr_p05_intra": 0.06,
    }
    metrics.update(over.pop("metrics", {}))
    n_m0 = max(1, n // 2)
    entry = {
        "schema_version": SCHEMA_VERSION,
        "run_id": run_id,
        "phase": "A",
        "scale": "desk",
        "n_vehicles": n,
        "n_m0": n_m0,
        "m_subchannels": m,
        "m0_pool": None,
        "partition": "shared",
        "mode": "0a",
        "seed": 101,
        "train_episodes": 1000,
        "eval_episodes": 50,
        "config_digest": "d" * 64,
        "wall_time_s": 41.0,
        "metrics": metrics,
        "analysis": {
            "nash_floor": analytics.nash_floor(m, n),
            "within_pool_ceiling": analytics.within_pool_ceiling(m, n_m0),
            "rho_pool": analytics.rho_pool(n_m0, m),
            "pigeonhole_min_fraction": analytics.pigeonhole_min_colliding_fraction(n_m0, m),
            "cross_class_residual": analytics.cross_class_residual(m, n - n_m0),
        },
    }
    entry.update(over)
    return entry


@pytest.fixture
def make_entry():
    return _entry
