"""Sidelink resource-allocation sandbox.

Ring-road traffic, a V2X channel abstraction, multi-agent PPO with a
centralized critic, closed-form pool analytics, and an infrastructure
advisory layer, tied together by a CLI and an append-only results ledger.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    POWER_LEVELS_DBM,
    EpisodeMetrics,
    JointAction,
    PolicyMode,
    PoolLayout,
    PoolPartition,
    TrafficClass,
    VehicleState,
    m0_count,
    obs_dim,
    state_dim,
)
from .env import EnvConfig, SidelinkEnv  # noqa: F401
