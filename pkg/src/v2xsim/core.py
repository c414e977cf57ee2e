"""Shared value types and dimension arithmetic for the sidelink sandbox.

Conventions used everywhere else in the package:

* Vehicles are indexed 0..N-1.  The first ``m0_count(N)`` ids belong to the
  latency-critical class M0, the rest to the throughput class M1.
* Subchannel indices are absolute in [0, M).  Under a Separated partition the
  M0 slice is [0, M_m0) and the M1 slice is [M_m0, M); under Shared both
  classes draw from [0, M).
* Transmit power is chosen from a fixed discrete ladder (dBm); actions carry
  the ladder index, not the dBm value.
* Observation vectors have a fixed layout: 3 kinematic entries, M EMA-SINR
  entries, 3 identity entries.  ``build_observation`` is the single place
  that layout is defined; ``split_observation`` is its inverse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

VehicleId = int
SubchannelIndex = int

#: Discrete transmit power ladder, dBm. Actions index into this tuple.
POWER_LEVELS_DBM: tuple[float, ...] = (-10.0, 0.0, 10.0, 16.0, 23.0)

#: Number of kinematic entries at the front of an observation vector.
KINEMATIC_DIM = 3
#: Number of identity entries at the back of an observation vector.
IDENTITY_DIM = 3


class ConfigError(ValueError):
    """Raised when a structural parameter (N, M, slice bounds) is invalid."""


class TrafficClass(enum.Enum):
    """Service class of a vehicle's periodic broadcast traffic."""

    M0 = 0  # latency-critical
    M1 = 1  # throughput / best-effort


class PoolPartition(enum.Enum):
    """How the M subchannels are split between the two classes."""

    SHARED = "shared"
    SEPARATED = "separated"


class PolicyMode(enum.Enum):
    """Actor arrangement: one network per class, or one per vehicle."""

    PER_CLASS = "0a"
    PER_VEHICLE = "0c"


def m0_count(n_vehicles: int) -> int:
    """Number of M0 vehicles for a fleet of ``n_vehicles``.

    Half the fleet rounded down, but never zero: vehicles 0..m0_count-1 are
    M0 and the remainder are M1.
    """
    if n_vehicles < 1:
        raise ConfigError(f"need at least one vehicle, got {n_vehicles}")
    return max(1, n_vehicles // 2)


def obs_dim(m_subchannels: int) -> int:
    """Length of a per-vehicle observation vector (3 kinematic + M + 3 identity)."""
    if m_subchannels < 1:
        raise ConfigError(f"need at least one subchannel, got {m_subchannels}")
    return KINEMATIC_DIM + m_subchannels + IDENTITY_DIM

def state_dim(n_vehicles: int, m_subchannels: int) -> int:
    """Length of the centralized critic input.

    Concatenation of all N observation vectors plus M trailing entries of
    previous-TTI subchannel occupancy counts normalized by N.
    """
    if n_vehicles < 1:
        raise ConfigError(f"need at least one vehicle, got {n_vehicles}")
    return n_vehicles * obs_dim(m_subchannels) + m_subchannels


@dataclass(frozen=True)
class PoolLayout:
    """Resolved subchannel slices for both classes.

    ``m_total`` subchannels overall; ``m0_slice``/``m1_slice`` are half-open
    ``range`` objects over absolute indices.  Under SHARED both slices span
    the whole pool.
    """

    m_total: int
    partition: PoolPartition
    m0_slice: range
    m1_slice: range

    @staticmethod
    def make(m_total: int, partition: PoolPartition, m0_pool: int | None = None) -> "PoolLayout":
        """Build a layout; ``m0_pool`` is required (and only allowed) for SEPARATED."""
        if m_total < 1:
            raise ConfigError(f"need at least one subchannel, got {m_total}")
        if partition is PoolPartition.SHARED:
            if m0_pool is not None and m0_pool != m_total:
                raise ConfigError("shared partition does not take a separate m0 pool size")
            full = range(0, m_total)
            return PoolLayout(m_total, partition, full, full)
        if m0_pool is None or not (1 <= m0_pool < m_total):
            raise ConfigError(
                f"separated partition needs 1 <= m0_pool < M, got m0_pool={m0_pool} M={m_total}"
            )
        return PoolLayout(m_total, partition, range(0, m0_pool), range(m0_pool, m_total))

    def slice_for(self, cls: TrafficClass) -> range:
        return self.m0_slice if cls is TrafficClass.M0 else self.m1_slice


@dataclass
class VehicleState:
    """Full per-vehicle state: kinematics plus radio bookkeeping.

    ``ema_sinr_db`` has one entry per subchannel.  ``queue_delay_norm`` is
    the M0 head-of-line delay indicator (TTIs since last successful delivery,
    /10, clipped to [0, 1]); it is pinned to 1.0 for M1 vehicles.
    """

    vehicle_id: VehicleId
    traffic_class: TrafficClass
    position_m: float
    lane: int
    speed_mps: float
    heading: int = 1
    chosen_subchannel: SubchannelIndex = 0
    chosen_power_dbm: float = POWER_LEVELS_DBM[0]
    ema_sinr_db: np.ndarray = field(default_factory=lambda: np.zeros(1))
    queue_delay_norm: float = 0.0


@dataclass(frozen=True)
class Observation:
    """Decoded view of one observation vector (see module docstring for layout)."""

    kinematic: np.ndarray  # (3,) normalized position, normalized speed, lane
    ema_sinr: np.ndarray   # (M,) scaled EMA SINR
    identity: np.ndarray   # (3,) id / (N-1), class bit (M0 = 1), queue delay

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.kinematic, self.ema_sinr, self.identity])


#: Divisor that brings dB-domain SINR features to roughly unit scale.
SINR_FEATURE_SCALE_DB = 50.0


def build_observation(
    state: VehicleState,
    n_vehicles: int,
    track_length_m: float,
    speed_ref_mps: float,
) -> np.ndarray:
    """Observation vector for one vehicle.  Every entry is finite and O(1)."""
    m = state.ema_sinr_db.shape[0]
    out = np.empty(obs_dim(m))
    out[0] = state.position_m / track_length_m
    out[1] = state.speed_mps / speed_ref_mps
    out[2] = float(state.lane)
    out[3:3 + m] = np.clip(state.ema_sinr_db / SINR_FEATURE_SCALE_DB, -1.0, 2.0)
    denom = max(n_vehicles - 1, 1)
    out[3 + m] = state.vehicle_id / denom
    out[3 + m + 1] = 1.0 if state.traffic_class is TrafficClass.M0 else 0.0
    out[3 + m + 2] = state.queue_delay_norm
    return out


def split_observation(vector: np.ndarray, m_subchannels: int) -> Observation:
    """Inverse of ``build_observation`` for tests and debugging."""
    if vector.shape[0] != obs_dim(m_subchannels):
        raise ConfigError(
            f"observation length {vector.shape[0]} != obs_dim {obs_dim(m_subchannels)}"
        )
    k = KINEMATIC_DIM
    return Observation(
        kinematic=vector[:k].copy(),
        ema_sinr=vector[k:k + m_subchannels].copy(),
        identity=vector[k + m_subchannels:].copy(),
    )


def build_global_state(observations: np.ndarray, prev_occupancy: np.ndarray) -> np.ndarray:
    """Centralized critic input: all observations flattened + normalized occupancy."""
    return np.concatenate([observations.reshape(-1), prev_occupancy])


@dataclass
class JointAction:
    """One action per vehicle: absolute subchannel index + power ladder index."""

    subchannels: np.ndarray    # (N,) int
    power_indices: np.ndarray  # (N,) int

    @staticmethod
    def of(pairs: list[tuple[int, int]]) -> "JointAction":
        sub = np.array([p[0] for p in pairs], dtype=np.int64)
        pw = np.array([p[1] for p in pairs], dtype=np.int64)
        return JointAction(sub, pw)

    def validate(self, n_vehicles: int, m_subchannels: int) -> None:
        if self.subchannels.shape != (n_vehicles,) or self.power_indices.shape != (n_vehicles,):
            raise ConfigError("joint action arrays must have one entry per vehicle")
        if (self.subchannels < 0).any() or (self.subchannels >= m_subchannels).any():
            raise ConfigError("subchannel index out of [0, M)")
        if (self.power_indices < 0).any() or (self.power_indices >= len(POWER_LEVELS_DBM)).any():
            raise ConfigError("power index out of range")


@dataclass
class EpisodeMetrics:
    """Aggregates over one episode (or an average over evaluation episodes).

    ``m0_pdr_p05_intra`` is the nearest-rank 5th percentile, over TTIs within
    the episode, of the per-TTI mean M0 packet delivery ratio.  Collision
    rates are fractions of (M0 vehicle, TTI) pairs.
    """

    m0_pdr_mean: float
    m1_pdr_mean: float
    m0_collision_rate: float
    m0_within_pool_collision_rate: float
    m0_sinr_mean_db: float
    m0_pdr_p05_intra: float
    episode_index: int
    seed: int


def nearest_rank_percentile(values: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile: value at rank ceil(pct/100 * n) of the sorted sample."""
    if values.size == 0:
        raise ValueError("percentile of empty series")
    if not (0.0 < pct <= 100.0):
        raise ValueError(f"pct must be in (0, 100], got {pct}")
    ordered = np.sort(values)
    rank = int(np.ceil(pct / 100.0 * ordered.size))
    return float(ordered[max(rank, 1) - 1])
