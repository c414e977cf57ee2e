"""Two-lane ring road with intelligent-driver-model car following.

Single direction of travel, no lane changes.  Each vehicle follows the
nearest vehicle ahead in its own lane (wrapping around the ring); a vehicle
alone in its lane relaxes toward the free-flow speed.  Integration is
semi-implicit Euler at a fixed step: speed updates first, then position
moves with the new speed.  Speeds are clamped at zero (no reversing).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import TrafficClass, VehicleState, m0_count


@dataclass(frozen=True)
class MobilityConfig:
    """Ring geometry and IDM parameters (SI units)."""

    track_length_m: float = 3000.0
    n_lanes: int = 2
    dt_s: float = 0.1
    v0_mps: float = 33.3         # desired free-flow speed
    headway_s: float = 1.5       # desired time headway T
    a_max_mps2: float = 1.4      # maximum acceleration
    b_comf_mps2: float = 2.0     # comfortable deceleration
    s0_m: float = 2.0            # jam (minimum) gap
    delta_exp: float = 4.0       # acceleration exponent


def idm_acceleration(
    speed: float,
    gap: float,
    speed_lead: float,
    cfg: MobilityConfig,
) -> float:
    """IDM acceleration for one follower.  ``gap`` must be positive."""
    s_star = cfg.s0_m + speed * cfg.headway_s + (
        speed * (speed - speed_lead) / (2.0 * np.sqrt(cfg.a_max_mps2 * cfg.b_comf_mps2))
    )
    s_star = max(s_star, 0.0)
    return cfg.a_max_mps2 * (1.0 - (speed / cfg.v0_mps) ** cfg.delta_exp - (s_star / gap) ** 2)


def resolve_leaders(positions: np.ndarray, lanes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Leader index per vehicle (nearest ahead in its own lane, ring order).

    Returns (leader, alone): vehicles alone in their lane point at themselves
    and carry alone=True.  Because nobody overtakes, the assignment computed
    once at episode start stays valid for the whole episode.
    """
    n = positions.shape[0]
    leader = np.arange(n)
    alone = np.zeros(n, dtype=bool)
    for lane in np.unique(lanes):
        idx = np.flatnonzero(lanes == lane)
        if idx.size == 1:
            alone[idx[0]] = True
            continue
        order = idx[np.argsort(positions[idx], kind="stable")]
        leader[order] = np.roll(order, -1)
    return leader, alone


def step_kinematics(
    positions: np.ndarray,
    speeds: np.ndarray,
    lanes: np.ndarray,
    cfg: MobilityConfig,
    leader: np.ndarray | None = None,
    alone: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance all vehicles one step; array-level core used by the wrappers.

    Returns (new_positions, new_speeds).  Callers stepping many times may
    pass a cached ``resolve_leaders`` result; otherwise it is recomputed.
    """
    if leader is None or alone is None:
        leader, alone = resolve_leaders(positions, lanes)
    gap = np.mod(positions[leader] - positions, cfg.track_length_m)
    # Identical positions would give gap 0; keep the dynamics defined.
    gap = np.maximum(gap, 1e-6)
    sqrt_ab = np.sqrt(cfg.a_max_mps2 * cfg.b_comf_mps2)
    s_star = cfg.s0_m + speeds * cfg.headway_s + (
        speeds * (speeds - speeds[leader]) / (2.0 * sqrt_ab))
    s_star = np.maximum(s_star, 0.0)
    interaction = np.where(alone, 0.0, (s_star / gap) ** 2)
    accel = cfg.a_max_mps2 * (1.0 - (speeds / cfg.v0_mps) ** cfg.delta_exp - interaction)
    new_speeds = np.maximum(speeds + accel * cfg.dt_s, 0.0)
    new_positions = np.mod(positions + new_speeds * cfg.dt_s, cfg.track_length_m)
    return new_positions, new_speeds


def step_mobility(states: list[VehicleState], cfg: MobilityConfig) -> list[VehicleState]:
    """Pure one-step update of a vehicle list (kinematic fields only)."""
    positions = np.array([s.position_m for s in states])
    speeds = np.array([s.speed_mps for s in states])
    lanes = np.array([s.lane for s in states])
    new_pos, new_spd = step_kinematics(positions, speeds, lanes, cfg)
    return [
        replace(s, position_m=float(p), speed_mps=float(v))
        for s, p, v in zip(states, new_pos, new_spd)
    ]


def init_positions(
    n_vehicles: int,
    seed: int,
    cfg: MobilityConfig | None = None,
    m_subchannels: int = 1,
) -> list[VehicleState]:
    """Deterministic initial placement for a given seed.

    Each vehicle draws a uniform random lane; within a lane, vehicles sit at
    equal spacing with a bounded uniform jitter and a common random offset,
    which keeps every initial same-lane gap at or above the jam gap.  All
    speeds start at the free-flow speed.  Vehicle ids 0..m0_count-1 are M0.
    """
    if cfg is None:
        cfg = MobilityConfig()
    if n_vehicles < 1:
        raise ValueError("need at least one vehicle")
    rng = np.random.default_rng(seed)
    lanes = rng.integers(0, cfg.n_lanes, size=n_vehicles)
    positions = np.zeros(n_vehicles)
    for lane in range(cfg.n_lanes):
        idx = np.flatnonzero(lanes == lane)
        if idx.size == 0:
            continue
        spacing = cfg.track_length_m / idx.size
        jitter_max = 0.45 * max(spacing - cfg.s0_m, 0.0)
        offset = rng.uniform(0.0, cfg.track_length_m)
        jitter = rng.uniform(-jitter_max, jitter_max, size=idx.size)
        positions[idx] = np.mod(offset + spacing * np.arange(idx.size) + jitter,
                                cfg.track_length_m)
    n_m0 = m0_count(n_vehicles)
    states = []
    for i in range(n_vehicles):
        states.append(VehicleState(
            vehicle_id=i,
            traffic_class=TrafficClass.M0 if i < n_m0 else TrafficClass.M1,
            position_m=float(positions[i]),
            lane=int(lanes[i]),
            speed_mps=cfg.v0_mps,
            ema_sinr_db=np.zeros(m_subchannels),
            queue_delay_norm=0.0 if i < n_m0 else 1.0,
        ))
    return states


def ring_distance(a: float, b: float, track_length_m: float) -> float:
    """Shortest along-ring separation between two positions."""
    d = abs(a - b) % track_length_m
    return min(d, track_length_m - d)


def ring_distance_matrix(positions: np.ndarray, track_length_m: float) -> np.ndarray:
    """Pairwise shortest along-ring separations (zero diagonal)."""
    diff = np.abs(positions[:, None] - positions[None, :]) % track_length_m
    return np.minimum(diff, track_length_m - diff)


def same_lane_order_key(states: list[VehicleState]) -> list[tuple[int, float, int]]:
    """(lane, position, id) triples: the ring order used by the no-overtake check."""
    return sorted((s.lane, s.position_m, s.vehicle_id) for s in states)


def dump_trace_csv(rows: list[tuple], path: str) -> None:
    """Write a mobility trace: columns t_s, vehicle_id, lane, position_m, speed_mps."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t_s,vehicle_id,lane,position_m,speed_mps\n")
        for r in rows:
            fh.write(f"{r[0]:.1f},{r[1]},{r[2]},{r[3]:.3f},{r[4]:.3f}\n")
