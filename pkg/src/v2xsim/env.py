"""Sidelink resource-selection environment on the ring road.

Every vehicle transmits one broadcast packet per TTI on a chosen subchannel
at a chosen power.  Reception is evaluated at a single intended receiver,
the nearest other vehicle (preferring those inside the communication range,
ties to the lower id).  A collision is a pure occupancy event: some other
vehicle transmitted on the same absolute subchannel in the same TTI,
regardless of whether the SINR survived.

Step order within one TTI: advance mobility, resolve receivers, sample link
gains, score SINR / PDR / collisions, pay rewards, update per-vehicle EMA
SINR and M0 queue-delay counters, then emit observations and the
centralized state (whose trailing block is this TTI's occupancy, i.e. the
previous TTI's occupancy from the next decision's point of view).

Interference at a receiver sums over every other transmitter on the same
subchannel, including the receiver itself when it happens to transmit
there (its own power arrives through the minimum-distance clamp and
swamps reception).  Choosing your receiver's subchannel is therefore as
bad as any other collision, which keeps the occupancy-collision metric
aligned with what reception actually experiences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelConfig, dbm_to_mw, sinr_to_pdr
from .core import (
    POWER_LEVELS_DBM,
    ConfigError,
    EpisodeMetrics,
    JointAction,
    PoolLayout,
    PoolPartition,
    TrafficClass,
    VehicleState,
    build_global_state,
    m0_count,
    nearest_rank_percentile,
    obs_dim,
    SINR_FEATURE_SCALE_DB,
)
from .mobility import (
    MobilityConfig,
    init_positions,
    resolve_leaders,
    ring_distance_matrix,
    step_kinematics,
)


@dataclass(frozen=True)
class RewardConfig:
    """Coefficients of the two class reward shapes.

    M0: alpha * PDR + beta * clip(SINR_dB / denom, 0, 1) + gamma_team * team_pdr
    M1: delta * clip(SINR_dB / denom, 0, 1) - eta_team * (1 - team_pdr)

    where team_pdr is the current-TTI mean PDR over all M0 vehicles.
    """

    alpha_pdr: float = 1.0
    beta_sinr: float = 0.3
    gamma_team: float = 0.5
    delta_sinr: float = 0.3
    eta_team: float = 0.3
    sinr_shaping_denom_db: float = 20.0


@dataclass(frozen=True)
class EnvConfig:
    n_vehicles: int = 4
    m_subchannels: int = 5
    partition: PoolPartition = PoolPartition.SHARED
    m0_pool: int | None = None           # required iff partition is SEPARATED
    episode_len_ttis: int = 100
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    ema_keep: float = 0.9                # EMA retention; 1-ema_keep is the update weight
    ema_proxy_free_db: float = 20.0      # sensed proxy for an unobserved empty subchannel
    queue_horizon_ttis: int = 10

    def layout(self) -> PoolLayout:
        return PoolLayout.make(self.m_subchannels, self.partition, self.m0_pool)


def reward_m0(pdr: float, sinr_db: float, team_pdr: float, cfg: RewardConfig) -> float:
    shaped = float(np.clip(sinr_db / cfg.sinr_shaping_denom_db, 0.0, 1.0))
    return cfg.alpha_pdr * pdr + cfg.beta_sinr * shaped + cfg.gamma_team * team_pdr


def reward_m1(sinr_db: float, team_pdr: float, cfg: RewardConfig) -> float:
    shaped = float(np.clip(sinr_db / cfg.sinr_shaping_denom_db, 0.0, 1.0))
    return cfg.delta_sinr * shaped - cfg.eta_team * (1.0 - team_pdr)


@dataclass
class StepResult:
    tti: int
    observations: np.ndarray            # (N, obs_dim)
    global_state: np.ndarray            # (state_dim,)
    rewards: np.ndarray                 # (N,)
    pdr: np.ndarray                     # (N,)
    sinr_db: np.ndarray                 # (N,)
    collision: np.ndarray               # (N,) bool
    within_pool_collision: np.ndarray   # (N,) bool; meaningful for M0 vehicles


class SidelinkEnv:
    """Stateful episode runner.  Construct once, ``reset`` per episode."""

    def __init__(self, cfg: EnvConfig):
        layout = cfg.layout()  # validates M / partition / m0 pool
        n = cfg.n_vehicles
        if n < 1:
            raise ConfigError("need at least one vehicle")
        self.cfg = cfg
        self.layout = layout
        self.n = n
        self.m = cfg.m_subchannels
        self.n_m0 = m0_count(n)
        self.obs_dim = obs_dim(self.m)
        self.debug_counters: dict[str, int] = {"masked_actions": 0, "distance_clamped": 0}
        self._trace: list[tuple] | None = None
        self._rng: np.random.Generator | None = None

    # ------------------------------------------------------------------ setup

    def reset(self, seed: int, initial_states: list[VehicleState] | None = None) -> StepResult:
        """Start an episode.  No transmission happens in TTI 0.

        ``initial_states`` overrides the seeded placement (used by scripted
        and relabeling tests); radio bookkeeping fields are reinitialized
        either way.
        """
        ss = np.random.SeedSequence(seed)
        mob_seed, chan_seed = (int(s) for s in ss.generate_state(2))
        if initial_states is None:
            states = init_positions(self.n, mob_seed, self.cfg.mobility, self.m)
        else:
            if len(initial_states) != self.n:
                raise ConfigError("initial_states has wrong vehicle count")
            states = initial_states
        self._rng = np.random.default_rng(chan_seed)
        self.positions = np.array([s.position_m for s in states])
        self.speeds = np.array([s.speed_mps for s in states])
        self.lanes = np.array([s.lane for s in states], dtype=np.int64)
        self.classes = np.array(
            [0 if s.traffic_class is TrafficClass.M0 else 1 for s in states], dtype=np.int64
        )
        self.m0_idx = np.flatnonzero(self.classes == 0)
        self.m1_idx = np.flatnonzero(self.classes == 1)
        # Ring order within a lane never changes, so the leader assignment
        # holds for the whole episode.
        self._leader, self._alone = resolve_leaders(self.positions, self.lanes)
        # Sensing memory starts at the idle-channel proxy level, so the first
        # TTIs read as "all channels free" rather than as an all-zero pattern
        # the trained policy never sees again.
        self.ema_sinr_db = np.full((self.n, self.m), self.cfg.ema_proxy_free_db)
        self.queue_ttis = np.zeros(self.n_m0, dtype=np.int64)
        self.chosen_sub = np.array(
            [self.layout.slice_for(TrafficClass.M0 if c == 0 else TrafficClass.M1).start
             for c in self.classes], dtype=np.int64)
        self.chosen_power_idx = np.zeros(self.n, dtype=np.int64)
        self.prev_occupancy = np.zeros(self.m)
        self._tti = 0
        self._reset_accumulators()
        obs = self._observation_matrix()
        return StepResult(
            tti=0,
            observations=obs,
            global_state=build_global_state(obs, self.prev_occupancy),
            rewards=np.zeros(self.n),
            pdr=np.zeros(self.n),
            sinr_db=np.zeros(self.n),
            collision=np.zeros(self.n, dtype=bool),
            within_pool_collision=np.zeros(self.n, dtype=bool),
        )

    def _reset_accumulators(self) -> None:
        self._pdr_rows: list[np.ndarray] = []
        self._sinr_rows: list[np.ndarray] = []
        self._collision_rows: list[np.ndarray] = []
        self._within_rows: list[np.ndarray] = []

    # ------------------------------------------------------------------- step

    def step(self, action: JointAction) -> StepResult:
        if self._rng is None:
            raise RuntimeError("reset() before step()")
        action.validate(self.n, self.m)
        cfg = self.cfg
        sub = action.subchannels.copy()
        pow_idx = action.power_indices.copy()

        # Guard scripted inputs: clamp out-of-slice picks to the slice edge.
        for cls_val, sl in ((0, self.layout.m0_slice), (1, self.layout.m1_slice)):
            idx = self.m0_idx if cls_val == 0 else self.m1_idx
            clamped = np.clip(sub[idx], sl.start, sl.stop - 1)
            self.debug_counters["masked_actions"] += int((clamped != sub[idx]).sum())
            sub[idx] = clamped
        assert self._slices_respected(sub), "subchannel escaped its class slice"
        self.chosen_sub = sub
        self.chosen_power_idx = pow_idx
        power_dbm = np.array(POWER_LEVELS_DBM)[pow_idx]

        # 1. Mobility advances first; this TTI is scored on the new geometry.
        self.positions, self.speeds = step_kinematics(
            self.positions, self.speeds, self.lanes, cfg.mobility,
            self._leader, self._alone)

        # 2. Receiver pairing and link gains.  Pairing uses an inf diagonal;
        #    gains keep the raw distances so the self link exists (clamped to
        #    d_min) for the receiver-transmitting-too case.
        dist = ring_distance_matrix(self.positions, cfg.mobility.track_length_m)
        self.debug_counters["distance_clamped"] += int(
            (dist[~np.eye(self.n, dtype=bool)] < cfg.channel.d_min_m).sum())
        dist_pair = dist.copy()
        np.fill_diagonal(dist_pair, np.inf)
        rx_any = np.argmin(dist_pair, axis=1)
        in_range = np.where(dist_pair <= cfg.channel.comm_range_m, dist_pair, np.inf)
        rx_pref = np.argmin(in_range, axis=1)
        has_pref = np.isfinite(in_range[np.arange(self.n), rx_pref])
        receiver_of = np.where(has_pref, rx_pref, rx_any)
        gain = self._sample_gains(dist, receiver_of)

        # 3. SINR at each intended receiver: interference from every other
        #    co-channel transmitter, the receiver itself included.
        p_mw = dbm_to_mw(power_dbm)
        noise_mw = float(dbm_to_mw(cfg.channel.noise_dbm))
        rows = np.arange(self.n)
        signal_mw = p_mw * gain[rows, receiver_of]
        cochannel = sub[:, None] == sub[None, :]
        np.fill_diagonal(cochannel, False)
        gain_at_rx = gain[:, receiver_of].T            # [i, k] = gain from k to i's receiver
        interference_mw = (cochannel * (p_mw[None, :] * gain_at_rx)).sum(axis=1)
        sinr_lin = signal_mw / (interference_mw + noise_mw)
        sinr_db = 10.0 * np.log10(sinr_lin)
        pdr = sinr_to_pdr(sinr_db, cfg.channel)

        # 4. Collisions (occupancy events) and rewards.
        occ = np.bincount(sub, minlength=self.m)
        collision = occ[sub] >= 2
        in_m0_slice = (sub >= self.layout.m0_slice.start) & (sub < self.layout.m0_slice.stop)
        within_pool = collision & in_m0_slice
        team_pdr = float(pdr[self.m0_idx].mean())
        shaped = np.clip(sinr_db / cfg.reward.sinr_shaping_denom_db, 0.0, 1.0)
        rewards = np.empty(self.n)
        rewards[self.m0_idx] = (cfg.reward.alpha_pdr * pdr[self.m0_idx]
                                + cfg.reward.beta_sinr * shaped[self.m0_idx]
                                + cfg.reward.gamma_team * team_pdr)
        rewards[self.m1_idx] = (cfg.reward.delta_sinr * shaped[self.m1_idx]
                                - cfg.reward.eta_team * (1.0 - team_pdr))

        # 5. Bookkeeping: delivery draws, queue delay, EMA SINR, occupancy.
        delivered = self._rng.random(self.n_m0) < pdr[self.m0_idx]
        self.queue_ttis = np.where(delivered, 0, self.queue_ttis + 1)
        keep = cfg.ema_keep
        proxy_db = cfg.ema_proxy_free_db / (1.0 + occ)
        old_used = self.ema_sinr_db[rows, sub].copy()
        self.ema_sinr_db = keep * self.ema_sinr_db + (1.0 - keep) * proxy_db[None, :]
        # The used subchannel blends the true measurement, not the proxy.
        self.ema_sinr_db[rows, sub] = keep * old_used + (1.0 - keep) * sinr_db
        self.prev_occupancy = occ / self.n

        self._tti += 1
        self._pdr_rows.append(pdr)
        self._sinr_rows.append(sinr_db)
        self._collision_rows.append(collision)
        self._within_rows.append(within_pool)
        if self._trace is not None:
            for i in range(self.n):
                self._trace.append((self._tti, i, int(sub[i]), float(power_dbm[i]),
                                    float(sinr_db[i]), float(pdr[i]), bool(collision[i])))

        obs = self._observation_matrix()
        if not np.isfinite(obs).all():
            raise RuntimeError("non-finite observation entry")
        return StepResult(
            tti=self._tti,
            observations=obs,
            global_state=build_global_state(obs, self.prev_occupancy),
            rewards=rewards,
            pdr=pdr,
            sinr_db=sinr_db,
            collision=collision,
            within_pool_collision=within_pool,
        )

    def _sample_gains(self, dist: np.ndarray, receiver_of: np.ndarray) -> np.ndarray:
        """Per-TTI linear gain matrix (inlined twin of channel.sample_gain_matrix)."""
        ch = self.cfg.channel
        d = np.maximum(dist, ch.d_min_m)
        pl = 32.4 + 20.0 * np.log10(ch.carrier_freq_ghz) + 20.0 * np.log10(d)
        gain = 10.0 ** (-pl / 10.0)
        if ch.rayleigh_fading:
            gain = gain * self._rng.exponential(1.0, size=(self.n, self.n))
        if ch.shadow_sigma_db > 0.0:
            shadow = self._rng.normal(0.0, ch.shadow_sigma_db, size=self.n)
            rows = np.arange(self.n)
            gain[rows, receiver_of] = gain[rows, receiver_of] * 10.0 ** (-shadow / 10.0)
        return gain

    def _slices_respected(self, sub: np.ndarray) -> bool:
        m0_ok = ((sub[self.m0_idx] >= self.layout.m0_slice.start)
                 & (sub[self.m0_idx] < self.layout.m0_slice.stop)).all()
        m1_ok = ((sub[self.m1_idx] >= self.layout.m1_slice.start)
                 & (sub[self.m1_idx] < self.layout.m1_slice.stop)).all()
        return bool(m0_ok and m1_ok)

    # ----------------------------------------------------------- observations

    def _observation_matrix(self) -> np.ndarray:
        cfg = self.cfg
        out = np.empty((self.n, self.obs_dim))
        out[:, 0] = self.positions / cfg.mobility.track_length_m
        out[:, 1] = self.speeds / cfg.mobility.v0_mps
        out[:, 2] = self.lanes
        out[:, 3:3 + self.m] = np.clip(self.ema_sinr_db / SINR_FEATURE_SCALE_DB, -1.0, 2.0)
        denom = max(self.n - 1, 1)
        out[:, 3 + self.m] = np.arange(self.n) / denom
        out[:, 3 + self.m + 1] = (self.classes == 0).astype(float)
        queue = np.ones(self.n)
        queue[self.m0_idx] = np.clip(self.queue_ttis / cfg.queue_horizon_ttis, 0.0, 1.0)
        out[:, 3 + self.m + 2] = queue
        return out

    # ---------------------------------------------------------------- metrics

    def finalize_metrics(self, episode_index: int, seed: int) -> EpisodeMetrics:
        if not self._pdr_rows:
            raise RuntimeError("no steps taken; nothing to aggregate")
        pdr = np.stack(self._pdr_rows)            # (T, N)
        sinr = np.stack(self._sinr_rows)
        coll = np.stack(self._collision_rows)
        within = np.stack(self._within_rows)
        m0 = self.m0_idx
        m1 = self.m1_idx
        per_tti_m0_pdr = pdr[:, m0].mean(axis=1)
        return EpisodeMetrics(
            m0_pdr_mean=float(pdr[:, m0].mean()),
            m1_pdr_mean=float(pdr[:, m1].mean()) if m1.size else 0.0,
            m0_collision_rate=float(coll[:, m0].mean()),
            m0_within_pool_collision_rate=float(within[:, m0].mean()),
            m0_sinr_mean_db=float(sinr[:, m0].mean()),
            m0_pdr_p05_intra=nearest_rank_percentile(per_tti_m0_pdr, 5.0),
            episode_index=episode_index,
            seed=seed,
        )

    # ------------------------------------------------------------------ views

    def vehicle_states(self) -> list[VehicleState]:
        """Snapshot of per-vehicle state as value objects."""
        states = []
        m0_slot = {int(v): k for k, v in enumerate(self.m0_idx)}
        for i in range(self.n):
            is_m0 = self.classes[i] == 0
            queue = (float(np.clip(self.queue_ttis[m0_slot[i]]
                                   / self.cfg.queue_horizon_ttis, 0.0, 1.0))
                     if is_m0 else 1.0)
            states.append(VehicleState(
                vehicle_id=i,
                traffic_class=TrafficClass.M0 if is_m0 else TrafficClass.M1,
                position_m=float(self.positions[i]),
                lane=int(self.lanes[i]),
                speed_mps=float(self.speeds[i]),
                chosen_subchannel=int(self.chosen_sub[i]),
                chosen_power_dbm=float(POWER_LEVELS_DBM[self.chosen_power_idx[i]]),
                ema_sinr_db=self.ema_sinr_db[i].copy(),
                queue_delay_norm=queue,
            ))
        return states

    @property
    def steps_taken(self) -> int:
        return self._tti

    def enable_trace(self) -> None:
        self._trace = []

    def dump_trace_csv(self, path: str) -> None:
        if self._trace is None:
            raise RuntimeError("trace not enabled")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tti,vehicle_id,subchannel,power_dbm,sinr_db,pdr,collision\n")
            for row in self._trace:
                fh.write(",".join(str(x) for x in row) + "\n")
