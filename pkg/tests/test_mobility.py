"""Car-following dynamics on the ring: formula oracle, ordering, and init laws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2xsim.core import TrafficClass
from v2xsim.mobility import (
    MobilityConfig,
    idm_acceleration,
    init_positions,
    resolve_leaders,
    ring_distance,
    ring_distance_matrix,
    same_lane_order_key,
    step_kinematics,
    step_mobility,
)

CFG = MobilityConfig()


class TestAccelerationFormula:
    def test_hand_computed_case(self):
        # v = 20, leader at 15 m/s, gap 30 m, defaults:
        #   s* = 2 + 20*1.5 + 20*(20-15) / (2*sqrt(1.4*2.0)) = 61.880715233359845
        #   a  = 1.4 * (1 - (20/33.3)^4 - (s*/30)^2)        = -4.738736561267428
        got = idm_acceleration(speed=20.0, gap=30.0, speed_lead=15.0, cfg=CFG)
        assert got == pytest.approx(-4.738736561267428, rel=1e-12)

    def test_free_road_terms(self):
        # Huge gap: interaction term vanishes, desired-speed term remains.
        assert idm_acceleration(CFG.v0_mps, 1e12, CFG.v0_mps, CFG) == pytest.approx(0.0, abs=1e-6)
        assert idm_acceleration(0.0, 1e12, 0.0, CFG) == pytest.approx(CFG.a_max_mps2, abs=1e-6)

    def test_desired_gap_floor(self):
        # A much faster leader would make s* negative; it must clamp at zero,
        # leaving pure free-road behaviour.
        slow = idm_acceleration(5.0, 40.0, 80.0, CFG)
        free = idm_acceleration(5.0, 1e12, 5.0, CFG)
        assert slow == pytest.approx(free, abs=1e-9)

    def test_small_gap_brakes_hard(self):
        assert idm_acceleration(20.0, 3.0, 20.0, CFG) < -10.0

    @given(st.floats(0.0, 40.0), st.floats(0.5, 500.0), st.floats(0.0, 40.0))
    @settings(max_examples=200)
    def test_monotone_in_gap(self, v, gap, v_lead):
        a1 = idm_acceleration(v, gap, v_lead, CFG)
        a2 = idm_acceleration(v, gap + 1.0, v_lead, CFG)
        assert a2 >= a1 - 1e-12


class TestRingDistance:
    def test_wraps(self):
        assert ring_distance(100.0, 2950.0, 3000.0) == pytest.approx(150.0)
        assert ring_distance(2950.0, 100.0, 3000.0) == pytest.approx(150.0)
        assert ring_distance(0.0, 1500.0, 3000.0) == pytest.approx(1500.0)
        assert ring_distance(10.0, 10.0, 3000.0) == 0.0

    def test_matrix_matches_scalar(self):
        pos = np.array([0.0, 100.0, 2950.0, 1500.0])
        mat = ring_distance_matrix(pos, 3000.0)
        for i in range(4):
            for j in range(4):
                assert mat[i, j] == pytest.approx(ring_distance(pos[i], pos[j], 3000.0))
        assert (mat == mat.T).all()
        assert (np.diag(mat) == 0).all()

    @given(st.floats(0.0, 2999.9), st.floats(0.0, 2999.9))
    def test_bounded_by_half_track(self, a, b):
        assert 0.0 <= ring_distance(a, b, 3000.0) <= 1500.0 + 1e-9


class TestLeaders:
    def test_matches_nearest_ahead_bruteforce(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(2, 11))
            pos = rng.uniform(0, 3000.0, n)
            lanes = rng.integers(0, 2, n)
            leader, alone = resolve_leaders(pos, lanes)
            for i in range(n):
                mates = [j for j in range(n) if j != i and lanes[j] == lanes[i]]
                if not mates:
                    assert alone[i]
                    assert leader[i] == i
                    continue
                assert not alone[i]
                ahead = {j: (pos[j] - pos[i]) % 3000.0 for j in mates}
                assert leader[i] == min(ahead, key=ahead.get)

    def test_two_vehicles_lead_each_other(self):
        leader, alone = resolve_leaders(np.array([100.0, 200.0]), np.array([0, 0]))
        assert list(leader) == [1, 0]
        assert not alone.any()


class TestStepKinematics:
    def test_single_vehicle_free_road(self):
        pos, spd = step_kinematics(np.array([10.0]), np.array([10.0]), np.array([0]), CFG)
        accel = idm_acceleration(10.0, 1e12, 10.0, CFG)
        # Semi-implicit Euler: speed updates first, then position uses it.
        v_expected = 10.0 + accel * CFG.dt_s
        assert spd[0] == pytest.approx(v_expected, abs=1e-9)
        assert pos[0] == pytest.approx(10.0 + v_expected * CFG.dt_s, rel=1e-12)

    def test_position_wraps(self):
        pos, _ = step_kinematics(np.array([2999.9]), np.array([30.0]), np.array([0]), CFG)
        assert 0.0 <= pos[0] < 10.0

    def test_speed_never_negative(self):
        # Leader glued to the bumper: braking demand far exceeds v/dt.
        pos = np.array([0.0, 2.5])
        spd = np.array([1.0, 0.0])
        for _ in range(50):
            pos, spd = step_kinematics(pos, spd, np.array([0, 0]), CFG)
            assert (spd >= 0.0).all()

    def test_matches_scalar_oracle_two_vehicles(self):
        # Straight-line reference computed with plain floats.
        p0, p1 = 100.0, 160.0
        v0, v1 = 25.0, 20.0
        gap01 = (p1 - p0) % 3000.0
        gap10 = (p0 - p1) % 3000.0
        a0 = idm_acceleration(v0, gap01, v1, CFG)
        a1 = idm_acceleration(v1, gap10, v0, CFG)
        ev0 = max(v0 + a0 * CFG.dt_s, 0.0)
        ev1 = max(v1 + a1 * CFG.dt_s, 0.0)
        ep0 = (p0 + ev0 * CFG.dt_s) % 3000.0
        ep1 = (p1 + ev1 * CFG.dt_s) % 3000.0
        pos, spd = step_kinematics(
            np.array([p0, p1]), np.array([v0, v1]), np.array([0, 0]), CFG
        )
        np.testing.assert_allclose(spd, [ev0, ev1], rtol=1e-12)
        np.testing.assert_allclose(pos, [ep0, ep1], rtol=1e-12)

    def test_cached_leaders_match_fresh_resolution(self):
        rng = np.random.default_rng(11)
        pos = rng.uniform(0, 3000.0, 8)
        spd = rng.uniform(0, 33.3, 8)
        lanes = rng.integers(0, 2, 8)
        leader, alone = resolve_leaders(pos, lanes)
        a = step_kinematics(pos, spd, lanes, CFG)
        b = step_kinematics(pos, spd, lanes, CFG, leader, alone)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_no_overtaking_long_run(self):
        # Same-lane ring order is invariant over long horizons.
        for seed in range(20):
            states = init_positions(10, seed=seed)
            pos = np.array([s.position_m for s in states])
            spd = np.array([s.speed_mps for s in states])
            lanes = np.array([s.lane for s in states])
            leader, alone = resolve_leaders(pos, lanes)
            order0 = _lane_orders(pos, lanes)
            for _ in range(10_000):
                pos, spd = step_kinematics(pos, spd, lanes, CFG, leader, alone)
            assert _lane_orders(pos, lanes) == order0, f"seed {seed}"

    def test_speeds_settle_near_desired(self):
        # Lightly loaded ring: everyone ends close to v0.
        states = init_positions(4, seed=3)
        pos = np.array([s.position_m for s in states])
        spd = np.array([s.speed_mps for s in states])
        lanes = np.array([s.lane for s in states])
        for _ in range(5_000):
            pos, spd = step_kinematics(pos, spd, lanes, CFG)
        assert (spd > 0.5 * CFG.v0_mps).all()
        assert (spd <= CFG.v0_mps + 1e-6).all()


def _lane_orders(pos, lanes):
    orders = {}
    for lane in np.unique(lanes):
        idx = np.flatnonzero(lanes == lane)
        ring = idx[np.argsort(pos[idx])]
        # Normalize rotation so the cyclic order compares equal.
        k = int(np.argmin(ring))
        orders[int(lane)] = tuple(np.roll(ring, -k))
    return orders


class TestInitPositions:
    def test_counts_and_classes(self):
        states = init_positions(7, seed=0, m_subchannels=5)
        assert len(states) == 7
        assert [s.vehicle_id for s in states] == list(range(7))
        assert [s.traffic_class for s in states[:3]] == [TrafficClass.M0] * 3
        assert [s.traffic_class for s in states[3:]] == [TrafficClass.M1] * 4
        for s in states:
            assert s.ema_sinr_db.shape == (5,)
            assert 0.0 <= s.position_m < CFG.track_length_m
            assert s.lane in (0, 1)
            assert s.speed_mps == CFG.v0_mps
        # M0 queues start empty, M1 pinned full.
        assert all(s.queue_delay_norm == 0.0 for s in states[:3])
        assert all(s.queue_delay_norm == 1.0 for s in states[3:])

    def test_spacing_respects_standstill_gap(self):
        for seed in range(100):
            states = init_positions(10, seed=seed)
            pos = np.array([s.position_m for s in states])
            lanes = np.array([s.lane for s in states])
            for lane in (0, 1):
                idx = np.flatnonzero(lanes == lane)
                if idx.size < 2:
                    continue
                ring = np.sort(pos[idx])
                gaps = np.diff(np.append(ring, ring[0] + CFG.track_length_m))
                assert (gaps >= CFG.s0_m - 1e-9).all(), f"seed {seed} lane {lane}"

    def test_deterministic_per_seed(self):
        a = init_positions(6, seed=42)
        b = init_positions(6, seed=42)
        assert [(s.position_m, s.lane) for s in a] == [(s.position_m, s.lane) for s in b]
        c = init_positions(6, seed=43)
        assert [(s.position_m, s.lane) for s in a] != [(s.position_m, s.lane) for s in c]

    def test_jitter_varies_spacing(self):
        states = init_positions(10, seed=1)
        pos = np.array([s.position_m for s in states])
        lanes = np.array([s.lane for s in states])
        lane0 = np.sort(pos[lanes == 0])
        if lane0.size >= 3:
            gaps = np.diff(lane0)
            assert gaps.std() > 0.0


class TestStepMobilityWrapper:
    def test_matches_array_core(self):
        states = init_positions(5, seed=9)
        pos = np.array([s.position_m for s in states])
        spd = np.array([s.speed_mps for s in states])
        lanes = np.array([s.lane for s in states])
        stepped = step_mobility(states, CFG)
        epos, espd = step_kinematics(pos, spd, lanes, CFG)
        np.testing.assert_allclose([s.position_m for s in stepped], epos, rtol=1e-12)
        np.testing.assert_allclose([s.speed_mps for s in stepped], espd, rtol=1e-12)
        # Untouched fields carry over.
        assert [s.vehicle_id for s in stepped] == [s.vehicle_id for s in states]
        assert [s.lane for s in stepped] == [s.lane for s in states]

    def test_order_key_helper(self):
        states = init_positions(6, seed=2)
        key = same_lane_order_key(states)
        assert len(key) == 6
        stepped = states
        for _ in range(200):
            stepped = step_mobility(stepped, CFG)
        # Keys sort identically before and after (no lane change, no pass).
        ids_before = [k[-1] for k in sorted(key)]
        ids_after = [k[-1] for k in sorted(same_lane_order_key(stepped))]
        lane_of = {s.vehicle_id: s.lane for s in states}
        by_lane_before = {ln: [i for i in ids_before if lane_of[i] == ln] for ln in (0, 1)}
        by_lane_after = {ln: [i for i in ids_after if lane_of[i] == ln] for ln in (0, 1)}
        for ln in (0, 1):
            a, b = by_lane_before[ln], by_lane_after[ln]
            assert _cyclic_equal(a, b), ln


def _cyclic_equal(a, b):
    if len(a) != len(b):
        return False
    if not a:
        return True
    if set(a) != set(b):
        return False
    k = b.index(a[0])
    return a == b[k:] + b[:k]


def test_config_defaults_frozen():
    cfg = MobilityConfig()
    assert (cfg.track_length_m, cfg.n_lanes, cfg.dt_s) == (3000.0, 2, 0.1)
    assert (cfg.v0_mps, cfg.headway_s) == (33.3, 1.5)
    assert (cfg.a_max_mps2, cfg.b_comf_mps2, cfg.s0_m, cfg.delta_exp) == (1.4, 2.0, 2.0, 4.0)
