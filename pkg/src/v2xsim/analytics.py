"""Closed-form coordination limits for uniform random subchannel selection.

All of these describe the one-shot game where each of several transmitters
independently picks one of M subchannels.  A "collision" for a transmitter
means at least one other transmitter picked the same subchannel in the same
TTI.  The uniform (symmetric mixed) profile is the fixed point that shared
policies converge to, so these values double as predictions for trained
shared-actor runs and as sanity anchors for untrained ones.
"""

from __future__ import annotations

import enum
import itertools

import numpy as np


class Regime(enum.Enum):
    """Qualitative load regime of a class pool, keyed on rho = demand / supply."""

    DETERMINISTIC = "deterministic"    # rho <= 1: a collision-free assignment exists
    PROBABILISTIC = "probabilistic"    # 1 < rho < rho_full: partial collisions unavoidable
    ANTI_HELPFUL = "anti-helpful"      # rho >= rho_full: isolation hurts the protected class


def nash_floor(m_subchannels: int, n_vehicles: int) -> float:
    """Collision probability for one transmitter when all pick uniformly at random.

    1 - ((M-1)/M)^(N-1): the chance at least one of the other N-1 uniform
    transmitters lands on this transmitter's subchannel.  Shared actors
    cannot do better while remaining symmetric, hence "floor".
    """
    if m_subchannels < 1 or n_vehicles < 1:
        raise ValueError("need m_subchannels >= 1 and n_vehicles >= 1")
    return 1.0 - ((m_subchannels - 1) / m_subchannels) ** (n_vehicles - 1)


def within_pool_ceiling(m0_pool: int, m0_vehicles: int) -> float:
    """Collision floor inside an isolated M0 pool of ``m0_pool`` subchannels.

    Same uniform-selection form as ``nash_floor`` but restricted to the M0
    population; called a ceiling because isolation can push realized
    collision UP to this level when the pool is undersized.
    """
    return nash_floor(m0_pool, m0_vehicles)


def cross_class_residual(m_subchannels: int, n_others: int) -> float:
    """Collision probability against ``n_others`` uniform transmitters on a shared pool.

    1 - ((M-1)/M)^n: what remains for a transmitter whose own class has
    coordinated perfectly but shares the pool with n uncoordinated others.
    Note cross_class_residual(M, N-1) == nash_floor(M, N).
    """
    if m_subchannels < 1 or n_others < 0:
        raise ValueError("need m_subchannels >= 1 and n_others >= 0")
    return 1.0 - ((m_subchannels - 1) / m_subchannels) ** n_others


def pigeonhole_min_colliding_fraction(m0_vehicles: int, m0_pool: int) -> float:
    """Smallest achievable fraction of colliding M0 transmitters in one TTI.

    Over all occupancy vectors (how many of the ``m0_vehicles`` sit on each of
    the ``m0_pool`` subchannels), minimize the fraction of vehicles on a
    subchannel holding two or more.  For small fleets this enumerates
    occupancy vectors exactly; beyond that it uses the packing argument:
    the best an overfull pool can do is keep pool-1 subchannels as
    singletons and dump everyone else on the last one, so the minimum is
    (m0 - (pool - 1)) / m0 once m0 exceeds the pool, and 0 before that.
    """
    if m0_vehicles < 1 or m0_pool < 1:
        raise ValueError("need m0_vehicles >= 1 and m0_pool >= 1")
    if m0_vehicles <= 8:
        best = m0_vehicles
        for occ in _occupancy_vectors(m0_vehicles, m0_pool):
            colliding = sum(n for n in occ if n >= 2)
            if colliding < best:
                best = colliding
        return best / m0_vehicles
    if m0_vehicles <= m0_pool:
        return 0.0
    return (m0_vehicles - (m0_pool - 1)) / m0_vehicles


def _occupancy_vectors(total: int, bins: int):
    """All ways to place ``total`` indistinct vehicles into ``bins`` subchannels."""
    if bins == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _occupancy_vectors(total - first, bins - 1):
            yield (first,) + rest


def rho_pool(m0_vehicles: int, m0_pool: int) -> float:
    """Pool pressure: M0 population over M0 pool size."""
    if m0_vehicles < 1 or m0_pool < 1:
        raise ValueError("need m0_vehicles >= 1 and m0_pool >= 1")
    return m0_vehicles / m0_pool


def classify_regime(rho: float, rho_full: float = 2.0) -> Regime:
    """Map pool pressure to a qualitative regime.

    ``rho_full`` (> 1) is where every subchannel of the pool is expected to
    carry two or more transmitters, i.e. isolation has become self-defeating.
    """
    if rho_full <= 1.0:
        raise ValueError(f"rho_full must exceed 1, got {rho_full}")
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    if rho <= 1.0:
        return Regime.DETERMINISTIC
    if rho < rho_full:
        return Regime.PROBABILISTIC
    return Regime.ANTI_HELPFUL


def monte_carlo_collision_rate(
    m_subchannels: int,
    n_vehicles: int,
    trials: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Empirical uniform-selection collision rate and its standard error.

    Draws ``trials`` independent TTIs of N uniform subchannel picks and
    returns (mean per-vehicle collision fraction, standard error over
    trials).  The mean estimates ``nash_floor(M, N)``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    est_sum = 0.0
    sq_sum = 0.0
    done = 0
    # Chunked so memory stays modest at large trial counts.
    chunk = 200_000
    while done < trials:
        t = min(chunk, trials - done)
        draws = rng.integers(0, m_subchannels, size=(t, n_vehicles))
        flat = draws + m_subchannels * np.arange(t)[:, None]
        counts = np.bincount(flat.ravel(), minlength=t * m_subchannels)
        counts = counts.reshape(t, m_subchannels)
        collided = np.take_along_axis(counts, draws, axis=1) >= 2
        frac = collided.mean(axis=1)
        est_sum += float(frac.sum())
        sq_sum += float((frac ** 2).sum())
        done += t
    mean = est_sum / trials
    var = max(sq_sum / trials - mean ** 2, 0.0)
    se = float(np.sqrt(var / trials))
    return mean, se


def pigeonhole_min_colliding_fraction_bruteforce(m0_vehicles: int, m0_pool: int) -> float:
    """Assignment-level exhaustive check of the pigeonhole minimum (tiny inputs only).

    Enumerates every labelled assignment of vehicles to subchannels rather
    than occupancy vectors; exists so tests can cross-check the main routine
    by a genuinely different enumeration.
    """
    if m0_vehicles > 8:
        raise ValueError("bruteforce oracle limited to m0_vehicles <= 8")
    best = m0_vehicles
    for assign in itertools.product(range(m0_pool), repeat=m0_vehicles):
        occ = np.bincount(np.array(assign), minlength=m0_pool)
        colliding = int(occ[occ >= 2].sum())
        if colliding < best:
            best = colliding
    return best / m0_vehicles
