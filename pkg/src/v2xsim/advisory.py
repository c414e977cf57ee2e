"""Infrastructure advisory layer: conflict graph, subchannel coloring, escalation.

This sits beside the learning loop, never inside it.  Vehicles (one per
sub-zone, the smallest unit) get pairwise conflict edges from a constant
velocity look-ahead on the ring; a deterministic greedy coloring turns the
graph into subchannel recommendations.  The mandatory-stop escalation
machine is a three-phase automaton whose every transition (and every human
override credential) is recorded in a hash-chained append-only log, making
after-the-fact edits detectable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .core import VehicleState
from .mobility import ring_distance

GENESIS_HASH = "0" * 64


# ---------------------------------------------------------------- conflict graph

@dataclass(frozen=True)
class SubZone:
    id: int
    member_vehicle_ids: frozenset[int]
    centroid_m: float


@dataclass(frozen=True)
class ConflictGraph:
    nodes: tuple[int, ...]
    edges: frozenset[frozenset[int]]

    def neighbors(self, node: int) -> set[int]:
        out = set()
        for e in self.edges:
            if node in e:
                out |= e - {node}
        return out

    def degree(self, node: int) -> int:
        return sum(1 for e in self.edges if node in e)


def predicted_min_gap(
    pos_a: float, speed_a: float,
    pos_b: float, speed_b: float,
    horizon_s: float, track_length_m: float,
) -> float:
    """Minimum ring gap between two constant-velocity vehicles over [0, horizon]."""
    candidates = [0.0, horizon_s]
    dv = speed_a - speed_b
    if dv != 0.0:
        # Closest approach of the unwrapped linear gap.
        d0 = (pos_a - pos_b + track_length_m / 2.0) % track_length_m - track_length_m / 2.0
        t_star = -d0 / dv
        if 0.0 < t_star < horizon_s:
            candidates.append(t_star)
    return min(
        ring_distance(pos_a + speed_a * t, pos_b + speed_b * t, track_length_m)
        for t in candidates
    )


def build_conflict_graph(
    vehicles: list[VehicleState],
    horizon_s: float = 5.0,
    threshold_m: float = 50.0,
    track_length_m: float = 3000.0,
) -> tuple[list[SubZone], ConflictGraph]:
    """One sub-zone per vehicle; edges between kinematically interacting pairs.

    Pair (i, j) conflicts when the predicted constant-velocity minimum gap
    within the horizon drops below the threshold, or when they share a lane
    with the current gap already below the threshold.
    """
    if not vehicles:
        raise ValueError("need at least one vehicle")
    zones = [
        SubZone(id=v.vehicle_id, member_vehicle_ids=frozenset({v.vehicle_id}),
                centroid_m=v.position_m)
        for v in vehicles
    ]
    edges = set()
    for i in range(len(vehicles)):
        for j in range(i + 1, len(vehicles)):
            a, b = vehicles[i], vehicles[j]
            min_gap = predicted_min_gap(
                a.position_m, a.speed_mps, b.position_m, b.speed_mps,
                horizon_s, track_length_m)
            current = ring_distance(a.position_m, b.position_m, track_length_m)
            if min_gap < threshold_m or (a.lane == b.lane and current < threshold_m):
                edges.add(frozenset({a.vehicle_id, b.vehicle_id}))
    graph = ConflictGraph(
        nodes=tuple(v.vehicle_id for v in vehicles),
        edges=frozenset(edges),
    )
    return zones, graph


# --------------------------------------------------------------------- coloring

@dataclass(frozen=True)
class ColoringResult:
    """Either a proper assignment or the first node greedy could not color."""

    assignment: dict[int, int] | None
    infeasible_node: int | None
    colors_used: int

    @property
    def feasible(self) -> bool:
        return self.assignment is not None


def greedy_color(graph: ConflictGraph, colors_available: int) -> ColoringResult:
    """Descending-degree greedy (ties to the lower id), smallest free color.

    Infeasibility (a node needing a color at or beyond the budget) is a
    return value, not an exception.
    """
    if colors_available < 1:
        raise ValueError("need at least one color")
    order = sorted(graph.nodes, key=lambda n: (-graph.degree(n), n))
    neighbor_map = {n: graph.neighbors(n) for n in graph.nodes}
    assignment: dict[int, int] = {}
    colors_used = 0
    for node in order:
        taken = {assignment[nb] for nb in neighbor_map[node] if nb in assignment}
        color = 0
        while color in taken:
            color += 1
        if color >= colors_available:
            return ColoringResult(assignment=None, infeasible_node=node,
                                  colors_used=colors_used)
        assignment[node] = color
        colors_used = max(colors_used, color + 1)
    return ColoringResult(assignment=assignment, infeasible_node=None,
                          colors_used=colors_used)


def reuse_factor(assignment: dict[int, int], n_subzones: int) -> float:
    """Sub-zones served per distinct subchannel used."""
    if n_subzones < 1:
        raise ValueError("need at least one sub-zone")
    if len(assignment) != n_subzones:
        raise ValueError("assignment must cover every sub-zone")
    distinct = len(set(assignment.values()))
    return n_subzones / distinct


# ------------------------------------------------------------------- escalation

class TamperError(RuntimeError):
    """The escalation log's hash chain does not verify."""


@dataclass(frozen=True)
class StopOrder:
    segment: str
    horizon_m: float
    expires_at: float


@dataclass(frozen=True)
class EscalationInputs:
    c1_sensor_verified: bool
    c2_density_exceeded: bool
    c3_preauthorized: bool
    now: float
    human_override: str | None = None
    hazard_resolved: bool = False
    segment: str = "segment-0"
    horizon_m: float = 500.0
    stop_duration_s: float = 30.0


@dataclass(frozen=True)
class EscalationState:
    phase: str = "normal"                      # normal | mandatory_stop | cancelled
    stop: StopOrder | None = None
    log: tuple[dict, ...] = field(default_factory=tuple)


def _entry_hash(prev_hash: str, body: dict) -> str:
    blob = prev_hash + json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _append(log: tuple[dict, ...], body: dict) -> tuple[dict, ...]:
    prev = log[-1]["entry_hash"] if log else GENESIS_HASH
    entry = dict(body)
    entry["prev_hash"] = prev
    entry["entry_hash"] = _entry_hash(prev, body)
    return log + (entry,)


def verify_chain(log: tuple[dict, ...] | list[dict]) -> None:
    """Recompute every link; raise TamperError on the first mismatch."""
    prev = GENESIS_HASH
    for i, entry in enumerate(log):
        body = {k: v for k, v in entry.items() if k not in ("prev_hash", "entry_hash")}
        if entry.get("prev_hash") != prev:
            raise TamperError(f"entry {i}: prev_hash mismatch")
        if entry.get("entry_hash") != _entry_hash(prev, body):
            raise TamperError(f"entry {i}: entry_hash mismatch")
        prev = entry["entry_hash"]


def escalation_step(state: EscalationState, inputs: EscalationInputs) -> EscalationState:
    """Advance the automaton by one decision; returns the successor state.

    Trigger rule (from normal or cancelled): mandatory stop iff conditions 2
    and 3 hold together with either a verified condition 1 or a credentialed
    human override.  A standing stop cancels when the hazard resolves or the
    order expires.  The hash chain is verified before anything else.
    """
    verify_chain(state.log)
    log = state.log
    snapshot = {
        "c1_sensor_verified": inputs.c1_sensor_verified,
        "c2_density_exceeded": inputs.c2_density_exceeded,
        "c3_preauthorized": inputs.c3_preauthorized,
        "hazard_resolved": inputs.hazard_resolved,
    }
    if inputs.human_override is not None:
        log = _append(log, {
            "timestamp": inputs.now,
            "event": "override_presented",
            "conditions": snapshot,
            "credential": inputs.human_override,
        })
    if state.phase in ("normal", "cancelled"):
        triggered = inputs.c2_density_exceeded and inputs.c3_preauthorized and (
            inputs.c1_sensor_verified or inputs.human_override is not None)
        if triggered:
            stop = StopOrder(
                segment=inputs.segment,
                horizon_m=inputs.horizon_m,
                expires_at=inputs.now + inputs.stop_duration_s,
            )
            pathway = "pathway-1" if inputs.c1_sensor_verified else "pathway-2"
            log = _append(log, {
                "timestamp": inputs.now,
                "event": "mandatory_stop",
                "pathway": pathway,
                "segment": stop.segment,
                "horizon_m": stop.horizon_m,
                "expires_at": stop.expires_at,
                "conditions": snapshot,
                "credential": inputs.human_override,
            })
            return EscalationState(phase="mandatory_stop", stop=stop, log=log)
        return replace(state, log=log)
    # mandatory_stop
    assert state.stop is not None
    if inputs.hazard_resolved or inputs.now >= state.stop.expires_at:
        reason = "hazard_resolved" if inputs.hazard_resolved else "expired"
        log = _append(log, {
            "timestamp": inputs.now,
            "event": "cancelled",
            "reason": reason,
            "conditions": snapshot,
            "credential": inputs.human_override,
        })
        return EscalationState(phase="cancelled", stop=None, log=log)
    return replace(state, log=log)
