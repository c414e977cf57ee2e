"""Assemble figure data from validated ledger entries.

Every figure plots seed medians: entries are grouped into configurations
(same partition, mode, fleet, pool, and scale; different seeds) and each
configuration contributes one point.  Analytical overlay values are taken
from the ledger's recorded analysis columns, never recomputed here, so a
figure can only ever show what the producing run actually logged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inputs import ANALYSIS_KEYS, METRIC_KEYS, FigureError

FIGURE_IDS = ("nash-floor", "twin-axis", "ceiling-2panel", "ds-3panel", "0a-vs-0c")

# Reporting target for mean M0 PDR, drawn as a dotted guide line.
PDR_TARGET = 0.9


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    ledger_path: str
    out_path: str
    series_path: str | None = None


def _median(values) -> float:
    return float(np.median(values))


def _configs(entries: list[dict]) -> list[dict]:
    """Collapse per-seed entries into per-configuration summaries."""
    groups: dict[tuple, list[dict]] = {}
    for e in entries:
        key = (e["partition"], e["mode"], e["n_vehicles"],
               e["m_subchannels"], e["m0_pool"], e["scale"])
        groups.setdefault(key, []).append(e)

    def sort_key(key):
        part, mode, n, m, pool, scale = key
        return (part, mode, n, m, -1 if pool is None else pool, scale)

    out = []
    for key in sorted(groups, key=sort_key):
        grp = groups[key]
        first = grp[0]
        label = (f"{key[0]}/{key[1]} N={key[2]} M={key[3]}"
                 + (f" pool={key[4]}" if key[4] is not None else ""))
        for e in grp[1:]:
            if e["n_m0"] != first["n_m0"]:
                raise FigureError(f"inconsistent n_m0 across seeds of {label}")
            for k in ANALYSIS_KEYS:
                if e["analysis"][k] != first["analysis"][k]:
                    raise FigureError(
                        f"inconsistent analysis.{k} across seeds of {label}")
        out.append({
            "partition": first["partition"],
            "mode": first["mode"],
            "n_vehicles": first["n_vehicles"],
            "n_m0": first["n_m0"],
            "m_subchannels": first["m_subchannels"],
            "m0_pool": first["m0_pool"],
            "scale": first["scale"],
            "seeds": len(grp),
            "median": {k: _median([e["metrics"][k] for e in grp])
                       for k in METRIC_KEYS},
            "analysis": dict(first["analysis"]),
        })
    return out


def _shared_0a(cfgs: list[dict]) -> list[dict]:
    return [c for c in cfgs if c["partition"] == "shared" and c["mode"] == "0a"]


def _data_nash_floor(cfgs: list[dict]) -> dict:
    pool = _shared_0a(cfgs)
    if not pool:
        raise FigureError("no shared-pool 0a entries for figure 'nash-floor'")
    points = [{
        "n_vehicles": c["n_vehicles"],
        "m_subchannels": c["m_subchannels"],
        "n_m0": c["n_m0"],
        "floor": c["analysis"]["nash_floor"],
        "median_collision": c["median"]["m0_collision_rate"],
        "seeds": c["seeds"],
    } for c in pool]
    hi = max(max(p["floor"], p["median_collision"]) for p in points)
    return {"figure_id": "nash-floor", "points": points, "identity": (0.0, hi)}


def _supply_sweep(cfgs: list[dict]) -> tuple[int, list[dict]]:
    """Pick the fleet for a PDR-versus-supply sweep.

    N=4 is the canonical sweep fleet when present; otherwise the fleet
    with the most distinct subchannel counts (smaller fleet on ties).
    """
    pool = _shared_0a(cfgs)
    by_n: dict[int, list[dict]] = {}
    for c in pool:
        by_n.setdefault(c["n_vehicles"], []).append(c)
    if not by_n:
        raise FigureError("no shared-pool 0a entries for a supply sweep")
    if 4 in by_n:
        n = 4
    else:
        n = max(by_n, key=lambda k: (len({c["m_subchannels"] for c in by_n[k]}), -k))
    return n, sorted(by_n[n], key=lambda c: c["m_subchannels"])


def _data_twin_axis(cfgs: list[dict]) -> dict:
    n, sweep = _supply_sweep(cfgs)
    points = [{
        "m_subchannels": c["m_subchannels"],
        "median_m0_pdr": c["median"]["m0_pdr_mean"],
        "median_p05": c["median"]["m0_pdr_p05_intra"],
        "seeds": c["seeds"],
    } for c in sweep]
    return {"figure_id": "twin-axis", "n_vehicles": n,
            "points": points, "pdr_target": PDR_TARGET}


def _data_ceiling_2panel(cfgs: list[dict]) -> dict:
    n, sweep = _supply_sweep(cfgs)
    points = [{
        "m_subchannels": c["m_subchannels"],
        "median_collision": c["median"]["m0_collision_rate"],
        "ceiling": c["analysis"]["nash_floor"],
        "median_m0_pdr": c["median"]["m0_pdr_mean"],
        "seeds": c["seeds"],
    } for c in sweep]
    return {"figure_id": "ceiling-2panel", "n_vehicles": n,
            "points": points, "pdr_target": PDR_TARGET}


def _data_ds_3panel(cfgs: list[dict]) -> dict:
    sep = [c for c in cfgs if c["partition"] == "separated"]
    if not sep:
        raise FigureError("no separated-pool entries for figure 'ds-3panel'")
    series: dict[str, list[dict]] = {}
    for c in sep:
        series.setdefault(c["mode"], []).append({
            "rho_pool": c["analysis"]["rho_pool"],
            "n_vehicles": c["n_vehicles"],
            "n_m0": c["n_m0"],
            "m0_pool": c["m0_pool"],
            "median_within": c["median"]["m0_within_pool_collision_rate"],
            "ceiling": c["analysis"]["within_pool_ceiling"],
            "pigeonhole": c["analysis"]["pigeonhole_min_fraction"],
            "median_m0_pdr": c["median"]["m0_pdr_mean"],
            "median_m1_pdr": c["median"]["m1_pdr_mean"],
            "seeds": c["seeds"],
        })
    for mode in series:
        series[mode].sort(key=lambda p: p["rho_pool"])
    # The analytical curves depend only on (n_m0, pool), so points from
    # different modes at the same pressure must agree on them.
    by_rho: dict[float, tuple[float, float]] = {}
    for pts in series.values():
        for p in pts:
            ref = by_rho.setdefault(p["rho_pool"], (p["ceiling"], p["pigeonhole"]))
            if ref != (p["ceiling"], p["pigeonhole"]):
                raise FigureError(
                    f"inconsistent overlay values at rho_pool={p['rho_pool']}")

    target_m = max({c["m_subchannels"] for c in sep},
                   key=lambda m: sum(c["m_subchannels"] == m for c in sep))
    baseline = None
    for c in _shared_0a(cfgs):
        if c["n_vehicles"] == 4 and c["m_subchannels"] == target_m:
            baseline = {"m0_pdr": c["median"]["m0_pdr_mean"],
                        "m1_pdr": c["median"]["m1_pdr_mean"],
                        "n_vehicles": 4}
            break
    return {"figure_id": "ds-3panel", "series": series, "baseline": baseline}


def _data_0a_vs_0c(cfgs: list[dict], series_cols: dict | None) -> dict:
    shared4 = [c for c in cfgs
               if c["partition"] == "shared" and c["n_vehicles"] == 4]
    chosen_m = None
    for m in sorted({c["m_subchannels"] for c in shared4}):
        modes = {c["mode"] for c in shared4 if c["m_subchannels"] == m}
        if {"0a", "0c"} <= modes:
            chosen_m = m
            break
    if chosen_m is None:
        raise FigureError(
            "figure '0a-vs-0c' needs both modes on the same shared N=4 pool")
    bars = {}
    residual = None
    for c in shared4:
        if c["m_subchannels"] != chosen_m:
            continue
        bars[c["mode"]] = {
            "m0_pdr": c["median"]["m0_pdr_mean"],
            "m0_collision": c["median"]["m0_collision_rate"],
            "m0_sinr_db": c["median"]["m0_sinr_mean_db"],
            "seeds": c["seeds"],
        }
        if c["mode"] == "0c":
            residual = c["analysis"]["cross_class_residual"]
    trajectory = None
    if series_cols is not None:
        trajectory = {
            "episode": list(series_cols["episode_index"]),
            "m0_pdr": list(series_cols["m0_pdr_mean"]),
            "m0_sinr_db": list(series_cols["m0_sinr_mean_db"]),
        }
    return {"figure_id": "0a-vs-0c", "n_vehicles": 4,
            "m_subchannels": chosen_m, "bars": bars,
            "residual": residual, "trajectory": trajectory}


def figure_data(figure_id: str, entries: list[dict],
                series_cols: dict | None = None) -> dict:
    """Build the plotted values for one figure from validated entries."""
    if figure_id not in FIGURE_IDS:
        raise FigureError(
            f"unknown figure {figure_id!r}; choose from {', '.join(FIGURE_IDS)}")
    if not entries:
        raise FigureError("ledger is empty")
    cfgs = _configs(entries)
    if figure_id == "nash-floor":
        return _data_nash_floor(cfgs)
    if figure_id == "twin-axis":
        return _data_twin_axis(cfgs)
    if figure_id == "ceiling-2panel":
        return _data_ceiling_2panel(cfgs)
    if figure_id == "ds-3panel":
        return _data_ds_3panel(cfgs)
    return _data_0a_vs_0c(cfgs, series_cols)
