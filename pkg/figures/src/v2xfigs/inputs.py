"""Readers for the simulator's documented file formats.

The ledger is JSON Lines, one self-contained entry per line, schema
version 1.  The training series is a CSV with one row per episode.  Both
formats are validated eagerly: a malformed input fails with a diagnostic
naming the file, line, and offending field, and no figure is produced.
"""

from __future__ import annotations

import csv
import json

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version": int,
    "run_id": str,
    "phase": str,
    "scale": str,
    "n_vehicles": int,
    "n_m0": int,
    "m_subchannels": int,
    "m0_pool": (int, type(None)),
    "partition": str,
    "mode": str,
    "seed": int,
    "train_episodes": int,
    "eval_episodes": int,
    "config_digest": str,
    "wall_time_s": (int, float),
    "metrics": dict,
    "analysis": dict,
}

METRIC_KEYS = (
    "m0_pdr_mean",
    "m1_pdr_mean",
    "m0_collision_rate",
    "m0_within_pool_collision_rate",
    "m0_sinr_mean_db",
    "m0_pdr_p05_intra",
)

ANALYSIS_KEYS = (
    "nash_floor",
    "within_pool_ceiling",
    "rho_pool",
    "pigeonhole_min_fraction",
    "cross_class_residual",
)

SERIES_HEADER = ("episode_index",) + METRIC_KEYS


class FigureError(ValueError):
    """Any input or selection problem that prevents drawing a figure."""


def _check_entry(entry: dict, where: str) -> None:
    for key, typ in _TOP_KEYS.items():
        if key not in entry:
            raise FigureError(f"{where}: missing key {key!r}")
        if not isinstance(entry[key], typ):
            raise FigureError(
                f"{where}: key {key!r} has wrong type {type(entry[key]).__name__}")
    if entry["schema_version"] != SCHEMA_VERSION:
        raise FigureError(
            f"{where}: unsupported schema_version {entry['schema_version']}")
    if entry["partition"] not in ("shared", "separated"):
        raise FigureError(f"{where}: unknown partition {entry['partition']!r}")
    if entry["mode"] not in ("0a", "0c"):
        raise FigureError(f"{where}: unknown mode {entry['mode']!r}")
    for k in METRIC_KEYS:
        if k not in entry["metrics"]:
            raise FigureError(f"{where}: metrics missing {k!r}")
        if not isinstance(entry["metrics"][k], (int, float)):
            raise FigureError(f"{where}: metrics.{k} is not a number")
    for k in ANALYSIS_KEYS:
        if k not in entry["analysis"]:
            raise FigureError(f"{where}: analysis missing {k!r}")
        if not isinstance(entry["analysis"][k], (int, float)):
            raise FigureError(f"{where}: analysis.{k} is not a number")


def read_ledger(path: str) -> list[dict]:
    """Load and validate every ledger entry; blank lines are skipped."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FigureError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
            if not isinstance(entry, dict):
                raise FigureError(f"{path}:{lineno}: entry is not an object")
            _check_entry(entry, f"{path}:{lineno}")
            entries.append(entry)
    return entries


def read_series(path: str) -> dict[str, list[float]]:
    """Load a training-series CSV into column lists keyed by header name."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise FigureError(f"{path}: series file is empty") from None
        if header != SERIES_HEADER:
            raise FigureError(
                f"{path}: unexpected series header {','.join(header)!r}")
        cols: dict[str, list[float]] = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FigureError(f"{path}:{lineno}: expected {len(header)} cells")
            for name, cell in zip(header, row):
                try:
                    cols[name].append(float(cell))
                except ValueError:
                    raise FigureError(
                        f"{path}:{lineno}: column {name!r} is not a number") from None
    if not cols["episode_index"]:
        raise FigureError(f"{path}: series has a header but no rows")
    return cols
