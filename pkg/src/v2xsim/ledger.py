"""Append-only results ledger: one JSON object per line, schema-versioned.

A ledger file is valid after any number of appends because each line is a
self-contained entry.  ``run_id`` values are unique per file; re-running the
same run id refuses to overwrite.  The CSV export mirrors the ledger with
metrics and analysis columns flattened.
"""

from __future__ import annotations

import json
import os

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


class LedgerError(ValueError):
    pass


def validate_entry(entry: dict) -> None:
    for key, typ in _TOP_KEYS.items():
        if key not in entry:
            raise LedgerError(f"ledger entry missing key {key!r}")
        if not isinstance(entry[key], typ):
            raise LedgerError(f"ledger key {key!r} has wrong type {type(entry[key]).__name__}")
    if entry["schema_version"] != SCHEMA_VERSION:
        raise LedgerError(f"unsupported schema_version {entry['schema_version']}")
    for k in METRIC_KEYS:
        if k not in entry["metrics"]:
            raise LedgerError(f"metrics missing {k!r}")
    for k in ANALYSIS_KEYS:
        if k not in entry["analysis"]:
            raise LedgerError(f"analysis missing {k!r}")


def read_ledger(path: str) -> list[dict]:
    """Load and validate every entry; raises on any malformed line."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LedgerError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
            validate_entry(entry)
            entries.append(entry)
    return entries


def append_entry(path: str, entry: dict) -> None:
    """Validate, check run_id uniqueness, append one line, flush."""
    validate_entry(entry)
    if os.path.exists(path):
        existing = {e["run_id"] for e in read_ledger(path)}
        if entry["run_id"] in existing:
            raise LedgerError(
                f"run_id {entry['run_id']!r} already present in {path}; refusing to overwrite")
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def export_csv(ledger_path: str, csv_path: str) -> None:
    """Flatten the ledger into one CSV row per entry."""
    entries = read_ledger(ledger_path)
    scalar_cols = [k for k in _TOP_KEYS if k not in ("metrics", "analysis")]
    cols = scalar_cols + [f"metrics.{k}" for k in METRIC_KEYS] \
        + [f"analysis.{k}" for k in ANALYSIS_KEYS]
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for e in entries:
            row = [_csv_cell(e[k]) for k in scalar_cols]
            row += [_csv_cell(e["metrics"][k]) for k in METRIC_KEYS]
            row += [_csv_cell(e["analysis"][k]) for k in ANALYSIS_KEYS]
            fh.write(",".join(row) + "\n")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)
