"""Command-line front end.

Subcommands: ``floor`` and ``oracle`` print the analytical (and Monte
Carlo) collision tables; ``train`` / ``eval`` run single configurations;
``phase`` runs a preset sweep into a ledger; ``report`` compares ledger
entries against the shared-pool baseline; ``advisory`` colors a vehicle
snapshot; ``escalate`` drives the escalation machine from an event file.
Exit code is 0 on success, 1 with a one-line diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import analytics, config, ledger, presets
from .advisory import (
    EscalationInputs,
    EscalationState,
    build_conflict_graph,
    escalation_step,
    greedy_color,
    reuse_factor,
)
from .core import (
    EpisodeMetrics,
    PolicyMode,
    PoolPartition,
    TrafficClass,
    VehicleState,
    m0_count,
)
from .marl.checkpoint import load_checkpoint, save_checkpoint
from .marl.ppo import evaluate, train

TABLE_II_N = (2, 3, 4, 5, 7, 10)


def _metrics_dict(m: EpisodeMetrics) -> dict:
    return {
        "m0_pdr_mean": m.m0_pdr_mean,
        "m1_pdr_mean": m.m1_pdr_mean,
        "m0_collision_rate": m.m0_collision_rate,
        "m0_within_pool_collision_rate": m.m0_within_pool_collision_rate,
        "m0_sinr_mean_db": m.m0_sinr_mean_db,
        "m0_pdr_p05_intra": m.m0_pdr_p05_intra,
    }


def _load_flat(path: str | None) -> dict:
    overrides = config.load_config_file(path) if path else None
    return config.resolve(overrides)


def _write_series_csv(path: str, series: list[EpisodeMetrics]) -> None:
    """Per-episode training trajectory; one row per episode, ledger metric order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("episode_index",) + ledger.METRIC_KEYS)
        for m in series:
            d = _metrics_dict(m)
            w.writerow([m.episode_index] + [d[k] for k in ledger.METRIC_KEYS])


# ------------------------------------------------------------- floor / oracle

def cmd_floor(args) -> int:
    rows = [(args.m, n, analytics.nash_floor(args.m, n)) for n in args.n]
    print(f"{'M':>3} {'N':>3} {'analytical_floor':>17}")
    for m, n, floor in rows:
        print(f"{m:>3} {n:>3} {floor:>17.6f}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("m_subchannels,n_vehicles,analytical_floor\n")
            for m, n, floor in rows:
                fh.write(f"{m},{n},{floor:.6f}\n")
    return 0


def cmd_oracle(args) -> int:
    print(f"{'M':>3} {'N':>3} {'analytical':>11} {'monte_carlo':>12} {'std_err':>9}")
    rows = []
    for n in args.n:
        floor = analytics.nash_floor(args.m, n)
        est, se = analytics.monte_carlo_collision_rate(args.m, n, args.trials, args.seed)
        rows.append((args.m, n, floor, est, se))
        print(f"{args.m:>3} {n:>3} {floor:>11.6f} {est:>12.6f} {se:>9.6f}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("m_subchannels,n_vehicles,analytical_floor,monte_carlo,std_err\n")
            for m, n, floor, est, se in rows:
                fh.write(f"{m},{n},{floor:.6f},{est:.6f},{se:.6f}\n")
    return 0


# --------------------------------------------------------------- train / eval

def _partition_of(args) -> tuple[PoolPartition, int | None]:
    if args.partition == "separated":
        if args.m0_pool is None:
            raise ValueError("--m0-pool is required with --partition separated")
        return PoolPartition.SEPARATED, args.m0_pool
    if args.m0_pool is not None:
        raise ValueError("--m0-pool only applies to --partition separated")
    return PoolPartition.SHARED, None


def cmd_train(args) -> int:
    flat = _load_flat(args.config)
    partition, m0_pool = _partition_of(args)
    env_cfg = config.build_env_config(flat, args.n, args.m, partition, m0_pool)
    train_cfg = config.build_train_config(
        flat, total_episodes=args.episodes,
        anneal_episodes=args.anneal_episodes)
    mode = PolicyMode(args.mode)
    bundle, series = train(env_cfg, mode, train_cfg, args.seed)
    agg = evaluate(bundle, env_cfg, args.eval_episodes, seed=args.seed + 7919)
    print(json.dumps(_metrics_dict(agg), sort_keys=True))
    if args.series_csv:
        _write_series_csv(args.series_csv, series)
    if args.out:
        run_params = {
            **config.env_config_to_run_params(env_cfg),
            "mode": mode.value,
            "seed": args.seed,
        }
        save_checkpoint(args.out, bundle, train_cfg, flat, run_params)
    if args.ledger:
        spec = presets.RunSpec("adhoc", args.n, args.m, partition, m0_pool, mode)
        digest = config.config_digest(flat, {
            **config.env_config_to_run_params(env_cfg),
            "mode": mode.value,
            "train_episodes": args.episodes,
            "anneal_episodes": args.anneal_episodes,
            "eval_episodes": args.eval_episodes,
            "seed": args.seed,
        })
        entry = {
            "schema_version": ledger.SCHEMA_VERSION,
            "run_id": spec.run_id(args.seed, f"ep{args.episodes}"),
            "phase": "adhoc",
            "scale": f"ep{args.episodes}",
            "n_vehicles": args.n,
            "n_m0": m0_count(args.n),
            "m_subchannels": args.m,
            "m0_pool": m0_pool,
            "partition": partition.value,
            "mode": mode.value,
            "seed": args.seed,
            "train_episodes": args.episodes,
            "eval_episodes": args.eval_episodes,
            "config_digest": digest,
            "wall_time_s": 0.0,
            "metrics": _metrics_dict(agg),
            "analysis": presets.analysis_columns(spec),
        }
        ledger.append_entry(args.ledger, entry)
    return 0


def cmd_eval(args) -> int:
    bundle, _train_cfg, flat, run_params = load_checkpoint(args.checkpoint)
    env_cfg = config.build_env_config(
        flat, run_params["n_vehicles"], run_params["m_subchannels"],
        PoolPartition(run_params["partition"]), run_params["m0_pool"])
    agg = evaluate(bundle, env_cfg, args.episodes, args.seed,
                   trace_path=args.trace)
    print(json.dumps(_metrics_dict(agg), sort_keys=True))
    return 0


# ------------------------------------------------------------ phase / report

def cmd_phase(args) -> int:
    flat = _load_flat(args.config)
    ledger_path = args.out
    def progress(entry):
        m = entry["metrics"]
        print(f"{entry['run_id']}: m0_pdr={m['m0_pdr_mean']:.3f} "
              f"m0_coll={m['m0_collision_rate']:.3f} ({entry['wall_time_s']:.0f}s)",
              flush=True)
    presets.run_phase(args.name, args.scale, flat, ledger_path, progress=progress)
    print(f"ledger written to {ledger_path}")
    return 0


def cmd_report(args) -> int:
    print(presets.report(args.ledger))
    return 0


def cmd_export(args) -> int:
    ledger.export_csv(args.ledger, args.csv)
    print(f"csv written to {args.csv}")
    return 0


# --------------------------------------------------------- advisory / escalate

def cmd_advisory(args) -> int:
    vehicles = []
    with open(args.snapshot, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            vehicles.append(VehicleState(
                vehicle_id=int(row["vehicle_id"]),
                traffic_class=TrafficClass.M0,
                position_m=float(row["position_m"]),
                lane=int(row["lane"]),
                speed_mps=float(row["speed_mps"]),
            ))
    if not vehicles:
        raise ValueError(f"snapshot {args.snapshot} holds no vehicles")
    zones, graph = build_conflict_graph(
        vehicles, args.horizon, args.threshold, args.track_length)
    result = greedy_color(graph, args.colors)
    if not result.feasible:
        print(f"infeasible: sub-zone {result.infeasible_node} needs a "
              f"{args.colors + 1}th color", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("subzone_id,vehicle_id,subchannel\n")
            for z in zones:
                for vid in sorted(z.member_vehicle_ids):
                    fh.write(f"{z.id},{vid},{result.assignment[z.id]}\n")
    rf = reuse_factor(result.assignment, len(zones))
    print(f"sub-zones={len(zones)} edges={len(graph.edges)} "
          f"colors_used={result.colors_used} reuse_factor={rf:.3f}")
    return 0


def cmd_escalate(args) -> int:
    state = EscalationState()
    with open(args.events, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            inputs = EscalationInputs(**raw)
            state = escalation_step(state, inputs)
            print(f"t={inputs.now}: phase={state.phase}")
    from .advisory import verify_chain
    verify_chain(state.log)
    print(f"final phase: {state.phase}; log entries: {len(state.log)} (chain verified)")
    for entry in state.log:
        print(json.dumps(entry, sort_keys=True))
    return 0


# ----------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="v2xsim",
                                description="sidelink resource-allocation sandbox")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("floor", help="analytical collision floors")
    f.add_argument("--m", type=int, default=5)
    f.add_argument("--n", type=int, nargs="+", default=list(TABLE_II_N))
    f.add_argument("--csv", type=str, default=None)
    f.set_defaults(fn=cmd_floor)

    o = sub.add_parser("oracle", help="Monte Carlo check of the floors")
    o.add_argument("--m", type=int, default=5)
    o.add_argument("--n", type=int, nargs="+", default=list(TABLE_II_N))
    o.add_argument("--trials", type=int, default=1_000_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--csv", type=str, default=None)
    o.set_defaults(fn=cmd_oracle)

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--m", type=int, default=5)
    t.add_argument("--partition", choices=("shared", "separated"), default="shared")
    t.add_argument("--m0-pool", type=int, default=None)
    t.add_argument("--mode", choices=("0a", "0c"), default="0a")
    t.add_argument("--episodes", type=int, default=1000)
    t.add_argument("--anneal-episodes", type=int, default=None,
                   help="entropy anneal horizon (default: all episodes)")
    t.add_argument("--eval-episodes", type=int, default=50)
    t.add_argument("--seed", type=int, default=101)
    t.add_argument("--config", type=str, default=None)
    t.add_argument("--series-csv", type=str, default=None,
                   help="write the per-episode training trajectory here")
    t.add_argument("--out", type=str, default=None, help="checkpoint path (.npz)")
    t.add_argument("--ledger", type=str, default=None)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", type=str, required=True)
    e.add_argument("--episodes", type=int, default=50)
    e.add_argument("--seed", type=int, default=900)
    e.add_argument("--trace", type=str, default=None,
                   help="write the per-TTI CSV trace of the eval episodes here")
    e.set_defaults(fn=cmd_eval)

    ph = sub.add_parser("phase", help="run a preset phase into a ledger")
    ph.add_argument("name", choices=sorted(presets.PHASES))
    ph.add_argument("--scale", choices=("desk", "full"), default="desk")
    ph.add_argument("--out", type=str, required=True, help="ledger path (.jsonl)")
    ph.add_argument("--config", type=str, default=None)
    ph.set_defaults(fn=cmd_phase)

    r = sub.add_parser("report", help="compare ledger entries to the baseline")
    r.add_argument("--ledger", type=str, required=True)
    r.set_defaults(fn=cmd_report)

    x = sub.add_parser("export", help="flatten a ledger to CSV")
    x.add_argument("--ledger", type=str, required=True)
    x.add_argument("--csv", type=str, required=True)
    x.set_defaults(fn=cmd_export)

    a = sub.add_parser("advisory", help="color a vehicle snapshot CSV")
    a.add_argument("--snapshot", type=str, required=True)
    a.add_argument("--colors", type=int, default=2)
    a.add_argument("--horizon", type=float, default=5.0)
    a.add_argument("--threshold", type=float, default=50.0)
    a.add_argument("--track-length", type=float, default=3000.0)
    a.add_argument("--out", type=str, default=None)
    a.set_defaults(fn=cmd_advisory)

    s = sub.add_parser("escalate", help="drive the escalation machine from events")
    s.add_argument("--events", type=str, required=True, help="JSON-lines input file")
    s.set_defaults(fn=cmd_escalate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
