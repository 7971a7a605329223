"""Command-line entry point.

    swarmtrack simulate   [--config F] [--algo V] [--runs M] [--seed S] [--out D] [--replay DIR]
    swarmtrack compare    [--config F] [--algo V,V,...] [--runs M] [--sweep-delta d,d,...] [--out D]
    swarmtrack ingest-tum TARGET OBSERVER... [--rate HZ] --out D
    swarmtrack metrics    RUN_DIR [--out D]

Exit status: 0 success, 1 runtime or fusion failure, 2 usage or configuration error.
"""
import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

from ._linalg import NumericalError
from .config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    config_to_dict,
    load_config,
    replay_config,
    with_nodes,
)
from .metrics import MetricsError, compute_metrics, summary_dict, write_series_csv, write_trigger_raster
from .models import STATE_NAMES
from .network import TopologyError
from .pipeline import AlgoVariant, read_run_csv, run, run_many, write_run_csv
from .trajio import AlignmentError, TumFormatError, build_replay, load_replay, read_tum, write_replay

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _variants(text):
    names = [v.strip() for v in text.split(",") if v.strip()]
    try:
        return [AlgoVariant.parse(v) for v in names]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _base_config(args, nodes=None, delta=None):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if nodes is not None:
        cfg = with_nodes(cfg, nodes)
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.runs is not None:
        if args.runs < 1:
            raise UsageError("--runs must be at least 1")
        kw["runs"] = args.runs
    if args.consensus_L is not None:
        kw["consensus_L"] = args.consensus_L
    if delta is not None:
        kw["delta"] = delta
    return cfg.with_(**kw) if kw else cfg


def cmd_simulate(args):
    cfg = _base_config(args, args.nodes, args.delta)
    variant = args.algo[0] if args.algo else AlgoVariant.EDC_CIF
    if len(args.algo or []) > 1:
        raise UsageError("simulate takes a single --algo")
    out = Path(args.out)
    if args.replay:
        cfg, truth = replay_config(cfg, load_replay(args.replay))
        records = [run(cfg, variant, 0, truth=truth)]
    else:
        records = run_many(cfg, variant, cfg.runs, args.workers)
    out.mkdir(parents=True, exist_ok=True)
    (out / "runs").mkdir(exist_ok=True)
    for rec in records:
        write_run_csv(rec, out / "runs" / f"run_{rec.run_index:04d}.csv")
    m = compute_metrics(records)
    h = config_hash(cfg)
    summary = {"config_hash": h, "seed": cfg.scenario.seed, "replay": bool(args.replay), **summary_dict(m)}
    _dump(summary, out / "summary.json")
    _dump(config_to_dict(cfg), out / "config.json")
    _dump({"config_hash": h, "total_wall_time": m.wall_time,
           "per_run": [r.wall_time for r in records]}, out / "timing.json")
    write_series_csv(records, out / "rmse_series.csv")
    write_trigger_raster(records[0], out / "trigger_raster.csv")
    print(f"{m.variant}: pos RMSE {summary['rmse_pos_mean']:.4f} m, TR {100 * m.TR:.2f}%, "
          f"{m.runs} run(s) -> {out}")
    return EXIT_OK


COMPARE_COLUMNS = (
    ["variant", "sweep", "value", "status"]
    + [f"rmse_{n}" for n in STATE_NAMES]
    + ["rmse_pos", "rmse_vel", "TR", "sensor_tx", "vec_volume", "mat_volume", "wall_time", "error"]
)


def _sweep(args):
    axes = [(name, vals) for name, vals in (("delta", args.sweep_delta), ("sigma1", args.sweep_sigma1),
                                            ("sigma2", args.sweep_sigma2), ("nodes", args.nodes)) if vals]
    if len(axes) > 1:
        raise UsageError("choose at most one sweep axis")
    return axes[0] if axes else ("", [None])


def _apply(cfg, axis, value):
    if axis == "nodes":
        return with_nodes(cfg, int(value))
    if axis:
        return cfg.with_(**{axis: value})
    return cfg


def cmd_compare(args):
    if args.algo is not None and not args.algo:
        raise UsageError("empty variant list")
    variants = args.algo or list(AlgoVariant)
    cfg = _base_config(args)
    axis, values = _sweep(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    failed = 0
    for value in values:
        c = _apply(cfg, axis, value)
        for v in variants:
            row = {"variant": v.value, "sweep": axis, "value": "" if value is None else value}
            try:
                recs = run_many(c, v, c.runs, args.workers)
                m = compute_metrics(recs)
            except NumericalError as e:
                failed += 1
                row.update(status="failed", error=str(e))
                print(f"{v.value} {axis}={value}: FAILED ({e})", file=sys.stderr)
                rows.append(row)
                continue
            row.update(status="ok", error="", rmse_pos=m.rmse_pos_mean, rmse_vel=m.rmse_vel_mean, TR=m.TR,
                       wall_time=m.wall_time, **{f"rmse_{n}": x for n, x in zip(STATE_NAMES, m.rmse_var)},
                       **m.messages)
            tag = v.value if not axis else f"{v.value}_{axis}_{value}"
            write_series_csv(recs, out / f"rmse_series_{tag}.csv")
            rows.append(row)
            print(f"{v.value:8s} {axis}={value}: pos RMSE {m.rmse_pos_mean:.4f} TR {100 * m.TR:.2f}%")
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, COMPARE_COLUMNS, restval="")
        w.writeheader()
        w.writerows(rows)
    _dump({"config_hash": config_hash(cfg), "sweep": axis, "variants": [v.value for v in variants],
           "runs": cfg.runs}, out / "compare.json")
    return EXIT_RUNTIME if failed == len(rows) else EXIT_OK


def cmd_ingest_tum(args):
    target, *observers = [read_tum(p) for p in args.files]
    if not observers:
        raise UsageError("need a target file followed by at least one observer file")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        replay = build_replay(target, observers, args.rate, args.max_gap, args.origin_radius)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_replay(replay, args.out)
    print(f"replay bundle: {replay.n_sensors} sensors, {replay.horizon} ticks at {replay.rate:g} Hz "
          f"-> {args.out}")
    return EXIT_OK


def cmd_metrics(args):
    src = Path(args.run_dir)
    files = sorted((src / "runs").glob("run_*.csv")) or sorted(src.glob("run_*.csv"))
    if not files:
        raise UsageError(f"no run CSVs found in {src}")
    meta = json.loads((src / "summary.json").read_text()) if (src / "summary.json").exists() else {}
    records = [read_run_csv(f, meta.get("variant", ""), j) for j, f in enumerate(files)]
    m = compute_metrics(records)
    summary = {"config_hash": meta.get("config_hash"), **summary_dict(m)}
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(text + "\n")
        write_series_csv(records, out / "rmse_series.csv")
    print(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="swarmtrack", description="Distributed event-triggered target tracking.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment JSON (defaults built in when omitted)")
        sp.add_argument("--runs", type=int, help="Monte-Carlo runs")
        sp.add_argument("--seed", type=int, help="base seed")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--consensus-L", dest="consensus_L", type=int, help="consensus iterations")
        sp.add_argument("--workers", type=int, help="process pool size (capped by SWARMTRACK_THREADS)")

    s = sub.add_parser("simulate", help="run one variant and write per-run and summary files")
    common(s)
    s.add_argument("--algo", type=_variants, help="variant, e.g. EDC-CIF")
    s.add_argument("--nodes", type=int, help="number of sensors (ring topology)")
    s.add_argument("--delta", type=float, help="trigger threshold")
    s.add_argument("--replay", help="replay bundle directory from ingest-tum")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="compare variants, optionally over one sweep axis")
    common(c)
    c.add_argument("--algo", type=_variants, help="comma-separated variants (default: all)")
    c.add_argument("--sweep-delta", type=_floats, help="comma-separated trigger thresholds")
    c.add_argument("--sweep-sigma1", type=_floats, help="comma-separated sigma1 values")
    c.add_argument("--sweep-sigma2", type=_floats, help="comma-separated sigma2 values")
    c.add_argument("--nodes", type=_ints, help="comma-separated sensor counts")
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("ingest-tum", help="clean and align TUM logs into a replay bundle")
    t.add_argument("files", nargs="+", help="target file followed by observer files")
    t.add_argument("--rate", type=float, default=10.0, help="resampling rate in Hz")
    t.add_argument("--max-gap", type=float, default=0.5, help="largest tolerated stamp gap (s)")
    t.add_argument("--origin-radius", type=float, default=1e-3, help="drop fixes this close to the origin (m)")
    t.add_argument("--out", required=True, help="bundle directory")
    t.set_defaults(func=cmd_ingest_tum)

    m = sub.add_parser("metrics", help="recompute summary metrics from a simulate output directory")
    m.add_argument("run_dir")
    m.add_argument("--out", help="write summary.json and rmse_series.csv here")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, TopologyError, TumFormatError, AlignmentError, MetricsError,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ValueError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
