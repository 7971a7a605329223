"""Trigger rate and accuracy of EDC-CIF as the trigger threshold grows."""
import argparse
import csv
from pathlib import Path

from swarmtrack.config import ExperimentConfig, load_config
from swarmtrack.metrics import compute_metrics
from swarmtrack.pipeline import run_many


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--algo", default="EDC-CIF")
    ap.add_argument("--deltas", default="0,0.01,0.02,0.04,0.08,0.16")
    ap.add_argument("--out", default="results")
    args = ap.parse_args(argv)
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for d in (float(v) for v in args.deltas.split(",")):
        m = compute_metrics(run_many(cfg.with_(delta=d), args.algo, args.runs))
        rows.append({"delta": d, "TR": m.TR, "rmse_pos": m.rmse_pos_mean, "rmse_vel": m.rmse_vel_mean,
                     "sensor_tx": m.messages["sensor_tx"]})
        print(f"delta {d:<6g} TR {100 * m.TR:6.2f}%  pos {m.rmse_pos_mean:.4f}  vel {m.rmse_vel_mean:.4f}")
    with open(out / "delta_sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
