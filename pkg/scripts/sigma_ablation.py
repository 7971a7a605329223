"""EDC-CIF accuracy as one scaling parameter varies while the other stays at 5e-4."""
import argparse
import csv
from pathlib import Path

from swarmtrack.config import ExperimentConfig, load_config
from swarmtrack.metrics import compute_metrics
from swarmtrack.pipeline import run_many

VALUES = (5e-4, 5e-3, 0.05, 0.1)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--out", default="results")
    args = ap.parse_args(argv)
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = cfg.with_(sigma1=5e-4, sigma2=5e-4)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in ("sigma1", "sigma2"):
        for v in VALUES:
            m = compute_metrics(run_many(cfg.with_(**{name: v}), "EDC-CIF", args.runs))
            rows.append({"param": name, "value": v, "rmse_pos": m.rmse_pos_mean, "rmse_vel": m.rmse_vel_mean})
            print(f"{name} {v:<7g} pos {m.rmse_pos_mean:.4f}  vel {m.rmse_vel_mean:.4f}")
    with open(out / "sigma_ablation.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
