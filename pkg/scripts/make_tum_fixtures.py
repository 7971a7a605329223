"""Write the TUM fixtures used by the trajio tests and the replay example.

A target flies a slow ascending circle while three observers hover near the
corners of a square. Each file carries the faults the cleaner must handle:
clock offsets, a spurious origin fix, a duplicated stamp, and a dropout gap.
"""
import argparse
from pathlib import Path

import numpy as np

from swarmtrack.trajio import TumTrajectory, write_tum


def heading_quat(yaw):
    return np.column_stack([np.zeros_like(yaw), np.zeros_like(yaw), np.sin(yaw / 2), np.cos(yaw / 2)])


def target(t):
    w = 0.2
    pos = np.column_stack([50 + 20 * np.cos(w * t), 50 + 20 * np.sin(w * t), 5 + 0.5 * t])
    return TumTrajectory(t, pos, heading_quat(w * t + np.pi / 2))


def observer(t, corner, rng):
    pos = np.asarray(corner, dtype=float) + 0.05 * rng.standard_normal((len(t), 3))
    return TumTrajectory(t, pos, heading_quat(np.zeros_like(t)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "fixtures"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    # target at 30 Hz from t=100.0, with one zero fix and a duplicated stamp
    t = 100.0 + np.arange(0, 20.0, 1 / 30)
    tg = target(t)
    tg.pos[45] = 0.0
    tg = tg.take(np.r_[0:120, 119, 120:len(t)])
    write_tum(tg, out / "target.tum", "target: ascending circle, 30 Hz")

    # observer 0: 25 Hz, starts 0.7 s late
    t0 = 100.7 + np.arange(0, 19.0, 1 / 25)
    write_tum(observer(t0, (0, 0, 0), rng), out / "observer_0.tum", "observer 0, 25 Hz")

    # observer 1: 20 Hz, a 2 s dropout early on (the longer later segment is kept)
    t1 = 99.5 + np.arange(0, 20.5, 1 / 20)
    t1 = t1[(t1 < 101.0) | (t1 > 103.0)]
    write_tum(observer(t1, (100, 0, 0), rng), out / "observer_1.tum", "observer 1, 20 Hz, dropout")

    # observer 2: 30 Hz, ends early, one origin glitch
    t2 = 100.2 + np.arange(0, 18.0, 1 / 30)
    ob2 = observer(t2, (100, 100, 0), rng)
    ob2.pos[300] = 0.0
    write_tum(ob2, out / "observer_2.tum", "observer 2, 30 Hz, origin glitch")
    print(f"wrote fixtures to {out}")


if __name__ == "__main__":
    main()
