"""Real trajectory logs in TUM text format: parsing, cleaning, alignment, and
conversion to range/pitch/azimuth replay data.

A TUM line holds eight space-separated numbers ``t tx ty tz qx qy qz qw``;
lines starting with ``#`` and blank lines are ignored.

Replay bundle layout (a directory)::

    index.json      {"rate", "dt", "horizon", "n_sensors", "t0", "skipped", "sensors", "truth"}
    sensor_<i>.csv  k, t, xs, ys, zs, r, phi, rho     (rows k = 0..T, row 0 has no measurement)
    truth.csv       k, t, x, y, z

Missing measurements (target coincident with an observer) are written as ``nan``.
"""
import csv
import io
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import N_STATE, RangeBearing
from .scenario import GroundTruth

MAX_GAP = 0.5
ORIGIN_RADIUS = 1e-3
QUAT_TOL = 1e-3


class TumFormatError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


class AlignmentError(ValueError):
    pass


@dataclass
class TumTrajectory:
    t: np.ndarray  # (M,)
    pos: np.ndarray  # (M, 3)
    quat: np.ndarray  # (M, 4) as qx, qy, qz, qw

    def __len__(self):
        return len(self.t)

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty((0, 3)), np.empty((0, 4)))

    def take(self, idx):
        return TumTrajectory(self.t[idx], self.pos[idx], self.quat[idx])

    @property
    def rows(self):
        return np.column_stack([self.t, self.pos, self.quat])


def parse_tum(source):
    """Parse TUM text from a string, a path, or an open text stream."""
    if isinstance(source, Path):
        source = source.read_text()
    lines = io.StringIO(source) if isinstance(source, str) else source
    rows = []
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 8:
            raise TumFormatError(f"expected 8 fields, found {len(parts)}", lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise TumFormatError(f"non-numeric field in {s!r}", lineno) from None
        if not np.all(np.isfinite(vals)):
            raise TumFormatError("non-finite value", lineno)
        if abs(np.linalg.norm(vals[4:]) - 1.0) > QUAT_TOL:
            raise TumFormatError("quaternion is not unit length", lineno)
        rows.append(vals)
    if not rows:
        return TumTrajectory.empty()
    a = np.array(rows)
    return TumTrajectory(a[:, 0], a[:, 1:4], a[:, 4:8])


def read_tum(path):
    with open(path) as fh:
        return parse_tum(fh)


def serialize_tum(traj, header=None):
    """TUM text with shortest round-trip float formatting."""
    out = [f"# {header}\n"] if header else []
    for row in traj.rows:
        out.append(" ".join(repr(float(v)) for v in row) + "\n")
    return "".join(out)


def write_tum(traj, path, header=None):
    Path(path).write_text(serialize_tum(traj, header))


def _segments(t, max_gap):
    breaks = np.flatnonzero(np.diff(t) > max_gap) + 1
    return np.split(np.arange(len(t)), breaks)


def remove_outliers(traj, max_gap=MAX_GAP, origin_radius=ORIGIN_RADIUS):
    """Drop spurious origin fixes and out-of-order stamps, then keep the longest
    run of samples without a gap above ``max_gap`` (the later one on ties)."""
    if len(traj) == 0:
        raise AlignmentError("trajectory is empty")
    keep = np.linalg.norm(traj.pos, axis=1) > origin_radius
    clean = traj.take(keep)
    if len(clean):
        # a stamp must exceed every stamp kept before it
        prev = np.maximum.accumulate(np.concatenate([[-np.inf], clean.t[:-1]]))
        clean = clean.take(clean.t > prev)
    if len(clean) == 0:
        raise AlignmentError("every sample was rejected as an outlier")
    segs = _segments(clean.t, max_gap)
    best = max(range(len(segs)), key=lambda j: (len(segs[j]), j))
    return clean.take(segs[best])


def _interp_quat(t_new, t, q):
    q = q.copy()
    for j in range(1, len(q)):  # q and -q are the same rotation; keep neighbours on one side
        if np.dot(q[j], q[j - 1]) < 0:
            q[j] = -q[j]
    out = np.column_stack([np.interp(t_new, t, q[:, c]) for c in range(4)])
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def resample(traj, stamps):
    pos = np.column_stack([np.interp(stamps, traj.t, traj.pos[:, c]) for c in range(3)])
    return TumTrajectory(np.asarray(stamps, dtype=float), pos, _interp_quat(stamps, traj.t, traj.quat))


def common_clock(trajs, rate):
    if rate <= 0:
        raise ValueError("rate must be positive")
    if not trajs or any(len(tj) == 0 for tj in trajs):
        raise AlignmentError("need nonempty trajectories")
    start = max(float(tj.t[0]) for tj in trajs)
    end = min(float(tj.t[-1]) for tj in trajs)
    if end < start:
        raise AlignmentError(f"time spans do not overlap (latest start {start}, earliest end {end})")
    n = int(np.floor((end - start) * rate + 1e-9)) + 1
    return start + np.arange(n) / rate


def align_and_resample(trajs, rate):
    """Resample every trajectory on one uniform clock over the shared time window."""
    stamps = common_clock(trajs, rate)
    return [resample(tj, stamps) for tj in trajs]


def to_measurements(target, observers, model=None):
    """Range/pitch/azimuth of ``target`` seen from each observer, on a shared clock.

    Returns ``(z, poses, skipped)`` with shapes (M, N, 3), (M, N, 3) and the number
    of coincident samples that were replaced by NaN.
    """
    model = RangeBearing() if model is None else model
    for ob in observers:
        if len(ob) != len(target) or not np.array_equal(ob.t, target.t):
            raise AlignmentError("observer and target clocks differ; align them first")
    poses = np.stack([ob.pos for ob in observers], axis=1)
    tgt = np.zeros(target.pos.shape[:1] + (N_STATE,))
    tgt[:, :3] = target.pos
    diff = target.pos[:, None, :] - poses
    coincident = np.all(diff == 0.0, axis=-1)
    z = model(tgt[:, None, :], poses)
    z[coincident] = np.nan
    skipped = int(coincident.sum())
    if skipped:
        warnings.warn(f"{skipped} coincident target/observer samples skipped", RuntimeWarning, stacklevel=2)
    return z, poses, skipped


def truth_states(t, pos):
    """Full 7-dim states from positions: finite-difference velocity and heading rate."""
    x = np.zeros((len(t), N_STATE))
    x[:, :3] = pos
    if len(t) > 1:
        x[:, 3:6] = np.gradient(pos, t, axis=0)
        heading = np.unwrap(np.arctan2(x[:, 4], x[:, 3]))
        x[:, 6] = np.gradient(heading, t)
    return x


@dataclass
class Replay:
    rate: float
    t: np.ndarray  # (T+1,)
    truth_pos: np.ndarray  # (T+1, 3)
    z: np.ndarray  # (T, N, 3)
    poses: np.ndarray  # (T, N, 3)
    skipped: int = 0

    @property
    def dt(self):
        return 1.0 / self.rate

    @property
    def horizon(self):
        return len(self.z)

    @property
    def n_sensors(self):
        return self.z.shape[1]

    def ground_truth(self):
        return GroundTruth(truth_states(self.t, self.truth_pos), self.z, self.poses)


def build_replay(target, observers, rate, max_gap=MAX_GAP, origin_radius=ORIGIN_RADIUS):
    """Clean, align and convert raw TUM trajectories. Sample 0 initialises the filter."""
    cleaned = [remove_outliers(tj, max_gap, origin_radius) for tj in [target, *observers]]
    aligned = align_and_resample(cleaned, rate)
    if len(aligned[0]) < 2:
        raise AlignmentError("aligned window holds fewer than two samples")
    z, poses, skipped = to_measurements(aligned[0], aligned[1:])
    return Replay(float(rate), aligned[0].t, aligned[0].pos, z[1:], poses[1:], skipped)


def write_replay(replay, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [f"sensor_{i}.csv" for i in range(replay.n_sensors)]
    for i, name in enumerate(names):
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t", "xs", "ys", "zs", "r", "phi", "rho"])
            for k in range(replay.horizon + 1):
                if k == 0:
                    pose, z = replay.poses[0, i], (np.nan,) * 3
                else:
                    pose, z = replay.poses[k - 1, i], replay.z[k - 1, i]
                w.writerow([k, repr(float(replay.t[k])), *(repr(float(v)) for v in (*pose, *z))])
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t", "x", "y", "z"])
        for k, (t, p) in enumerate(zip(replay.t, replay.truth_pos)):
            w.writerow([k, repr(float(t)), *(repr(float(v)) for v in p)])
    index = {
        "rate": replay.rate,
        "dt": replay.dt,
        "horizon": replay.horizon,
        "n_sensors": replay.n_sensors,
        "t0": float(replay.t[0]),
        "skipped": replay.skipped,
        "sensors": names,
        "truth": "truth.csv",
    }
    (out / "index.json").write_text(json.dumps(index, indent=2))
    return out


def _read_csv(path, ncols):
    a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if a.shape[1] != ncols:
        raise TumFormatError(f"{path}: expected {ncols} columns, found {a.shape[1]}")
    return a


def load_replay(path):
    root = Path(path)
    if root.is_file():
        root = root.parent
    try:
        index = json.loads((root / "index.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise TumFormatError(f"cannot read replay index in {root}: {e}") from e
    truth = _read_csv(root / index["truth"], 5)
    sensors = [_read_csv(root / name, 8) for name in index["sensors"]]
    T = index["horizon"]
    if len(truth) != T + 1 or any(len(s) != T + 1 for s in sensors):
        raise TumFormatError(f"{root}: row counts disagree with horizon {T}")
    z = np.stack([s[1:, 5:8] for s in sensors], axis=1)
    poses = np.stack([s[1:, 2:5] for s in sensors], axis=1)
    return Replay(float(index["rate"]), truth[:, 1], truth[:, 2:5], z, poses, int(index.get("skipped", 0)))


__all__ = [
    "AlignmentError",
    "Replay",
    "TumFormatError",
    "TumTrajectory",
    "align_and_resample",
    "build_replay",
    "load_replay",
    "parse_tum",
    "read_tum",
    "remove_outliers",
    "resample",
    "serialize_tum",
    "to_measurements",
    "truth_states",
    "write_replay",
    "write_tum",
]
