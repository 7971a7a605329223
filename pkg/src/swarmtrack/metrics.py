"""Monte-Carlo statistics over an ensemble of :class:`~swarmtrack.pipeline.RunRecord`.

Every RMSE uses the same reduction: root-mean-square over runs at each node and
tick, then the mean over nodes. Time means of those series give the per-variable
table values.

Column names written by :func:`write_series_csv`::

    k, rmse_pos, rmse_vel, rmse_x, rmse_y, rmse_z, rmse_vx, rmse_vy, rmse_vz, rmse_omega, nees

Keys of :func:`summary_dict`: ``variant, runs, nodes, horizon, rmse_mean`` (per
variable), ``rmse_pos_mean, rmse_vel_mean, TR, TR_percent, TR_i, messages,
wall_time``.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .models import POS, STATE_NAMES, VEL


class MetricsError(ValueError):
    pass


@dataclass
class RmseSeries:
    pos: np.ndarray  # (T,)
    vel: np.ndarray  # (T,)
    per_var: np.ndarray  # (T, 7)

    @property
    def per_var_mean(self):
        return self.per_var.mean(axis=0) if len(self.per_var) else np.full(self.per_var.shape[1:], np.nan)


@dataclass
class RunMetrics:
    variant: str
    runs: int
    nodes: int
    horizon: int
    rmse_pos: np.ndarray
    rmse_vel: np.ndarray
    rmse_var: np.ndarray  # per-variable means over T
    TR: float
    TR_i: np.ndarray
    messages: dict = field(default_factory=dict)
    wall_time: float = 0.0
    nees: np.ndarray = None

    @property
    def rmse_pos_mean(self):
        return float(self.rmse_pos.mean()) if len(self.rmse_pos) else float("nan")

    @property
    def rmse_vel_mean(self):
        return float(self.rmse_vel.mean()) if len(self.rmse_vel) else float("nan")


def _errors(runs):
    if not runs:
        raise MetricsError("need at least one run")
    shapes = {r.xhat.shape for r in runs}
    if len(shapes) != 1:
        raise MetricsError(f"runs have mismatched horizons or node counts: {sorted(shapes)}")
    return np.stack([r.errors for r in runs])  # (M, T, N, 7)


def rmse_series(runs):
    """Per-tick position, velocity and per-variable RMSE of an ensemble."""
    e = _errors(runs)
    pos = np.sqrt((e[..., POS] ** 2).sum(-1).mean(0)).mean(-1)
    vel = np.sqrt((e[..., VEL] ** 2).sum(-1).mean(0)).mean(-1)
    per_var = np.sqrt((e**2).mean(0)).mean(1)
    return RmseSeries(pos, vel, per_var)


def trigger_rate(runs):
    """Average trigger rate TR and per-node rates TR_i, both as fractions."""
    if not runs:
        raise MetricsError("need at least one run")
    g = np.stack([r.gamma for r in runs]).astype(np.int64)  # (M, T, N)
    M, T, N = g.shape
    if T == 0:
        return float("nan"), np.full(N, np.nan)
    # integer counts first so TR equals the counter total / (N T) exactly
    tr_i = g.sum(axis=(0, 1)) / (M * T)
    return float(g.sum() / (M * T * N)), tr_i


def mean_nees(runs):
    """Node- and run-averaged NEES per tick; None when covariances were not kept."""
    if any(r.P is None for r in runs):
        return None
    return np.stack([r.nees for r in runs]).mean(axis=(0, 2))


def message_totals(runs):
    """Final counter values summed over nodes, averaged over runs."""
    out = {}
    for key in ("sensor_tx", "vec_volume", "mat_volume"):
        finals = [getattr(r, key)[-1].sum() if r.T else 0 for r in runs]
        out[key] = float(np.mean(finals))
    return out


def compute_metrics(runs):
    s = rmse_series(runs)
    tr, tr_i = trigger_rate(runs)
    return RunMetrics(
        variant=runs[0].variant,
        runs=len(runs),
        nodes=runs[0].n_nodes,
        horizon=runs[0].T,
        rmse_pos=s.pos,
        rmse_vel=s.vel,
        rmse_var=s.per_var_mean,
        TR=tr,
        TR_i=tr_i,
        messages=message_totals(runs),
        wall_time=float(sum(r.wall_time for r in runs)),
        nees=mean_nees(runs),
    )


def _f(v):
    return None if not np.isfinite(v) else float(v)


def summary_dict(m, timing=False):
    """JSON-ready summary. Wall time is left out unless asked for, so the file is reproducible."""
    out = {
        "variant": m.variant,
        "runs": m.runs,
        "nodes": m.nodes,
        "horizon": m.horizon,
        "rmse_mean": {name: _f(v) for name, v in zip(STATE_NAMES, m.rmse_var)},
        "rmse_pos_mean": _f(m.rmse_pos_mean),
        "rmse_vel_mean": _f(m.rmse_vel_mean),
        "TR": _f(m.TR),
        "TR_percent": _f(100.0 * m.TR),
        "TR_i": [_f(v) for v in m.TR_i],
        "messages": m.messages,
    }
    if timing:
        out["wall_time"] = m.wall_time
    return out


SERIES_COLUMNS = ["k", "rmse_pos", "rmse_vel"] + [f"rmse_{n}" for n in STATE_NAMES] + ["nees"]


def write_series_csv(runs, path):
    s = rmse_series(runs)
    nees = mean_nees(runs)
    if nees is None:
        nees = np.full(len(s.pos), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for k in range(len(s.pos)):
            vals = [s.pos[k], s.vel[k], *s.per_var[k], nees[k]]
            w.writerow([k + 1, *(repr(float(v)) for v in vals)])


def write_trigger_raster(run, path):
    """One row per tick, one 0/1 column per node: which sensors transmitted."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k"] + [f"node{i}" for i in range(run.n_nodes)])
        for k, row in enumerate(run.gamma, start=1):
            w.writerow([k, *map(int, row)])
