import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmtrack.metrics import (
    MetricsError,
    compute_metrics,
    rmse_series,
    summary_dict,
    trigger_rate,
    write_series_csv,
    write_trigger_raster,
)
from swarmtrack.pipeline import MessageCounter, RunRecord, run


def record(err, gamma=None, truth=None):
    """RunRecord whose estimates sit ``err`` (T, N, 7) away from a fixed truth."""
    T, N, _ = err.shape
    truth = np.zeros((T + 1, 7)) if truth is None else truth
    gamma = np.ones((T, N), dtype=np.int8) if gamma is None else gamma
    P = np.broadcast_to(np.eye(7), (T, N, 7, 7)).copy()
    cum = np.cumsum(gamma, axis=0)
    return RunRecord("test", 0, 0, truth, truth[1:, None, :] - err, P, gamma, cum, cum * 0, cum * 0,
                     MessageCounter.zeros(N))


def test_perfect_estimates():
    s = rmse_series([record(np.zeros((5, 3, 7)))])
    assert np.all(s.pos == 0) and np.all(s.vel == 0) and np.all(s.per_var == 0)


def test_constant_unit_error():
    e = np.zeros((4, 1, 7))
    e[..., 0] = 1.0
    s = rmse_series([record(e)])
    np.testing.assert_array_equal(s.pos, 1.0)
    np.testing.assert_array_equal(s.per_var_mean, [1, 0, 0, 0, 0, 0, 0])


def test_two_runs_hand_rms():
    e0, e2 = np.zeros((1, 1, 7)), np.zeros((1, 1, 7))
    e2[..., 1] = 2.0
    s = rmse_series([record(e0), record(e2)])
    assert s.pos[0] == pytest.approx(math.sqrt(2))


def test_node_average():
    e = np.zeros((1, 2, 7))
    e[0, 0, 3] = 3.0  # velocity error at node 0 only
    s = rmse_series([record(e)])
    assert s.vel[0] == pytest.approx(1.5) and s.pos[0] == 0


@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    runs = [record(rng.standard_normal((6, 4, 7))) for _ in range(3)]
    base = rmse_series(runs)
    perm = rng.permutation(4)
    shuffled = [record((r.truth[1:, None, :] - r.xhat)[:, perm]) for r in runs[::-1]]
    other = rmse_series(shuffled)
    np.testing.assert_allclose(other.pos, base.pos, rtol=1e-12)
    np.testing.assert_allclose(other.per_var, base.per_var, rtol=1e-12)


def test_mismatched_horizons():
    with pytest.raises(MetricsError):
        rmse_series([record(np.zeros((3, 2, 7))), record(np.zeros((4, 2, 7)))])
    with pytest.raises(MetricsError):
        rmse_series([])


def test_trigger_rate_extremes():
    z = np.zeros((3, 2, 7))
    assert trigger_rate([record(z)])[0] == 1.0
    tr, tr_i = trigger_rate([record(z, gamma=np.zeros((3, 2), dtype=np.int8))])
    assert tr == 0.0 and tr_i.tolist() == [0, 0]
    g = np.array([[1, 0], [0, 0], [1, 1], [1, 0]], dtype=np.int8)
    tr, tr_i = trigger_rate([record(np.zeros((4, 2, 7)), gamma=g)])
    np.testing.assert_allclose(tr_i, [0.75, 0.25])
    assert tr == 0.5


def test_trigger_rate_matches_counters(short_cfg):
    runs = [run(short_cfg, "EDC-CIF", m) for m in range(2)]
    tr, _ = trigger_rate(runs)
    N, T = runs[0].n_nodes, runs[0].T
    assert tr == sum(r.counter.sensor_tx.sum() for r in runs) / (len(runs) * N * T)


def test_summary_and_files(short_cfg, tmp_path):
    runs = [run(short_cfg, "EC-CKF", m) for m in range(2)]
    m = compute_metrics(runs)
    d = summary_dict(m)
    json.dumps(d)
    assert set(d["rmse_mean"]) == {"x", "y", "z", "vx", "vy", "vz", "omega"}
    assert 0 <= d["TR"] <= 1 and d["TR_percent"] == pytest.approx(100 * d["TR"])
    assert "wall_time" not in d and "wall_time" in summary_dict(m, timing=True)
    write_series_csv(runs, tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0].startswith("k,rmse_pos,rmse_vel,rmse_x") and len(rows) == short_cfg.scenario.T + 1
    write_trigger_raster(runs[0], tmp_path / "t.csv")
    raster = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(raster[:, 1:], runs[0].gamma)
    assert np.all(m.nees > 0)
