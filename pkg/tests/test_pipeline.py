import numpy as np
import pytest

from swarmtrack.config import ExperimentConfig, with_nodes
from swarmtrack.estimator import LocalFilter, NodeState, local_phase
from swarmtrack.fusion import FusionError
from swarmtrack.pipeline import (
    MAT,
    VEC,
    AlgoVariant,
    init_network,
    make_network,
    read_run_csv,
    run,
    run_many,
    step_network,
    write_run_csv,
)
from swarmtrack.scenario import GroundTruth, generate_truth


def test_variant_table():
    v = AlgoVariant.parse("edc-cif")
    assert (v.local, v.triggered, v.fusion, v.uses_ci) == ("ckf", True, "ci", True)
    assert AlgoVariant.parse("EC-EKF").local == "ekf"
    assert AlgoVariant.parse("C-CKF").triggered is False
    assert AlgoVariant.parse("D-CIF").fusion == "convex"
    with pytest.raises(ValueError):
        AlgoVariant.parse("X-CIF")


@pytest.mark.parametrize("et,plain", [("ED-CIF", "D-CIF"), ("EDC-CIF", "DC-CIF"), ("EC-CKF", "C-CKF")])
def test_zero_threshold_lattice(short_cfg, et, plain):
    cfg = short_cfg.with_(delta=0.0)
    a, b = run(cfg, et, 0), run(cfg, plain, 0)
    assert a.gamma.all()
    np.testing.assert_allclose(a.xhat, b.xhat, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("variant", ["EC-EKF", "EC-UKF"])
def test_zero_threshold_ekf_ukf_always_send(short_cfg, variant):
    assert run(short_cfg.with_(delta=0.0), variant, 0).gamma.all()


@pytest.mark.parametrize("variant", list(AlgoVariant))
def test_single_node_equals_local_filter(short_cfg, variant):
    cfg = with_nodes(short_cfg, 1)
    rec = run(cfg, variant, 0)
    net = make_network(cfg, variant)
    truth = generate_truth(cfg.scenario)
    s = cfg.scenario
    state = NodeState.initial(s.initial_state, s.initial_cov, cfg.filter.delta, 1)
    filt = net.filt
    for k in range(1, s.T + 1):
        state = local_phase(filt, state, truth.measurements[k - 1], truth.poses[k - 1], k).state
        # CI with a single node is an info/moment round trip, exact up to rounding
        np.testing.assert_allclose(rec.xhat[k - 1], state.est.xhat, rtol=1e-10, atol=1e-10)


def test_run_is_deterministic(short_cfg):
    a, b = run(short_cfg, "EDC-CIF", 1), run(short_cfg, "EDC-CIF", 1)
    for f in ("truth", "xhat", "P", "gamma", "sensor_tx", "vec_volume", "mat_volume"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    c = run(short_cfg, "EDC-CIF", 2)
    assert not np.array_equal(a.truth, c.truth)


def test_run_many_is_scheduling_independent(short_cfg):
    serial = run_many(short_cfg, "ED-CIF", 3, workers=1)
    pooled = run_many(short_cfg, "ED-CIF", 3, workers=2)
    assert [r.run_index for r in pooled] == [0, 1, 2]
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.xhat, b.xhat)
    np.testing.assert_array_equal(serial[1].xhat, run(short_cfg, "ED-CIF", 1).xhat)


def test_zero_horizon_gives_empty_record(short_cfg):
    cfg = short_cfg.with_(T=0)
    rec = run(cfg, "EDC-CIF", 0)
    assert rec.T == 0 and rec.xhat.shape == (0, 4, 7) and rec.gamma.size == 0


def test_wall_time_grows_with_horizon(short_cfg):
    short = min(run(short_cfg.with_(T=5), "DC-CIF", 0).wall_time for _ in range(3))
    long = min(run(short_cfg.with_(T=150), "DC-CIF", 0).wall_time for _ in range(3))
    assert long > short


def test_init_network(short_cfg):
    a = init_network(short_cfg, run_index=0)
    b = init_network(short_cfg, run_index=0)
    np.testing.assert_array_equal(a.nodes.est.xhat, b.nodes.est.xhat)
    np.testing.assert_array_equal(a.nodes.est.xhat[2], short_cfg.scenario.initial_state)
    draws = [g.standard_normal(4) for g in a.rngs]
    assert len({tuple(d) for d in draws}) == len(draws)


def test_non_pd_initial_covariance_is_config_error(short_cfg):
    cfg = short_cfg.with_(T=3)
    cfg.scenario.initial_cov = -np.eye(7)  # bypass dataclass validation on purpose
    with pytest.raises(ValueError):
        init_network(cfg)


def counters_after_one_tick(cfg, variant):
    net = make_network(cfg, variant)
    state = init_network(cfg)
    truth = generate_truth(cfg.scenario)
    _, _, d = step_network(net, state, truth.measurements[0], truth.poses[0], 1)
    return net, d


@pytest.mark.parametrize("edges", ["ring", "star"])
@pytest.mark.parametrize("L", [1, 5, 10])
def test_consensus_volumes(short_cfg, edges, L):
    from swarmtrack.network import ring_edges, star_edges

    cfg = short_cfg.with_(consensus_L=L, edges=(ring_edges if edges == "ring" else star_edges)(4))
    net, d = counters_after_one_tick(cfg, "EC-CKF")
    deg = net.graph.degrees
    np.testing.assert_array_equal(d.consensus_vec, L * VEC * deg)
    np.testing.assert_array_equal(d.consensus_mat, L * MAT * deg)
    assert d.adapt_vec.sum() == d.combine_mat.sum() == 0


@pytest.mark.parametrize("variant", ["D-CIF", "EDC-CIF"])
def test_diffusion_volumes(short_cfg, variant):
    net, d = counters_after_one_tick(short_cfg, variant)
    deg = net.graph.degrees
    np.testing.assert_array_equal(d.vector_volume, 2 * VEC * deg)
    np.testing.assert_array_equal(d.matrix_volume, 2 * MAT * deg)
    assert MAT == 28 and VEC == 7


def test_counters_monotone_and_match_gamma(short_cfg):
    rec = run(short_cfg, "EDC-CIF", 0)
    assert np.all(np.diff(rec.sensor_tx, axis=0) >= 0)
    assert np.all(np.diff(rec.vec_volume, axis=0) > 0)
    np.testing.assert_array_equal(rec.sensor_tx[-1], rec.gamma.sum(0))
    assert rec.counter.totals()["sensor_tx"] == rec.gamma.sum()


def test_fusion_failure_carries_tick(short_cfg):
    cfg = short_cfg.with_(T=5)
    net = make_network(cfg, "EDC-CIF")
    state = init_network(cfg)
    truth = generate_truth(cfg.scenario)
    net.filt = LocalFilter(**{**net.filt.__dict__, "Q": -10 * np.eye(7)})
    with pytest.raises(ArithmeticError, match="tick 1"):
        step_network(net, state, truth.measurements[0], truth.poses[0], 1)


def test_fusion_error_diagnostics(short_cfg, monkeypatch):
    import swarmtrack.pipeline as pl
    from swarmtrack.estimator import InfoPair

    def broken(prior_info, contrib, adjacency):
        Y = prior_info.Y.copy()
        Y[2] = -Y[2]
        return InfoPair(prior_info.yhat, Y)

    monkeypatch.setattr(pl, "adapt_network", broken)
    cfg = short_cfg.with_(T=3)
    with pytest.raises(FusionError, match="tick 1") as e:
        run(cfg, "EDC-CIF", 0)
    assert e.value.k == 1 and e.value.node == 2 and e.value.min_eig < 0


def test_run_csv_round_trip(short_cfg, tmp_path):
    rec = run(short_cfg, "EDC-CIF", 0)
    write_run_csv(rec, tmp_path / "r.csv")
    back = read_run_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.xhat, rec.xhat)
    np.testing.assert_array_equal(back.truth[1:], rec.truth[1:])
    np.testing.assert_array_equal(back.gamma, rec.gamma)
    np.testing.assert_array_equal(back.mat_volume, rec.mat_volume)


def test_supplied_truth_is_used(short_cfg):
    truth = generate_truth(short_cfg.scenario, run_index=4)
    a = run(short_cfg, "DC-CIF", 0, truth=truth)
    np.testing.assert_array_equal(a.truth, truth.states)
    gt = GroundTruth(truth.states[:1], truth.measurements[:0], truth.poses[:0])
    assert run(short_cfg, "DC-CIF", 0, truth=gt).T == 0
