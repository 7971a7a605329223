"""Network-level simulation: the eight algorithm variants, one synchronous tick at
a time, with per-node message accounting."""
import csv
import enum
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from ._linalg import NumericalError, asym, min_eig
from .estimator import (
    CompensationSpec,
    EstimatePair,
    InfoPair,
    LocalFilter,
    NodeState,
    ScalingParams,
    TriggerState,
    from_info,
    local_phase,
    make_rule,
    to_info,
)
from .fusion import (
    ConsensusConfig,
    FusedEstimate,
    FusionError,
    adapt_network,
    combine_network,
    consensus_fuse,
    require_pd,
)
from .models import N_STATE, STATE_NAMES, CoordinatedTurn, RangeBearing
from .network import diffusion_weights, metropolis_weights
from .scenario import generate_truth, run_streams

VEC = N_STATE
MAT = N_STATE * (N_STATE + 1) // 2  # symmetric matrices travel as upper triangles


# variant -> (local filter, event trigger, fusion rule)
_VARIANTS = {
    "C-CKF": ("ckf", False, "consensus"),
    "EC-EKF": ("ekf", True, "consensus"),
    "EC-UKF": ("ukf", True, "consensus"),
    "EC-CKF": ("ckf", True, "consensus"),
    "D-CIF": ("ckf", False, "convex"),
    "DC-CIF": ("ckf", False, "ci"),
    "ED-CIF": ("ckf", True, "convex"),
    "EDC-CIF": ("ckf", True, "ci"),
}


class AlgoVariant(enum.Enum):
    C_CKF = "C-CKF"
    EC_EKF = "EC-EKF"
    EC_UKF = "EC-UKF"
    EC_CKF = "EC-CKF"
    D_CIF = "D-CIF"
    DC_CIF = "DC-CIF"
    ED_CIF = "ED-CIF"
    EDC_CIF = "EDC-CIF"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.upper() if isinstance(name, str) else name)
        except ValueError:
            raise ValueError(f"unknown variant {name!r}; choose from {[v.value for v in cls]}") from None

    @property
    def local(self):
        return _VARIANTS[self.value][0]

    @property
    def triggered(self):
        return _VARIANTS[self.value][1]

    @property
    def fusion(self):
        """'consensus', 'convex' or 'ci'."""
        return _VARIANTS[self.value][2]

    @property
    def uses_ci(self):
        return self.fusion == "ci"


@dataclass
class MessageCounter:
    """Per-node received volumes. Vector and matrix channels are scalar counts."""

    sensor_tx: np.ndarray
    adapt_vec: np.ndarray
    adapt_mat: np.ndarray
    combine_vec: np.ndarray
    combine_mat: np.ndarray
    consensus_vec: np.ndarray
    consensus_mat: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(*(np.zeros(n, dtype=np.int64) for _ in fields(cls)))

    def __add__(self, other):
        return MessageCounter(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    @property
    def vector_volume(self):
        return self.adapt_vec + self.combine_vec + self.consensus_vec

    @property
    def matrix_volume(self):
        return self.adapt_mat + self.combine_mat + self.consensus_mat

    def totals(self):
        out = {f.name: int(getattr(self, f.name).sum()) for f in fields(self)}
        out["vector_volume"] = int(self.vector_volume.sum())
        out["matrix_volume"] = int(self.matrix_volume.sum())
        return out


@dataclass
class Network:
    """Static per-run context shared by every tick."""

    variant: AlgoVariant
    filt: LocalFilter
    graph: object
    C: np.ndarray  # diffusion weights
    W: np.ndarray  # consensus weights
    L: int = 5


@dataclass
class NodeRuntime:
    est: EstimatePair
    info: InfoPair
    trig: TriggerState
    rng: np.random.Generator


@dataclass
class NetworkState:
    nodes: NodeState
    rngs: list

    def node(self, i):
        est = self.nodes.est[i]
        return NodeRuntime(est, to_info(est), self.nodes.trig[i], self.rngs[i])

    @property
    def n_nodes(self):
        return len(self.rngs)


def make_network(cfg, variant):
    variant = AlgoVariant.parse(variant) if not isinstance(variant, AlgoVariant) else variant
    f = cfg.filter
    s = cfg.scenario
    comp = CompensationSpec(f.compensation, f.compensation_cov)
    ukf = {"alpha": f.ukf_alpha, "beta": f.ukf_beta, "kappa": f.ukf_kappa}
    filt = LocalFilter(
        rule=make_rule(variant.local, **ukf),
        dynamics=CoordinatedTurn(s.dt),
        measurement=RangeBearing(),
        Q=s.noise.Q,
        R=s.noise.R,
        delta=f.delta if variant.triggered else None,
        scaling=ScalingParams(f.sigma1, f.sigma2),
        compensation=comp,
        trigger_weight=None if f.trigger_weight is None else np.asarray(f.trigger_weight, dtype=float),
    )
    g = cfg.graph
    return Network(variant, filt, g, diffusion_weights(g), metropolis_weights(g), cfg.fusion.consensus_L)


def init_network(cfg, variant=None, run_index=0, streams=None):
    s = cfg.scenario
    try:
        np.linalg.cholesky(s.initial_cov)
    except np.linalg.LinAlgError:
        raise ValueError("initial covariance is not positive definite") from None
    if streams is None:
        streams = run_streams(s.seed, run_index, s.n_sensors)
    delta = cfg.filter.delta
    nodes = NodeState.initial(s.initial_state, s.initial_cov, delta, s.n_sensors)
    return NetworkState(nodes, list(streams["nodes"]))


def step_network(net, state, z, pose, k):
    """Advance every node by one tick. Returns (state', fused, counter delta)."""
    n = state.n_nodes
    deg = net.graph.degrees.astype(np.int64)
    rngs = state.rngs if net.filt.compensation.enabled else None
    try:
        res = local_phase(net.filt, state.nodes, z, pose, k, rngs)
    except NumericalError as e:
        raise NumericalError(f"tick {k}: local phase: {e}") from e
    delta = MessageCounter.zeros(n)
    delta.sensor_tx = res.trig.gamma.astype(np.int64)
    try:
        if net.variant.fusion == "consensus":
            q = consensus_fuse(res.info, ConsensusConfig(net.L, net.W))
            require_pd(q.Y, "consensus information matrix")
            fused_est = from_info(q)
            fused = FusedEstimate(fused_est.xhat, fused_est.P, q.yhat, q.Y)
            delta.consensus_vec = net.L * VEC * deg
            delta.consensus_mat = net.L * MAT * deg
        else:
            adapted = adapt_network(res.prior_info, res.contribution, net.graph.adjacency)
            require_pd(adapted.Y, "adapted information matrix")
            est = from_info(adapted)
            fused = combine_network(est, net.C, net.variant.fusion)
            fused_est = fused.est
            delta.adapt_vec = VEC * deg
            delta.adapt_mat = MAT * deg
            delta.combine_vec = VEC * deg
            delta.combine_mat = MAT * deg
    except NumericalError as e:
        node = getattr(e, "node", None)
        raise FusionError(f"tick {k}: {e}", k=k, node=node, min_eig=getattr(e, "min_eig", None)) from e
    new = NetworkState(NodeState(fused_est, res.trig), state.rngs)
    return new, fused, delta


@dataclass
class RunRecord:
    variant: str
    run_index: int
    seed: int
    truth: np.ndarray  # (T+1, 7)
    xhat: np.ndarray  # (T, N, 7) fused estimates at k = 1..T
    P: np.ndarray  # (T, N, 7, 7)
    gamma: np.ndarray  # (T, N)
    sensor_tx: np.ndarray  # cumulative (T, N)
    vec_volume: np.ndarray  # cumulative (T, N)
    mat_volume: np.ndarray  # cumulative (T, N)
    counter: MessageCounter = None
    wall_time: float = 0.0
    min_eig: np.ndarray = field(default=None, repr=False)
    max_asym: np.ndarray = field(default=None, repr=False)

    @property
    def T(self):
        return len(self.xhat)

    @property
    def n_nodes(self):
        return self.xhat.shape[1] if self.xhat.ndim == 3 else 0

    @property
    def errors(self):
        return self.truth[1:, None, :] - self.xhat

    @property
    def nees(self):
        e = self.errors
        return np.einsum("kni,kni->kn", e, np.linalg.solve(self.P, e[..., None])[..., 0])


RUN_COLUMNS = (
    ["k", "node"]
    + [f"xhat_{n}" for n in STATE_NAMES]
    + [f"true_{n}" for n in STATE_NAMES]
    + [f"var_{n}" for n in STATE_NAMES]
    + ["gamma", "sensor_tx", "vec_volume", "mat_volume"]
)


def write_run_csv(rec, path):
    """One row per tick and node. ``var_*`` holds the diagonal of the fused covariance."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_COLUMNS)
        for k in range(rec.T):
            for i in range(rec.n_nodes):
                w.writerow([
                    k + 1, i,
                    *(repr(float(v)) for v in rec.xhat[k, i]),
                    *(repr(float(v)) for v in rec.truth[k + 1]),
                    *(repr(float(v)) for v in np.diagonal(rec.P[k, i])),
                    int(rec.gamma[k, i]), int(rec.sensor_tx[k, i]),
                    int(rec.vec_volume[k, i]), int(rec.mat_volume[k, i]),
                ])


def read_run_csv(path, variant="", run_index=0, seed=0):
    """Rebuild a :class:`RunRecord` from :func:`write_run_csv` output (covariances not kept)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != RUN_COLUMNS:
            raise ValueError(f"{path}: not a run CSV (unexpected header)")
        rows = np.array([[float(v) for v in row] for row in r])
    if rows.size == 0:
        rows = np.empty((0, len(RUN_COLUMNS)))
    n = int(rows[:, 1].max()) + 1 if len(rows) else 0
    T = len(rows) // n if n else 0
    a = rows.reshape(T, n, len(RUN_COLUMNS))
    truth = np.vstack([np.full((1, N_STATE), np.nan), a[:, 0, 9:16]])
    ints = a[..., 23:27].astype(np.int64)
    return RunRecord(variant, run_index, seed, truth, a[..., 2:9], None, ints[..., 0].astype(np.int8),
                     ints[..., 1], ints[..., 2], ints[..., 3])


def run(cfg, variant, run_index=0, truth=None):
    """Simulate one Monte-Carlo run of ``variant`` on ``cfg``."""
    t0 = time.perf_counter()
    net = make_network(cfg, variant)
    s = cfg.scenario
    streams = run_streams(s.seed, run_index, s.n_sensors)
    if truth is None:
        truth = generate_truth(s, streams=streams)
    state = init_network(cfg, net.variant, streams=streams)
    T, n = truth.T, s.n_sensors
    xs = np.empty((T, n, N_STATE))
    Ps = np.empty((T, n, N_STATE, N_STATE))
    gam = np.empty((T, n), dtype=np.int8)
    cum = np.empty((3, T, n), dtype=np.int64)
    counter = MessageCounter.zeros(n)
    for k in range(1, T + 1):
        state, fused, d = step_network(net, state, truth.measurements[k - 1], truth.poses[k - 1], k)
        counter = counter + d
        xs[k - 1] = fused.xhat_fus
        Ps[k - 1] = fused.P_fus
        gam[k - 1] = d.sensor_tx
        cum[0, k - 1] = counter.sensor_tx
        cum[1, k - 1] = counter.vector_volume
        cum[2, k - 1] = counter.matrix_volume
    wall = time.perf_counter() - t0
    return RunRecord(
        variant=net.variant.value,
        run_index=run_index,
        seed=s.seed,
        truth=truth.states,
        xhat=xs,
        P=Ps,
        gamma=gam,
        sensor_tx=cum[0],
        vec_volume=cum[1],
        mat_volume=cum[2],
        counter=counter,
        wall_time=wall,
        min_eig=min_eig(Ps) if T else np.empty((0, n)),
        max_asym=asym(Ps) if T else np.empty((0, n)),
    )


def worker_count(requested=None):
    n = os.cpu_count() or 1
    cap = os.environ.get("SWARMTRACK_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    if requested:
        n = min(n, requested)
    return max(1, n)


def _run_job(args):
    return run(*args)


def run_many(cfg, variant, runs=None, workers=None):
    """Monte-Carlo ensemble ordered by run index, independent of scheduling."""
    runs = cfg.runs if runs is None else runs
    jobs = [(cfg, variant, m) for m in range(runs)]
    workers = worker_count(workers)
    if workers == 1 or runs <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_job, jobs, chunksize=max(1, runs // (4 * workers))))
