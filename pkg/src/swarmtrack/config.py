"""Experiment configuration and its JSON form.

JSON keys::

    dt, horizon, seed, runs
    initial_state   [7]
    initial_cov     7x7 (nested rows, or a flat row-major list of 49)
    sensors         [[x, y, z], ...]
    q               7x7
    r               [3x3, ...] one per sensor (a single 3x3 is broadcast)
    topology        "ring4" | "star4" | "ring" | [[i, j], ...]
    filter          {delta, sigma1, sigma2, compensation, compensation_cov,
                     trigger_weight, ukf: {alpha, beta, kappa}}
    fusion          {consensus_L}

Every key is optional; missing keys take the defaults of
:class:`~swarmtrack.scenario.ScenarioConfig`, :class:`FilterConfig` and
:class:`FusionConfig`.
"""
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .network import PRESETS, build_graph, ring_edges, star_edges
from .scenario import NoiseSpec, ScenarioConfig, default_sensors


class ConfigError(ValueError):
    pass


@dataclass
class FilterConfig:
    delta: float = 0.04
    sigma1: float = 5e-4
    sigma2: float = 5e-4
    compensation: bool = False
    compensation_cov: list = None
    trigger_weight: list = None
    ukf_alpha: float = 1.0
    ukf_beta: float = 2.0
    ukf_kappa: float = None


@dataclass
class FusionConfig:
    consensus_L: int = 5


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    edges: list = None
    filter: FilterConfig = field(default_factory=FilterConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    runs: int = 100

    def __post_init__(self):
        if self.edges is None:
            self.edges = ring_edges(self.scenario.n_sensors)
        self.edges = [tuple(int(v) for v in e) for e in self.edges]

    @property
    def graph(self):
        return build_graph(self.scenario.n_sensors, self.edges)

    def with_(self, **kw):
        """Copy with top-level, scenario or filter fields replaced by name."""
        top, scen, filt, fus = {}, {}, {}, {}
        for k, v in kw.items():
            if k in ("edges", "runs"):
                top[k] = v
            elif k in FilterConfig.__dataclass_fields__:
                filt[k] = v
            elif k in FusionConfig.__dataclass_fields__:
                fus[k] = v
            elif k in ("dt", "T", "initial_state", "initial_cov", "sensors", "noise", "seed"):
                scen[k] = v
            else:
                raise KeyError(k)
        out = replace(self, **top)
        if scen:
            out.scenario = replace(self.scenario, **scen)
        if filt:
            out.filter = replace(self.filter, **filt)
        if fus:
            out.fusion = replace(self.fusion, **fus)
        return out


def _matrix(v, n, name):
    a = np.asarray(v, dtype=float)
    if a.shape == (n * n,):
        a = a.reshape(n, n)
    if a.shape != (n, n):
        raise ConfigError(f"{name} must be {n}x{n}, got shape {a.shape}")
    return a


def _topology(spec, n):
    if spec is None or spec == "ring":
        return ring_edges(n)
    if spec == "star":
        return star_edges(n)
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"unknown topology preset {spec!r}")
        m, edges = PRESETS[spec]
        if m != n:
            raise ConfigError(f"preset {spec!r} needs {m} sensors, config has {n}")
        return edges
    return [tuple(e) for e in spec]


def config_from_dict(d):
    d = dict(d)
    known = {"dt", "horizon", "seed", "runs", "initial_state", "initial_cov", "sensors", "q", "r",
             "topology", "filter", "fusion"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = ScenarioConfig()
    try:
        sensors = np.asarray(d.get("sensors", base.sensors), dtype=float)
        n = len(sensors)
        q = _matrix(d["q"], 7, "q") if "q" in d else base.noise.Q
        r = d.get("r")
        if r is None:
            Rs = [base.noise.R_per_sensor[0]] * n
        else:
            r = np.asarray(r, dtype=float)
            if r.shape in ((3, 3), (9,)):
                Rs = [_matrix(r, 3, "r")] * n
            else:
                Rs = [_matrix(ri, 3, f"r[{i}]") for i, ri in enumerate(r)]
        scen = ScenarioConfig(
            dt=float(d.get("dt", base.dt)),
            T=d.get("horizon", base.T),
            initial_state=d.get("initial_state", base.initial_state),
            initial_cov=_matrix(d["initial_cov"], 7, "initial_cov") if "initial_cov" in d else base.initial_cov,
            sensors=sensors,
            noise=NoiseSpec(q, Rs),
            seed=int(d.get("seed", 0)),
        )
        fd = dict(d.get("filter", {}))
        ukf = fd.pop("ukf", {})
        filt = FilterConfig(**fd, **{f"ukf_{k}": v for k, v in ukf.items()})
        fus = FusionConfig(**d.get("fusion", {}))
        cfg = ExperimentConfig(scen, _topology(d.get("topology"), n), filt, fus, int(d.get("runs", 100)))
        cfg.graph  # connectivity check
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(str(e)) from e
    return cfg


def config_to_dict(cfg):
    s = cfg.scenario
    f = cfg.filter
    filt = {
        "delta": f.delta,
        "sigma1": f.sigma1,
        "sigma2": f.sigma2,
        "compensation": f.compensation,
        "compensation_cov": f.compensation_cov,
        "trigger_weight": f.trigger_weight,
        "ukf": {"alpha": f.ukf_alpha, "beta": f.ukf_beta, "kappa": f.ukf_kappa},
    }
    return {
        "dt": s.dt,
        "horizon": s.T,
        "seed": s.seed,
        "runs": cfg.runs,
        "initial_state": s.initial_state.tolist(),
        "initial_cov": s.initial_cov.tolist(),
        "sensors": s.sensors.tolist(),
        "q": s.noise.Q.tolist(),
        "r": [R.tolist() for R in s.noise.R_per_sensor],
        "topology": [list(e) for e in cfg.edges],
        "filter": filt,
        "fusion": {"consensus_L": cfg.fusion.consensus_L},
    }


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        return config_from_dict(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e


def save_config(cfg, path):
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2))


def config_hash(cfg):
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def with_nodes(cfg, n):
    """Same scenario with ``n`` sensors on a ring topology."""
    sensors = default_sensors(n)
    R0 = cfg.scenario.noise.R_per_sensor[0]
    scen = replace(cfg.scenario, sensors=sensors, noise=NoiseSpec(cfg.scenario.noise.Q, [R0] * n))
    return replace(cfg, scenario=scen, edges=ring_edges(n))


def replay_config(cfg, replay):
    """Config and ground truth for a replay bundle: its clock, horizon, observers and first truth state.

    Noise settings and filter parameters come from ``cfg``; the topology becomes a ring.
    """
    s = cfg.scenario
    gt = replay.ground_truth()
    R0 = s.noise.R_per_sensor[0]
    scen = replace(
        s,
        dt=replay.dt,
        T=replay.horizon,
        initial_state=gt.states[0],
        sensors=replay.poses[0],
        noise=NoiseSpec(s.noise.Q, [R0] * replay.n_sensors),
    )
    return replace(cfg, scenario=scen, edges=ring_edges(replay.n_sensors), runs=1), gt
