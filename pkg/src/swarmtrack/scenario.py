"""Simulated ascending-circle tracking scenario: dynamics, sensors, ground truth."""
from dataclasses import dataclass, field

import numpy as np

from ._linalg import cov_sqrt, sym, wrap_angle
from .models import N_MEAS, N_STATE, CoordinatedTurn, GeometryError, RangeBearing

__all__ = [
    "NoiseSpec",
    "ScenarioConfig",
    "GroundTruth",
    "propagate_state",
    "observe",
    "sample_noise",
    "generate_truth",
    "default_sensors",
    "run_streams",
]

# Chosen defaults: they fix a reasonable
# desk-scale scene (target circling inside a 100 m square of sensors).
DEFAULT_DT = 0.1
DEFAULT_HORIZON = 200
DEFAULT_INITIAL_STATE = (70.0, 50.0, 10.0, 0.0, 4.0, 0.5, 0.2)
DEFAULT_INITIAL_STD = (10.0, 10.0, 10.0, 3.0, 3.0, 1.0, 0.2)
DEFAULT_Q_DIAG = (1e-4, 1e-4, 1e-4, 1e-3, 1e-3, 1e-3, 1e-6)
DEFAULT_R_STD = (0.3, 0.01, 0.01)


def _check_cov(C, name, strict):
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"{name} must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError(f"{name} has non-finite entries")
    if np.max(np.abs(C - C.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(C))):
        raise ValueError(f"{name} is not symmetric")
    w = np.linalg.eigvalsh(sym(C))
    tol = 1e-12 * max(1.0, np.max(np.abs(w)))
    if strict and w[0] <= 0.0:
        raise ValueError(f"{name} is not positive definite (min eig {w[0]:.3g})")
    if not strict and w[0] < -tol:
        raise ValueError(f"{name} is not positive semidefinite (min eig {w[0]:.3g})")
    return C


@dataclass
class NoiseSpec:
    Q: np.ndarray
    R_per_sensor: list

    def __post_init__(self):
        self.Q = _check_cov(self.Q, "Q", strict=False)
        if self.Q.shape != (N_STATE, N_STATE):
            raise ValueError("Q must be 7x7")
        Rs = []
        for i, R in enumerate(self.R_per_sensor):
            R = _check_cov(R, f"R[{i}]", strict=False)
            if R.shape != (N_MEAS, N_MEAS):
                raise ValueError(f"R[{i}] must be 3x3")
            Rs.append(R)
        self.R_per_sensor = Rs

    @property
    def R(self):
        """Stacked (N, 3, 3) measurement covariances."""
        return np.stack(self.R_per_sensor)


def default_sensors(n=4, side=100.0):
    """Sensor positions on the ground; four sensors sit on the corners of the square."""
    if n == 4:
        return np.array([[0.0, 0.0, 0.0], [side, 0.0, 0.0], [side, side, 0.0], [0.0, side, 0.0]])
    c = side / 2.0
    rad = side / np.sqrt(2.0)
    ang = np.deg2rad(225.0) + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([c + rad * np.cos(ang), c + rad * np.sin(ang), np.zeros(n)])


@dataclass
class ScenarioConfig:
    dt: float = DEFAULT_DT
    T: int = DEFAULT_HORIZON
    initial_state: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_INITIAL_STATE))
    initial_cov: np.ndarray = field(default_factory=lambda: np.diag(np.square(DEFAULT_INITIAL_STD)))
    sensors: np.ndarray = field(default_factory=default_sensors)
    noise: NoiseSpec = None
    seed: int = 0

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=float)
        self.sensors = np.atleast_2d(np.asarray(self.sensors, dtype=float))
        if self.noise is None:
            self.noise = NoiseSpec(
                np.diag(DEFAULT_Q_DIAG),
                [np.diag(np.square(DEFAULT_R_STD))] * len(self.sensors),
            )
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if int(self.T) != self.T or self.T < 0:
            raise ValueError("horizon must be a non-negative integer")
        self.T = int(self.T)
        if self.initial_state.shape != (N_STATE,) or not np.all(np.isfinite(self.initial_state)):
            raise ValueError("initial_state must be 7 finite numbers")
        if self.sensors.shape[1] != 3 or len(self.sensors) < 1:
            raise ValueError("need at least one sensor given as [x, y, z]")
        self.initial_cov = _check_cov(self.initial_cov, "initial_cov", strict=True)
        if len(self.noise.R_per_sensor) != len(self.sensors):
            raise ValueError("one R per sensor required")

    @property
    def n_sensors(self):
        return len(self.sensors)


@dataclass
class GroundTruth:
    """Truth states (T+1, 7), measurements (T, N, 3) and sensor poses (T, N, 3).

    Row k of ``measurements`` belongs to time k+1, i.e. to ``states[k + 1]``.
    """

    states: np.ndarray
    measurements: np.ndarray
    poses: np.ndarray

    def __post_init__(self):
        T = len(self.states) - 1
        if self.measurements.shape[0] != T or self.poses.shape[:2] != self.measurements.shape[:2]:
            raise ValueError("truth/measurement lengths are inconsistent")

    @property
    def T(self):
        return len(self.states) - 1


def sample_noise(rng, cov, size=()):
    """Zero-mean Gaussian draws with covariance ``cov`` (PSD allowed)."""
    S = cov_sqrt(cov)
    size = (size,) if np.isscalar(size) else tuple(size)
    e = rng.standard_normal(size + (S.shape[0],))
    return e @ S.T


def propagate_state(x, dt, rng=None, Q=None):
    if not dt > 0:
        raise ValueError("dt must be positive")
    out = CoordinatedTurn(dt)(x)
    if rng is not None and Q is not None:
        out = out + sample_noise(rng, Q, np.shape(out)[:-1])
    return out


def observe(x, pose, rng=None, R=None):
    """Noisy (or noiseless) range/pitch/azimuth measurement of ``x`` from ``pose``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.all(x[..., 0:3] == np.asarray(pose, dtype=float), axis=-1)):
        raise GeometryError("target coincides with sensor: range is zero")
    z = RangeBearing()(x, pose)
    if rng is not None and R is not None:
        z = z + sample_noise(rng, R, z.shape[:-1])
        z[..., 2] = wrap_angle(z[..., 2])
    return z


def run_streams(seed, run_index, n_nodes):
    """Independent Philox streams for one Monte-Carlo run.

    Keys are (run, purpose, node) so a run's numbers never depend on which
    other runs exist or in what order they execute.
    """
    def gen(*key):
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))

    return {
        "truth": gen(run_index, 0),
        "sensors": [gen(run_index, 1, i) for i in range(n_nodes)],
        "nodes": [gen(run_index, 2, i) for i in range(n_nodes)],
    }


def generate_truth(cfg, run_index=0, streams=None):
    """Draw x0 ~ N(mean, P0), propagate T steps with process noise, measure from every sensor."""
    if streams is None:
        streams = run_streams(cfg.seed, run_index, cfg.n_sensors)
    rng = streams["truth"]
    f = CoordinatedTurn(cfg.dt)
    Qs = cov_sqrt(cfg.noise.Q)
    T, N = cfg.T, cfg.n_sensors
    states = np.empty((T + 1, N_STATE))
    states[0] = cfg.initial_state + cov_sqrt(cfg.initial_cov) @ rng.standard_normal(N_STATE)
    for k in range(1, T + 1):
        states[k] = f(states[k - 1]) + Qs @ rng.standard_normal(N_STATE)
    poses = np.broadcast_to(cfg.sensors, (T, N, 3)).copy()
    meas = np.empty((T, N, 3))
    h = RangeBearing()
    for i in range(N):
        clean = h(states[1:], cfg.sensors[i])
        noise = _measurement_noise(streams["sensors"][i], cfg.noise.R_per_sensor[i], T)
        z = clean + noise
        z[:, 2] = wrap_angle(z[:, 2])
        meas[:, i] = z
    return GroundTruth(states, meas, poses)


def _measurement_noise(rng, R, T):
    return rng.standard_normal((T, N_MEAS)) @ cov_sqrt(R).T
