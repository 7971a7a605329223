"""Local node filtering: cubature/unscented/linearised moment engines, the
information form, the send-on-delta trigger and the event-triggered CIF step.

Every routine is written against stacked arrays: a single node passes
``xhat`` of shape (7,) and ``P`` of shape (7, 7); a network tick passes
(N, 7) and (N, 7, 7) and gets the same arithmetic node by node.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from ._linalg import NumericalError, chol, cov_sqrt, eye_like, inv_pd, sym, tr, wrap_angle
from .models import N_MEAS, N_STATE, CoordinatedTurn, RangeBearing

# Effective stand-in for an infinite threshold inside the gain formulas.
_DELTA_CAP = 1e250


# ---------------------------------------------------------------- containers


@dataclass
class EstimatePair:
    xhat: np.ndarray
    P: np.ndarray

    def __getitem__(self, i):
        return EstimatePair(self.xhat[i], self.P[i])


@dataclass
class InfoPair:
    yhat: np.ndarray
    Y: np.ndarray

    def __getitem__(self, i):
        return InfoPair(self.yhat[i], self.Y[i])

    def __add__(self, c):
        return InfoPair(self.yhat + c.i_vec, self.Y + c.I_mat)


@dataclass
class InfoContribution:
    i_vec: np.ndarray
    I_mat: np.ndarray

    def __getitem__(self, i):
        return InfoContribution(self.i_vec[i], self.I_mat[i])


@dataclass
class CubatureSet:
    points: np.ndarray  # (..., 2n, n)
    weights: np.ndarray  # (2n,)


@dataclass
class ScalingParams:
    sigma1: float = 5e-4
    sigma2: float = 5e-4

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("scaling parameters must be positive")

    @property
    def mu1(self):
        return 1.0 + self.sigma1

    @property
    def mu2(self):
        return 1.0 + self.sigma2

    @property
    def mu3(self):
        return 1.0 + 1.0 / self.sigma1 + 1.0 / self.sigma2


@dataclass
class UpdateWorkspace:
    zhat: np.ndarray
    Pzz: np.ndarray
    Pxz: np.ndarray
    K: np.ndarray = None
    H: np.ndarray = None
    D: np.ndarray = None
    angular: tuple = (1, 2)


@dataclass
class EtWorkspace:
    G: np.ndarray
    M: np.ndarray
    A: np.ndarray
    S: np.ndarray
    N: np.ndarray
    Pbar: np.ndarray
    Kbar: np.ndarray = None


@dataclass
class TriggerState:
    """Send-on-delta bookkeeping for one node (or a stack of nodes).

    ``z_tau`` is the last transmitted measurement, as the sensor sees it.
    ``z_hold`` is what the estimator uses between transmissions; it equals
    ``z_tau`` unless compensation noise is being added.
    """

    z_tau: np.ndarray
    z_hold: np.ndarray
    tau: np.ndarray
    gamma: np.ndarray
    has_tx: np.ndarray
    delta: float = 0.04

    @classmethod
    def initial(cls, delta=0.04, n_nodes=None):
        shape = () if n_nodes is None else (n_nodes,)
        nan = np.full(shape + (N_MEAS,), np.nan)
        return cls(nan, nan.copy(), np.zeros(shape, dtype=int), np.zeros(shape, dtype=int),
                   np.zeros(shape, dtype=bool), delta)

    def __getitem__(self, i):
        return TriggerState(self.z_tau[i], self.z_hold[i], self.tau[i], self.gamma[i],
                            self.has_tx[i], self.delta)


@dataclass
class CompensationSpec:
    enabled: bool = False
    Sigma: np.ndarray = None  # None: use the node's R

    def __post_init__(self):
        if self.Sigma is not None:
            self.Sigma = np.asarray(self.Sigma, dtype=float)
            if np.linalg.eigvalsh(sym(self.Sigma))[0] < -1e-12:
                raise ValueError("compensation covariance must be PSD")


# ------------------------------------------------------ information form


def to_info(p):
    Y = inv_pd(p.P, "covariance")
    return InfoPair(np.einsum("...ij,...j->...i", Y, p.xhat), Y)


def from_info(q):
    try:
        np.linalg.cholesky(q.Y)
    except np.linalg.LinAlgError:
        raise NumericalError("information matrix is not positive definite") from None
    P = sym(np.linalg.inv(q.Y))
    xhat = np.linalg.solve(q.Y, q.yhat[..., None])[..., 0]
    return EstimatePair(xhat, P)


# ------------------------------------------------------- moment engines


def _moments(pts, wm, wc, vals, ref=None, angular=()):
    """Weighted mean/covariance of ``vals`` (..., npts, d) plus cross term with ``pts``."""
    if angular and ref is not None:
        vals = vals.copy()
        a = list(angular)
        vals[..., a] = ref[..., None, a] + wrap_angle(vals[..., a] - ref[..., None, a])
    mean = np.einsum("p,...pd->...d", wm, vals)
    dv = vals - mean[..., None, :]
    cov = np.einsum("p,...pi,...pj->...ij", wc, dv, dv)
    return mean, cov, dv


class CubatureRule:
    """Third-degree spherical-radial cubature (2n equally weighted points)."""

    name = "ckf"

    def cubature(self, x, P):
        n = x.shape[-1]
        L = chol(P, "covariance")
        cols = np.sqrt(n) * tr(L)  # rows are scaled columns of L
        pts = np.concatenate([x[..., None, :] + cols, x[..., None, :] - cols], axis=-2)
        w = np.full(2 * n, 1.0 / (2 * n))
        return pts, w, w

    def predict(self, est, f, Q):
        pts, wm, wc = self.cubature(est.xhat, est.P)
        xp, Pp, _ = _moments(pts, wm, wc, f(pts))
        return EstimatePair(xp, sym(Pp + Q))

    def measure(self, prior, h, pose, R):
        pts, wm, wc = self.cubature(prior.xhat, prior.P)
        angular = tuple(getattr(h, "angular", ()))
        ref = h(prior.xhat, pose)
        pt_pose = None if pose is None else np.asarray(pose, dtype=float)[..., None, :]
        zhat, Pzz, dz = _moments(pts, wm, wc, h(pts, pt_pose), ref, angular)
        dx = pts - prior.xhat[..., None, :]
        Pxz = np.einsum("p,...pi,...pj->...ij", wc, dx, dz)
        if angular:
            zhat[..., list(angular)] = wrap_angle(zhat[..., list(angular)])
        return UpdateWorkspace(zhat, sym(Pzz + R), Pxz, angular=angular)


class UnscentedRule(CubatureRule):
    """Scaled unscented transform with 2n+1 sigma points."""

    name = "ukf"

    def __init__(self, alpha=1.0, beta=2.0, kappa=None):
        self.alpha, self.beta, self.kappa = alpha, beta, kappa

    def cubature(self, x, P):
        n = x.shape[-1]
        kappa = 3.0 - n if self.kappa is None else self.kappa
        lam = self.alpha**2 * (n + kappa) - n
        if n + lam <= 0:
            raise ValueError("unscented parameters give n + lambda <= 0")
        L = chol(P, "covariance")
        cols = np.sqrt(n + lam) * tr(L)
        pts = np.concatenate([x[..., None, :], x[..., None, :] + cols, x[..., None, :] - cols], axis=-2)
        wm = np.full(2 * n + 1, 0.5 / (n + lam))
        wc = wm.copy()
        wm[0] = lam / (n + lam)
        wc[0] = wm[0] + 1.0 - self.alpha**2 + self.beta
        return pts, wm, wc


class LinearizedRule:
    """First-order (EKF) moment propagation through analytic Jacobians."""

    name = "ekf"

    def predict(self, est, f, Q):
        F = f.jacobian(est.xhat)
        return EstimatePair(f(est.xhat), sym(F @ est.P @ tr(F) + Q))

    def measure(self, prior, h, pose, R):
        angular = tuple(getattr(h, "angular", ()))
        zhat = h(prior.xhat, pose)
        G = h.jacobian(prior.xhat, pose)
        Pxz = prior.P @ tr(G)
        Pzz = sym(G @ Pxz + R)
        return UpdateWorkspace(zhat, Pzz, Pxz, angular=angular)


RULES = {"ckf": CubatureRule, "ukf": UnscentedRule, "ekf": LinearizedRule}


def make_rule(kind, **ukf_params):
    if kind == "ukf":
        return UnscentedRule(**ukf_params)
    return RULES[kind]()


# ----------------------------------------------------------- CKF basics


def cubature_points(p):
    pts, w, _ = CubatureRule().cubature(np.asarray(p.xhat, dtype=float), np.asarray(p.P, dtype=float))
    return CubatureSet(pts, w)


def _dynamics(dt_or_f):
    return CoordinatedTurn(dt_or_f) if np.isscalar(dt_or_f) else dt_or_f


def ckf_predict(p, dt, Q):
    """Cubature prediction; ``dt`` may also be any vectorised dynamics callable."""
    return CubatureRule().predict(p, _dynamics(dt), Q)


def innovation(z, ws):
    dz = np.asarray(z, dtype=float) - ws.zhat
    if ws.angular:
        a = list(ws.angular)
        dz[..., a] = wrap_angle(dz[..., a])
    return dz


def kalman_update(prior, z, ws):
    """Moment-form measurement update; fills ``ws.K``."""
    K = tr(np.linalg.solve(ws.Pzz, tr(ws.Pxz)))
    ws.K = K
    dz = innovation(z, ws)
    xhat = prior.xhat + np.einsum("...ij,...j->...i", K, dz)
    P = sym(prior.P - K @ ws.Pzz @ tr(K))
    return EstimatePair(xhat, P)


def ckf_update(prior, z, pose, R, h=None):
    h = RangeBearing() if h is None else h
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise NumericalError("measurement noise R must be positive definite") from None
    ws = CubatureRule().measure(prior, h, pose, R)
    return kalman_update(prior, z, ws), ws


# ------------------------------------------------------ CIF contributions


def info_contribution(prior_info, prior, ws, z):
    """Measurement information (i, I) of a triggered update; fills ``ws.H`` and ``ws.D``."""
    Y = prior_info.Y
    H = tr(ws.Pxz) @ Y
    D = sym(ws.Pzz - H @ ws.Pxz)
    Dinv = inv_pd(D, "D = Pzz - Pxz' Y Pxz")
    ws.H, ws.D = H, D
    HtDi = tr(H) @ Dinv
    dz = innovation(z, ws)
    i_vec = np.einsum("...ij,...j->...i", HtDi, dz + np.einsum("...ij,...j->...i", H, prior.xhat))
    return InfoContribution(i_vec, sym(HtDi @ H))


def measurement_jacobian(x, pose):
    return RangeBearing().jacobian(x, pose)


def et_gain(P, G, R, delta, sp):
    """Gain for non-triggered steps that minimises the trace of the covariance bound.

    Returns an :class:`EtWorkspace` with S, M, A, the bound Pbar and N.
    """
    delta = np.minimum(np.asarray(delta, dtype=float), _DELTA_CAP)[..., None, None]
    mu1, mu2, mu3 = sp.mu1, sp.mu2, sp.mu3
    m = G.shape[-2]
    S = sym(mu1 * G @ P @ tr(G) + mu2 * R + mu3 * delta * np.eye(m))
    Sinv = inv_pd(S, "S")
    M = mu1 * P @ tr(G) @ Sinv
    I = eye_like(P)
    MG = M @ G
    A = I - MG
    Pbar = sym(pbar_of_gain(M, P, G, R, delta, sp))
    N = (sp.sigma1 * I - mu1 * MG) @ P - mu1 * P @ tr(MG) + M @ S @ tr(M)
    return EtWorkspace(G=G, M=M, A=A, S=S, N=N, Pbar=Pbar)


def pbar_of_gain(M, P, G, R, delta, sp):
    """Covariance upper bound for an arbitrary non-triggered gain M."""
    delta = np.asarray(delta, dtype=float)
    if delta.ndim < 2:
        delta = np.minimum(delta, _DELTA_CAP)[..., None, None]
    A = eye_like(P) - M @ G
    return sp.mu1 * A @ P @ tr(A) + sp.mu2 * M @ R @ tr(M) + sp.mu3 * delta * M @ tr(M)


def et_info_contribution(gamma, prior_info, prior, ws, et, z_tau, sp):
    """Event-triggered (i, I).

    ``gamma == 1`` gives the ordinary CIF contribution. ``gamma == 0`` deflates
    the prior information and nudges towards the held measurement using the
    bound-minimising gain in ``et``.
    """
    gamma = np.asarray(gamma)
    Y = prior_info.Y
    trig = info_contribution(prior_info, prior, ws, z_tau) if np.any(gamma == 1) else None
    if np.all(gamma == 1):
        return trig
    dzb = innovation(z_tau, ws)
    YN = Y @ et.N
    # Y (N^-1 + Y)^-1 Y rewritten as Y N (I + Y N)^-1 Y: same value, no N^-1
    B = eye_like(Y) + YN
    try:
        I0 = -sym(YN @ np.linalg.solve(B, Y))
    except np.linalg.LinAlgError:
        raise NumericalError("I + Y N is singular") from None
    Sinv_dz = np.linalg.solve(et.S, dzb[..., None])[..., 0]
    i0 = sp.mu1 * np.einsum("...ji,...j->...i", et.G, Sinv_dz) + np.einsum(
        "...ij,...j->...i", I0, prior.xhat + np.einsum("...ij,...j->...i", et.M, dzb)
    )
    if trig is None:
        return InfoContribution(i0, I0)
    g = gamma.astype(bool)
    return InfoContribution(
        np.where(g[..., None], trig.i_vec, i0),
        np.where(g[..., None, None], trig.I_mat, I0),
    )


# ------------------------------------------------------------- trigger


def trigger(z, ts, k, weight=None, comp_noise=None, angular=(1, 2)):
    """Send-on-delta decision and held-measurement update for time ``k``.

    A node transmits when the squared deviation from its last transmitted
    measurement exceeds ``ts.delta``; the very first measurement is always
    sent. Missing measurements (NaN) never transmit. ``delta=None`` disables
    the trigger (always transmit).
    """
    z = np.asarray(z, dtype=float)
    d = z - ts.z_tau
    if angular:
        d[..., list(angular)] = wrap_angle(d[..., list(angular)])
    if weight is None:
        dist = np.einsum("...i,...i->...", d, d)
    else:
        dist = np.einsum("...i,ij,...j->...", d, weight, d)
    missing = np.any(np.isnan(z), axis=-1)
    if ts.delta is None:
        fire = ~missing
    else:
        fire = ~missing & (~ts.has_tx | (dist > ts.delta))
    g = fire[..., None]
    held = ts.z_hold if comp_noise is None else ts.z_hold + comp_noise
    return TriggerState(
        z_tau=np.where(g, z, ts.z_tau),
        z_hold=np.where(g, z, held),
        tau=np.where(fire, k, ts.tau),
        gamma=fire.astype(int),
        has_tx=ts.has_tx | fire,
        delta=ts.delta,
    )


# ------------------------------------------------------------ node step


@dataclass
class LocalFilter:
    """Everything a node needs to run its local filter.

    ``R`` may be (3, 3) or stacked (N, 3, 3) to match a batched node state.
    ``delta=None`` switches the trigger off.
    """

    rule: object = field(default_factory=CubatureRule)
    dynamics: object = None
    measurement: object = field(default_factory=RangeBearing)
    Q: np.ndarray = None
    R: np.ndarray = None
    delta: float = 0.04
    scaling: ScalingParams = field(default_factory=ScalingParams)
    compensation: CompensationSpec = field(default_factory=CompensationSpec)
    trigger_weight: np.ndarray = None


@dataclass
class NodeState:
    est: EstimatePair
    trig: TriggerState

    @classmethod
    def initial(cls, xhat0, P0, delta, n_nodes=None):
        xhat0 = np.asarray(xhat0, dtype=float)
        P0 = np.asarray(P0, dtype=float)
        if n_nodes is not None:
            xhat0 = np.broadcast_to(xhat0, (n_nodes,) + xhat0.shape[-1:]).copy()
            P0 = np.broadcast_to(P0, (n_nodes,) + P0.shape[-2:]).copy()
        return cls(EstimatePair(xhat0, P0), TriggerState.initial(delta, n_nodes))


@dataclass
class StepResult:
    prior: EstimatePair
    prior_info: InfoPair
    workspace: UpdateWorkspace
    et: EtWorkspace
    contribution: InfoContribution
    info: InfoPair
    est: EstimatePair
    trig: TriggerState

    @property
    def state(self):
        return NodeState(self.est, self.trig)


def _compensation_noise(filt, rngs, batch_shape):
    if not filt.compensation.enabled or rngs is None:
        return None
    Sigma = filt.compensation.Sigma if filt.compensation.Sigma is not None else filt.R
    S = cov_sqrt(np.broadcast_to(Sigma, batch_shape + (N_MEAS, N_MEAS)))
    rngs = [rngs] if not batch_shape else list(rngs)
    e = np.stack([rng.standard_normal(N_MEAS) for rng in rngs]).reshape(batch_shape + (N_MEAS,))
    return np.einsum("...ij,...j->...i", S, e)


def _require_dynamics(filt):
    if filt.dynamics is None:
        raise ValueError("LocalFilter.dynamics is not set")
    return filt.dynamics


def local_phase(filt, state, z, pose, k, rng=None):
    """Prediction, trigger decision and event-triggered information contribution.

    Returns the local posterior as well; diffusion variants use only the
    prior information and the contribution.
    """
    dyn = _require_dynamics(filt)
    prior = filt.rule.predict(state.est, dyn, filt.Q)
    prior_info = to_info(prior)
    ws = filt.rule.measure(prior, filt.measurement, pose, filt.R)
    batch = prior.xhat.shape[:-1]
    trig = trigger(z, replace(state.trig, delta=filt.delta), k, filt.trigger_weight,
                   _compensation_noise(filt, rng, batch), angular=ws.angular)
    usable = trig.has_tx
    gamma = trig.gamma
    et = None
    if np.any(usable & (gamma == 0)):
        G = filt.measurement.jacobian(prior.xhat, pose)
        delta = np.inf if filt.delta is None else filt.delta
        et = et_gain(prior.P, G, filt.R, delta, filt.scaling)
    z_used = np.where(usable[..., None], trig.z_hold, ws.zhat)
    if np.any(usable):
        contrib = et_info_contribution(gamma, prior_info, prior, ws, et, z_used, filt.scaling)
        if not np.all(usable):
            contrib = InfoContribution(np.where(usable[..., None], contrib.i_vec, 0.0),
                                       np.where(usable[..., None, None], contrib.I_mat, 0.0))
    else:
        contrib = InfoContribution(np.zeros_like(prior.xhat), np.zeros_like(prior.P))
    if et is not None:
        g = gamma.astype(bool)
        if ws.K is None:
            ws.K = tr(np.linalg.solve(ws.Pzz, tr(ws.Pxz)))
        et.Kbar = np.where(g[..., None, None], ws.K, et.M)
    info = prior_info + contrib
    est = from_info(info)
    return StepResult(prior, prior_info, ws, et, contrib, info, est, trig)


def et_cif_step(filt, state, z, pose, k, rng=None):
    """One event-triggered CIF step at a node (prediction + information update)."""
    return local_phase(filt, state, z, pose, k, rng)


def ekf_step(filt, state, z, pose, k, rng=None):
    return local_phase(replace(filt, rule=LinearizedRule()), state, z, pose, k, rng)


def ukf_step(filt, state, z, pose, k, rng=None):
    rule = filt.rule if isinstance(filt.rule, UnscentedRule) else UnscentedRule()
    return local_phase(replace(filt, rule=rule), state, z, pose, k, rng)


def ckf_step(filt, state, z, pose, k):
    """Plain moment-form CKF step (no trigger, no information form)."""
    dyn = _require_dynamics(filt)
    prior = CubatureRule().predict(state.est, dyn, filt.Q)
    ws = CubatureRule().measure(prior, filt.measurement, pose, filt.R)
    return kalman_update(prior, z, ws)
