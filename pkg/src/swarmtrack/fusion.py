"""Network fusion rules: diffusion adaptation, convex and covariance-intersection
combination, and iterative average consensus (the baseline)."""
from dataclasses import dataclass

import numpy as np

from ._linalg import NumericalError, min_eig, sym
from .estimator import EstimatePair, InfoPair, from_info, to_info


class FusionError(NumericalError):
    """Fusion produced a matrix that is not positive definite."""

    def __init__(self, msg, k=None, node=None, min_eig=None):
        super().__init__(msg)
        self.k, self.node, self.min_eig = k, node, min_eig


@dataclass
class FusedEstimate:
    xhat_fus: np.ndarray
    P_fus: np.ndarray
    yhat_fus: np.ndarray
    Y_fus: np.ndarray

    @property
    def est(self):
        return EstimatePair(self.xhat_fus, self.P_fus)

    @property
    def info(self):
        return InfoPair(self.yhat_fus, self.Y_fus)


@dataclass
class ConsensusConfig:
    L: int
    weights: np.ndarray

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("consensus needs L >= 1 iterations")


def _check_weights(w, n):
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("combination weights must be nonnegative and sum to 1")
    return w


def require_pd(Y, what):
    try:
        np.linalg.cholesky(Y)
    except np.linalg.LinAlgError:
        e = min_eig(Y)
        bad = int(np.argmin(np.atleast_1d(e)))
        raise FusionError(f"{what} is not positive definite", node=bad if np.ndim(e) else None,
                          min_eig=float(np.min(e))) from None


def diffuse_adapt(prior_info, own, nbrs=()):
    """Add the node's own and its neighbours' information contributions to its prior."""
    yhat = prior_info.yhat + own.i_vec
    Y = prior_info.Y + own.I_mat
    for c in nbrs:
        yhat = yhat + c.i_vec
        Y = Y + c.I_mat
    Y = sym(Y)
    require_pd(Y, "adapted information matrix")
    return InfoPair(yhat, Y)


def adapt_network(prior_info, contrib, adjacency):
    """Adaptation for every node at once; ``adjacency`` selects which contributions are summed."""
    A = np.asarray(adjacency, dtype=float) + np.eye(len(adjacency))
    yhat = prior_info.yhat + A @ contrib.i_vec
    Y = sym(prior_info.Y + np.einsum("ij,jab->iab", A, contrib.I_mat))
    return InfoPair(yhat, Y)


def diffuse_combine_convex(pairs, weights_row):
    """Covariance-blind convex combination of estimates and covariances."""
    xs = np.stack([p.xhat for p in pairs]) if isinstance(pairs, (list, tuple)) else pairs.xhat
    Ps = np.stack([p.P for p in pairs]) if isinstance(pairs, (list, tuple)) else pairs.P
    w = _check_weights(weights_row, len(xs))
    x = w @ xs
    P = sym(np.einsum("j,jab->ab", w, Ps))
    q = to_info(EstimatePair(x, P))
    return FusedEstimate(x, P, q.yhat, q.Y)


def ci_combine(pairs, weights_row):
    """Covariance intersection with fixed weights: a convex combination of information pairs."""
    if isinstance(pairs, (list, tuple)):
        pairs = EstimatePair(np.stack([p.xhat for p in pairs]), np.stack([p.P for p in pairs]))
    w = _check_weights(weights_row, len(pairs.xhat))
    q = to_info(pairs)
    Y = sym(np.einsum("j,jab->ab", w, q.Y))
    yhat = w @ q.yhat
    require_pd(Y, "fused information matrix")
    p = from_info(InfoPair(yhat, Y))
    return FusedEstimate(p.xhat, p.P, yhat, Y)


def combine_network(est, C, rule):
    """Combination stage for all nodes; row i of ``C`` holds node i's weights."""
    if rule == "ci":
        q = to_info(est)
        Y = sym(np.einsum("ij,jab->iab", C, q.Y))
        yhat = C @ q.yhat
        require_pd(Y, "fused information matrix")
        p = from_info(InfoPair(yhat, Y))
        return FusedEstimate(p.xhat, p.P, yhat, Y)
    if rule == "convex":
        x = C @ est.xhat
        P = sym(np.einsum("ij,jab->iab", C, est.P))
        require_pd(P, "fused covariance")
        q = to_info(EstimatePair(x, P))
        return FusedEstimate(x, P, q.yhat, q.Y)
    raise ValueError(f"unknown combination rule {rule!r}")


def consensus_fuse(info_pairs, cfg):
    """``cfg.L`` synchronous rounds of weighted averaging of information pairs."""
    if isinstance(info_pairs, (list, tuple)):
        yhat = np.stack([q.yhat for q in info_pairs])
        Y = np.stack([q.Y for q in info_pairs])
    else:
        yhat, Y = info_pairs.yhat, info_pairs.Y
    W = np.asarray(cfg.weights, dtype=float)
    for _ in range(cfg.L):
        yhat = W @ yhat
        Y = np.einsum("ij,jab->iab", W, Y)
    return InfoPair(yhat, sym(Y))
