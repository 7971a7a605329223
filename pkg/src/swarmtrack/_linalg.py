"""Small batched linear-algebra helpers.

Every function accepts stacks of matrices with arbitrary leading dimensions,
so the same code serves a single node and a whole network tick.
"""
import numpy as np


class NumericalError(ArithmeticError):
    """A matrix that must be positive definite or invertible was not."""


def tr(a):
    """Transpose the last two axes."""
    return np.swapaxes(a, -1, -2)


def sym(a):
    return 0.5 * (a + tr(a))


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    # leave in-range values bit-identical
    return np.where((a > -np.pi) & (a <= np.pi), a, w)


def eye_like(a):
    n = a.shape[-1]
    return np.broadcast_to(np.eye(n), a.shape[:-2] + (n, n))


def chol(P, what="matrix", jitter=True):
    """Lower Cholesky factor with a single jitter retry.

    On failure the diagonal is loaded with ``1e-9 * tr(P) / n`` once; a second
    failure raises :class:`NumericalError`.
    """
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        if not jitter:
            raise NumericalError(f"{what} is not positive definite") from None
    P = np.asarray(P)
    n = P.shape[-1]
    load = 1e-9 * np.trace(P, axis1=-2, axis2=-1) / n
    try:
        return np.linalg.cholesky(P + load[..., None, None] * np.eye(n))
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite (jitter repair failed)") from None


def inv_pd(A, what="matrix"):
    """Inverse of a symmetric positive definite stack, checked by Cholesky."""
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite") from None
    return sym(np.linalg.inv(A))


def inv(A, what="matrix"):
    try:
        out = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is singular") from None
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"{what} is singular")
    return out


def cov_sqrt(C):
    """Symmetric PSD square root factor S with S @ S.T == C (eigen-based, PSD-safe)."""
    C = sym(np.asarray(C, dtype=float))
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def min_eig(P):
    return np.linalg.eigvalsh(sym(P))[..., 0]


def asym(P):
    return np.max(np.abs(P - tr(P)), axis=(-2, -1))
