"""Target motion and sensor observation models.

State layout is ``[x, y, z, vx, vy, vz, omega]`` and measurements are
``[range, pitch, azimuth]``. All model callables are vectorised over leading
axes, so cubature/sigma point clouds of shape ``(..., npts, 7)`` go through in
one call.
"""
from dataclasses import dataclass, field

import numpy as np

from ._linalg import wrap_angle

N_STATE = 7
N_MEAS = 3
POS = slice(0, 3)
VEL = slice(3, 6)
STATE_NAMES = ("x", "y", "z", "vx", "vy", "vz", "omega")
MEAS_NAMES = ("r", "phi", "rho")

SMALL_TURN = 1e-8


class GeometryError(ValueError):
    """Target and sensor positions make the observation undefined."""


@dataclass(frozen=True)
class CoordinatedTurn:
    """Horizontal coordinated turn at rate omega with a constant-velocity vertical channel."""

    dt: float
    small_turn: float = SMALL_TURN

    def _coeffs(self, w):
        T = self.dt
        wt = w * T
        small = np.abs(wt) < self.small_turn
        ws = np.where(small, 1.0, w)
        wts = np.where(small, 1.0, wt)
        # a = sin(wT)/w, b = (1 - cos(wT))/w; 1 - cos written as 2 sin^2 to avoid cancellation
        a = np.where(small, T * (1.0 - wt**2 / 6.0), np.sin(wts) / ws)
        b = np.where(small, w * T**2 / 2.0, 2.0 * np.sin(wts / 2.0) ** 2 / ws)
        # omega derivatives: closed form cancels badly for small wT, so use the series there
        series = np.abs(wt) < 1e-2
        wser = np.where(series, w, 0.0)
        u = (wser * T) ** 2
        da_s = -wser * T**3 * (1.0 / 3.0 - u / 30.0 + u**2 / 840.0)
        db_s = T**2 * (0.5 - u / 8.0 + u**2 / 144.0 - u**3 / 5760.0)
        wd = np.where(series, 1.0, w)
        wtd = wd * T
        da_c = (T * np.cos(wtd) - np.sin(wtd) / wd) / wd
        db_c = (T * np.sin(wtd) - 2.0 * np.sin(wtd / 2.0) ** 2 / wd) / wd
        da = np.where(series, da_s, da_c)
        db = np.where(series, db_s, db_c)
        return a, b, da, db, np.cos(wt), np.sin(wt)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        w = x[..., 6]
        a, b, _, _, c, s = self._coeffs(w)
        vx, vy, vz = x[..., 3], x[..., 4], x[..., 5]
        out = np.empty_like(x)
        out[..., 0] = x[..., 0] + a * vx - b * vy
        out[..., 1] = x[..., 1] + b * vx + a * vy
        out[..., 2] = x[..., 2] + self.dt * vz
        out[..., 3] = c * vx - s * vy
        out[..., 4] = s * vx + c * vy
        out[..., 5] = vz
        out[..., 6] = w
        return out

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        w = x[..., 6]
        T = self.dt
        a, b, da, db, c, s = self._coeffs(w)
        vx, vy = x[..., 3], x[..., 4]
        F = np.zeros(x.shape[:-1] + (N_STATE, N_STATE))
        idx = np.arange(N_STATE)
        F[..., idx, idx] = 1.0
        F[..., 0, 3] = a
        F[..., 0, 4] = -b
        F[..., 1, 3] = b
        F[..., 1, 4] = a
        F[..., 2, 5] = T
        F[..., 3, 3] = c
        F[..., 3, 4] = -s
        F[..., 4, 3] = s
        F[..., 4, 4] = c
        F[..., 0, 6] = da * vx - db * vy
        F[..., 1, 6] = db * vx + da * vy
        F[..., 3, 6] = -T * (s * vx + c * vy)
        F[..., 4, 6] = T * (c * vx - s * vy)
        return F


@dataclass(frozen=True)
class LinearDynamics:
    """x' = F x. Used as an exact-Kalman oracle surrogate."""

    F: np.ndarray

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.F.T

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.F, x.shape[:-1] + self.F.shape).copy()


def constant_velocity_matrix(dt):
    """Transition of the turn model at omega = 0 (exactly linear)."""
    F = np.eye(N_STATE)
    F[0, 3] = F[1, 4] = F[2, 5] = dt
    return F


def _relative(x, pose):
    x = np.asarray(x, dtype=float)
    d = x[..., 0:3] - np.asarray(pose, dtype=float)
    return d[..., 0], d[..., 1], d[..., 2]


@dataclass(frozen=True)
class RangeBearing:
    """Range, pitch and azimuth of the target seen from a sensor position.

    When the horizontal distance is zero the pitch is +-pi/2 and the azimuth 0.
    """

    angular: tuple = (1, 2)

    def __call__(self, x, pose):
        dx, dy, dz = _relative(x, pose)
        horiz = np.hypot(dx, dy)
        r = np.sqrt(horiz**2 + dz**2)
        phi = np.arctan2(dz, horiz)
        # wrap maps an exact -pi (dy = -0.0 or a denormal) onto pi
        rho = np.where(horiz > 0.0, wrap_angle(np.arctan2(dy, dx)), 0.0)
        return np.stack([r, phi, rho], axis=-1)

    def jacobian(self, x, pose):
        dx, dy, dz = _relative(x, pose)
        h2 = dx**2 + dy**2
        r2 = h2 + dz**2
        if np.any(r2 == 0.0):
            raise GeometryError("target coincides with sensor: range is zero")
        if np.any(h2 == 0.0):
            raise GeometryError("target directly above/below sensor: azimuth undefined")
        r = np.sqrt(r2)
        hz = np.sqrt(h2)
        G = np.zeros(dx.shape + (N_MEAS, N_STATE))
        G[..., 0, 0] = dx / r
        G[..., 0, 1] = dy / r
        G[..., 0, 2] = dz / r
        G[..., 1, 0] = -dz * dx / (r2 * hz)
        G[..., 1, 1] = -dz * dy / (r2 * hz)
        G[..., 1, 2] = hz / r2
        G[..., 2, 0] = -dy / h2
        G[..., 2, 1] = dx / h2
        return G


@dataclass(frozen=True)
class LinearMeasurement:
    """z = H x, pose ignored."""

    H: np.ndarray
    angular: tuple = field(default=())

    def __call__(self, x, pose=None):
        return np.asarray(x, dtype=float) @ self.H.T

    def jacobian(self, x, pose=None):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.H, x.shape[:-1] + self.H.shape).copy()


def wrap_measurement(z, angular=(1, 2)):
    z = np.array(z, dtype=float, copy=True)
    if angular:
        z[..., list(angular)] = wrap_angle(z[..., list(angular)])
    return z
