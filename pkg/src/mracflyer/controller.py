"""PID + feedforward position law with an RBF adaptive term, and its bookkeeping.

The control force is

    f = Kp r_e + Ki xi + Kd r_e_dot + m r_d_ddot + m g n3 - f_a,

with ``r_e = r_d - r``, ``xi`` the running integral of ``r_e`` and
``f_a = W_hat^T phi(x)``.  The error state ``z = [xi, r_e, r_e_dot]`` then obeys
``z_dot = A z + B (d - f_a)``; a disturbance-free copy ``z_r_dot = A z_r``
serves as reference model and the weights follow

    W_hat_dot = -gamma phi z_tilde^T P^T B,    z_tilde = z_r - z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError
from .plant import N3, SimState, rk4
from .rbf import RbfNetwork, eval_force, eval_phi

DEFAULT_POLES = (-6.0, -8.0, -10.0)


def _positive3(value, name: str, allow_zero: bool = False) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape == (1,):
        arr = np.repeat(arr, 3)
    if arr.shape != (3,):
        raise ConfigError(f"{name} must have 3 diagonal entries")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or (not allow_zero and np.any(arr == 0.0)):
        raise ConfigError(f"{name} must be positive definite (all diagonal entries > 0), got {arr.tolist()}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GainSet:
    """Diagonals of Kp (N/m), Ki (N/(m s)), Kd (N s/m), plus mass, gravity and gamma.

    ``allow_zero`` admits zero diagonal entries so that degenerate gain sets
    reach the Hurwitz certifier (which then rejects them) instead of failing
    validation; negative entries are always refused.
    """

    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray
    m: float
    g: float
    gamma: float
    allow_zero: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            object.__setattr__(self, name, _positive3(getattr(self, name), name, self.allow_zero))
        if not (np.isfinite(self.m) and self.m > 0):
            raise ConfigError("mass must be positive")
        if not (np.isfinite(self.g) and self.g >= 0):
            raise ConfigError("gravity must be non-negative")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError("adaptation gain gamma must be positive")

    @classmethod
    def from_poles(cls, m: float, g: float, gamma: float, poles: Sequence[float] = DEFAULT_POLES) -> "GainSet":
        """Gains placing each axis' three closed-loop poles at ``poles``.

        The per-axis characteristic polynomial is
        ``s^3 + (kd/m) s^2 + (kp/m) s + ki/m``.
        """
        coeffs = np.real(np.poly(poles))
        if coeffs.shape != (4,):
            raise ConfigError("exactly three poles per axis are required")
        kd, kp, ki = coeffs[1:] * m
        return cls(np.full(3, kp), np.full(3, ki), np.full(3, kd), m, g, gamma)


# --- reference trajectories ---------------------------------------------------


@dataclass(frozen=True)
class RefSample:
    r: np.ndarray
    v: np.ndarray
    a: np.ndarray


@dataclass(frozen=True)
class Constant:
    point: np.ndarray
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "point", np.array(self.point, dtype=float).reshape(3))

    def __call__(self, t: float) -> RefSample:
        return RefSample(self.point.copy(), np.zeros(3), np.zeros(3))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "point": self.point.tolist()}


def _quintic(s):
    """Minimum-jerk blend 10s^3 - 15s^4 + 6s^5 and its first two derivatives in s."""
    s = np.clip(s, 0.0, 1.0)
    return (
        s**3 * (10.0 - 15.0 * s + 6.0 * s**2),
        30.0 * s**2 * (1.0 - s) ** 2,
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
    )


@dataclass(frozen=True)
class SmoothStep:
    """Quintic blend from ``start`` to ``end`` over ``[t0, t0 + duration]``."""

    start: np.ndarray
    end: np.ndarray
    t0: float
    duration: float
    kind = "smoothstep"

    def __post_init__(self):
        object.__setattr__(self, "start", np.array(self.start, dtype=float).reshape(3))
        object.__setattr__(self, "end", np.array(self.end, dtype=float).reshape(3))
        if not self.duration > 0:
            raise ConfigError("smooth-step duration must be positive")

    def __call__(self, t: float) -> RefSample:
        T = self.duration
        if t <= self.t0:
            return RefSample(self.start.copy(), np.zeros(3), np.zeros(3))
        if t >= self.t0 + T:
            return RefSample(self.end.copy(), np.zeros(3), np.zeros(3))
        h, dh, ddh = _quintic((t - self.t0) / T)
        delta = self.end - self.start
        return RefSample(self.start + h * delta, dh / T * delta, ddh / T**2 * delta)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "start": self.start.tolist(),
            "end": self.end.tolist(),
            "t0": self.t0,
            "duration": self.duration,
        }


@dataclass(frozen=True)
class Waypoints:
    """Hold each waypoint, moving between consecutive ones with quintic blends.

    ``times[k]`` is when the blend toward ``points[k]`` finishes; each blend
    lasts ``blend`` seconds.
    """

    points: np.ndarray
    times: np.ndarray
    blend: float
    kind = "waypoints"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        times = np.array(self.times, dtype=float).reshape(-1)
        if pts.shape[1] != 3 or pts.shape[0] != times.shape[0] or pts.shape[0] < 1:
            raise ConfigError("waypoints need one time per 3-D point")
        if not self.blend > 0:
            raise ConfigError("blend duration must be positive")
        if np.any(np.diff(times) < self.blend):
            raise ConfigError("waypoint times must be increasing and at least one blend apart")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "times", times)

    def __call__(self, t: float) -> RefSample:
        k = int(np.searchsorted(self.times, t, side="left"))
        if k == 0:
            return RefSample(self.points[0].copy(), np.zeros(3), np.zeros(3))
        if k >= len(self.times):
            return RefSample(self.points[-1].copy(), np.zeros(3), np.zeros(3))
        seg = SmoothStep(self.points[k - 1], self.points[k], self.times[k] - self.blend, self.blend)
        return seg(t)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "points": self.points.tolist(),
            "times": self.times.tolist(),
            "blend": self.blend,
        }


ReferenceSignal = Union[Constant, SmoothStep, Waypoints]


def reference_from_dict(data: dict) -> ReferenceSignal:
    kind = data.get("kind")
    if kind == "constant":
        return Constant(data["point"])
    if kind == "smoothstep":
        return SmoothStep(data["start"], data["end"], float(data["t0"]), float(data["duration"]))
    if kind == "waypoints":
        return Waypoints(data["points"], data["times"], float(data["blend"]))
    raise ConfigError(f"unknown reference kind {kind!r}")


# --- error state ----------------------------------------------------------------


@dataclass(frozen=True)
class ErrorState:
    """Integral ``xi``, position error ``xi_dot = r_e`` and velocity error ``xi_ddot``,
    together with the reference-model state ``z_r``."""

    xi: np.ndarray
    xi_dot: np.ndarray
    xi_ddot: np.ndarray
    z_r: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.xi, self.xi_dot, self.xi_ddot])

    @property
    def z_tilde(self) -> np.ndarray:
        return self.z_r - self.z

    @classmethod
    def from_tracking(cls, xi, ref: RefSample, s: SimState, z_r=None) -> "ErrorState":
        xi = np.asarray(xi, dtype=float)
        r_e, v_e = error_derivatives(ref, s)
        if z_r is None:
            z_r = np.concatenate([xi, r_e, v_e])
        return cls(xi, r_e, v_e, np.asarray(z_r, dtype=float))


def error_derivatives(ref: RefSample, s: SimState) -> tuple[np.ndarray, np.ndarray]:
    """``(xi_dot, xi_ddot) = (r_d - r, r_d_dot - v)``."""
    return ref.r - s.r, ref.v - s.v


def adaptive_force(W_hat, net: RbfNetwork, x) -> np.ndarray:
    W_hat = np.asarray(W_hat, dtype=float)
    if W_hat.shape != (net.n, 3):
        raise ShapeError(f"W_hat has shape {W_hat.shape}, network expects ({net.n}, 3)")
    return eval_force(W_hat, eval_phi(x, net))


def control_force(ref: RefSample, s: SimState, es: ErrorState, W_hat, net: RbfNetwork, gains: GainSet) -> np.ndarray:
    """Total commanded force (N); see the module docstring for the law."""
    f_a = adaptive_force(W_hat, net, s.x)
    return pid_force(ref, es.xi, es.xi_dot, es.xi_ddot, gains) - f_a


def pid_force(ref: RefSample, xi, r_e, v_e, gains: GainSet) -> np.ndarray:
    return (
        gains.kp * r_e
        + gains.ki * xi
        + gains.kd * v_e
        + gains.m * ref.a
        + gains.m * gains.g * N3
    )


def reference_model_step(z_r, A, dt: float) -> np.ndarray:
    """Advance ``z_r_dot = A z_r`` by one RK4 step."""
    A = np.asarray(A, dtype=float)
    return rk4(lambda t, z: A @ z, 0.0, np.asarray(z_r, dtype=float), dt)


def adaptation_rate(phi, z_tilde, P, B, gamma: float) -> np.ndarray:
    """``W_hat_dot = -gamma phi z_tilde^T P^T B`` as an ``(n, 3)`` array."""
    row = np.asarray(z_tilde) @ np.asarray(P).T @ np.asarray(B)
    return -gamma * np.outer(phi, row)


def adapt_step(W_hat, phi, z_tilde, P, B, gamma: float, dt: float) -> np.ndarray:
    """Explicit-Euler update of the adaptive weights."""
    W_hat = np.asarray(W_hat, dtype=float)
    phi = np.asarray(phi, dtype=float)
    z_tilde = np.asarray(z_tilde, dtype=float)
    P = np.asarray(P, dtype=float)
    B = np.asarray(B, dtype=float)
    if W_hat.shape != (phi.shape[0], 3) or z_tilde.shape != (9,) or P.shape != (9, 9) or B.shape != (9, 3):
        raise ShapeError("adapt_step operand shapes do not agree")
    if not np.any(z_tilde) or gamma == 0.0:
        return W_hat.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        out = W_hat + dt * adaptation_rate(phi, z_tilde, P, B, gamma)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("adaptive weights became non-finite")
    return out


__all__ = [
    "Constant",
    "DEFAULT_POLES",
    "ErrorState",
    "GainSet",
    "RefSample",
    "ReferenceSignal",
    "SmoothStep",
    "Waypoints",
    "adapt_step",
    "adaptation_rate",
    "adaptive_force",
    "control_force",
    "error_derivatives",
    "pid_force",
    "reference_from_dict",
    "reference_model_step",
]
