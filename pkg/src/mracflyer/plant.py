"""Translational rigid-body dynamics of the flyer and the disturbances acting on it.

Newton's law for the center of mass in the inertial frame,

    m r_ddot = f - m g n3 + d(t),

with the thrust ``f`` applied directly as a 3-vector (the attitude loop is
assumed fast enough that ``f b3 ~ f``).  Integration is classical fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DivergenceError, DomainError
from .rbf import RbfNetwork, check_weights, eval_force, eval_phi

N3 = np.array([0.0, 0.0, 1.0])
BEE_MASS = 95e-6  # kg
GRAVITY = 9.81  # m/s^2


def _vec3(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise DomainError(f"{name} must be a 3-vector, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SimState:
    """Position ``r`` (m), velocity ``v`` (m/s) and time ``t`` (s) of the CoM."""

    r: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "r", _vec3(self.r, "position"))
        object.__setattr__(self, "v", _vec3(self.v, "velocity"))
        if not np.isfinite(self.t):
            raise DomainError("time must be finite")
        object.__setattr__(self, "t", float(self.t))

    @property
    def x(self) -> np.ndarray:
        """The stacked RBF input ``[r, v]``."""
        return np.concatenate([self.r, self.v])


@dataclass(frozen=True)
class PlantParams:
    m: float = BEE_MASS
    g: float = GRAVITY
    force_limit: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m > 0):
            raise ConfigError("mass must be positive")
        if not (np.isfinite(self.g) and self.g >= 0):
            raise ConfigError("gravity must be non-negative")
        if self.force_limit is not None and not self.force_limit > 0:
            raise ConfigError("force_limit must be positive when set")

    @property
    def hover_force(self) -> float:
        return self.m * self.g


# --- disturbances -----------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    kind = "zero"

    def __call__(self, x, t) -> np.ndarray:
        return np.zeros(3)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class ConstantBias:
    bias: np.ndarray
    kind = "bias"

    def __post_init__(self):
        object.__setattr__(self, "bias", _vec3(self.bias, "bias"))

    def __call__(self, x, t) -> np.ndarray:
        return self.bias.copy()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bias": self.bias.tolist()}


@dataclass(frozen=True)
class Sinusoid:
    """Per-axis ``amplitude * sin(2 pi f t + phase)``.

    ``phase`` may be a scalar or a 3-vector. With ``random_phase`` set, each
    trial draws a fresh per-axis phase offset from its seeded generator.
    """

    amplitude: np.ndarray
    frequency: float
    phase: Union[float, np.ndarray] = 0.0
    random_phase: bool = False
    kind = "sinusoid"

    def __post_init__(self):
        object.__setattr__(self, "amplitude", _vec3(self.amplitude, "amplitude"))
        phase = np.broadcast_to(np.asarray(self.phase, dtype=float), (3,)).copy()
        object.__setattr__(self, "phase", _vec3(phase, "phase"))
        if not (np.isfinite(self.frequency) and self.frequency >= 0):
            raise DomainError("sinusoid frequency must be finite and non-negative")
        object.__setattr__(self, "frequency", float(self.frequency))

    def __call__(self, x, t) -> np.ndarray:
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t + self.phase)

    def realize(self, rng: np.random.Generator) -> "Sinusoid":
        if not self.random_phase:
            return self
        return replace(self, phase=self.phase + rng.uniform(0.0, 2.0 * np.pi, 3), random_phase=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude.tolist(),
            "frequency": self.frequency,
            "phase": self.phase.tolist(),
            "random_phase": self.random_phase,
        }


@dataclass(frozen=True)
class TetherSpring:
    """Linear spring pulling the CoM toward ``anchor`` (power-wire tension)."""

    anchor: np.ndarray
    stiffness: float
    kind = "tether"

    def __post_init__(self):
        object.__setattr__(self, "anchor", _vec3(self.anchor, "anchor"))
        if not (np.isfinite(self.stiffness) and self.stiffness >= 0):
            raise DomainError("tether stiffness must be finite and non-negative")
        object.__setattr__(self, "stiffness", float(self.stiffness))

    def __call__(self, x, t) -> np.ndarray:
        return self.stiffness * (self.anchor - np.asarray(x)[:3])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "anchor": self.anchor.tolist(), "stiffness": self.stiffness}


@dataclass(frozen=True)
class RbfTruth:
    """Disturbance lying exactly in the span of an RBF network: ``W^T phi(x)``."""

    net: RbfNetwork
    W: np.ndarray
    kind = "rbf"

    def __post_init__(self):
        W = check_weights(self.W, self.net.n).copy()
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    def __call__(self, x, t) -> np.ndarray:
        return eval_force(self.W, eval_phi(x, self.net))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "net": self.net.to_dict(), "W": self.W.tolist()}


@dataclass(frozen=True)
class Composite:
    """Sum of several disturbance sources."""

    parts: tuple = field(default_factory=tuple)
    kind = "composite"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def __call__(self, x, t) -> np.ndarray:
        total = np.zeros(3)
        for part in self.parts:
            total += part(x, t)
        return total

    def realize(self, rng: np.random.Generator) -> "Composite":
        return Composite(tuple(realize(p, rng) for p in self.parts))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parts": [p.to_dict() for p in self.parts]}


DisturbanceSource = Union[Zero, ConstantBias, Sinusoid, TetherSpring, RbfTruth, Composite]


def realize(src, rng: np.random.Generator):
    """Draw the per-trial random elements of a disturbance (identity for deterministic ones)."""
    fn = getattr(src, "realize", None)
    return fn(rng) if fn is not None else src


def true_weights(src) -> Optional[np.ndarray]:
    """The exact RBF weights of an in-span disturbance, or None when W is undefined."""
    return src.W if isinstance(src, RbfTruth) else None


def disturbance_from_dict(data: dict) -> DisturbanceSource:
    kind = data.get("kind")
    if kind == "zero":
        return Zero()
    if kind == "bias":
        return ConstantBias(data["bias"])
    if kind == "sinusoid":
        return Sinusoid(
            data["amplitude"],
            data["frequency"],
            data.get("phase", 0.0),
            bool(data.get("random_phase", False)),
        )
    if kind == "tether":
        return TetherSpring(data["anchor"], data["stiffness"])
    if kind == "rbf":
        return RbfTruth(RbfNetwork.from_dict(data["net"]), np.asarray(data["W"], dtype=float))
    if kind == "composite":
        return Composite(tuple(disturbance_from_dict(p) for p in data["parts"]))
    raise ConfigError(f"unknown disturbance kind {kind!r}")


def disturbance_eval(src: DisturbanceSource, x, t: float) -> np.ndarray:
    """Disturbance force (N) at state ``x = [r, v]`` and time ``t``."""
    x = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(x)) and np.isfinite(t)):
        raise DomainError("disturbance evaluated at a non-finite state or time")
    return np.asarray(src(x, t), dtype=float)


# --- dynamics ---------------------------------------------------------------


def clamp_force(f, limit: Optional[float]) -> np.ndarray:
    """Scale ``f`` down to magnitude ``limit`` if it exceeds it."""
    f = np.asarray(f, dtype=float)
    if limit is None:
        return f
    norm = np.linalg.norm(f)
    return f * (limit / norm) if norm > limit else f


def acceleration(f, d, p: PlantParams) -> np.ndarray:
    return (np.asarray(f) + np.asarray(d)) / p.m - p.g * N3


def dynamics_deriv(s: SimState, f, d, p: PlantParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(r_dot, v_dot)``: the velocity and ``(f - m g n3 + d) / m``."""
    f = np.asarray(f, dtype=float)
    d = np.asarray(d, dtype=float)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(d))):
        raise DomainError("non-finite force or disturbance")
    return s.v.copy(), acceleration(f, d, p)


def rk4(fun: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``y' = fun(t, y)``."""
    k1 = fun(t, y)
    k2 = fun(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = fun(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = fun(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(
    s: SimState,
    dt: float,
    force_fn: Callable[[SimState, float], Sequence[float]],
    dist: DisturbanceSource,
    p: PlantParams,
) -> SimState:
    """Advance the plant by ``dt`` with RK4, re-evaluating ``force_fn`` at every stage."""
    if not dt > 0:
        raise DomainError("time step must be positive")

    def deriv(t, y):
        r, v = y[:3], y[3:]
        f = clamp_force(force_fn(SimState(r, v, t), t), p.force_limit)
        return np.concatenate([v, acceleration(f, dist(y, t), p)])

    try:
        y = rk4(deriv, s.t, s.x, dt)
    except DomainError as exc:
        raise DivergenceError(f"plant state became non-finite: {exc}", s.t) from exc
    if not np.all(np.isfinite(y)):
        raise DivergenceError("plant state became non-finite", s.t)
    return SimState(y[:3], y[3:], s.t + dt)
