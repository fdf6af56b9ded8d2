"""Synchronized stepping of plant, integral state, reference model and adaptive weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .controller import Constant, GainSet, ReferenceSignal, adapt_step, reference_model_step
from .errors import ConfigError, DivergenceError, ShapeError
from .lyapunov import LyapunovCert, SystemMatrices, certify, lyapunov_rate, lyapunov_value
from .plant import N3, DisturbanceSource, PlantParams, SimState, clamp_force, rk4, true_weights
from .rbf import RbfNetwork

SCHEMES = ("rk4", "euler-zoh")
DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class MracDesign:
    """Everything the controller needs: gains, RBF layer, certificate and switches.

    ``adaptive=False`` gives the baseline controller (``f_a`` forced to zero).
    ``scheme`` selects the discretization: ``"rk4"`` integrates plant, integral,
    reference model and weights as one coupled ODE with the control law
    re-evaluated at every stage; ``"euler-zoh"`` holds the control force over
    the step and updates the weights by explicit Euler.
    """

    gains: GainSet
    net: RbfNetwork
    mats: SystemMatrices
    cert: LyapunovCert
    adaptive: bool = True
    scheme: str = "rk4"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @classmethod
    def build(cls, gains: GainSet, net: RbfNetwork, Q=None, adaptive=True, scheme="rk4") -> "MracDesign":
        mats, cert = certify(gains, Q)
        return cls(gains, net, mats, cert, adaptive, scheme)

    def baseline(self) -> "MracDesign":
        return MracDesign(self.gains, self.net, self.mats, self.cert, False, self.scheme)


@dataclass(frozen=True)
class LoopBundle:
    """Flat closed-loop state ``[r, v, xi, z_r, vec(W_hat)]`` at time ``t``."""

    t: float
    y: np.ndarray

    @property
    def r(self):
        return self.y[0:3]

    @property
    def v(self):
        return self.y[3:6]

    @property
    def xi(self):
        return self.y[6:9]

    @property
    def z_r(self):
        return self.y[9:18]

    @property
    def W_hat(self):
        return self.y[18:].reshape(-1, 3)

    @property
    def plant(self) -> SimState:
        return SimState(self.r, self.v, self.t)


@dataclass(frozen=True)
class Sample:
    """Telemetry evaluated at one bundle."""

    t: float
    r: np.ndarray
    r_d: np.ndarray
    r_e: np.ndarray
    f: np.ndarray
    f_a: np.ndarray
    d: np.ndarray
    z_tilde: np.ndarray
    V: float
    Vdot: float
    W_fro: float
    Wdot_fro: float


class ClosedLoop:
    """The MRAC closed loop for one plant, reference and disturbance."""

    def __init__(
        self,
        design: MracDesign,
        plant: PlantParams,
        reference: ReferenceSignal,
        disturbance: DisturbanceSource,
    ):
        if abs(design.gains.m - plant.m) > 1e-15 * plant.m or design.gains.g != plant.g:
            raise ConfigError("controller mass/gravity must match the plant")
        self.design = design
        self.plant = plant
        self.reference = reference
        self.disturbance = disturbance
        self.n = design.net.n
        self._A = design.mats.A
        self._PB = design.cert.P.T @ design.mats.B  # (9, 3)
        self._centers = design.net.centers
        self._inv2s2 = 1.0 / (2.0 * design.net.bandwidths**2)
        gains = design.gains
        self._kp, self._ki, self._kd = gains.kp, gains.ki, gains.kd
        self._m = plant.m
        self._hover = gains.m * gains.g * N3
        self._gvec = plant.g * N3
        self._force_limit = plant.force_limit
        self._neg_gamma_PB_T = -gains.gamma * self._PB.T  # (3, 9)
        self._const_ref = reference(0.0) if isinstance(reference, Constant) else None
        W = true_weights(disturbance)
        if W is not None and not (
            np.array_equal(disturbance.net.centers, design.net.centers)
            and np.array_equal(disturbance.net.bandwidths, design.net.bandwidths)
        ):
            W = None  # truth lives in a different network: W~ undefined
        self.W_true = W

    # -- setup -----------------------------------------------------------------

    def initial_bundle(self, initial: SimState, W_hat0=None) -> LoopBundle:
        """Bundle with ``xi(0) = 0``, ``z_r(0) = z(0)`` and ``W_hat(0)`` (zero by default)."""
        ref = self.reference(initial.t)
        xi = np.zeros(3)
        z0 = np.concatenate([xi, ref.r - initial.r, ref.v - initial.v])
        if W_hat0 is None:
            W_hat0 = np.zeros((self.n, 3))
        W_hat0 = np.asarray(W_hat0, dtype=float)
        if W_hat0.shape != (self.n, 3):
            raise ShapeError(f"W_hat(0) must have shape ({self.n}, 3)")
        y = np.concatenate([initial.r, initial.v, xi, z0, W_hat0.reshape(-1)])
        return LoopBundle(initial.t, y)

    # -- vector field ----------------------------------------------------------

    def _phi(self, x):
        diff = self._centers - x
        return np.exp(-np.einsum("ij,ij->i", diff, diff) * self._inv2s2)

    def _ref(self, t):
        return self._const_ref if self._const_ref is not None else self.reference(t)

    def _terms(self, t, y, noise):
        """Common pieces of the vector field and telemetry at ``(t, y)``."""
        ref = self._ref(t)
        x_meas = y[0:6] if noise is None else np.concatenate([y[0:3] + noise, y[3:6]])
        xi = y[6:9]
        r_e = ref.r - x_meas[0:3]
        v_e = ref.v - x_meas[3:6]
        if self.design.adaptive:
            phi = self._phi(x_meas)
            f_a = phi @ y[18:].reshape(-1, 3)
            f = self._kp * r_e + self._ki * xi + self._kd * v_e + self._m * ref.a + self._hover - f_a
        else:
            phi = None
            f_a = np.zeros(3)
            f = self._kp * r_e + self._ki * xi + self._kd * v_e + self._m * ref.a + self._hover
        if self._force_limit is not None:
            f = clamp_force(f, self._force_limit)
        z_tilde = y[9:18].copy()
        z_tilde[0:3] -= xi
        z_tilde[3:6] -= r_e
        z_tilde[6:9] -= v_e
        return ref, r_e, phi, f_a, f, z_tilde

    def deriv(self, t, y, noise=None):
        _, r_e, phi, _, f, z_tilde = self._terms(t, y, noise)
        dy = np.empty_like(y)
        dy[0:3] = y[3:6]
        dy[3:6] = (f + self.disturbance(y[0:6], t)) / self._m - self._gvec
        dy[6:9] = r_e
        dy[9:18] = self._A @ y[9:18]
        if phi is not None:
            dy[18:] = (phi[:, None] * (self._neg_gamma_PB_T @ z_tilde)[None, :]).reshape(-1)
        else:
            dy[18:] = 0.0
        return dy

    # -- stepping ----------------------------------------------------------------

    def step(self, b: LoopBundle, dt: float, noise=None) -> LoopBundle:
        if self.design.scheme == "rk4":
            y = rk4(lambda t, yy: self.deriv(t, yy, noise), b.t, b.y, dt)
        else:
            y = self._step_zoh(b, dt, noise)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y[:18])) > DIVERGENCE_BOUND:
            raise DivergenceError("closed-loop state diverged", b.t)
        return LoopBundle(b.t + dt, y)

    def _step_zoh(self, b: LoopBundle, dt: float, noise) -> np.ndarray:
        _, _, phi, _, f, z_tilde = self._terms(b.t, b.y, noise)
        m, gvec = self.plant.m, self.plant.g * N3

        def plant_xi(t, s):
            ref = self.reference(t)
            d = self.disturbance(s[0:6], t)
            r_meas = s[0:3] if noise is None else s[0:3] + noise
            return np.concatenate([s[3:6], (f + d) / m - gvec, ref.r - r_meas])

        s = rk4(plant_xi, b.t, b.y[0:9], dt)
        z_r = reference_model_step(b.z_r, self._A, dt)
        W_hat = b.W_hat
        if self.design.adaptive:
            W_hat = adapt_step(W_hat, phi, z_tilde, self.design.cert.P, self.design.mats.B, self.design.gains.gamma, dt)
        return np.concatenate([s, z_r, W_hat.reshape(-1)])

    # -- telemetry ---------------------------------------------------------------

    def sample(self, b: LoopBundle, noise=None) -> Sample:
        ref, r_e, phi, f_a, f, z_tilde = self._terms(b.t, b.y, noise)
        W_hat = b.W_hat
        W_tilde = None if self.W_true is None else W_hat - self.W_true
        cert = self.design.cert
        if self.design.adaptive:
            Wdot = -self.design.gains.gamma * np.outer(phi, z_tilde @ self._PB)
            Wdot_fro = float(np.linalg.norm(Wdot))
        else:
            Wdot_fro = 0.0
        return Sample(
            t=b.t,
            r=b.r.copy(),
            r_d=ref.r,
            r_e=r_e,
            f=f,
            f_a=f_a,
            d=self.disturbance(b.y[0:6], b.t),
            z_tilde=z_tilde,
            V=lyapunov_value(z_tilde, W_tilde, cert.P, self.design.gains.gamma),
            Vdot=lyapunov_rate(z_tilde, cert.Q),
            W_fro=float(np.linalg.norm(W_hat)),
            Wdot_fro=Wdot_fro,
        )


def mrac_closed_loop_step(loop: ClosedLoop, bundle: LoopBundle, dt: float, noise: Optional[np.ndarray] = None) -> LoopBundle:
    """Advance the whole closed loop (plant, xi, z_r, W_hat) by one step of ``dt``."""
    return loop.step(bundle, dt, None if noise is None else np.asarray(noise, dtype=float))
