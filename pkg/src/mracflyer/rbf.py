"""Gaussian radial-basis-function features and linear-in-parameters forces.

The disturbance acting on the flyer is modelled as ``d = W^T phi(x)`` where
``x = [r, r_dot]`` is the 6-dimensional translational state and

    phi_i(x) = exp(-||x - c_i||^2 / (2 sigma_i^2)).

The same network evaluates the adaptive compensation ``f_a = W_hat^T phi(x)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

STATE_DIM = 6


@dataclass(frozen=True)
class RbfNetwork:
    """Centers ``(n, 6)`` and per-kernel bandwidths ``(n,)`` of a Gaussian RBF layer."""

    centers: np.ndarray
    bandwidths: np.ndarray

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float, ndmin=2)
        bandwidths = np.array(self.bandwidths, dtype=float).reshape(-1)
        if centers.ndim != 2 or centers.shape[1] != STATE_DIM:
            raise ShapeError(f"centers must have shape (n, {STATE_DIM}), got {centers.shape}")
        n = centers.shape[0]
        if n < 1:
            raise ConfigError("an RBF network needs at least one kernel")
        if bandwidths.shape == (1,) and n > 1:
            bandwidths = np.full(n, bandwidths[0])
        if bandwidths.shape != (n,):
            raise ShapeError(f"expected {n} bandwidths, got {bandwidths.shape[0]}")
        if not np.all(np.isfinite(centers)):
            raise DomainError("RBF centers must be finite")
        if not np.all(np.isfinite(bandwidths)) or np.any(bandwidths <= 0.0):
            raise DomainError("RBF bandwidths must be finite and positive")
        if np.unique(centers, axis=0).shape[0] != n:
            raise ConfigError("RBF centers must be distinct")
        centers.setflags(write=False)
        bandwidths.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "bandwidths", bandwidths)

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "bandwidths": self.bandwidths.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RbfNetwork":
        return cls(np.asarray(data["centers"], dtype=float), np.asarray(data["bandwidths"], dtype=float))


def check_weights(W, n: int) -> np.ndarray:
    """Return ``W`` as a float ``(n, 3)`` array, raising on shape or finiteness problems."""
    W = np.asarray(W, dtype=float)
    if W.shape != (n, 3):
        raise ShapeError(f"weight matrix must have shape ({n}, 3), got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise DomainError("weight matrix has non-finite entries")
    return W


def eval_phi(x, net: RbfNetwork) -> np.ndarray:
    """Evaluate the Gaussian feature vector ``phi(x)`` of length ``net.n``.

    Every component lies in (0, 1] and equals 1 exactly at its center.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (STATE_DIM,):
        raise ShapeError(f"state must be a {STATE_DIM}-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("cannot evaluate RBF features at a non-finite state")
    diff = net.centers - x
    sq = np.einsum("ij,ij->i", diff, diff)
    return np.exp(-sq / (2.0 * net.bandwidths**2))


def eval_force(W, phi) -> np.ndarray:
    """Linear-in-parameters force ``W^T phi`` (N)."""
    W = np.asarray(W, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if W.ndim != 2 or W.shape[1] != 3 or phi.shape != (W.shape[0],):
        raise ShapeError(f"weights {W.shape} and features {phi.shape} do not agree")
    return W.T @ phi


def build_grid_network(state_lo, state_hi, counts, sigma_scale: float) -> RbfNetwork:
    """Place kernels on a regular grid spanning the box ``[state_lo, state_hi]``.

    Axes with a count of 1 get a single center at the box midpoint along that
    axis. All kernels share ``sigma = sigma_scale * max spacing``, where the
    spacing is taken over axes with more than one grid point (or the widest
    box side when every count is 1). Centers are ordered with the first
    state axis varying fastest.
    """
    lo = np.asarray(state_lo, dtype=float)
    hi = np.asarray(state_hi, dtype=float)
    counts = [int(c) for c in counts]
    if lo.shape != (STATE_DIM,) or hi.shape != (STATE_DIM,) or len(counts) != STATE_DIM:
        raise ShapeError("grid bounds and counts must have 6 entries each")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ConfigError("grid bounds must be finite")
    if np.any(hi <= lo):
        raise ConfigError("grid box is empty: state_lo must be < state_hi componentwise")
    if any(c < 1 for c in counts):
        raise ConfigError("grid counts must be positive integers")
    if not sigma_scale > 0.0:
        raise ConfigError("sigma_scale must be positive")

    axes = []
    spacings = []
    for a, b, c in zip(lo, hi, counts):
        if c == 1:
            axes.append(np.array([0.5 * (a + b)]))
        else:
            axes.append(np.linspace(a, b, c))
            spacings.append((b - a) / (c - 1))
    spacing = max(spacings) if spacings else float(np.max(hi - lo))

    # itertools.product varies the last factor fastest, so feed axes reversed.
    centers = np.array([pt[::-1] for pt in itertools.product(*axes[::-1])])
    return RbfNetwork(centers, np.full(len(centers), sigma_scale * spacing))
