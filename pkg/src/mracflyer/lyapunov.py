"""Closed-loop error matrices, Hurwitz certification and the Lyapunov monitor.

The error state ``z = [xi, r_e, r_e_dot]`` (9-vector) evolves as
``z_dot = A z + B (d - f_a)`` with

        [   0        I        0    ]          [   0    ]
    A = [   0        0        I    ],     B = [   0    ]
        [ -Ki/m    -Kp/m    -Kd/m  ]          [ -I/m   ]

For Hurwitz ``A`` and SPD ``Q`` the equation ``A^T P + P A = -Q`` has a unique
SPD solution ``P``; ``V = z~^T P z~ + tr(W~^T W~) / gamma`` is then
non-increasing under the adaptation law with ``V_dot = -z~^T Q z~``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .controller import GainSet
from .errors import CertificationError, DomainError, MracError, ShapeError

HURWITZ_MARGIN = 1e-9
ILL_CONDITIONED = 1e12


@dataclass(frozen=True)
class SystemMatrices:
    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class LyapunovCert:
    """Solution ``P`` of ``A^T P + P A = -Q`` with its audit data."""

    A: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    residual: float
    lambda_min_Q: float
    abscissa: float
    condition: float
    eigenvalues: np.ndarray
    warnings: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "Q": self.Q.tolist(),
            "P": self.P.tolist(),
            "residual": self.residual,
            "relative_residual": self.residual / np.linalg.norm(self.Q),
            "lambda_min_Q": self.lambda_min_Q,
            "lambda_min_P": float(np.linalg.eigvalsh(self.P)[0]),
            "spectral_abscissa": self.abscissa,
            "condition": self.condition,
            "eigenvalues": {
                "real": np.real(self.eigenvalues).tolist(),
                "imag": np.imag(self.eigenvalues).tolist(),
            },
            "warnings": list(self.warnings),
        }


class HurwitzCheck(NamedTuple):
    hurwitz: bool
    abscissa: float
    eigenvalues: np.ndarray


def assemble_AB(gains: GainSet) -> SystemMatrices:
    m = gains.m
    I3 = np.eye(3)
    A = np.zeros((9, 9))
    A[0:3, 3:6] = I3
    A[3:6, 6:9] = I3
    A[6:9, 0:3] = -np.diag(gains.ki) / m
    A[6:9, 3:6] = -np.diag(gains.kp) / m
    A[6:9, 6:9] = -np.diag(gains.kd) / m
    B = np.zeros((9, 3))
    B[6:9, :] = -I3 / m
    return SystemMatrices(A, B)


def is_hurwitz(A, eps: float = HURWITZ_MARGIN) -> HurwitzCheck:
    """Whether every eigenvalue of ``A`` has real part below ``-eps``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"A must be square, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("A must be finite")
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise MracError(f"eigenvalue computation did not converge: {exc}") from exc
    abscissa = float(np.max(eig.real))
    return HurwitzCheck(abscissa < -eps, abscissa, eig)


def _check_spd(Q: np.ndarray, name: str) -> None:
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise DomainError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"{name} must be positive definite") from exc


def lyapunov_operator(A) -> np.ndarray:
    """Matrix ``I (x) A^T + A^T (x) I`` acting on column-major ``vec(P)``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    I = np.eye(n)
    return np.kron(I, A.T) + np.kron(A.T, I)


def solve_lyapunov(A, Q) -> LyapunovCert:
    """Solve ``A^T P + P A = -Q`` by Kronecker vectorization.

    Raises
    ------
    CertificationError
        If ``A`` is not Hurwitz; the offending eigenvalues are attached.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if Q.shape != (n, n):
        raise ShapeError(f"Q has shape {Q.shape}, expected {(n, n)}")
    _check_spd(Q, "Q")
    check = is_hurwitz(A)
    if not check.hurwitz:
        bad = check.eigenvalues[check.eigenvalues.real >= -HURWITZ_MARGIN]
        kind = "zero eigenvalue" if np.any(np.abs(bad) <= np.sqrt(HURWITZ_MARGIN)) else "unstable eigenvalue"
        raise CertificationError(
            f"A is not Hurwitz ({kind}): spectral abscissa {check.abscissa:.6g}; offending eigenvalues {bad.tolist()}",
            eigenvalues=check.eigenvalues,
        )

    K = lyapunov_operator(A)
    notes = []
    cond = float(np.linalg.cond(K))
    if cond > ILL_CONDITIONED:
        msg = f"Lyapunov system is ill-conditioned (condition number {cond:.3g})"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    vecP = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    P = vecP.reshape((n, n), order="F")
    P = 0.5 * (P + P.T)
    residual = float(np.linalg.norm(A.T @ P + P @ A + Q))
    return LyapunovCert(
        A=A,
        Q=Q,
        P=P,
        residual=residual,
        lambda_min_Q=float(np.linalg.eigvalsh(Q)[0]),
        abscissa=check.abscissa,
        condition=cond,
        eigenvalues=check.eigenvalues,
        warnings=tuple(notes),
    )


def lyapunov_value(z_tilde, W_tilde, P, gamma: float) -> float:
    """``V = z~^T P z~ + ||W~||_F^2 / gamma``; pass ``W_tilde=None`` for the z-part only."""
    z = np.asarray(z_tilde, dtype=float)
    v = float(z @ np.asarray(P) @ z)
    if W_tilde is not None:
        Wt = np.asarray(W_tilde, dtype=float)
        v += float(np.sum(Wt * Wt)) / gamma
    return v


def lyapunov_rate(z_tilde, Q) -> float:
    """``V_dot = -z~^T Q z~`` (valid while the adaptation law is active)."""
    z = np.asarray(z_tilde, dtype=float)
    return -float(z @ np.asarray(Q) @ z)


def block_q(weights=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Diagonal Q weighting the (xi, r_e, r_e_dot) blocks; ``(1, 1, 1)`` gives I_9."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape == (9,):
        return np.diag(w)
    if w.shape != (3,):
        raise ShapeError("Q weights need 3 block entries or 9 diagonal entries")
    return np.diag(np.repeat(w, 3))


def certify(gains: GainSet, Q=None) -> tuple[SystemMatrices, LyapunovCert]:
    """Assemble ``(A, B)`` for ``gains`` and solve for ``P`` (``Q`` defaults to I_9)."""
    mats = assemble_AB(gains)
    Q = np.eye(9) if Q is None else np.asarray(Q, dtype=float)
    return mats, solve_lyapunov(mats.A, Q)
