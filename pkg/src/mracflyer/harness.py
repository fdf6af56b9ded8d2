"""Hovering-trial harness: paired adaptive vs. baseline batches and their statistics.

A trial integrates the closed loop for a fixed duration and reports per-axis
RMS tracking error over every sample (no warm-up cut).  Batches aggregate
per-axis mean and sample standard deviation (ESD, N - 1 denominator) across
trials; the comparison reports ``100 (baseline - adaptive) / baseline``.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .closedloop import ClosedLoop, LoopBundle, MracDesign
from .controller import Constant, ReferenceSignal
from .errors import ConfigError, DivergenceError, MracError
from .plant import DisturbanceSource, PlantParams, SimState, clamp_force, realize

log = logging.getLogger(__name__)

CONTROLLERS = ("adaptive", "baseline")
AXES = ("n1", "n2", "n3")
CSV_COLUMNS = (
    ["t"]
    + [f"r{i}" for i in (1, 2, 3)]
    + [f"r_d{i}" for i in (1, 2, 3)]
    + [f"r_e{i}" for i in (1, 2, 3)]
    + [f"f{i}" for i in (1, 2, 3)]
    + [f"f_a{i}" for i in (1, 2, 3)]
    + ["V", "Vdot", "Wfro"]
)


@dataclass(frozen=True)
class TrialSpec:
    controller: str
    duration: float
    dt: float
    seed: int
    disturbance: DisturbanceSource
    reference: ReferenceSignal
    initial: SimState
    design: MracDesign
    plant: PlantParams
    noise_std: float = 0.0
    csv_path: Optional[str] = None

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if not (self.duration > 0 and self.dt > 0):
            raise ConfigError("duration and dt must be positive")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"duration {self.duration} is not an integer multiple of dt {self.dt}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class Telemetry:
    """Per-sample signals of one trial (sample k at ``t = k dt``)."""

    t: np.ndarray
    r: np.ndarray
    r_d: np.ndarray
    r_e: np.ndarray
    f: np.ndarray
    f_a: np.ndarray
    z_tilde: np.ndarray
    V: np.ndarray
    Vdot: np.ndarray
    W_fro: np.ndarray
    Wdot_fro: np.ndarray
    V_complete: bool

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.r, self.r_d, self.r_e, self.f, self.f_a, self.V, self.Vdot, self.W_fro])


@dataclass
class TrialResult:
    controller: str
    seed: int
    rms: np.ndarray
    peak_error: np.ndarray
    final_V: float
    Wdot_terminal: float
    csv_path: Optional[str] = None
    failed: bool = False
    failure_time: Optional[float] = None
    failure_message: Optional[str] = None
    telemetry: Optional[Telemetry] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "controller": self.controller,
            "seed": self.seed,
            "failed": self.failed,
            "failure_time": self.failure_time,
            "failure_message": self.failure_message,
            "rms": None if self.failed else self.rms.tolist(),
            "peak_error": None if self.failed else self.peak_error.tolist(),
            "final_V": None if self.failed else self.final_V,
            "Wdot_terminal": None if self.failed else self.Wdot_terminal,
            "csv": None if self.csv_path is None else os.path.basename(self.csv_path),
        }


@dataclass
class BatchSummary:
    controller: str
    n_trials: int
    n_failed: int
    mean: np.ndarray
    esd: Optional[np.ndarray]
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "controller": self.controller,
            "n_trials": self.n_trials,
            "n_failed": self.n_failed,
            "rms_mean": self.mean.tolist(),
            "rms_esd": None if self.esd is None else self.esd.tolist(),
            "failures": self.failures,
        }


@dataclass
class Comparison:
    """Per-axis percent reduction of mean RMS; ``None`` where the baseline mean is zero."""

    reduction: list

    def to_dict(self) -> dict:
        return {
            "reduction_percent": {
                axis: ("not-applicable" if r is None else r) for axis, r in zip(AXES, self.reduction)
            }
        }


# --- metrics ----------------------------------------------------------------


def compute_rms(samples) -> np.ndarray:
    """Per-axis root-mean-square of an ``(N, 3)`` error record."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("RMS needs at least one sample of a (N, k) record")
    return np.sqrt(np.mean(samples**2, axis=0))


def aggregate(results: Sequence[TrialResult]) -> BatchSummary:
    """Mean and ESD of per-axis RMS over the unfailed trials of one arm."""
    if not results:
        raise MracError("cannot aggregate an empty batch")
    controllers = {r.controller for r in results}
    if len(controllers) != 1:
        raise MracError(f"batch mixes controllers {sorted(controllers)}")
    ok = [r for r in results if not r.failed]
    failures = [{"seed": r.seed, "failure_time": r.failure_time, "message": r.failure_message} for r in results if r.failed]
    if not ok:
        raise MracError(f"every {results[0].controller} trial failed")
    rms = np.array([r.rms for r in ok])
    esd = np.std(rms, axis=0, ddof=1) if len(ok) >= 2 else None
    return BatchSummary(results[0].controller, len(results), len(failures), rms.mean(axis=0), esd, failures)


def paired_comparison(adaptive: BatchSummary, baseline: BatchSummary) -> Comparison:
    out = []
    for a, b in zip(adaptive.mean, baseline.mean):
        out.append(None if b == 0.0 else float(100.0 * (b - a) / b))
    return Comparison(out)


# --- running ------------------------------------------------------------------


def _telemetry(loop: ClosedLoop, ts: np.ndarray, Y: np.ndarray, noise: Optional[np.ndarray]) -> Telemetry:
    """Evaluate every logged signal for all samples at once."""
    design = loop.design
    gains = design.gains
    n = design.net.n
    if isinstance(loop.reference, Constant):
        ref = loop.reference(0.0)
        Rd = np.broadcast_to(ref.r, (len(ts), 3))
        Vd = np.zeros((len(ts), 3))
        Ad = np.zeros((len(ts), 3))
    else:
        refs = [loop.reference(t) for t in ts]
        Rd = np.array([s.r for s in refs])
        Vd = np.array([s.v for s in refs])
        Ad = np.array([s.a for s in refs])
    X = Y[:, 0:6].copy()
    if noise is not None:
        X[:, 0:3] += noise
    xi = Y[:, 6:9]
    r_e = Rd - X[:, 0:3]
    v_e = Vd - X[:, 3:6]
    W_hat = Y[:, 18:].reshape(len(ts), n, 3)
    f = gains.kp * r_e + gains.ki * xi + gains.kd * v_e + gains.m * Ad + gains.m * gains.g * np.array([0.0, 0.0, 1.0])
    if design.adaptive:
        diff = X[:, None, :] - design.net.centers[None, :, :]
        phi = np.exp(-np.einsum("kij,kij->ki", diff, diff) / (2.0 * design.net.bandwidths**2))
        f_a = np.einsum("ki,kij->kj", phi, W_hat)
        f = f - f_a
    else:
        phi = None
        f_a = np.zeros((len(ts), 3))
    if loop.plant.force_limit is not None:
        f = np.array([clamp_force(row, loop.plant.force_limit) for row in f])
    z_tilde = Y[:, 9:18] - np.hstack([xi, r_e, v_e])
    P, Q = design.cert.P, design.cert.Q
    V = np.einsum("ki,ij,kj->k", z_tilde, P, z_tilde)
    if loop.W_true is not None:
        Wt = W_hat - loop.W_true[None]
        V = V + np.einsum("kij,kij->k", Wt, Wt) / gains.gamma
    Vdot = -np.einsum("ki,ij,kj->k", z_tilde, Q, z_tilde)
    W_fro = np.sqrt(np.einsum("kij,kij->k", W_hat, W_hat))
    if design.adaptive:
        row = z_tilde @ (P.T @ design.mats.B)
        Wdot_fro = gains.gamma * np.linalg.norm(phi, axis=1) * np.linalg.norm(row, axis=1)
    else:
        Wdot_fro = np.zeros(len(ts))
    return Telemetry(
        t=ts,
        r=Y[:, 0:3].copy(),
        r_d=np.array(Rd),
        r_e=r_e,
        f=f,
        f_a=f_a,
        z_tilde=z_tilde,
        V=V,
        Vdot=Vdot,
        W_fro=W_fro,
        Wdot_fro=Wdot_fro,
        V_complete=loop.W_true is not None,
    )


def write_csv(path: str, tel: Telemetry) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.savetxt(path, tel.table(), delimiter=",", header=",".join(CSV_COLUMNS), comments="", fmt="%.17g")


def build_loop(spec: TrialSpec, rng: np.random.Generator) -> ClosedLoop:
    design = spec.design if spec.controller == "adaptive" else spec.design.baseline()
    return ClosedLoop(design, spec.plant, spec.reference, realize(spec.disturbance, rng))


def run_trial(spec: TrialSpec, keep_telemetry: bool = True) -> TrialResult:
    """Run one hovering trial; deterministic given ``spec`` (including its seed)."""
    rng = np.random.default_rng(spec.seed)
    loop = build_loop(spec, rng)
    N = spec.n_steps
    noise = rng.normal(0.0, spec.noise_std, size=(N + 1, 3)) if spec.noise_std > 0 else None

    bundle = loop.initial_bundle(spec.initial)
    Y = np.empty((N + 1, bundle.y.size))
    Y[0] = bundle.y
    failure = None
    k_done = N
    for k in range(N):
        try:
            bundle = loop.step(bundle, spec.dt, None if noise is None else noise[k])
        except DivergenceError as exc:
            failure = exc
            k_done = k
            break
        Y[k + 1] = bundle.y
    ts = spec.initial.t + spec.dt * np.arange(k_done + 1)
    Y = Y[: k_done + 1]
    tel = _telemetry(loop, ts, Y, None if noise is None else noise[: k_done + 1])
    if spec.csv_path is not None:
        write_csv(spec.csv_path, tel)

    if failure is not None:
        log.warning("%s trial seed=%d diverged: %s", spec.controller, spec.seed, failure)
        nan3 = np.full(3, np.nan)
        return TrialResult(
            spec.controller,
            spec.seed,
            nan3,
            nan3,
            float("nan"),
            float("nan"),
            spec.csv_path,
            failed=True,
            failure_time=failure.t,
            failure_message=str(failure),
            telemetry=tel if keep_telemetry else None,
        )

    tail = max(1, int(np.ceil(0.1 * len(ts))))
    return TrialResult(
        controller=spec.controller,
        seed=spec.seed,
        rms=compute_rms(tel.r_e),
        peak_error=np.max(np.abs(tel.r_e), axis=0),
        final_V=float(tel.V[-1]),
        Wdot_terminal=float(np.mean(tel.Wdot_fro[-tail:])),
        csv_path=spec.csv_path,
        telemetry=tel if keep_telemetry else None,
    )


def _run_quiet(spec: TrialSpec) -> TrialResult:
    return run_trial(spec, keep_telemetry=False)


def run_batch(specs: Sequence[TrialSpec], parallel: int = 1, keep_telemetry: bool = False) -> list[TrialResult]:
    """Run independent trials, optionally across ``parallel`` worker processes.

    Results come back in the order of ``specs`` regardless of scheduling.
    """
    if parallel > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_quiet, specs))
    return [run_trial(s, keep_telemetry=keep_telemetry) for s in specs]
