"""Run configuration: a single YAML document describing a complete experiment.

Everything needed to reproduce a batch lives in the document (plant, gains,
adaptation, RBF layer, disturbance, reference, initial condition, timing and
seeds), so re-running a saved config reproduces its results exactly.  All
quantities are SI (m, s, N, kg).
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

import numpy as np
import yaml

from .closedloop import SCHEMES, MracDesign
from .controller import DEFAULT_POLES, GainSet, ReferenceSignal, reference_from_dict
from .errors import ConfigError
from .harness import CONTROLLERS, TrialSpec
from .lyapunov import block_q, certify
from .plant import Composite, PlantParams, RbfTruth, SimState, disturbance_from_dict
from .rbf import RbfNetwork, build_grid_network, eval_phi

BUILTIN_CONFIGS = ("paper_hover", "exact_span")


@dataclass
class PlantSection:
    mass: float = 95e-6
    gravity: float = 9.81
    force_limit: Optional[float] = None


@dataclass
class ControllerSection:
    """Either ``poles`` (per-axis pole placement) or explicit ``kp``/``ki``/``kd`` diagonals."""

    poles: Optional[list] = field(default_factory=lambda: list(DEFAULT_POLES))
    kp: Optional[list] = None
    ki: Optional[list] = None
    kd: Optional[list] = None
    gamma: float = 5e-6
    q_weights: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    scheme: str = "rk4"


@dataclass
class RbfSection:
    """Grid parameters (``lo``, ``hi``, ``counts``, ``sigma_scale``) or explicit ``centers``/``bandwidths``."""

    lo: Optional[list] = field(default_factory=lambda: [-0.2, -0.2, -0.1, -0.5, -0.5, -0.5])
    hi: Optional[list] = field(default_factory=lambda: [0.2, 0.2, 0.3, 0.5, 0.5, 0.5])
    counts: Optional[list] = field(default_factory=lambda: [3, 3, 3, 1, 1, 1])
    sigma_scale: Optional[float] = 1.0
    centers: Optional[list] = None
    bandwidths: Optional[list] = None


@dataclass
class RunConfig:
    name: str = "paper_hover"
    plant: PlantSection = field(default_factory=PlantSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    rbf: RbfSection = field(default_factory=RbfSection)
    disturbance: dict = field(default_factory=lambda: {"kind": "zero"})
    reference: dict = field(default_factory=lambda: {"kind": "constant", "point": [0.0, 0.0, 0.1]})
    initial: dict = field(default_factory=lambda: {"position": [0.01, 0.01, 0.09], "velocity": [0.0, 0.0, 0.0]})
    trials: int = 5
    duration: float = 20.0
    dt: float = 1e-3
    seed_base: int = 0
    seeds: Optional[list] = None
    noise_std: float = 0.0
    output: str = "out"

    # -- (de)serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config document must be a mapping")
        data = copy.deepcopy(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        sections = {"plant": PlantSection, "controller": ControllerSection, "rbf": RbfSection}
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                kwargs[key] = _section(sections[key], value, key)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.dump())

    def copy(self, **changes) -> "RunConfig":
        """Deep copy with top-level fields replaced, re-validated."""
        data = self.to_dict()
        data.update(copy.deepcopy(changes))
        return RunConfig.from_dict(data)

    # -- validation and builders ---------------------------------------------------

    def validate(self) -> None:
        """Build every object once so that any invariant violation surfaces as ConfigError."""
        try:
            self.build_plant()
            self.build_gains()
            net = self.build_network()
            self.build_disturbance(net)
            self.build_reference()
            self.build_initial()
            self.build_Q()
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        if self.controller.scheme not in SCHEMES:
            raise ConfigError(f"controller.scheme must be one of {SCHEMES}")
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise ConfigError("trials must be a positive integer")
        if not (_finite(self.duration) and self.duration > 0):
            raise ConfigError("duration must be positive")
        if not (_finite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be positive")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError("duration must be an integer multiple of dt")
        if not (_finite(self.noise_std) and self.noise_std >= 0):
            raise ConfigError("noise_std must be non-negative")
        if not (isinstance(self.seed_base, int) and 0 <= self.seed_base < 2**64):
            raise ConfigError("seed_base must be an unsigned 64-bit integer")
        if self.seeds is not None:
            if len(self.seeds) != self.trials or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
                raise ConfigError("seeds must list one non-negative integer per trial")

    def trial_seeds(self) -> list:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.seed_base + k for k in range(1, self.trials + 1)]

    def build_plant(self) -> PlantParams:
        p = self.plant
        return PlantParams(float(p.mass), float(p.gravity), None if p.force_limit is None else float(p.force_limit))

    def build_gains(self) -> GainSet:
        c = self.controller
        m, g = float(self.plant.mass), float(self.plant.gravity)
        explicit = [c.kp, c.ki, c.kd]
        if all(v is not None for v in explicit):
            for name, v in zip(("kp", "ki", "kd"), explicit):
                arr = np.asarray(v, dtype=float)
                if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                    raise ConfigError(f"{name} must be a non-negative diagonal (positive definite gains required)")
            return GainSet(c.kp, c.ki, c.kd, m, g, float(c.gamma), allow_zero=True)
        if any(v is not None for v in explicit):
            raise ConfigError("give all of kp, ki, kd or none of them")
        if c.poles is None:
            raise ConfigError("controller needs either poles or explicit kp/ki/kd")
        poles = np.asarray(c.poles, dtype=float)
        if poles.shape != (3,) or np.any(poles >= 0):
            raise ConfigError("poles must be three negative reals")
        return GainSet.from_poles(m, g, float(c.gamma), tuple(poles))

    def build_Q(self) -> np.ndarray:
        w = np.asarray(self.controller.q_weights, dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ConfigError("q_weights must be positive")
        try:
            return block_q(w)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_network(self) -> RbfNetwork:
        r = self.rbf
        if r.centers is not None:
            if r.bandwidths is None:
                raise ConfigError("explicit RBF centers need bandwidths")
            return RbfNetwork(np.asarray(r.centers, dtype=float), np.asarray(r.bandwidths, dtype=float))
        if None in (r.lo, r.hi, r.counts, r.sigma_scale):
            raise ConfigError("RBF grid needs lo, hi, counts and sigma_scale")
        return build_grid_network(r.lo, r.hi, r.counts, float(r.sigma_scale))

    def build_disturbance(self, net: Optional[RbfNetwork] = None):
        return _disturbance(self.disturbance, net if net is not None else self.build_network())

    def build_reference(self) -> ReferenceSignal:
        return reference_from_dict(self.reference)

    def build_initial(self) -> SimState:
        return SimState(self.initial["position"], self.initial.get("velocity", [0.0, 0.0, 0.0]), 0.0)

    def build_design(self):
        """Certify the gains and assemble the adaptive design.

        Raises CertificationError when the closed-loop matrix is not Hurwitz.
        """
        gains = self.build_gains()
        mats, cert = certify(gains, self.build_Q())
        return MracDesign(gains, self.build_network(), mats, cert, True, self.controller.scheme)

    def trial_specs(self, controller: str, design=None, out_dir: Optional[str] = None) -> list:
        if controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}")
        design = design if design is not None else self.build_design()
        plant = self.build_plant()
        dist = self.build_disturbance(design.net)
        ref = self.build_reference()
        init = self.build_initial()
        specs = []
        for seed in self.trial_seeds():
            path = None
            if out_dir is not None:
                path = f"{out_dir}/trial_{controller}_seed{seed}.csv"
            specs.append(
                TrialSpec(controller, float(self.duration), float(self.dt), seed, dist, ref, init, design, plant, float(self.noise_std), path)
            )
        return specs


def _finite(x) -> bool:
    try:
        return bool(np.isfinite(float(x)))
    except (TypeError, ValueError):
        return False


def _section(cls, value: Any, name: str):
    if value is None:
        return cls()
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(value) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**value)


def _disturbance(data: dict, net: RbfNetwork):
    """Disturbance from its document form.

    ``kind: rbf`` may omit ``net`` (the controller's own network is used) and
    give either explicit ``W`` or ``hover_force`` + ``at``: the minimum-norm
    weights reproducing that force at state ``at``.
    """
    if not isinstance(data, dict):
        raise ConfigError("disturbance must be a mapping")
    if data.get("kind") == "composite":
        return Composite(tuple(_disturbance(p, net) for p in data.get("parts", [])))
    if data.get("kind") == "rbf":
        truth_net = RbfNetwork.from_dict(data["net"]) if "net" in data else net
        if "W" in data:
            W = np.asarray(data["W"], dtype=float)
        elif "hover_force" in data:
            W = min_norm_weights(truth_net, data["at"], data["hover_force"])
        else:
            raise ConfigError("rbf disturbance needs W or hover_force + at")
        return RbfTruth(truth_net, W)
    return disturbance_from_dict(data)


def min_norm_weights(net: RbfNetwork, at, force) -> np.ndarray:
    """Smallest-Frobenius-norm ``W`` with ``W^T phi(at) = force``."""
    phi = eval_phi(np.asarray(at, dtype=float), net)
    return np.outer(phi, np.asarray(force, dtype=float)) / (phi @ phi)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path!r} is not valid YAML: {exc}") from exc
    return RunConfig.from_dict(data)


def builtin_config_path(name: str) -> str:
    if name not in BUILTIN_CONFIGS:
        raise ConfigError(f"unknown built-in config {name!r}; choose from {BUILTIN_CONFIGS}")
    return str(resources.files("mracflyer").joinpath("configs", f"{name}.yaml"))


def builtin_config(name: str = "paper_hover") -> RunConfig:
    return load_config(builtin_config_path(name))
