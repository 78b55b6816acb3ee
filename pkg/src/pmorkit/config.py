"""JSON experiment configuration.

Top-level keys: ``mesh``, ``material``, ``windkessel``, ``activation``,
``integrator``, ``tolerances`` (the forward scenario), the task blocks
``pod``, ``pmor`` and ``invana``, plus ``seed`` and ``output_dir``.
Missing keys take their defaults; unknown keys are rejected.
Units: kPa, mm, s, g.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .activation import ActivationParams
from .chamber import ChamberMaterial, ChamberMesh
from .errors import InvalidInputError
from .inverse import LMConfig
from .solver import Scenario, SolverTolerances, TimeIntegrator
from .windkessel import WindkesselParams

__all__ = ["PodConfig", "PmorConfig", "InvanaConfig", "ExperimentConfig", "load_config"]


@dataclass(frozen=True)
class PodConfig:
    q: int = 30
    eps_pod: float | None = None
    stride: int = 1

    def __post_init__(self):
        if self.q < 1 or self.stride < 1:
            raise InvalidInputError("pod.q and pod.stride must be positive")
        if self.eps_pod is not None and not 0 < self.eps_pod < 1:
            raise InvalidInputError("pod.eps_pod must lie in (0, 1)")


@dataclass(frozen=True)
class PmorConfig:
    parameter: str = "sigma"
    samples: tuple = (280.0, 430.0)
    method: str = "cos"
    q: int = 30
    reference: str = "svcob"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if len(self.samples) < 1:
            raise InvalidInputError("pmor.samples must not be empty")
        if self.parameter not in {f.name for f in fields(ActivationParams)}:
            raise InvalidInputError(f"unknown activation parameter {self.parameter!r}")
        if self.method not in ("cob", "cos", "direct", "grassmann"):
            raise InvalidInputError(f"unknown interpolation method {self.method!r}")


_INVANA_NAMES = ("sigma", "alpha_max", "alpha_min", "t_sys", "t_dias")


@dataclass(frozen=True)
class InvanaConfig:
    names: tuple = _INVANA_NAMES
    initial: tuple = (200.0, 15.0, -15.0, 0.35, 0.60)
    truth: tuple = (280.0, 10.0, -30.0, 0.246, 0.502)
    stride: int = 10
    lm: LMConfig = field(default_factory=LMConfig)

    def __post_init__(self):
        for name in ("names", "initial", "truth"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if isinstance(self.lm, dict):
            object.__setattr__(self, "lm", LMConfig(**self.lm))
        if not len(self.names) == len(self.initial) == len(self.truth):
            raise InvalidInputError("invana.names, initial and truth differ in length")
        if self.stride < 1:
            raise InvalidInputError("invana.stride must be positive")


_SCENARIO_BLOCKS = {
    "mesh": ChamberMesh,
    "material": ChamberMaterial,
    "windkessel": WindkesselParams,
    "activation": ActivationParams,
    "integrator": TimeIntegrator,
    "tolerances": SolverTolerances,
}
_TASK_BLOCKS = {"pod": PodConfig, "pmor": PmorConfig, "invana": InvanaConfig}


def _build(cls, block, key):
    if block is None:
        return cls()
    if not isinstance(block, dict):
        raise InvalidInputError(f"config block {key!r} must be an object")
    known = {f.name for f in fields(cls)}
    extra = set(block) - known
    if extra:
        raise InvalidInputError(f"unknown keys in {key!r}: {sorted(extra)}")
    try:
        return cls(**block)
    except TypeError as exc:
        raise InvalidInputError(f"bad block {key!r}: {exc}") from exc


def _plain(obj):
    if isinstance(obj, tuple):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    pod: PodConfig = field(default_factory=PodConfig)
    pmor: PmorConfig = field(default_factory=PmorConfig)
    invana: InvanaConfig = field(default_factory=InvanaConfig)
    seed: int = 0
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise InvalidInputError("configuration must be a JSON object")
        allowed = set(_SCENARIO_BLOCKS) | set(_TASK_BLOCKS) | {"seed", "output_dir"}
        extra = set(data) - allowed
        if extra:
            raise InvalidInputError(f"unknown top-level keys: {sorted(extra)}")
        scen = Scenario(**{k: _build(c, data.get(k), k) for k, c in _SCENARIO_BLOCKS.items()})
        tasks = {k: _build(c, data.get(k), k) for k, c in _TASK_BLOCKS.items()}
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise InvalidInputError("seed must be an integer")
        return cls(scen, seed=seed, output_dir=str(data.get("output_dir", "out")), **tasks)

    def to_dict(self) -> dict:
        out = {k: _plain(asdict(getattr(self.scenario, k))) for k in _SCENARIO_BLOCKS}
        out.update({k: _plain(asdict(getattr(self, k))) for k in _TASK_BLOCKS})
        out["seed"] = self.seed
        out["output_dir"] = self.output_dir
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


def load_config(path=None) -> ExperimentConfig:
    """Read a JSON config; ``None`` returns the defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)
