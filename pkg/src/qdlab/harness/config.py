"""Experiment configuration: TOML loading, validation, resolved hashing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..errors import ConfigInvalid

KINDS = (
    "msd",
    "kinetic-compare",
    "diffusive-compare",
    "graphs",
    "dos",
    "boltzmann",
    "rung",
    "crossing",
)

SWEEP_AXES = ("lambda", "L", "kappa", "t")


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    Common model parameters are explicit fields; kind-specific knobs live in
    ``params``.  The kinetic/diffusive scale relations are derived fields:
    ``epsilon = lam**(2 + kappa/2)`` and ``t_micro = T_kinetic / lam**2``.
    """

    kind: str
    lam: float = 0.5
    L: int = 32
    kappa: float = 0.1
    disorder: str = "gaussian"
    seed: int = 20260808
    ensemble: int = 2
    dt: float = 0.05
    t_grid: list = field(default_factory=list)
    out: str = "runs/out"
    broadening: float = 0.05
    packet_sigma_x: float = 1.5
    packet_k0: tuple = (1.5707963267948966,) * 3
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def epsilon(self) -> float:
        return float(self.lam ** (2.0 + self.kappa / 2.0)) if self.lam > 0 else 0.0

    def kinetic_time(self, t_micro: float) -> float:
        return float(self.lam**2 * t_micro)

    def micro_time(self, kinetic_T: float) -> float:
        if self.lam == 0:
            raise ConfigInvalid("kinetic scaling undefined at zero coupling")
        return float(kinetic_T / self.lam**2)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigInvalid(f"unknown experiment kind {self.kind!r}")
        if self.lam < 0:
            raise ConfigInvalid("coupling must be nonnegative")
        if self.L < 2 or self.L % 2:
            raise ConfigInvalid("lattice side must be even and >= 2")
        if self.ensemble < 1:
            raise ConfigInvalid("ensemble count must be >= 1")
        if self.dt <= 0:
            raise ConfigInvalid("dt must be positive")
        if self.disorder not in ("gaussian", "bernoulli"):
            raise ConfigInvalid(f"unknown disorder kind {self.disorder!r}")
        if any(t < 0 for t in self.t_grid):
            raise ConfigInvalid("time grid must be nonnegative")
        return self

    def resolved(self) -> dict:
        data = asdict(self)
        data["packet_k0"] = list(self.packet_k0)
        data["epsilon"] = self.epsilon
        return data

    def config_hash(self) -> str:
        data = self.resolved()
        data.pop("out", None)
        blob = json.dumps(data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **kwargs) -> "ExperimentConfig":
        data = asdict(self)
        data.update(kwargs)
        data["packet_k0"] = tuple(data["packet_k0"])
        return ExperimentConfig(**data).validate()


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from the nested TOML structure."""
    if "kind" not in raw:
        raise ConfigInvalid("config needs a 'kind' key")
    model = raw.get("model", {})
    time = raw.get("time", {})
    packet = raw.get("packet", {})
    cfg = ExperimentConfig(
        kind=raw["kind"],
        lam=float(model.get("lam", 0.5)),
        L=int(model.get("L", 32)),
        kappa=float(model.get("kappa", 0.1)),
        disorder=model.get("disorder", "gaussian"),
        broadening=float(model.get("broadening", 0.05)),
        seed=int(raw.get("seed", 20260808)),
        ensemble=int(raw.get("ensemble", {}).get("count", 2) if isinstance(raw.get("ensemble"), dict) else raw.get("ensemble", 2)),
        dt=float(time.get("dt", 0.05)),
        t_grid=[float(t) for t in time.get("grid", [])],
        out=raw.get("out", "runs/out"),
        packet_sigma_x=float(packet.get("sigma_x", 1.5)),
        packet_k0=tuple(float(k) for k in packet.get("k0", (1.5707963267948966,) * 3)),
        params=dict(raw.get("params", {})),
        tolerances=dict(raw.get("tolerances", {})),
    )
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_bytes()
    try:
        raw = tomllib.loads(text.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"config parse error: {exc}") from exc
    return config_from_dict(raw)
