"""JSON run configuration: every tunable default in one file."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .ctf.finding import FindConfig
from .ctf.pipeline import PipelineConfig
from .ctf.seeding import SeedCuts
from .errors import ConfigError, DataError
from .kalman import KalmanConfig
from .matching import DEFAULT_MIN_FRACTION
from .quantum.superposition import SuperpositionConfig


@dataclass(frozen=True)
class QuantumConfig:
    epsilon: float = 0.0            # injected failure probability of simulated state preparation
    lam: int = 2                    # branch factor of the superposition tree
    oracle_c: float = 1.0
    rng_seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    quantum: QuantumConfig = field(default_factory=QuantumConfig)
    min_fraction: float = DEFAULT_MIN_FRACTION

    def superposition(self) -> SuperpositionConfig:
        q = self.quantum
        return SuperpositionConfig(lam=q.lam, epsilon=q.epsilon, oracle_c=q.oracle_c, pipeline=self.pipeline)

    def to_dict(self) -> dict:
        p = self.pipeline
        return {
            "cuts": asdict(p.cuts),
            "find": asdict(p.find),
            "kalman": asdict(p.kalman),
            "f": p.f,
            "quality_threshold": p.quality_threshold,
            "quantum": asdict(self.quantum),
            "min_fraction": self.min_fraction,
        }


def _build(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(extra)}")
    clean = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**clean)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {section!r} section: {exc}") from exc


def config_from_dict(d: dict) -> RunConfig:
    allowed = set(RunConfig().to_dict())
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    base = RunConfig()
    p = base.pipeline
    pipeline = PipelineConfig(
        cuts=_build(SeedCuts, d["cuts"], "cuts") if "cuts" in d else p.cuts,
        find=_build(FindConfig, d["find"], "find") if "find" in d else p.find,
        kalman=_build(KalmanConfig, d["kalman"], "kalman") if "kalman" in d else p.kalman,
        f=float(d.get("f", p.f)),
        quality_threshold=d.get("quality_threshold", p.quality_threshold),
    )
    quantum = _build(QuantumConfig, d["quantum"], "quantum") if "quantum" in d else base.quantum
    return RunConfig(pipeline, quantum, float(d.get("min_fraction", base.min_fraction)))


def default_config_json() -> str:
    return json.dumps(RunConfig().to_dict(), indent=2)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError("config must be a JSON object")
    return config_from_dict(data)
