from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_RADII = (3.0, 6.0, 10.0, 16.0, 24.0, 34.0)


@dataclass(frozen=True)
class DetectorGeometry:
    """Concentric cylindrical layers around the beam (z) axis."""

    layer_radii: tuple[float, ...] = DEFAULT_RADII
    half_length: float = 60.0

    def __post_init__(self):
        radii = tuple(float(r) for r in self.layer_radii)
        object.__setattr__(self, "layer_radii", radii)
        if len(radii) < 4:
            raise ConfigError("need at least 4 layers (3 seeding + 1 finding)")
        if radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ConfigError(f"layer radii must be positive and strictly increasing: {radii}")
        if not self.half_length > 0:
            raise ConfigError("half_length must be positive")

    @property
    def n_layers(self) -> int:
        return len(self.layer_radii)

    def radius(self, layer: int) -> float:
        return self.layer_radii[layer]

    @classmethod
    def with_layers(cls, n_layers: int, r_min: float = 3.0, r_max: float = 34.0,
                    half_length: float = 60.0) -> "DetectorGeometry":
        if n_layers == len(DEFAULT_RADII) and (r_min, r_max) == (3.0, 34.0):
            return cls(DEFAULT_RADII, half_length)
        radii = np.geomspace(r_min, r_max, n_layers)
        return cls(tuple(float(r) for r in radii), half_length)

    def to_dict(self) -> dict:
        return {"layer_radii": list(self.layer_radii), "half_length": self.half_length}

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorGeometry":
        return cls(tuple(d["layer_radii"]), float(d.get("half_length", 60.0)))
