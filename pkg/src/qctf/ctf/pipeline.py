"""End-to-end classical pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..kalman import DEFAULT_KALMAN, KalmanConfig
from .candidates import sort_candidates
from .cleaning import clean_improved, clean_original
from .finding import FindConfig, find_tracks
from .seeding import SeedCuts, generate_seeds
from .selection import default_threshold, select_tracks
from .stats import StageStats

VARIANTS = ("original-clean", "improved-clean")


@dataclass(frozen=True)
class PipelineConfig:
    cuts: SeedCuts = field(default_factory=SeedCuts)
    find: FindConfig = field(default_factory=FindConfig)
    kalman: KalmanConfig = DEFAULT_KALMAN
    f: float = 0.5
    quality_threshold: float | None = None   # None: default_threshold(L, omega)

    def threshold(self, n_layers: int) -> float:
        if self.quality_threshold is None:
            return default_threshold(n_layers, self.find.omega)
        return self.quality_threshold


def run_pipeline(event, config: PipelineConfig = PipelineConfig(), variant: str = "improved-clean"):
    """Seeding, finding, cleaning and selection in sequence. Returns (tracks, StageStats)."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    stats = StageStats()
    seeds = generate_seeds(event, config.cuts, config.kalman, config.find.omega, stats)
    found = find_tracks(seeds, event, config.find, config.kalman, stats)
    if variant == "original-clean":
        cleaned = clean_original(sort_candidates(found), config.f, stats)
    else:
        cleaned = clean_improved(found, config.f, stats)
    tracks = select_tracks(cleaned, config.threshold(event.n_layers), event, config.kalman,
                           config.find.omega, stats)
    return tracks, stats
