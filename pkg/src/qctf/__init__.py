"""Combinatorial track finding with classical and simulated quantum search stages."""

from .ctf import FindConfig, PipelineConfig, SeedCuts, TrackCandidate, run_pipeline
from .events import EventRecord, GeneratorConfig, generate_event, load_event, save_event
from .geometry import DetectorGeometry
from .helix import HelixParams
from .matching import MatchReport, match_truth
from .qsearch import QueryLedger

__version__ = "0.1.0"
