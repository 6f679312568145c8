from .candidates import GHOST, TrackCandidate, sort_candidates
from .cleaning import BLANK, TupleForest, clean_improved, clean_original, r_tuples, tuple_size
from .finding import FindConfig, classical_slate, find_tracks
from .pipeline import PipelineConfig, run_pipeline
from .seeding import Seed, SeedCuts, SeedSet, build_seeds, generate_seeds
from .selection import default_threshold, select_tracks
from .stats import StageStats
