from .qfinding import QuantumSlate, q_find_tracks
from .qseeding import QSeedResult, SeedSearchOracle, q_generate_seeds
from .superposition import (INF, CandidateIndex, CandidateTable, SuperpositionConfig, SuperpositionResult,
                            build_table, enumerate_candidate, modified_reference, reconstruct_superposition)
