"""Local optima detection and landscape characterization for binary search spaces."""

from .errors import CapabilityError, ConfigurationError, InputError, LandscapeError
from .problems import BitPoint, HiffInstance, NkInstance, generate_nk, hamming_distance
from .sampling import Sample, awl_sample, enumerate_space, rand_sample
from .walks import build_neighbor_table, walk_all
from .plops import detect_plops, plef_scores
from .basins import build_basins
from .networks import basin_overlap_network, network_stats, step_size_barriers

__version__ = "0.1.0"

__all__ = [
    "BitPoint", "CapabilityError", "ConfigurationError", "HiffInstance", "InputError", "LandscapeError",
    "NkInstance", "Sample", "awl_sample", "basin_overlap_network", "build_basins", "build_neighbor_table",
    "detect_plops", "enumerate_space", "generate_nk", "hamming_distance", "network_stats", "plef_scores",
    "rand_sample", "step_size_barriers", "walk_all",
]
