"""Range-sensor beam models: the four-component occlusion-aware mixture,
its generative network, parameter learning, and full-scan likelihoods."""
from .beam_model import BeamParams, ThrunParams, rbbm_density, thrun_density
from .bayes_net import NetParams, sample_beams, sample_dataset
from .dataset import Dataset, load_dataset
from .geometry import Pose, ScanGeometry, SegmentMap, load_map
from .metrics import BinnedDistribution, hellinger_distance, kl_divergence

__version__ = "0.1.0"

__all__ = [
    "BeamParams", "BinnedDistribution", "Dataset", "NetParams", "Pose", "ScanGeometry",
    "SegmentMap", "ThrunParams", "hellinger_distance", "kl_divergence", "load_dataset",
    "load_map", "rbbm_density", "sample_beams", "sample_dataset", "thrun_density",
]
