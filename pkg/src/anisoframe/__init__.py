"""Anisotropic Besov wavelet systems for expansive dilation matrices."""

from .certify import CertSetup, delta0, theorem_params, thresholds
from .cover import BaseCell, build_homogeneous, build_inhomogeneous
from .dilation import ExpansiveMatrix, validate_expansive
from .errors import AnisoframeError
from .partition import PartitionOfUnity, WeightSequence, build_partition
from .prototypes import ParsevalPrototype, Prototype
from .signals import CoefficientArray, SampledSignal, coefficient_norm, decomposition_norm
from .system import WaveletSystem, analysis, make_system, synthesis

__version__ = "0.1.0"

__all__ = [
    "AnisoframeError", "BaseCell", "CertSetup", "CoefficientArray", "ExpansiveMatrix", "ParsevalPrototype",
    "PartitionOfUnity", "Prototype", "SampledSignal", "WaveletSystem", "WeightSequence", "analysis",
    "build_homogeneous", "build_inhomogeneous", "build_partition", "coefficient_norm",
    "decomposition_norm", "delta0", "make_system", "synthesis", "theorem_params", "thresholds",
    "validate_expansive",
]
