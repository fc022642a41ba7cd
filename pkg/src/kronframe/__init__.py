"""Low-coherence tight measurement frames, Kronecker beamformer factorization and
sparse mmWave MIMO channel estimation."""

from .frames import (FrameError, GridDictionary, build_dictionary, coherence, diagnose,
                     frame_bounds, gram, harmonic_frame, random_unit_norm_frame,
                     tightness_residual, welch_bound)
from .kron import BeamformerPair, KronDims, factor, realize, rearrange
from .qcsidco import SidcoConfig, minimize_coherence
from .untf import MeasurementMatrix, normalize_measurement, polar_tighten

__version__ = "0.1.0"

__all__ = [
    "BeamformerPair", "FrameError", "GridDictionary", "KronDims", "MeasurementMatrix",
    "SidcoConfig", "build_dictionary", "coherence", "diagnose", "factor", "frame_bounds",
    "gram", "harmonic_frame", "minimize_coherence", "normalize_measurement", "polar_tighten",
    "random_unit_norm_frame", "realize", "rearrange", "tightness_residual", "welch_bound",
]
