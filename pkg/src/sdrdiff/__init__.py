"""Selective dynamical recoupling (SDR) diffusion decays and pore-size estimation."""

__version__ = "0.1.0"

from .curve import DecayCurve
from .decay import (
    DecayResult,
    SDRDecay,
    delta_m_sdr,
    restricted_asymptote,
    sdr_decay,
    sdr_scan,
    variance_exact,
    variance_quadrature,
)
from .errors import (
    BurnInError,
    ConfigError,
    DecompositionError,
    InsufficientDataError,
    NoCorrelationTime,
    NonConvergence,
    NormalizationError,
    NoSpectrum,
    QuadratureError,
    SDRError,
    StepSizeError,
    TimingError,
)
from .estimation import FitOptions, FitResult, fit_diameter, normalize_first_point, residuals
from .noise import (
    GAMMA_1H,
    AcquisitionParams,
    Geometry,
    NoiseSpectrum,
    build_spectrum,
    correlation_time,
    restriction_length,
)
from .sequence import PulseSequence, build_cpmg, build_hahn, build_sdr, decompose, modulation

__all__ = [
    "AcquisitionParams",
    "build_cpmg",
    "build_hahn",
    "build_sdr",
    "build_spectrum",
    "BurnInError",
    "ConfigError",
    "correlation_time",
    "DecayCurve",
    "DecayResult",
    "decompose",
    "DecompositionError",
    "delta_m_sdr",
    "fit_diameter",
    "FitOptions",
    "FitResult",
    "GAMMA_1H",
    "Geometry",
    "InsufficientDataError",
    "modulation",
    "NoCorrelationTime",
    "NoiseSpectrum",
    "NonConvergence",
    "NormalizationError",
    "normalize_first_point",
    "NoSpectrum",
    "PulseSequence",
    "QuadratureError",
    "residuals",
    "restricted_asymptote",
    "restriction_length",
    "sdr_decay",
    "sdr_scan",
    "SDRDecay",
    "SDRError",
    "StepSizeError",
    "TimingError",
    "variance_exact",
    "variance_quadrature",
]
