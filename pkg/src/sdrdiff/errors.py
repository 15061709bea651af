"""Exception hierarchy shared by all sdrdiff modules."""


class SDRError(Exception):
    """Base class for all library errors."""


class TimingError(SDRError, ValueError):
    """Pulse timing violates the SDR constraints."""


class DecompositionError(SDRError, ValueError):
    """Sequence cannot be split into CPMG and Hahn parts (N = 1)."""


class NoCorrelationTime(SDRError, ValueError):
    """Free diffusion has no finite correlation time."""


class NoSpectrum(NoCorrelationTime):
    """A stationary noise spectrum needs a restricted geometry."""


class QuadratureError(SDRError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, value=None, error_bound=None):
        super().__init__(message)
        self.value = value
        self.error_bound = error_bound


class StepSizeError(SDRError, ValueError):
    """Monte Carlo time step too coarse for the geometry."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class BurnInError(SDRError, ValueError):
    """Walk too short for a stationary autocorrelation estimate."""


class NormalizationError(SDRError, ValueError):
    pass


class InsufficientDataError(SDRError, ValueError):
    pass


class NonConvergence(SDRError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class ConfigError(SDRError, ValueError):
    """Invalid run configuration; message names the section/field and line."""
