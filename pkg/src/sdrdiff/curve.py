from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .noise import AcquisitionParams


@dataclass(frozen=True, eq=False)
class DecayCurve:
    """SDR magnetization sampled over x delays at fixed TE, N and gradient."""

    x_values: np.ndarray
    signal: np.ndarray
    te: float
    n_pulses: int
    acq: AcquisitionParams | None = None

    def __post_init__(self):
        x = np.asarray(self.x_values, dtype=float)
        s = np.asarray(self.signal, dtype=float)
        if x.shape != s.shape or x.ndim != 1:
            raise ValueError("x_values and signal must be 1-D arrays of equal length")
        object.__setattr__(self, "x_values", x)
        object.__setattr__(self, "signal", s)

    def __len__(self):
        return self.x_values.size

    def with_signal(self, signal) -> "DecayCurve":
        return replace(self, signal=np.asarray(signal, dtype=float))
