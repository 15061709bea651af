"""Diffusion-driven frequency noise: geometry -> correlation times -> g(tau), S(omega).

The frequency seen by a spin at position ``r`` along a constant gradient is
``gamma * G * r``. For a spin confined to a pore its position correlation
decays as a sum of exponentials (one per diffusion eigenmode), so the
frequency spectrum is a sum of Lorentzians. The single-Lorentzian model
collapses this to one correlation time with ``dw2 = gamma**2 G**2 D0 tau_c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import jnp_zeros, spherical_jn

from .errors import NoCorrelationTime, NoSpectrum

GAMMA_1H = 2.675221e8  # rad s^-1 T^-1

KINDS = ("free", "slab", "cylinder", "sphere")

# tau_c = coef * d**2 / D0. The cylinder value is the literature 0.26**2; slab
# and sphere were tabulated with scripts/tabulate_correlation_times.py using
# the same convention, D0 * tau_c**2 = integral of <x(0) x(t)> dt, which
# reproduces 0.26**2 for the cylinder to 0.2 %.
CORRELATION_COEFFICIENTS = {
    "slab": 0.0913,
    "cylinder": 0.26**2,
    "sphere": 0.0535,
}

# Dimension of the walk used to model each geometry.
DIMENSIONS = {"free": 1, "slab": 1, "cylinder": 2, "sphere": 3}


@dataclass(frozen=True)
class Geometry:
    """Restriction descriptor. ``size_d`` is the slab width or the diameter (m)."""

    kind: str
    size_d: float | None
    d0: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown geometry kind {self.kind!r}; expected one of {KINDS}")
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        if self.kind != "free" and not (self.size_d is not None and self.size_d > 0):
            raise ValueError(f"{self.kind} geometry needs a positive size_d")

    @property
    def restricted(self) -> bool:
        return self.kind != "free"

    @property
    def dim(self) -> int:
        return DIMENSIONS[self.kind]


@dataclass(frozen=True)
class AcquisitionParams:
    gamma: float = GAMMA_1H
    gradient: float = 0.0  # T/m

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.gradient >= 0:
            raise ValueError("gradient must be non-negative")

    @property
    def gamma_g_sq(self) -> float:
        return (self.gamma * self.gradient) ** 2


@dataclass(frozen=True)
class NoiseSpectrum:
    """Sum-of-Lorentzians spectrum.

    ``components`` holds ``(weight, tau)`` pairs with weights summing to one;
    all of the noise power sits in ``delta_omega_sq`` (rad^2/s^2).
    """

    components: tuple
    delta_omega_sq: float

    def __post_init__(self):
        comps = tuple((float(c), float(t)) for c, t in self.components)
        if not comps:
            raise ValueError("spectrum needs at least one component")
        if any(c <= 0 or t <= 0 for c, t in comps):
            raise ValueError("weights and correlation times must be positive")
        if abs(sum(c for c, _ in comps) - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")
        if not self.delta_omega_sq >= 0:
            raise ValueError("delta_omega_sq must be non-negative")
        object.__setattr__(self, "components", comps)

    @classmethod
    def lorentzian(cls, delta_omega_sq: float, tau_c: float) -> "NoiseSpectrum":
        return cls(((1.0, tau_c),), delta_omega_sq)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c for c, _ in self.components])

    @property
    def taus(self) -> np.ndarray:
        return np.array([t for _, t in self.components])

    @property
    def is_single(self) -> bool:
        return len(self.components) == 1

    @property
    def tau_c(self) -> float:
        """Weighted mean correlation time (the only one for a single Lorentzian)."""
        return float(np.dot(self.weights, self.taus))

    def scaled(self, factor: float) -> "NoiseSpectrum":
        return NoiseSpectrum(self.components, self.delta_omega_sq * factor)


def correlation_time(geom: Geometry) -> float:
    """Single-Lorentzian correlation time of a restricted geometry."""
    if not geom.restricted:
        raise NoCorrelationTime("free diffusion has no finite correlation time")
    return CORRELATION_COEFFICIENTS[geom.kind] * geom.size_d**2 / geom.d0


def restriction_length(tau_c: float, d0: float) -> float:
    """Einstein length l_c = sqrt(2 D0 tau_c)."""
    return math.sqrt(2.0 * d0 * tau_c)


def coordinate_variance(geom: Geometry) -> float:
    """Variance of the gradient-axis coordinate for a uniform fill of the pore."""
    d = geom.size_d
    if geom.kind == "slab":
        return d**2 / 12
    if geom.kind == "cylinder":
        return d**2 / 16
    if geom.kind == "sphere":
        return d**2 / 20
    raise NoCorrelationTime("free diffusion has unbounded position variance")


@lru_cache(maxsize=None)
def _roots(kind: str, count: int) -> tuple:
    if kind == "cylinder":
        return tuple(jnp_zeros(1, count))
    if kind == "sphere":
        def djn(z):
            return spherical_jn(1, z, derivative=True)

        roots, z = [], 0.5
        while len(roots) < count:
            if djn(z) * djn(z + 0.1) < 0:
                roots.append(brentq(djn, z, z + 0.1, xtol=1e-14))
            z += 0.1
        return tuple(roots)
    raise ValueError(kind)


def eigenmodes(geom: Geometry, count: int):
    """Leading ``count`` eigenmodes of <x(0) x(t)> for the pore.

    Returns ``(variances, taus)``: the untruncated sum of ``variances`` is the
    coordinate variance, and mode ``k`` decays as ``exp(-t / taus[k])``.
    """
    if not geom.restricted:
        raise NoSpectrum("free diffusion has no eigenmode expansion")
    d, D = geom.size_d, geom.d0
    if geom.kind == "slab":
        n = 2 * np.arange(count) + 1.0
        return 8 * d**2 / (np.pi**4 * n**4), d**2 / (n**2 * np.pi**2 * D)
    radius = d / 2
    a = np.array(_roots(geom.kind, count))
    shift = 1.0 if geom.kind == "cylinder" else 2.0
    return 2 * radius**2 / (a**2 * (a**2 - shift)), radius**2 / (a**2 * D)


def parse_mode(mode) -> int:
    """Number of Lorentzian components for a mode spec.

    Accepts ``"single"``, ``"multi"`` (4 components), ``"multi:K"`` or an int.
    """
    if isinstance(mode, int):
        k = mode
    elif mode == "single":
        k = 1
    elif mode == "multi":
        k = 4
    elif isinstance(mode, str) and mode.startswith("multi:"):
        try:
            k = int(mode.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad spectrum mode {mode!r}") from None
    else:
        raise ValueError(f"bad spectrum mode {mode!r}")
    if k < 1:
        raise ValueError("spectrum mode needs at least one component")
    return k


def build_spectrum(geom: Geometry, acq: AcquisitionParams, mode="single") -> NoiseSpectrum:
    """Noise spectrum for spins in ``geom`` under gradient ``acq.gradient``.

    ``mode="single"`` gives the one-Lorentzian model with
    ``dw2 = gamma**2 G**2 D0 tau_c``. Any multi mode uses the first K
    diffusion eigenmodes, renormalised so ``g(0)`` equals the exact
    position variance times ``gamma**2 G**2``.
    """
    if not geom.restricted:
        raise NoSpectrum("free diffusion has no stationary spectrum")
    if mode == "single":
        tau = correlation_time(geom)
        return NoiseSpectrum.lorentzian(acq.gamma_g_sq * geom.d0 * tau, tau)
    k = parse_mode(mode)
    variances, taus = eigenmodes(geom, k)
    weights = variances / variances.sum()
    return NoiseSpectrum(tuple(zip(weights, taus)), acq.gamma_g_sq * coordinate_variance(geom))


def g_of_tau(spec: NoiseSpectrum, tau):
    """Frequency autocorrelation g(tau) = dw2 * sum_k c_k exp(-|tau| / tau_k)."""
    tau = np.abs(np.asarray(tau, dtype=float))
    out = sum(c * np.exp(-tau / t) for c, t in spec.components)
    return spec.delta_omega_sq * out


def s_of_omega(spec: NoiseSpectrum, omega):
    """Unit-area spectral density S(omega) = sum_k c_k tau_k / (pi (1 + omega**2 tau_k**2))."""
    omega = np.asarray(omega, dtype=float)
    return sum(c * t / (np.pi * (1.0 + (omega * t) ** 2)) for c, t in spec.components)
