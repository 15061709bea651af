"""Gaussian-phase decay of the spin signal under a pulse train.

The phase variance is the double time integral of the modulation against
the frequency autocorrelation,

    1/2 <phi**2> = 1/2 iint f(t1) f(t2) g(|t1 - t2|) dt1 dt2
                 = (dw2 / 2) int S(omega) |F(omega)|**2 domega,

and M = exp(-1/2 <phi**2>). For exponential correlations each pair of
constant segments integrates in closed form (``variance_exact``); the
spectral form is kept as an independent check (``variance_quadrature``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .curve import DecayCurve
from .errors import DecompositionError
from .filters import filter_on_panels
from .noise import NoiseSpectrum
from .sequence import (
    ModulationFunction,
    PulseSequence,
    build_cpmg,
    build_hahn,
    decompose,
    modulation,
    sdr_boundaries,
)


class AsymptoteWarning(RuntimeWarning):
    """Restricted-regime formula evaluated outside x, y >> tau_c."""


@dataclass(frozen=True)
class DecayResult:
    variance_half: float
    magnetization: float

    @classmethod
    def from_variance(cls, variance_half: float) -> "DecayResult":
        return cls(float(variance_half), math.exp(-variance_half))


def _as_modulation(seq) -> ModulationFunction:
    return seq if isinstance(seq, ModulationFunction) else modulation(seq)


def _h(u):
    # u - 1 + exp(-u), cancellation-free for small u
    u = np.asarray(u, dtype=float)
    series = u**2 * (0.5 - u / 6 * (1 - u / 4 * (1 - u / 5 * (1 - u / 6 * (1 - u / 7 * (1 - u / 8))))))
    return np.where(u < 0.05, series, u + np.expm1(-u))


def _pair_matrix(boundaries, signs, tau):
    """Matrix of s_i s_j iint_{seg i} iint_{seg j} exp(-|t1 - t2| / tau).

    Leading axes of ``boundaries`` and ``signs`` are batch axes.
    """
    a, b = boundaries[..., :-1], boundaries[..., 1:]
    u = (b - a) / tau
    e = -np.expm1(-u)
    gap = np.maximum(a[..., None, :] - b[..., :, None], 0.0)  # a_j - b_i for i < j
    upper = np.triu(tau**2 * np.exp(-gap / tau) * e[..., :, None] * e[..., None, :], k=1)
    diag = 2 * tau**2 * _h(u)
    m = upper + np.swapaxes(upper, -1, -2) + np.eye(u.shape[-1]) * diag[..., None, :]
    return m * signs[..., :, None] * signs[..., None, :]


def _variance_matrix(boundaries, signs, spec: NoiseSpectrum):
    total = sum(c * _pair_matrix(boundaries, signs, t) for c, t in spec.components)
    return 0.5 * spec.delta_omega_sq * total


def variance_exact(seq, spec: NoiseSpectrum) -> DecayResult:
    """Exact 1/2 <phi**2> by closed-form integration over all segment pairs.

    ``seq`` may be a PulseSequence or any ModulationFunction.
    """
    f = _as_modulation(seq)
    if spec.delta_omega_sq == 0:
        return DecayResult(0.0, 1.0)
    return DecayResult.from_variance(_variance_matrix(f.boundaries, f.signs, spec).sum())


def _omega_max(f: ModulationFunction, spec: NoiseSpectrum) -> float:
    return max(100.0 / spec.taus.min(), 100.0 * max(f.n_flips, 1) / f.duration)


def _lorentz_tail(spec: NoiseSpectrum, omega_max: float) -> float:
    # sum_k c_k int_{omega_max}^inf S_k(w) / w**2 dw
    out = 0.0
    for c, t in spec.components:
        z = omega_max * t
        out += c * t / math.pi * (1.0 / omega_max - t * math.atan(1.0 / z))
    return out


def _spectral_breakpoints(f: ModulationFunction, spec: NoiseSpectrum, omega_max: float, extra=()):
    period = 2 * np.pi / f.duration
    grid = np.arange(0.0, omega_max, period)
    knees = [1.0 / t for t in spec.taus] + [3.0 / t for t in spec.taus]
    lengths = f.lengths
    peaks = [np.pi / lengths.min(), np.pi / lengths.max(), np.pi * max(f.n_flips, 1) / f.duration]
    pts = np.concatenate((grid, knees, peaks, list(extra), [omega_max]))
    return pts[(pts >= 0) & (pts <= omega_max)]


def _spectral_variance(weight, spec, omega_max, breakpoints, jump_mean, rtol, atol=0.0):
    """``weight(centres, halves, nodes)`` gives the filter term on GK panels."""

    def integrand(centres, halves, nodes):
        w = centres[:, None] + halves[:, None] * nodes
        s = sum(c * t / (np.pi * (1.0 + (w * t) ** 2)) for c, t in spec.components)
        return s * weight(centres, halves, nodes)

    value, err = quadrature.integrate(integrand, breakpoints, rtol=rtol, atol=atol, panelwise=True)
    tail = jump_mean * _lorentz_tail(spec, omega_max)
    # (dw2 / 2) * 2 * int_0^inf, integrand is even in omega
    return spec.delta_omega_sq * (value + tail), spec.delta_omega_sq * err


def variance_quadrature(seq, spec: NoiseSpectrum, rtol: float = 1e-7) -> DecayResult:
    """1/2 <phi**2> from the spectral overlap of S(omega) and |F(omega)|**2.

    Integrates ``|omega| <= omega_max = max(100 / min tau_k, 100 N / TE)``
    adaptively and adds the Lorentzian tail beyond it, using the large-omega
    mean ``sum(jumps**2) / omega**2`` of the filter. Raises QuadratureError
    if the error target is missed.
    """
    f = _as_modulation(seq)
    if spec.delta_omega_sq == 0:
        return DecayResult(0.0, 1.0)
    omega_max = _omega_max(f, spec)
    bp = _spectral_breakpoints(f, spec, omega_max)
    jump_mean = float(np.sum(f.jumps() ** 2))

    def weight(centres, halves, nodes):
        return np.abs(filter_on_panels(f, centres, halves, nodes)) ** 2

    value, _ = _spectral_variance(weight, spec, omega_max, bp, jump_mean, rtol)
    return DecayResult.from_variance(value)


@dataclass(frozen=True)
class AsymptoteResult:
    variance_half: float
    magnetization: float
    shift: float  # (1 + 2N) dw2 tau_c**2
    regime_ok: bool


def restricted_asymptote(seq: PulseSequence, spec: NoiseSpectrum) -> AsymptoteResult:
    """Long-delay limit dw2 tau_c (TE - (1 + 2N) tau_c).

    Flags (and warns) when x or y is shorter than 5 tau_c.
    """
    if not spec.is_single:
        raise ValueError("restricted asymptote needs a single-Lorentzian spectrum")
    tau = spec.taus[0]
    n, te = seq.n_pulses, seq.total_time
    delays = [seq.y_delay] if n == 1 else [seq.x_delay, seq.y_delay]
    ok = min(delays) >= 5 * tau
    if not ok:
        warnings.warn(
            f"restricted asymptote used with min(x, y) = {min(delays):.3g} s < 5 tau_c = {5 * tau:.3g} s",
            AsymptoteWarning,
            stacklevel=2,
        )
    dw2 = spec.delta_omega_sq
    shift = (1 + 2 * n) * dw2 * tau**2
    var = dw2 * tau * te - shift
    return AsymptoteResult(var, math.exp(-var), shift, ok)


@dataclass(frozen=True)
class DeltaMSDR:
    """CPMG/Hahn contrast at equal TE, relative to the Hahn signal."""

    closed_form: float  # exp{2 (N - 1) dw2 tau_c**2} - 1
    numeric: float  # M_cpmg(TE, N) / M_hahn(TE) - 1 from variance_exact
    log_contrast: float  # ln(closed_form + 1)


def delta_m_sdr(n_pulses: int, spec: NoiseSpectrum, te: float) -> DeltaMSDR:
    if not spec.is_single:
        raise ValueError("the contrast identity needs a single-Lorentzian spectrum")
    tau = spec.taus[0]
    log_c = 2 * (n_pulses - 1) * spec.delta_omega_sq * tau**2
    hahn = variance_exact(build_hahn(te), spec).variance_half
    cpmg = variance_exact(build_cpmg(n_pulses, te), spec).variance_half
    return DeltaMSDR(math.expm1(log_c), math.expm1(hahn - cpmg), log_c)


def log_contrast_from_length(n_pulses: int, l_c: float, gamma: float, gradient: float, d0: float) -> float:
    """ln(dM/M + 1) = (N - 1) l_c**6 gamma**2 G**2 / (4 D0**2)."""
    return (n_pulses - 1) * l_c**6 * gamma**2 * gradient**2 / (4 * d0**2)


@dataclass(frozen=True)
class SDRDecay:
    """SDR decay with its CPMG, Hahn and interference factors."""

    total: DecayResult
    cpmg: DecayResult  # CPMG_{N-1} over (N - 1) x
    hahn: DecayResult  # Hahn over y
    cross: DecayResult  # interference between the two blocks

    @property
    def product(self) -> float:
        return self.cpmg.magnetization * self.hahn.magnetization * self.cross.magnetization


def _split_sdr(seq: PulseSequence):
    """SDR segments with the segment straddling (N-1) x cut in two."""
    f = modulation(seq)
    cut = (seq.n_pulses - 1) * seq.x_delay
    b = f.boundaries
    k = int(np.searchsorted(b, cut))
    boundaries = np.concatenate((b[:k], [cut], b[k:]))
    signs = np.insert(f.signs, k - 1, f.signs[k - 1])
    in_cpmg = np.arange(signs.size) < k
    return boundaries, signs, in_cpmg


def sdr_decay(seq: PulseSequence, spec: NoiseSpectrum, method: str = "exact", rtol: float = 1e-8) -> SDRDecay:
    """Factor the SDR decay as M_cpmg * M_hahn * M_cross.

    ``method="exact"`` splits the segment-pair sum by block;
    ``method="quadrature"`` integrates each filter term against S(omega).
    """
    if seq.n_pulses < 2:
        raise DecompositionError("a Hahn sequence has no CPMG part")
    if method == "exact":
        boundaries, signs, in_cpmg = _split_sdr(seq)
        v = _variance_matrix(boundaries, signs, spec)
        vc = v[np.ix_(in_cpmg, in_cpmg)].sum()
        vh = v[np.ix_(~in_cpmg, ~in_cpmg)].sum()
        vx = v.sum() - vc - vh
        total = variance_exact(seq, spec)
    elif method == "quadrature":
        vc, vh, vx, total = _sdr_decay_quadrature(seq, spec, rtol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SDRDecay(
        total,
        DecayResult.from_variance(vc),
        DecayResult.from_variance(vh),
        DecayResult.from_variance(vx),
    )


def _sdr_decay_quadrature(seq, spec, rtol):
    if spec.delta_omega_sq == 0:
        return 0.0, 0.0, 0.0, DecayResult(0.0, 1.0)
    f = modulation(seq)
    cpmg, hahn, parity = decompose(seq)
    omega_max = _omega_max(f, spec)
    bp = _spectral_breakpoints(f, spec, omega_max, extra=[np.pi / seq.x_delay, np.pi / seq.y_delay])
    jc = float(np.sum(cpmg.jumps() ** 2))
    jh = float(np.sum(hahn.jumps() ** 2))
    jt = float(np.sum(f.jumps() ** 2))
    shift = seq.total_time - seq.y_delay

    def cpmg_sq(centres, halves, nodes):
        return np.abs(filter_on_panels(cpmg, centres, halves, nodes)) ** 2

    def hahn_sq(centres, halves, nodes):
        return np.abs(filter_on_panels(hahn, centres, halves, nodes)) ** 2

    def cross(centres, halves, nodes):
        w = centres[:, None] + halves[:, None] * nodes
        fc = filter_on_panels(cpmg, centres, halves, nodes)
        fh = filter_on_panels(hahn, centres, halves, nodes)
        return parity * 2.0 * np.real(np.exp(1j * w * shift) * fc * np.conj(fh))

    vc, _ = _spectral_variance(cpmg_sq, spec, omega_max, bp, jc, rtol)
    vh, _ = _spectral_variance(hahn_sq, spec, omega_max, bp, jh, rtol)
    scale = (vc + vh) / spec.delta_omega_sq
    vx, _ = _spectral_variance(cross, spec, omega_max, bp, jt - jc - jh, 0.0, atol=rtol * scale)
    return vc, vh, vx, DecayResult.from_variance(vc + vh + vx)


def sdr_scan(n_pulses: int, te: float, spec: NoiseSpectrum, x_values, t2: float | None = None, acq=None) -> DecayCurve:
    """M_SDR(x) at fixed TE and N. ``t2`` adds a uniform exp(-TE/T2) factor."""
    x_values = np.asarray(x_values, dtype=float)
    base = math.exp(-te / t2) if t2 else 1.0
    if x_values.size == 0 or spec.delta_omega_sq == 0:
        return DecayCurve(x_values, np.full(x_values.shape, base), te, n_pulses, acq)
    # every SDR train with the same N has N + 1 segments, so the scan is one batch
    boundaries = sdr_boundaries(n_pulses, x_values, te)
    signs = np.where(np.arange(n_pulses + 1) % 2 == 0, 1.0, -1.0)
    variance = _variance_matrix(boundaries, signs, spec).sum(axis=(-1, -2))
    return DecayCurve(x_values, base * np.exp(-variance), te, n_pulses, acq)
