"""Filter functions F(omega) = integral of f(t) exp(-i omega t) dt.

Each constant segment of the modulation transforms in closed form, so no
sampling of f is ever needed. With this convention Parseval reads
``(1/2 pi) * integral |F|**2 domega = TE``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sequence import ModulationFunction, PulseSequence, decompose, modulation


def filter_function(f: ModulationFunction, omega):
    """Complex F(omega) for a piecewise-constant modulation.

    Uses ``L * exp(-i omega m) * sinc(omega L / 2 pi)`` per segment (midpoint
    ``m``, length ``L``), which is exact and smooth through omega = 0 where
    it returns the signed area.
    """
    omega = np.asarray(omega, dtype=float)
    w = omega[..., None]
    lengths = f.lengths
    mids = 0.5 * (f.boundaries[:-1] + f.boundaries[1:])
    terms = (f.signs * lengths) * np.sinc(w * lengths / (2 * np.pi)) * np.exp(-1j * w * mids)
    return terms.sum(axis=-1)


def filter_squared(f: ModulationFunction, omega):
    return np.abs(filter_function(f, omega)) ** 2


@dataclass(frozen=True)
class SDRFilter:
    """|F_SDR|**2 split into CPMG, Hahn and interference parts (s**2)."""

    cpmg: np.ndarray
    hahn: np.ndarray
    cross: np.ndarray

    @property
    def total(self):
        return self.cpmg + self.hahn + self.cross


def sdr_filter_squared(seq: PulseSequence, omega) -> SDRFilter:
    """Three-term decomposition of the SDR filter.

    ``cross = parity * 2 Re{exp(i omega (TE - y)) F_cpmg conj(F_hahn)}`` is
    the interference between the CPMG block and the Hahn tail.
    """
    cpmg, hahn, parity = decompose(seq)
    omega = np.asarray(omega, dtype=float)
    fc = filter_function(cpmg, omega)
    fh = filter_function(hahn, omega)
    phase = np.exp(1j * omega * (seq.total_time - seq.y_delay))
    cross = parity * 2.0 * np.real(phase * fc * np.conj(fh))
    return SDRFilter(np.abs(fc) ** 2, np.abs(fh) ** 2, cross)


def sequence_filter_squared(seq: PulseSequence, omega):
    return filter_squared(modulation(seq), omega)



def filter_on_panels(f: ModulationFunction, centres, halves, nodes):
    """F at ``centres[p] + halves[p] * nodes[n]``, shape ``(panels, nodes)``.

    Uses the jump form ``F = (1 / i omega) sum_j c_j exp(-i omega t_j)`` and
    factorises the exponential into a per-panel part and a per-node part
    shared by all panels of equal width. Nodes exactly at omega = 0 fall
    back to the signed area.
    """
    t = f.boundaries
    c = f.jumps()
    centres = np.asarray(centres, dtype=float)
    halves = np.asarray(halves, dtype=float)
    out = np.empty((centres.size, nodes.size), dtype=complex)
    widths, inverse = np.unique(halves, return_inverse=True)
    for g, h in enumerate(widths):
        idx = np.flatnonzero(inverse == g)
        per_node = np.exp(-1j * h * nodes[:, None] * t[None, :])
        per_panel = np.exp(-1j * centres[idx, None] * t[None, :]) * c
        omega = centres[idx, None] + h * nodes[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[idx] = (per_panel @ per_node.T) / (1j * omega)
        zero = omega == 0
        if np.any(zero):
            out[idx] = np.where(zero, f.signed_area(), out[idx])
    return out
