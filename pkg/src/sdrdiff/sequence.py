"""SDR pulse timing and the +/-1 modulation function it imposes.

An SDR train has ``N`` instantaneous pi pulses inside a fixed total time
``TE``. The first ``N - 1`` pulses form a CPMG block with spacing ``x``
(first pulse at ``x/2``); the last pulse sits at ``TE - y/2`` with
``TE = y + (N - 1) x``. ``N = 1`` is the Hahn echo, ``x = y = TE/N`` is
plain CPMG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecompositionError, TimingError

_REL_TOL = 1e-12


@dataclass(frozen=True)
class PulseSequence:
    """Timing of an SDR pi-pulse train (all times in seconds).

    For ``n_pulses == 1`` the x delay is unused and stored as 0.
    """

    n_pulses: int
    x_delay: float
    y_delay: float
    total_time: float

    def __post_init__(self):
        n, x, y, te = self.n_pulses, self.x_delay, self.y_delay, self.total_time
        if int(n) != n or n < 1:
            raise TimingError(f"n_pulses must be a positive integer, got {n!r}")
        if not te > 0:
            raise TimingError(f"total_time must be positive, got {te!r}")
        if not y > 0:
            raise TimingError(f"y delay must be positive, got {y!r}")
        if n == 1:
            if x != 0.0:
                raise TimingError("a single-pulse (Hahn) sequence has no x delay")
            if abs(y - te) > _REL_TOL * te:
                raise TimingError("a Hahn sequence requires y == TE")
            return
        if not x > 0:
            raise TimingError(f"x delay must be positive, got {x!r}")
        if x > te / n * (1 + _REL_TOL):
            raise TimingError(f"x = {x!r} exceeds TE/N = {te / n!r}")
        if abs(y + (n - 1) * x - te) > _REL_TOL * te:
            raise TimingError("timing violates TE = y + (N - 1) x")

    @property
    def is_hahn(self) -> bool:
        return self.n_pulses == 1

    @property
    def is_cpmg(self) -> bool:
        return self.n_pulses == 1 or abs(self.x_delay - self.y_delay) <= _REL_TOL * self.total_time

    def pulse_times(self) -> np.ndarray:
        n, x, y, te = self.n_pulses, self.x_delay, self.y_delay, self.total_time
        times = np.empty(n)
        times[: n - 1] = x / 2 + x * np.arange(n - 1)
        times[n - 1] = te - y / 2
        return times


def build_sdr(n_pulses: int, x_delay: float, total_time: float) -> PulseSequence:
    """Build an SDR sequence, deriving ``y = TE - (N - 1) x``.

    ``x_delay`` is ignored for ``n_pulses == 1`` (Hahn echo).
    """
    if int(n_pulses) != n_pulses or n_pulses < 1:
        raise TimingError(f"n_pulses must be a positive integer, got {n_pulses!r}")
    n_pulses = int(n_pulses)
    if not total_time > 0:
        raise TimingError(f"total_time must be positive, got {total_time!r}")
    if n_pulses == 1:
        return PulseSequence(1, 0.0, float(total_time), float(total_time))
    if not x_delay > 0:
        raise TimingError(f"x delay must be positive, got {x_delay!r}")
    if x_delay > total_time / n_pulses * (1 + _REL_TOL):
        raise TimingError(
            f"x = {x_delay!r} s exceeds TE/N = {total_time / n_pulses!r} s; "
            "y would be shorter than x"
        )
    x_delay = min(float(x_delay), total_time / n_pulses)
    y_delay = total_time - (n_pulses - 1) * x_delay
    if not y_delay > 0:
        raise TimingError(f"derived y delay {y_delay!r} is not positive")
    return PulseSequence(n_pulses, x_delay, y_delay, float(total_time))


def sdr_boundaries(n_pulses: int, x_values, total_time: float) -> np.ndarray:
    """Modulation boundaries for a batch of x delays, shape ``(len(x), N + 2)``.

    Same validation and clamping as ``build_sdr``, without building objects.
    """
    x = np.atleast_1d(np.asarray(x_values, dtype=float))
    if n_pulses == 1 or x.size == 0:
        return np.stack([modulation(build_sdr(n_pulses, xi, total_time)).boundaries for xi in x]).reshape(x.size, -1)
    limit = total_time / n_pulses
    bad = ~((x > 0) & (x <= limit * (1 + _REL_TOL)))
    if np.any(bad):
        build_sdr(n_pulses, float(x[np.argmax(bad)]), total_time)  # raises with the usual message
    x = np.minimum(x, limit)
    y = total_time - (n_pulses - 1) * x
    out = np.empty((x.size, n_pulses + 2))
    out[:, 0] = 0.0
    out[:, 1:n_pulses] = x[:, None] / 2 + x[:, None] * np.arange(n_pulses - 1)
    out[:, n_pulses] = total_time - y / 2
    out[:, n_pulses + 1] = total_time
    return out


def build_cpmg(n_pulses: int, total_time: float) -> PulseSequence:
    return build_sdr(n_pulses, total_time / n_pulses, total_time)


def build_hahn(total_time: float) -> PulseSequence:
    return build_sdr(1, 0.0, total_time)


@dataclass(frozen=True, eq=False)
class ModulationFunction:
    """Piecewise-constant +/-1 function on ``[0, boundaries[-1]]``.

    Segment ``k`` spans ``boundaries[k]..boundaries[k+1]`` and carries sign
    ``initial_sign * (-1)**k``. Any strictly increasing boundary list is
    accepted, so non-SDR patterns can be represented too.
    """

    boundaries: np.ndarray
    initial_sign: int = 1

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("need at least two boundaries")
        if b[0] != 0.0:
            raise ValueError("modulation must start at t = 0")
        if np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        if self.initial_sign not in (1, -1):
            raise ValueError("initial_sign must be +1 or -1")
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)

    @property
    def duration(self) -> float:
        return float(self.boundaries[-1])

    @property
    def n_segments(self) -> int:
        return self.boundaries.size - 1

    @property
    def n_flips(self) -> int:
        return self.boundaries.size - 2

    @property
    def signs(self) -> np.ndarray:
        k = np.arange(self.n_segments)
        return self.initial_sign * np.where(k % 2 == 0, 1.0, -1.0)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def signed_area(self) -> float:
        return float(np.sum(self.signs * self.lengths))

    def jumps(self) -> np.ndarray:
        """Size of the step in f at every boundary, including the two ends."""
        s = self.signs
        return np.concatenate(([s[0]], np.diff(s), [-s[-1]]))

    def __call__(self, t):
        """Evaluate f(t); 0 outside ``[0, duration]``.

        At an interior boundary the value of the following segment is used.
        """
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.boundaries, t, side="right") - 1
        idx = np.clip(idx, 0, self.n_segments - 1)
        out = self.signs[idx]
        return np.where((t < 0) | (t > self.duration), 0.0, out)

    def __eq__(self, other):
        if not isinstance(other, ModulationFunction):
            return NotImplemented
        return self.initial_sign == other.initial_sign and np.array_equal(
            self.boundaries, other.boundaries
        )

    __hash__ = None


def modulation(seq: PulseSequence) -> ModulationFunction:
    b = np.concatenate(([0.0], seq.pulse_times(), [seq.total_time]))
    return ModulationFunction(b)


def _cpmg_block(n_pulses: int, duration: float) -> ModulationFunction:
    spacing = duration / n_pulses
    pulses = spacing / 2 + spacing * np.arange(n_pulses)
    return ModulationFunction(np.concatenate(([0.0], pulses, [duration])))


def decompose(seq: PulseSequence):
    """Split an SDR modulation into its CPMG block and its Hahn tail.

    Returns ``(cpmg_part, hahn_part, parity)``: ``cpmg_part`` is the
    (N-1)-pulse CPMG modulation on ``[0, (N-1) x]``, ``hahn_part`` the
    single-pulse modulation on ``[0, y]`` and ``parity = (-1)**(N-1)`` the
    sign the Hahn part carries once shifted to start at ``(N-1) x``.
    """
    if seq.n_pulses < 2:
        raise DecompositionError("a Hahn sequence has no CPMG part")
    n = seq.n_pulses
    cpmg = _cpmg_block(n - 1, (n - 1) * seq.x_delay)
    hahn = _cpmg_block(1, seq.y_delay)
    parity = 1 if (n - 1) % 2 == 0 else -1
    return cpmg, hahn, parity


def reassemble(cpmg_part: ModulationFunction, hahn_part: ModulationFunction, parity: int):
    """Return a callable ``f(t)`` that glues the two parts back together."""
    shift = cpmg_part.duration

    def f(t):
        t = np.asarray(t, dtype=float)
        head = np.where(t < shift, cpmg_part(t), 0.0)
        tail = np.where(t >= shift, parity * hahn_part(t - shift), 0.0)
        return head + tail

    return f
