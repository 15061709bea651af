"""Random-walk ground truth for restricted diffusion under a pulse train.

Walkers start uniformly inside the pore and take Gaussian steps with
specular reflection at the wall. Slabs are walked as a 1-D interval,
cylinders as the 2-D cross-section disc, spheres as a 3-D ball; the
gradient is always along the first coordinate.

Each walker draws from its own Philox stream keyed by ``(seed, walker)``, so
results are bit-identical for any number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import curve_fit

from .errors import BurnInError, StepSizeError
from .noise import AcquisitionParams, Geometry, correlation_time
from .rng import STREAM_INIT, STREAM_STEP, normals4, split_seed, uniforms4
from .sequence import ModulationFunction, PulseSequence, modulation

_KIND_CODE = {"free": 0, "slab": 1, "cylinder": 2, "sphere": 3}
_INSIDE = 1.0 - 1e-12
_BLOCK = 8192  # walkers per dispatch block


@dataclass(frozen=True)
class WalkSpec:
    """Random-walk settings. Raises StepSizeError if ``dt`` is too coarse."""

    geometry: Geometry
    dt: float
    n_walkers: int
    seed: int
    duration: float

    def __post_init__(self):
        if self.n_walkers < 1:
            raise ValueError("n_walkers must be at least 1")
        if not (self.dt > 0 and self.duration > 0):
            raise ValueError("dt and duration must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        limit = max_dt(self.geometry)
        if self.dt > limit * (1 + 1e-9):
            raise StepSizeError(
                f"dt = {self.dt:.4g} s is too coarse for a {self.geometry.kind} of size "
                f"{self.geometry.size_d:.4g} m; use dt <= {limit:.4g} s",
                suggested_dt=limit,
            )

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.duration / self.dt * (1 - 1e-12)))

    @classmethod
    def auto(cls, geometry: Geometry, duration: float, n_walkers: int, seed: int = 0, dt: float | None = None):
        return cls(geometry, dt if dt is not None else default_dt(geometry, duration), n_walkers, seed, duration)


def max_dt(geometry: Geometry) -> float:
    """Largest step with dt <= tau_c / 50 and rms step sqrt(2 dim D0 dt) <= d / 10."""
    if not geometry.restricted:
        return math.inf
    by_tau = correlation_time(geometry) / 50
    by_length = (geometry.size_d / 10) ** 2 / (2 * geometry.dim * geometry.d0)
    return min(by_tau, by_length)


def default_dt(geometry: Geometry, duration: float) -> float:
    if geometry.restricted:
        return max_dt(geometry)
    return duration / 2000


@dataclass(frozen=True)
class EnsembleSignal:
    times: np.ndarray
    magnetization: np.ndarray
    stderr: np.ndarray
    imaginary: np.ndarray  # ensemble mean of sin(phi); should vanish


# ---------------------------------------------------------------- kernels


@njit(cache=True, inline="always")
def _reflect_interval(x, h):
    while x > h or x < -h:
        if x > h:
            x = 2.0 * h - x
        else:
            x = -2.0 * h - x
    if x == h or x == -h:
        x *= _INSIDE
    return x


@njit(cache=True, inline="always")
def _reflect_ball(px, py, pz, qx, qy, qz, r):
    """Specularly reflect the move p -> q off the sphere |.| = r until q is inside."""
    r2 = r * r
    for _ in range(64):
        q2 = qx * qx + qy * qy + qz * qz
        if q2 < r2:
            return qx, qy, qz
        dx, dy, dz = qx - px, qy - py, qz - pz
        a = dx * dx + dy * dy + dz * dz
        b = px * dx + py * dy + pz * dz
        c = px * px + py * py + pz * pz - r2
        t = (-b + math.sqrt(max(b * b - a * c, 0.0))) / a
        cx, cy, cz = px + t * dx, py + t * dy, pz + t * dz
        norm = math.sqrt(cx * cx + cy * cy + cz * cz)
        nx, ny, nz = cx / norm, cy / norm, cz / norm
        rx, ry, rz = qx - cx, qy - cy, qz - cz
        dot = rx * nx + ry * ny + rz * nz
        qx, qy, qz = cx + rx - 2.0 * dot * nx, cy + ry - 2.0 * dot * ny, cz + rz - 2.0 * dot * nz
        px, py, pz = cx * _INSIDE, cy * _INSIDE, cz * _INSIDE
    # pathological grazing sequence: pull back radially
    q = math.sqrt(qx * qx + qy * qy + qz * qz)
    s = r * _INSIDE / q
    return qx * s, qy * s, qz * s


@njit(cache=True)
def _initial_position(kind, dim, r, walker, k0, k1):
    if kind == 0:
        return 0.0, 0.0, 0.0
    attempt = 0
    while True:
        u0, u1, u2, _ = uniforms4(attempt, STREAM_INIT, walker, k0, k1)
        attempt += 1
        x = (2.0 * u0 - 1.0) * r
        y = (2.0 * u1 - 1.0) * r if dim >= 2 else 0.0
        z = (2.0 * u2 - 1.0) * r if dim >= 3 else 0.0
        if kind == 1:
            return x * _INSIDE, 0.0, 0.0
        if x * x + y * y + z * z < (r * _INSIDE) ** 2:
            return x, y, z


@njit(cache=True, inline="always")
def _next_normal(buf, pos, draw, walker, k0, k1):
    # normals are consumed sequentially; draw j is element j % 4 of block j // 4
    if pos == 4:
        z0, z1, z2, z3 = normals4(draw // 4, STREAM_STEP, walker, k0, k1)
        buf[0] = z0
        buf[1] = z1
        buf[2] = z2
        buf[3] = z3
        pos = 0
    return buf[pos], pos + 1, draw + 1


@njit(cache=True, inline="always")
def _step(kind, dim, r, sigma, x, y, z, buf, pos, draw, walker, k0, k1):
    zx, pos, draw = _next_normal(buf, pos, draw, walker, k0, k1)
    nx = x + sigma * zx
    ny = y
    nz = z
    if dim >= 2:
        zy, pos, draw = _next_normal(buf, pos, draw, walker, k0, k1)
        ny = y + sigma * zy
    if dim >= 3:
        zz, pos, draw = _next_normal(buf, pos, draw, walker, k0, k1)
        nz = z + sigma * zz
    if kind == 1:
        nx = _reflect_interval(nx, r)
    elif kind >= 2:
        nx, ny, nz = _reflect_ball(x, y, z, nx, ny, nz, r)
    return nx, ny, nz, pos, draw


@njit(cache=True, nogil=True)
def _phase_kernel(kind, dim, r, sigma, dt, n_steps, events, seq_ptr, seq_event, seq_coef, seed, w_lo, w_hi, out):
    """Per-walker unit phases sum_k s_k int_{segment k} x dt for each sequence."""
    k0, k1 = split_seed(seed)
    n_events = events.size
    cum = np.empty(n_events)
    buf = np.empty(4)
    for w in range(w_lo, w_hi):
        x, y, z = _initial_position(kind, dim, r, w, k0, k1)
        pos = 4
        draw = 0
        integral = 0.0
        e = 0
        while e < n_events and events[e] <= 0.0:
            cum[e] = 0.0
            e += 1
        for k in range(n_steps):
            if e == n_events:
                break
            nx, ny, nz, pos, draw = _step(kind, dim, r, sigma, x, y, z, buf, pos, draw, w, k0, k1)
            t0 = k * dt
            t1 = (k + 1) * dt
            slope = (nx - x) / dt
            while e < n_events and events[e] <= t1:
                s = events[e] - t0
                cum[e] = integral + x * s + 0.5 * slope * s * s
                e += 1
            integral += 0.5 * (x + nx) * dt
            x, y, z = nx, ny, nz
        while e < n_events:
            cum[e] = integral
            e += 1
        row = w - w_lo
        for q in range(seq_ptr.size - 1):
            acc = 0.0
            for j in range(seq_ptr[q], seq_ptr[q + 1]):
                acc += seq_coef[j] * cum[seq_event[j]]
            out[row, q] = acc


@njit(cache=True, nogil=True)
def _record_kernel(kind, dim, r, sigma, n_steps, stride, seed, w_lo, w_hi, out):
    """Gradient-axis coordinate of each walker every ``stride`` steps."""
    k0, k1 = split_seed(seed)
    buf = np.empty(4)
    for w in range(w_lo, w_hi):
        x, y, z = _initial_position(kind, dim, r, w, k0, k1)
        pos = 4
        draw = 0
        row = w - w_lo
        out[row, 0] = x
        for k in range(1, n_steps + 1):
            x, y, z, pos, draw = _step(kind, dim, r, sigma, x, y, z, buf, pos, draw, w, k0, k1)
            if k % stride == 0:
                out[row, k // stride] = x


# ---------------------------------------------------------------- drivers


def _geometry_args(spec: WalkSpec):
    g = spec.geometry
    r = 0.0 if not g.restricted else g.size_d / 2
    sigma = math.sqrt(2.0 * g.d0 * spec.dt)
    return _KIND_CODE[g.kind], g.dim, r, sigma


def _dispatch(kernel, n_walkers, width, workers, *args):
    """Run ``kernel(*args, w_lo, w_hi, out)`` over all walkers; output rows by walker."""
    out = np.empty((n_walkers, width))
    workers = max(1, int(workers))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, n_walkers, _BLOCK):
            stop = min(start + _BLOCK, n_walkers)
            edges = np.linspace(start, stop, workers + 1).astype(np.int64)
            jobs = [
                pool.submit(kernel, *args, int(lo), int(hi), out[lo:hi])
                for lo, hi in zip(edges[:-1], edges[1:])
                if hi > lo
            ]
            for job in jobs:
                job.result()
    return out


def _phase_tables(mods):
    events = np.unique(np.concatenate([m.boundaries for m in mods]))
    ptr, idx, coef = [0], [], []
    for m in mods:
        idx.extend(np.searchsorted(events, m.boundaries))
        coef.extend(-m.jumps())
        ptr.append(len(idx))
    return events, np.array(ptr, dtype=np.int64), np.array(idx, dtype=np.int64), np.array(coef, dtype=float)


def simulate_phases(spec: WalkSpec, sequences, workers: int = 1) -> np.ndarray:
    """Per-walker phase per unit gamma*G (m s), shape ``(n_walkers, n_sequences)``.

    All sequences are applied to the same trajectories; pulse times are
    honoured exactly by splitting the step that contains them.
    """
    mods = [s if isinstance(s, ModulationFunction) else modulation(s) for s in sequences]
    longest = max(m.duration for m in mods)
    if longest > spec.duration * (1 + 1e-12):
        raise ValueError(f"sequence of {longest:.4g} s exceeds walk duration {spec.duration:.4g} s")
    events, ptr, idx, coef = _phase_tables(mods)
    kind, dim, r, sigma = _geometry_args(spec)
    n_steps = int(math.ceil(longest / spec.dt * (1 - 1e-12)))
    return _dispatch(
        _phase_kernel, spec.n_walkers, len(mods), workers,
        kind, dim, r, sigma, spec.dt, n_steps, events, ptr, idx, coef, np.uint64(spec.seed),
    )


def ensemble_signal(phases: np.ndarray, times, acq: AcquisitionParams) -> EnsembleSignal:
    """Ensemble magnetization <cos phi> from unit phases at gradient ``acq.gradient``."""
    phi = acq.gamma * acq.gradient * phases
    cos = np.cos(phi)
    n = phases.shape[0]
    mag = cos.mean(axis=0)
    err = cos.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mag)
    return EnsembleSignal(np.asarray(times, dtype=float), mag, err, np.sin(phi).mean(axis=0))


def simulate_decay(spec: WalkSpec, sequences, acq: AcquisitionParams, workers: int = 1) -> EnsembleSignal:
    """Ensemble magnetization for one sequence or a list sharing the same walkers."""
    if isinstance(sequences, (PulseSequence, ModulationFunction)):
        sequences = [sequences]
    times = [s.total_time if isinstance(s, PulseSequence) else s.duration for s in sequences]
    return ensemble_signal(simulate_phases(spec, sequences, workers), times, acq)


def record_positions(spec: WalkSpec, stride: int = 1, workers: int = 1) -> np.ndarray:
    """Gradient-axis coordinates, shape ``(n_walkers, n_steps // stride + 1)``."""
    kind, dim, r, sigma = _geometry_args(spec)
    n_steps = spec.n_steps - spec.n_steps % stride
    return _dispatch(
        _record_kernel, spec.n_walkers, n_steps // stride + 1, workers,
        kind, dim, r, sigma, n_steps, stride, np.uint64(spec.seed),
    )


@dataclass(frozen=True)
class MSDCurve:
    times: np.ndarray
    msd: np.ndarray  # m^2, along the gradient axis
    stderr: np.ndarray
    squared: np.ndarray  # per-walker squared displacements, (walkers, times)

    def plateau(self, t_min: float):
        """Mean and standard error of the MSD averaged over ``t >= t_min``."""
        per_walker = self.squared[:, self.times >= t_min].mean(axis=1)
        return per_walker.mean(), per_walker.std(ddof=1) / math.sqrt(per_walker.size)


def simulate_msd(spec: WalkSpec, n_samples: int = 200, workers: int = 1) -> MSDCurve:
    stride = max(1, spec.n_steps // n_samples)
    x = record_positions(spec, stride, workers)
    sq = (x - x[:, :1]) ** 2
    times = spec.dt * stride * np.arange(x.shape[1])
    n = x.shape[0]
    err = sq.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(x.shape[1])
    return MSDCurve(times, sq.mean(axis=0), err, sq)


@dataclass(frozen=True)
class AutocorrelationCurve:
    lags: np.ndarray
    g: np.ndarray  # rad^2/s^2
    stderr: np.ndarray


def simulate_autocorrelation(
    spec: WalkSpec, acq: AcquisitionParams, max_lag: float | None = None, n_lags: int = 100, workers: int = 1
) -> AutocorrelationCurve:
    """Time-and-ensemble averaged g(tau) = gamma**2 G**2 <dx(t) dx(t + tau)>.

    The first 5 tau_c of every trajectory are discarded as burn-in.
    """
    tau_c = correlation_time(spec.geometry)
    if spec.duration < 20 * tau_c:
        raise BurnInError(f"duration {spec.duration:.4g} s is shorter than 20 tau_c = {20 * tau_c:.4g} s")
    max_lag = 5 * tau_c if max_lag is None else max_lag
    stride = max(1, int(round(max_lag / n_lags / spec.dt)))
    x = record_positions(spec, stride, workers)
    sample_dt = stride * spec.dt
    burn = int(math.ceil(5 * tau_c / sample_dt))
    x = x[:, burn:]
    n_lag = int(round(max_lag / sample_dt))
    if n_lag >= x.shape[1]:
        raise BurnInError("walk too short for the requested maximum lag")
    x = x - x.mean()
    width = x.shape[1] - n_lag
    per_walker = np.empty((x.shape[0], n_lag + 1))
    for k in range(n_lag + 1):
        per_walker[:, k] = np.mean(x[:, :width] * x[:, k:k + width], axis=1)
    scale = acq.gamma_g_sq
    n = x.shape[0]
    err = per_walker.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(n_lag + 1)
    return AutocorrelationCurve(sample_dt * np.arange(n_lag + 1), scale * per_walker.mean(axis=0), scale * err)


def fit_exponential(curve: AutocorrelationCurve, max_lag: float | None = None):
    """Least-squares fit of ``g0 * exp(-tau / tau_fit)``; returns ``(g0, tau_fit)``."""
    mask = np.ones(curve.lags.size, bool) if max_lag is None else curve.lags <= max_lag
    lags, g = curve.lags[mask], curve.g[mask]
    positive = g > 0
    slope = np.polyfit(lags[positive], np.log(g[positive]), 1)[0]
    p0 = (g[0], -1.0 / slope if slope < 0 else lags[-1])
    (g0, tau), _ = curve_fit(lambda t, a, b: a * np.exp(-t / b), lags, g, p0=p0)
    return float(g0), float(tau)
