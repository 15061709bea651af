"""Pore-diameter estimation from SDR decay curves M(x) at fixed TE, N and G.

The forward model is ``A * M_SDR(x; d)`` with ``M_SDR`` from the exact
Gaussian-phase engine. Data normalized by their first point are compared
with the model normalized the same way, so ``A`` stays near one however
strong the decay. The fit runs in ``(log d, A)`` (optionally ``log D0``),
starts from a log-spaced grid of diameters and polishes each start with a
bounded trust-region least-squares solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .curve import DecayCurve
from .decay import sdr_scan
from .errors import InsufficientDataError, NonConvergence, NormalizationError
from .noise import Geometry, build_spectrum, correlation_time

MIN_POINTS = 5


@dataclass(frozen=True)
class FitOptions:
    """Search box and solver settings for ``fit_diameter``."""

    d_min: float = 0.1e-6
    d_max: float = 100e-6
    n_starts: int = 8
    fit_d0: bool = False
    spectrum_mode: str = "single"
    amplitude_max: float = 2.0
    normalize_model: bool = True
    rel_step: float = 1e-6
    gtol: float = 1e-10
    xtol: float = 1e-12
    max_nfev: int = 200

    def __post_init__(self):
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if self.n_starts < 1:
            raise ValueError("need at least one start")


@dataclass
class FitResult:
    """Outcome of a diameter fit (SI units)."""

    diameter: float
    amplitude: float
    d0: float
    d0_fitted: bool
    residual_rms: float
    iterations: int
    converged: bool
    covariance_diag: list = field(default_factory=list)
    model: np.ndarray | None = None


def normalize_first_point(curve: DecayCurve) -> DecayCurve:
    """Divide the signal by its first sample."""
    if len(curve) == 0 or not curve.signal[0] > 0:
        raise NormalizationError("first signal point must be positive to normalize")
    return curve.with_signal(curve.signal / curve.signal[0])


def model_signal(curve: DecayCurve, kind: str, diameter: float, d0: float, amplitude: float = 1.0,
                 mode="single", normalized: bool = False) -> np.ndarray:
    """Forward model ``A * M_SDR`` at the curve's x delays.

    With ``normalized=True`` the model is divided by its value at the first x.
    """
    if curve.acq is None:
        raise ValueError("curve carries no acquisition parameters (gradient)")
    spec = build_spectrum(Geometry(kind, diameter, d0), curve.acq, mode)
    m = sdr_scan(curve.n_pulses, curve.te, spec, curve.x_values).signal
    if normalized:
        m = m / m[0]
    return amplitude * m


def residuals(curve: DecayCurve, params, kind: str, d0: float, mode="single", normalized: bool = False) -> np.ndarray:
    """Pointwise ``model - data`` for ``params = (diameter, amplitude[, d0])``."""
    diameter, amplitude = params[0], params[1]
    if len(params) > 2:
        d0 = params[2]
    return model_signal(curve, kind, diameter, d0, amplitude, mode, normalized) - curve.signal


def _check_bracket(curve: DecayCurve, kind: str, d0: float, opts: FitOptions):
    if len(curve) < MIN_POINTS:
        raise InsufficientDataError(f"need at least {MIN_POINTS} points, got {len(curve)}")
    if np.any(np.diff(curve.x_values) <= 0):
        raise InsufficientDataError("x delays must be strictly increasing")
    if np.any(curve.signal <= 0):
        raise InsufficientDataError("signal must be positive")
    tau_lo = correlation_time(Geometry(kind, opts.d_min, d0))
    tau_hi = correlation_time(Geometry(kind, opts.d_max, d0))
    x_lo, x_hi = curve.x_values[0], curve.x_values[-1]
    # some d in the box must put tau_c strictly inside the sampled x range
    if not (x_lo < tau_hi and x_hi > tau_lo):
        raise InsufficientDataError(
            f"x range [{x_lo:.3g}, {x_hi:.3g}] s does not bracket any tau_c in "
            f"[{tau_lo:.3g}, {tau_hi:.3g}] s for the diameter bounds"
        )


def fit_diameter(curve: DecayCurve, kind: str, d0: float, options: FitOptions | None = None) -> FitResult:
    """Least-squares diameter (and amplitude, optionally D0) for an SDR curve.

    Parameters
    ----------
    curve : DecayCurve
        Measured or simulated ``M(x)``; ``curve.acq`` must hold the gradient.
    kind : str
        Pore geometry, one of ``"slab"``, ``"cylinder"``, ``"sphere"``.
    d0 : float
        Free diffusion coefficient in m^2/s. Held fixed unless
        ``options.fit_d0``, in which case it seeds the fit and is bounded to
        a factor of ten either side.
    options : FitOptions, optional

    Returns
    -------
    FitResult
        Best local minimum over all starts. Ties in the objective go to the
        smaller diameter.

    Raises
    ------
    InsufficientDataError
        Fewer than five points, or the x range cannot resolve any tau_c in
        the diameter box.
    NonConvergence
        Every start failed; ``diagnostics`` lists the per-start messages.
    """
    opts = options or FitOptions()
    _check_bracket(curve, kind, d0, opts)
    log_lo, log_hi = math.log(opts.d_min), math.log(opts.d_max)
    lower = [log_lo, 1e-9]
    upper = [log_hi, opts.amplitude_max]
    if opts.fit_d0:
        lower.append(math.log(d0 / 10))
        upper.append(math.log(d0 * 10))

    def unpack(p):
        d = math.exp(p[0])
        dd = math.exp(p[2]) if opts.fit_d0 else d0
        return d, p[1], dd

    def fun(p):
        d, a, dd = unpack(p)
        return model_signal(curve, kind, d, dd, a, opts.spectrum_mode, opts.normalize_model) - curve.signal

    # keep the grid off the box edges so the solver can move both ways
    starts = np.linspace(log_lo, log_hi, opts.n_starts + 2)[1:-1] if opts.n_starts > 1 else [0.5 * (log_lo + log_hi)]
    candidates, diagnostics = [], []
    for s in starts:
        shape = model_signal(curve, kind, math.exp(s), d0, 1.0, opts.spectrum_mode, opts.normalize_model)
        a0 = float(np.clip(shape @ curve.signal / (shape @ shape), 1e-6, opts.amplitude_max * (1 - 1e-9)))
        p0 = [s, a0] + ([math.log(d0)] if opts.fit_d0 else [])
        try:
            sol = least_squares(
                fun, p0, bounds=(lower, upper), method="trf", jac="3-point",
                diff_step=opts.rel_step, gtol=opts.gtol, xtol=opts.xtol, ftol=None,
                max_nfev=opts.max_nfev,
            )
        except (ValueError, ArithmeticError) as exc:
            diagnostics.append(f"start d={math.exp(s):.3g} m: {exc}")
            continue
        if not np.all(np.isfinite(sol.fun)):
            diagnostics.append(f"start d={math.exp(s):.3g} m: non-finite residuals")
            continue
        diagnostics.append(f"start d={math.exp(s):.3g} m: status {sol.status}, cost {sol.cost:.3e}")
        candidates.append(sol)
    if not candidates:
        raise NonConvergence("all fit starts failed", diagnostics)
    best = min(candidates, key=lambda r: (round(2 * r.cost, 14), r.x[0]))
    d, a, dd = unpack(best.x)
    return FitResult(
        diameter=d,
        amplitude=float(a),
        d0=dd,
        d0_fitted=opts.fit_d0,
        residual_rms=float(np.sqrt(np.mean(best.fun**2))),
        iterations=int(best.nfev),
        converged=best.status > 0,
        covariance_diag=_covariance_diag(best, d, dd, opts.fit_d0),
        model=best.fun + curve.signal,
    )


def _covariance_diag(sol, d, d0, fit_d0) -> list:
    """Parameter variances in (d, A[, D0]) from the Gauss-Newton Hessian."""
    jac = np.asarray(sol.jac)
    m, p = jac.shape
    dof = max(m - p, 1)
    s2 = 2 * sol.cost / dof
    try:
        cov = np.linalg.pinv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        return [math.nan] * p
    diag = np.diag(cov).copy()
    # back from log-parameters by the delta method
    diag[0] *= d**2
    if fit_d0:
        diag[2] *= d0**2
    return [float(v) for v in diag]
