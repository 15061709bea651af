"""Command-line entry point: predict, simulate, fit, msd, spectrum.

Every command writes a numeric CSV (single header row, SI units in the
column names) plus ``<out>.meta.json`` with the resolved parameters.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings

import numpy as np

from . import __version__
from .config import RunConfig
from .curve import DecayCurve
from .decay import sdr_scan, variance_exact
from .errors import SDRError
from .estimation import fit_diameter, normalize_first_point
from .montecarlo import WalkSpec, simulate_decay, simulate_msd
from .noise import build_spectrum, correlation_time, restriction_length, s_of_omega
from .sequence import build_cpmg, build_hahn, build_sdr


class DataFileError(SDRError, ValueError):
    """Malformed input CSV; the message names the row."""


# ---------------------------------------------------------------- output


def write_csv(path, header, columns):
    """Write equal-length numeric columns with round-trip float formatting."""
    rows = zip(*columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row])


def write_meta(path, command, cfg: RunConfig, args, extra=None):
    meta = {
        "command": command,
        "library": "sdrdiff",
        "version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "spectrum_mode": getattr(args, "spectrum_mode", None),
        "config": cfg.resolved(),
    }
    if extra:
        meta.update(extra)
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- input


def read_curve_csv(path):
    """Read ``x_delay_s,signal`` (or ``magnetization``) rows, sorted by x."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFileError(f"{path}: empty file") from None
        if "x_delay_s" not in header:
            raise DataFileError(f"{path}: row 1: header needs an x_delay_s column")
        y_name = next((h for h in ("signal", "magnetization") if h in header), None)
        if y_name is None:
            raise DataFileError(f"{path}: row 1: header needs a signal column")
        ix, iy = header.index("x_delay_s"), header.index(y_name)
        xs, ys = [], []
        for row_no, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                xs.append(float(row[ix]))
                ys.append(float(row[iy]))
            except (ValueError, IndexError):
                raise DataFileError(f"{path}: row {row_no}: cannot parse {row!r}") from None
    x, y = np.array(xs), np.array(ys)
    if x.size > 1 and np.any(np.diff(x) < 0):
        warnings.warn(f"{path}: x_delay_s not increasing; rows sorted", stacklevel=2)
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
    return x, y


# ---------------------------------------------------------------- commands


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.defaults()
    if args.seed is not None:
        cfg = cfg.replace("walk", "seed", args.seed)
    if args.spectrum_mode is not None:
        cfg = cfg.replace("fit", "spectrum_mode", args.spectrum_mode)
    return cfg


def _spectrum(cfg: RunConfig):
    return build_spectrum(cfg.geometry(), cfg.acquisition(), cfg["fit", "spectrum_mode"])


def cmd_predict(args) -> int:
    cfg = _load(args)
    spec = _spectrum(cfg)
    n, te = cfg.n_pulses, cfg.te
    base = math.exp(-te / cfg.t2) if cfg.t2 else 1.0
    if args.cpmg:
        x = np.array([te / n])
        m = np.array([base * variance_exact(build_cpmg(n, te), spec).magnetization])
    elif args.hahn:
        x = np.array([0.0])
        m = np.array([base * variance_exact(build_hahn(te), spec).magnetization])
    else:
        curve = sdr_scan(n, te, spec, cfg.x_grid(), t2=cfg.t2, acq=cfg.acquisition())
        x, m = curve.x_values, curve.signal
    write_csv(args.out, ["x_delay_s", "magnetization"], [x, m])
    write_meta(args.out, "predict", cfg, args, {"tau_c_s": spec.tau_c, "delta_omega_sq_rad2_s2": spec.delta_omega_sq})
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    geom, acq = cfg.geometry(), cfg.acquisition()
    n, te = cfg.n_pulses, cfg.te
    scan = cfg["sequence", "scan"]
    if scan == "x":
        x = cfg.x_grid()
        seqs = [build_sdr(n, xi, te) for xi in x]
        duration = te
    elif scan == "te":
        tes = cfg.te_grid()
        counts = [1, n] if cfg["sequence", "compare_hahn"] and n != 1 else [n]
        labels = [(k, t) for k in counts for t in tes]
        seqs = [build_hahn(t) if k == 1 else build_cpmg(k, t) for k, t in labels]
        duration = float(tes.max())
    else:
        raise SDRError(f"[sequence] scan must be 'x' or 'te', got {scan!r}")
    spec = WalkSpec.auto(geom, duration, cfg["walk", "n_walkers"], cfg["walk", "seed"], cfg.dt())
    sig = simulate_decay(spec, seqs, acq, args.workers)
    t2 = cfg.t2
    decay = np.exp(-sig.times / t2) if t2 else np.ones_like(sig.times)
    mag, err = sig.magnetization * decay, sig.stderr * decay
    if scan == "x":
        write_csv(args.out, ["x_delay_s", "magnetization", "stderr"], [x, mag, err])
    else:
        write_csv(args.out, ["time_s", "n_pulses", "magnetization", "stderr"],
                  [[t for _, t in labels], [k for k, _ in labels], mag, err])
    write_meta(args.out, "simulate", cfg, args, {"dt_s": spec.dt, "n_steps": spec.n_steps})
    return 0


def cmd_fit(args) -> int:
    cfg = _load(args)
    geom, acq = cfg.geometry(), cfg.acquisition()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        x, y = read_curve_csv(args.data)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    curve = normalize_first_point(DecayCurve(x, y, cfg.te, cfg.n_pulses, acq))
    opts = cfg.fit_options()
    res = fit_diameter(curve, geom.kind, geom.d0, opts)
    report = {
        "diameter_m": res.diameter,
        "amplitude": res.amplitude,
        "d0_m2_s": res.d0,
        "d0_fitted": res.d0_fitted,
        "residual_rms": res.residual_rms,
        "iterations": res.iterations,
        "converged": res.converged,
        "covariance_diag": res.covariance_diag,
        "spectrum_mode": opts.spectrum_mode,
        "x_delay_s": curve.x_values.tolist(),
        "signal_normalized": curve.signal.tolist(),
        "model": res.model.tolist(),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    write_meta(args.out, "fit", cfg, args, {"data": str(args.data)})
    print(f"d = {res.diameter * 1e6:.4g} um  A = {res.amplitude:.4g}  rms = {res.residual_rms:.3g}")
    return 0


def cmd_msd(args) -> int:
    cfg = _load(args)
    geom = cfg.geometry()
    duration = cfg["walk", "duration_ms"]
    if math.isnan(duration):
        duration = 20 * correlation_time(geom) if geom.restricted else cfg.te
    else:
        duration *= 1e-3
    spec = WalkSpec.auto(geom, duration, cfg["walk", "n_walkers"], cfg["walk", "seed"], cfg.dt())
    curve = simulate_msd(spec, cfg["walk", "n_samples"], args.workers)
    if args.normalize:
        lc2 = restriction_length(correlation_time(geom), geom.d0) ** 2
        write_csv(args.out, ["t_s", "msd_over_lc2", "stderr_over_lc2"], [curve.times, curve.msd / lc2, curve.stderr / lc2])
    else:
        write_csv(args.out, ["t_s", "msd_m2", "stderr_m2"], [curve.times, curve.msd, curve.stderr])
    write_meta(args.out, "msd", cfg, args, {"dt_s": spec.dt, "duration_s": duration})
    return 0


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    spec = _spectrum(cfg)
    tau = spec.tau_c
    lo = args.omega_min if args.omega_min is not None else 1e-2 / tau
    hi = args.omega_max if args.omega_max is not None else 1e3 / tau
    omega = np.concatenate(([0.0], np.geomspace(lo, hi, args.n_omega)))
    write_csv(args.out, ["omega_rad_s", "s_omega_s"], [omega, s_of_omega(spec, omega)])
    write_meta(args.out, "spectrum", cfg, args, {"tau_c_s": tau, "delta_omega_sq_rad2_s2": spec.delta_omega_sq})
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", required=True, help="output path")
    common.add_argument("--seed", type=int, help="override [walk] seed")
    common.add_argument("--workers", type=int, default=1, help="worker threads for Monte Carlo")
    common.add_argument("--spectrum-mode", help="single or multi:K (override [fit] spectrum_mode)")

    p = argparse.ArgumentParser(prog="sdrdiff", description="SDR diffusion decay modelling and pore-size fitting")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("predict", parents=[common], help="Gaussian-phase M(x) scan")
    which = pr.add_mutually_exclusive_group()
    which.add_argument("--cpmg", action="store_true", help="only the CPMG point x = TE/N")
    which.add_argument("--hahn", action="store_true", help="only the Hahn echo at TE")
    pr.set_defaults(func=cmd_predict)

    sm = sub.add_parser("simulate", parents=[common], help="Monte Carlo ensemble signal")
    sm.set_defaults(func=cmd_simulate)

    ft = sub.add_parser("fit", parents=[common], help="fit the pore diameter to an M(x) curve")
    ft.add_argument("data", help="CSV with x_delay_s,signal columns")
    ft.set_defaults(func=cmd_fit)

    ms = sub.add_parser("msd", parents=[common], help="Monte Carlo mean-square displacement")
    ms.add_argument("--normalize", action="store_true", help="divide by l_c**2")
    ms.set_defaults(func=cmd_msd)

    sp = sub.add_parser("spectrum", parents=[common], help="normalized noise spectrum S(omega)")
    sp.add_argument("--omega-min", type=float)
    sp.add_argument("--omega-max", type=float)
    sp.add_argument("--n-omega", type=int, default=200)
    sp.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SDRError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
