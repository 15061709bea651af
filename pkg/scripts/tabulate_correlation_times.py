"""Tabulate tau_c = coef * d**2 / D0 for each pore geometry.

The correlation time is defined by rate matching,
D0 * tau_c**2 = int_0^inf <x(0) x(t)> dt, which gives 0.26**2 for the
cylinder. The integral is estimated two ways: from Monte Carlo
trajectories, and from the analytic eigenmode sum sum_k w_k tau_k.

    python scripts/tabulate_correlation_times.py --walkers 4000
"""

import argparse
import math

import numpy as np
from scipy.integrate import trapezoid

from sdrdiff.montecarlo import WalkSpec, record_positions
from sdrdiff.noise import CORRELATION_COEFFICIENTS, Geometry, eigenmodes


def mc_coefficient(kind, n_walkers, seed, workers):
    geom = Geometry(kind, 1e-6, 1e-9)
    rough = CORRELATION_COEFFICIENTS[kind] * 1e-12 / 1e-9
    spec = WalkSpec.auto(geom, 30 * rough, n_walkers, seed)
    x = record_positions(spec, stride=1, workers=workers)
    x = x[:, int(5 * rough / spec.dt):]
    x = x - x.mean()
    n_lag = int(8 * rough / spec.dt)
    width = x.shape[1] - n_lag
    acf = np.array([np.mean(x[:, :width] * x[:, k:k + width]) for k in range(n_lag + 1)])
    integral = trapezoid(acf, dx=spec.dt)
    return math.sqrt(integral / geom.d0) * geom.d0 / geom.size_d**2


def eigen_coefficient(kind, modes=400):
    w, tau = eigenmodes(Geometry(kind, 1.0, 1.0), modes)
    return math.sqrt(float(w @ tau))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--walkers", type=int, default=2000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    print(f"{'kind':10s} {'monte carlo':>12s} {'eigenmodes':>12s} {'table':>8s}")
    for kind in ("slab", "cylinder", "sphere"):
        mc = mc_coefficient(kind, args.walkers, args.seed, args.workers)
        print(f"{kind:10s} {mc:12.4f} {eigen_coefficient(kind):12.4f} {CORRELATION_COEFFICIENTS[kind]:8.4f}")


if __name__ == "__main__":
    main()
