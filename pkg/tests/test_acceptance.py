"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary.
"""

import csv
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from sdrdiff import quadrature
from sdrdiff.cli import main
from sdrdiff.decay import delta_m_sdr, restricted_asymptote, variance_exact, variance_quadrature
from sdrdiff.filters import filter_squared, sdr_filter_squared, sequence_filter_squared
from sdrdiff.montecarlo import WalkSpec, fit_exponential, simulate_autocorrelation, simulate_msd, simulate_phases
from sdrdiff.noise import GAMMA_1H, AcquisitionParams, Geometry, NoiseSpectrum, build_spectrum, correlation_time, s_of_omega
from sdrdiff.sequence import build_cpmg, build_hahn, build_sdr, decompose, modulation, reassemble

from oracles import free_cpmg_variance, free_hahn_variance

D0 = 2.3e-9
CYLINDER = Geometry("cylinder", 5e-6, D0)
ACQ = AcquisitionParams(gradient=0.216)


def random_sdr(rng, n_max=32, n_min=1, te=1.0):
    n = int(rng.integers(n_min, n_max + 1))
    if n == 1:
        return build_hahn(te)
    return build_sdr(n, rng.uniform(0.01, 1.0) * te / n, te)


def test_exact_matches_quadrature(verdict):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        seq = random_sdr(rng)
        tau = 10 ** rng.uniform(-4, 1)
        spec = NoiseSpectrum.lorentzian(1.0, tau)
        exact = variance_exact(seq, spec).variance_half
        quad = variance_quadrature(seq, spec).variance_half
        worst = max(worst, abs(exact - quad) / exact)
    elapsed = time.perf_counter() - start
    verdict(1, worst <= 1e-6 and elapsed < 60, f"worst rel err {worst:.2e} (<= 1e-6), {elapsed:.1f} s (< 60 s)")


def test_free_diffusion_limits(verdict):
    te, g = 0.05, 0.2
    tau = 100 * te
    spec = NoiseSpectrum.lorentzian(GAMMA_1H**2 * g**2 * D0 * tau, tau)
    hahn = variance_exact(build_hahn(te), spec).variance_half
    hahn_err = abs(hahn / free_hahn_variance(GAMMA_1H, g, D0, te) - 1)
    cpmg_err = 0.0
    for n in (2, 4, 8, 16):
        v = variance_exact(build_cpmg(n, te), spec).variance_half
        # scaled by N**2 every CPMG variance should equal the N = 1 free value
        cpmg_err = max(cpmg_err, abs(v * n**2 / free_cpmg_variance(GAMMA_1H, g, D0, te, 1) - 1))
    verdict(2, hahn_err <= 0.01 and cpmg_err <= 0.05,
            f"Hahn rel err {hahn_err:.2e} (<= 1%), CPMG N^2 scaling rel err {cpmg_err:.2e} (<= 5%)")


def test_restricted_asymptote(verdict):
    tau = 1e-3
    te = 100 * tau
    spec = NoiseSpectrum.lorentzian(20.0, tau)
    hahn = variance_exact(build_hahn(te), spec).variance_half
    worst_var, worst_shift = 0.0, 0.0
    for n in (1, 2, 4, 8):
        seq = build_hahn(te) if n == 1 else build_cpmg(n, te)
        exact = variance_exact(seq, spec).variance_half
        asym = restricted_asymptote(seq, spec)
        worst_var = max(worst_var, abs(asym.variance_half / exact - 1))
        if n > 1:
            # intercept difference between Hahn and CPMG-N
            predicted = asym.shift - restricted_asymptote(build_hahn(te), spec).shift
            worst_shift = max(worst_shift, abs((hahn - exact) / predicted - 1))
    verdict(3, worst_var <= 0.05 and worst_shift <= 0.05,
            f"asymptote rel err {worst_var:.2e} (<= 5%), N-shift rel err {worst_shift:.2e} (<= 5%)")


def test_contrast_identity(verdict):
    tau = 1e-3
    worst = 0.0
    for product in (0.001, 0.01, 0.05):
        spec = NoiseSpectrum.lorentzian(product / tau**2, tau)
        for n in (4, 8, 16):
            res = delta_m_sdr(n, spec, 200 * tau)
            worst = max(worst, abs(res.numeric / res.closed_form - 1))
    verdict(4, worst <= 0.10, f"worst rel err {worst:.2e} over 9 cases (<= 10%)")


@pytest.mark.slow
def test_monte_carlo_matches_gaussian_phase(verdict):
    tes = np.arange(10, 121, 10) * 1e-3
    counts = (1, 4, 8)
    seqs = [build_hahn(t) if n == 1 else build_cpmg(n, t) for n in counts for t in tes]
    start = time.perf_counter()
    phases = simulate_phases(WalkSpec.auto(CYLINDER, tes.max(), 100_000, seed=2024), seqs)
    elapsed = time.perf_counter() - start
    cos = np.cos(ACQ.gamma * ACQ.gradient * phases).reshape(phases.shape[0], len(counts), tes.size)
    mean = cos.mean(axis=0)
    err = cos.std(axis=0, ddof=1) / math.sqrt(cos.shape[0])
    spec = build_spectrum(CYLINDER, ACQ)
    var = np.array([[variance_exact(s, spec).variance_half for s in seqs[i * tes.size:(i + 1) * tes.size]]
                    for i in range(len(counts))])
    predicted = np.exp(-var)

    # only Hahn and CPMG-8 are graded pointwise; CPMG-4 is there for the N trend
    graded = (var <= 1) & np.isin(np.array(counts), (1, 8))[:, None]
    tol = np.maximum(3 * err, 0.02 * predicted)
    miss = np.abs(mean - predicted) > tol
    n_bad = int(np.sum(miss & graded))

    # paired gaps share walkers, so their errors are much smaller than the signals'
    gap = cos[:, 1:, :] - cos[:, :1, :]
    gap_mean = gap.mean(axis=0)
    gap_err = gap.std(axis=0, ddof=1) / math.sqrt(gap.shape[0])
    resolved = (predicted[2] - predicted[0]) > 3 * gap_err[1]
    sign_ok = bool(np.all(gap_mean[1][resolved] > 0)) and resolved.any()
    growth = gap_mean[1] - gap_mean[0]
    growth_err = np.sqrt(np.var(gap[:, 1] - gap[:, 0], axis=0, ddof=1) / gap.shape[0])
    growth_ok = bool(np.all(growth[resolved] > -3 * growth_err[resolved])) and bool(np.any(growth > 3 * growth_err))
    ok = n_bad == 0 and sign_ok and growth_ok and elapsed <= 600
    verdict(5, ok, f"{n_bad} of {int(graded.sum())} graded points outside max(3 se, 2%); "
                   f"gap > 0 at {int(resolved.sum())} resolved TEs: {sign_ok}; gap grows with N: {growth_ok}; "
                   f"{elapsed:.0f} s")


@pytest.mark.slow
def test_msd_plateau_and_correlation_time(verdict):
    tau = correlation_time(CYLINDER)
    curve = simulate_msd(WalkSpec.auto(CYLINDER, 20 * tau, 5000, seed=606), n_samples=120)
    mean, err = curve.plateau(8 * tau)
    expected = CYLINDER.size_d**2 / 8
    plateau_ok = abs(mean - expected) <= 3 * err
    g = simulate_autocorrelation(WalkSpec.auto(CYLINDER, 25 * tau, 3000, seed=607), ACQ, max_lag=3 * tau, n_lags=60)
    _, tau_fit = fit_exponential(g)
    tau_ok = abs(tau_fit / tau - 1) <= 0.15
    verdict(6, plateau_ok and tau_ok,
            f"plateau {mean:.4e} vs d^2/8 {expected:.4e} (|diff| {abs(mean - expected) / err:.1f} se <= 3); "
            f"fitted tau {tau_fit:.3e} vs {tau:.3e} ({abs(tau_fit / tau - 1):.1%} <= 15%)")


SCAN_CONFIG = """\
[geometry]
kind = cylinder
diameter_um = 5
d0_um2_ms = 2.3

[acquisition]
gradient_g_cm = {gradient}

[sequence]
n_pulses = 8
te_ms = 80
n_points = 20

[walk]
n_walkers = {walkers}
seed = {seed}
"""


@pytest.mark.slow
def test_fit_recovers_diameter_from_simulated_scans(verdict, tmp_path):
    found = {}
    for gradient, seed in ((14.4, 11), (21.6, 12)):
        cfg = tmp_path / f"g{gradient}.ini"
        cfg.write_text(SCAN_CONFIG.format(gradient=gradient, walkers=100_000, seed=seed))
        data, report = tmp_path / f"g{gradient}.csv", tmp_path / f"g{gradient}.json"
        assert main(["simulate", "--config", str(cfg), "--out", str(data)]) == 0
        assert main(["fit", str(data), "--config", str(cfg), "--out", str(report)]) == 0
        found[gradient] = json.loads(report.read_text())["diameter_m"]
    ok = all(4e-6 <= d <= 6e-6 for d in found.values())
    verdict(7, ok, "fitted d " + ", ".join(f"{d * 1e6:.2f} um at {g} G/cm" for g, d in found.items()) + " (in [4, 6] um)")


def test_simulate_is_deterministic(verdict, tmp_path):
    cfg = tmp_path / "det.ini"
    cfg.write_text(SCAN_CONFIG.format(gradient=21.6, walkers=3000, seed=77))
    outputs = []
    for run in range(2):
        for workers in (1, 8):
            out = tmp_path / f"run{run}_w{workers}.csv"
            assert main(["simulate", "--config", str(cfg), "--out", str(out), "--workers", str(workers)]) == 0
            outputs.append(out.read_bytes())
    with open(tmp_path / "run0_w1.csv", newline="") as fh:
        rows = len(list(csv.reader(fh))) - 1
    ok = all(o == outputs[0] for o in outputs) and rows == 20
    verdict(8, ok, f"{len(outputs)} runs (1 and 8 workers, twice) byte-identical: {ok}")


def test_property_suite(verdict):
    rng = np.random.default_rng(99)
    counts = dict.fromkeys(["echo", "reassembly", "three-term", "parseval", "normalization"], 0)
    failures = []

    for _ in range(300):
        seq = random_sdr(rng, te=10 ** rng.uniform(-3, 0))
        if abs(modulation(seq).signed_area()) > 1e-12 * seq.total_time:
            failures.append(("echo", seq))
        counts["echo"] += 1

    for _ in range(300):
        seq = random_sdr(rng, n_min=2, te=10 ** rng.uniform(-3, 0))
        cpmg, hahn, parity = decompose(seq)
        t = rng.uniform(0, seq.total_time, 200)
        pulses = seq.pulse_times()
        t = t[np.min(np.abs(t[:, None] - pulses[None, :]), axis=1) > 1e-9 * seq.total_time]
        if not np.array_equal(reassemble(cpmg, hahn, parity)(t), modulation(seq)(t)):
            failures.append(("reassembly", seq))
        counts["reassembly"] += 1

    for _ in range(300):
        seq = random_sdr(rng, n_min=2, te=rng.uniform(0.1, 10))
        omega = rng.uniform(0, 400 * seq.n_pulses / seq.total_time, 64)
        direct = sequence_filter_squared(seq, omega)
        if not np.allclose(sdr_filter_squared(seq, omega).total, direct, rtol=1e-10, atol=1e-10 * seq.total_time**2):
            failures.append(("three-term", seq))
        counts["three-term"] += 1

    for _ in range(100):
        seq = random_sdr(rng, n_max=16, n_min=2, te=rng.uniform(0.1, 10))
        f = modulation(seq)
        omega_max = 2000.0 * (seq.n_pulses + 1) / seq.total_time
        edges = np.linspace(0.0, omega_max, 200 * (seq.n_pulses + 1))
        value, _ = quadrature.integrate(lambda w: filter_squared(f, w), edges, rtol=1e-9)
        value += np.sum(f.jumps() ** 2) / omega_max  # 1/omega**2 tail
        if abs(value / math.pi / seq.total_time - 1) > 1e-4:
            failures.append(("parseval", seq))
        counts["parseval"] += 1

    for _ in range(200):
        k = int(rng.integers(1, 6))
        weights = rng.uniform(0.05, 1.0, k)
        taus = 10 ** rng.uniform(-6, 1, k)
        spec = NoiseSpectrum(tuple(zip(weights / weights.sum(), taus)), 10 ** rng.uniform(-3, 6))
        lo, hi = math.log(1e-9 / taus.max()), math.log(1e9 / taus.min())
        value = 2 * integrate.quad(lambda s: s_of_omega(spec, math.exp(s)) * math.exp(s), lo, hi,
                                   points=sorted(-np.log(taus)), epsabs=0, epsrel=1e-10, limit=500)[0]
        if abs(value - 1) > 1e-6:
            failures.append(("normalization", spec))
        counts["normalization"] += 1

    total = sum(counts.values())
    ok = not failures and total >= 1000
    detail = ", ".join(f"{k} {v}" for k, v in counts.items())
    verdict(9, ok, f"{total} randomized cases ({detail}); {len(failures)} failures")
