"""Acceptance criteria 1-7, one test each.

Every criterion prints a single ``ACCEPTANCE <n> PASS|FAIL: ...`` line (collected
and shown in the pytest terminal summary, or printed directly when this file
is run as a script). Tolerances are the stated ones; nothing is loosened to
make a criterion pass.
"""

import math
import os
import sys
from pathlib import Path

import numpy as np
import pytest

from mimoauth.cli import cmd_sweep
from mimoauth.detector import (
    NoiseModel,
    RadioConfig,
    batch_statistics,
    degrees_of_freedom,
    noise_variance,
    optimal_rotation,
    per_tone_snr,
    security_gain,
    test_statistic as statistic,
)
from mimoauth.experiment import (
    SweepSpec,
    desk_scenario,
    enumerate_pairs,
    grid_channels,
    grid_points,
    monte_carlo_rates,
    pair_summary,
    run_sweep,
)
from mimoauth.numerics import chi2_cdf, chi2_inv_cdf, noncentral_chi2_cdf

RESULTS = {}
CONFIGS = Path(__file__).resolve().parent.parent / "configs"
WORKERS = min(4, os.cpu_count() or 1)
LABELS = ("1x1", "2x1", "1x2", "2x2")


def report(number, ok, detail):
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS[number] = line
    print(line)
    return ok


def ks_distance(sample, cdf):
    xs = np.sort(np.asarray(sample))
    f = np.array([cdf(x) for x in xs])
    n = len(xs)
    return float(max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n)))


def test_criterion_1_formula_exactness():
    cfg = RadioConfig(n_tx=2, n_rx=2, num_tones=5, system_bandwidth_hz=20e6)
    dof = degrees_of_freedom(cfg)
    gain = security_gain(0.09, 0.01)
    ref = RadioConfig(subband_bandwidth_hz=0.25e6, tx_power_per_tone_mw=0.1, noise_figure_linear=10.0)
    sigma_sq = noise_variance(ref).sigma_sq
    direct = ref.n_tx * ref.thermal_noise_density_mw_per_hz * ref.noise_figure_linear * ref.subband_bandwidth_hz / ref.tx_power_per_tone_mw
    rel = abs(sigma_sq - direct) / direct
    ok = dof == 40 and gain == 8 and rel <= 4 * np.finfo(float).eps
    assert report(1, ok, f"S(2,2,5)={dof}, G(0.09,0.01)={gain!r}, sigma^2={sigma_sq!r} (rel err {rel:.1e})")


def _mc_ecdf(dof, mu, xs, draws, seed):
    rng = np.random.default_rng(seed)
    shift = math.sqrt(mu / dof)
    counts = np.zeros(len(xs))
    chunk = 1_000_000
    done = 0
    while done < draws:
        t = min(chunk, draws - done)
        z = rng.standard_normal((t, dof)) + shift
        s = np.einsum("ij,ij->i", z, z)
        counts += np.searchsorted(np.sort(s), xs, side="right")
        done += t
    return counts / draws


def test_criterion_2_numerics_oracles():
    problems = []
    k = chi2_inv_cdf(0.99, 2)
    if abs(k - 9.21034) > 1e-4:
        problems.append(f"chi2_inv_cdf(0.99, 2)={k}")
    worst = 0.0
    draws = 10_000_000
    for i, dof in enumerate((2, 4, 40)):
        for j, mu in enumerate((0.5, 5.0, 50.0)):
            mean, sd = dof + mu, math.sqrt(2 * (dof + 2 * mu))
            xs = np.array([max(mean + c * sd, 0.01) for c in (-1.5, -0.5, 0.0, 0.5, 1.5)])
            emp = _mc_ecdf(dof, mu, xs, draws, seed=[2, i, j])
            ana = np.array([noncentral_chi2_cdf(x, dof, mu) for x in xs])
            err = float(np.max(np.abs(emp - ana)))
            worst = max(worst, err)
            if err > 1e-3:
                problems.append(f"ncx2 dof={dof} mu={mu} err={err:.2e}")
    round_trip = 0.0
    for dof in (1, 2, 4, 12, 40, 80, 200):
        for p in np.linspace(0.0, 0.9999, 201):
            round_trip = max(round_trip, abs(chi2_cdf(chi2_inv_cdf(p, dof), dof) - p))
    if round_trip > 1e-8:
        problems.append(f"round trip {round_trip:.1e}")
    ok = not problems
    detail = f"k={k:.6f}, worst ncx2 vs 1e7-draw MC {worst:.1e}, worst round trip {round_trip:.1e}"
    assert report(2, ok, detail + ("" if ok else " | " + "; ".join(problems)))


def _h0_sample(h, sigma_sq, trials, seed):
    rng = np.random.default_rng(seed)
    n = h.size
    scale = math.sqrt(sigma_sq / 2)
    ph = rng.uniform(0, 2 * np.pi, (2, trials, 1))
    noise = scale * (rng.standard_normal((2, trials, n)) + 1j * rng.standard_normal((2, trials, n)))
    frames = h[None, None, :] * np.exp(1j * ph) + noise
    return batch_statistics(frames[0], frames[1], sigma_sq)


def test_criterion_3_h0_distribution():
    sc = desk_scenario()
    point = grid_points(sc)[40]
    parts, ok = [], True
    for nt, nr, m in ((1, 1, 1), (2, 2, 5)):
        cfg = RadioConfig(n_tx=nt, n_rx=nr, num_tones=m, system_bandwidth_hz=20e6, tx_power_per_tone_mw=10.0)
        h = grid_channels(sc, cfg, [point])[0]
        snr_db = 10 * math.log10(per_tone_snr(cfg, [h]))
        dof = degrees_of_freedom(cfg)
        stats = _h0_sample(h, noise_variance(cfg).sigma_sq, 10_000, seed=[3, nt, nr, m])
        d = ks_distance(stats, lambda x: chi2_cdf(x, dof))
        d_aligned = ks_distance(stats, lambda x: chi2_cdf(x, dof - 1))
        ok &= snr_db >= 30 and d <= 0.02
        parts.append(f"({nt},{nr},{m}) SNR {snr_db:.1f} dB KS vs chi2_{dof} {d:.4f} [vs chi2_{dof - 1}: {d_aligned:.4f}]")
    assert report(3, ok, "; ".join(parts) + " (tolerance 0.02)")


def test_criterion_4_analytic_vs_empirical():
    sc = desk_scenario()
    cfg = RadioConfig(tx_power_per_tone_mw=10.0)
    channels = grid_channels(sc, cfg)
    pts = grid_points(sc)
    pairs = enumerate_pairs(len(pts))
    # fixed pairs: a seeded draw from the pairs whose joint per-tone SNR is at least 30 dB
    eligible = [p for p in pairs if 10 * math.log10(per_tone_snr(cfg, [channels[p[0]], channels[p[1]]])) >= 30]
    rng = np.random.default_rng(4)
    chosen = [eligible[i] for i in sorted(rng.choice(len(eligible), 5, replace=False))]
    trials = 100_000
    ok, parts = True, []
    alpha = cfg.false_alarm_target
    for idx, (a, b) in enumerate(chosen):
        s = pair_summary(pts[a], pts[b], sc, cfg)
        a_hat, b_hat = monte_carlo_rates(pts[a], pts[b], sc, cfg, trials, seed=4, pair_index=idx)
        se_a = math.sqrt(alpha * (1 - alpha) / trials)
        se_b = math.sqrt(s.beta * (1 - s.beta) / trials)
        good_a = abs(a_hat - alpha) <= 3 * se_a
        good_b = abs(b_hat - s.beta) <= 3 * se_b
        ok &= good_a and good_b
        parts.append(f"({a},{b}) alpha {a_hat:.5f}{'' if good_a else '!'} vs {alpha}, beta {b_hat:.5f}{'' if good_b else '!'} vs {s.beta:.5f}")
    assert report(4, ok, "; ".join(parts) + " ('!' marks > 3 SE)")


def _nonincreasing(seq):
    return all(b <= a for a, b in zip(seq, seq[1:]))


def _nondecreasing(seq):
    return all(b >= a for a, b in zip(seq, seq[1:]))


def test_criterion_5_trend_suite():
    sc = desk_scenario()
    assert len(grid_points(sc)) == 81
    checks = {}

    # (a) M = 1..10 at W = 20 MHz, for both 0.1 mW and 1 mW
    for power in (0.1, 1.0):
        base = RadioConfig(system_bandwidth_hz=20e6, tx_power_per_tone_mw=power)
        res = run_sweep(sc, SweepSpec("M", tuple(range(1, 11)), base), workers=WORKERS)
        bad = [lab for lab in LABELS if not _nonincreasing([b for _, b in res.series(lab)])]
        checks[f"a(P_T={power})"] = (not bad, f"non-monotone: {bad}" if bad else "ok")
        if power == 1.0:
            tones = res

    # (b) N_R = 2 vs 1 at M = 3, W = 2 MHz, 0.1 mW, N_T = 1
    base = RadioConfig(num_tones=3, system_bandwidth_hz=2e6, tx_power_per_tone_mw=0.1)
    res = run_sweep(sc, SweepSpec("N_R", (1, 2), base), [(1, 1)], workers=WORKERS)
    b1, b2 = res.lookup(1, "1x1").avg_miss_rate, res.lookup(2, "1x2").avg_miss_rate
    checks["b"] = (b2 < b1, f"{b1:.4g} -> {b2:.4g}")

    # (c) W sweep, M = 4, 0.1 mW
    base = RadioConfig(num_tones=4, system_bandwidth_hz=20e6, tx_power_per_tone_mw=0.1)
    res = run_sweep(sc, SweepSpec("W", (1e6, 2e6, 5e6, 10e6, 20e6, 40e6), base), workers=WORKERS)
    bad = [lab for lab in LABELS if not _nonincreasing([b for _, b in res.series(lab)])]
    checks["c"] = (not bad, f"non-monotone: {bad}" if bad else "ok")

    # (d) narrowband b sweep, M = 1, W = b, 0.1 mW
    base = RadioConfig(num_tones=1, system_bandwidth_hz=250.0, subband_bandwidth_hz=250.0, tx_power_per_tone_mw=0.1)
    res = run_sweep(sc, SweepSpec("b", (250.0, 2.5e3, 25e3, 250e3), base, narrowband=True), workers=WORKERS)
    bad = [lab for lab in LABELS if not _nondecreasing([b for _, b in res.series(lab)])]
    checks["d"] = (not bad, f"non-monotone: {bad}" if bad else "ok")

    # (e) 2x2 security gain at 1 mW, M = 1 vs M = 10
    g1, g10 = tones.lookup(1, "2x2").security_gain, tones.lookup(10, "2x2").security_gain
    checks["e"] = (g1 > g10, f"G(M=1)={g1:.4g}, G(M=10)={g10:.4g}")

    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k} {'pass' if v[0] else 'FAIL'} ({v[1]})" for k, v in checks.items())
    assert report(5, ok, detail)


def test_criterion_6_invariance_suite():
    nm = NoiseModel(0.5, 1.0)
    grid = np.arange(3600) * (2 * np.pi / 3600)
    failures = {"phase": 0, "symmetry": 0, "rotation": 0}
    for seed in range(100):
        rng = np.random.default_rng([6, seed])
        n = int(rng.integers(1, 41))
        h1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        h2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        psi1, psi2 = rng.uniform(-np.pi, np.pi, 2)
        base = statistic(h1, h2, nm)
        rotated = statistic(h1 * np.exp(1j * psi1), h2 * np.exp(1j * psi2), nm)
        if not math.isclose(rotated, base, rel_tol=1e-9, abs_tol=1e-9):
            failures["phase"] += 1
        if not math.isclose(statistic(h2, h1, nm), base, rel_tol=1e-9, abs_tol=1e-9):
            failures["symmetry"] += 1
        phi = optimal_rotation(h1, h2)
        best = np.min(np.linalg.norm(h1[None, :] - h2[None, :] * np.exp(1j * grid)[:, None], axis=1))
        if np.linalg.norm(h1 - h2 * np.exp(1j * phi)) > best + 1e-12:
            failures["rotation"] += 1
    ok = not any(failures.values())
    assert report(6, ok, f"100 seeded instances, failures {failures}")


def test_criterion_7_reproducibility(tmp_path):
    cfg = CONFIGS / "desk_receivers.ini"
    runs = [(1, "a"), (1, "b"), (3, "c")]
    data = []
    for workers, tag in runs:
        out = tmp_path / f"{tag}.csv"
        code = cmd_sweep(str(cfg), str(out), seed=0, workers=workers)
        data.append((code, out.read_bytes() if out.exists() else b""))
    ok = all(code == 0 for code, _ in data) and len({d for _, d in data}) == 1 and data[0][1]
    assert report(7, bool(ok), f"3 runs (workers 1, 1, 3): exit codes {[c for c, _ in data]}, identical={len({d for _, d in data}) == 1}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
