"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from qmanifold import (
    GeodesicControls,
    LmgModel,
    SeparatrixError,
    TwoLevelModel,
    circle_length,
    approx_error_profile,
    condensate_geometry,
    dp_polar_field,
    dp_refine,
    dp_seeds,
    geometric_tensor,
    hb_metric_f1,
    hb_metric_general,
    hb_minimize,
    integrate_cauchy,
    metric_from_overlaps,
    refine_all,
    ricci_scalar,
)
from qmanifold.cli import main
from qmanifold.meanfield import CondensateState, separatrix_residual

GOLDEN = Path(__file__).parent / "golden"

# convergence study of the N=10 first-DP circumference: 3.2611 (R=0.02),
# 3.1950 (0.01), 3.1633 (0.005); the excess roughly halves with R
CIRCLE_BOUND_R0005 = 0.022


@pytest.fixture
def report(capsys):
    def _report(number: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"

    return _report


@pytest.fixture(scope="module")
def dp10():
    return dp_refine(LmgModel(10), dp_seeds(10)[0])


def random_lmg_points(rng, n, N=10, min_gap=0.05):
    m = LmgModel(N)
    out = []
    while len(out) < n:
        lam = np.array([rng.uniform(-3, 3), rng.uniform(-2, 2)])
        t = geometric_tensor(m, lam)
        if t.gap > min_gap:
            out.append((lam, t))
    return out


def test_c01_dp_formula(report):
    worst_gap = worst_disp = worst_sep = 0.0
    count = expected = 0
    for N in range(2, 11):
        expected += 2 * (N // 2)
        m = LmgModel(N)
        for seed in dp_seeds(N):
            dp = dp_refine(m, seed)
            count += 1
            worst_gap = max(worst_gap, dp.gap_at_location)
            worst_disp = max(worst_disp, dp.displacement)
            worst_sep = max(worst_sep, abs(separatrix_residual(*dp.point)))
    ok = count == expected and worst_gap < 1e-10 and worst_disp < 1e-6 and worst_sep < 1e-10
    report(1, "DP seeds refine onto the separatrix", ok,
           f"{count}/{expected} DPs, gap {worst_gap:.1e}, displacement {worst_disp:.1e}, residual {worst_sep:.1e}")


def test_c02_perturbation_vs_overlap_metric(report):
    m = LmgModel(10)
    worst = 0.0
    for lam, t in random_lmg_points(np.random.default_rng(2), 20):
        g_ov = metric_from_overlaps(m, lam, 1e-5)
        worst = max(worst, np.linalg.norm(t.metric - g_ov) / np.linalg.norm(t.metric))
    report(2, "perturbation metric equals overlap metric", worst < 1e-4, f"max rel Frobenius {worst:.2e}")


def test_c03_two_level_geometry(report):
    S = TwoLevelModel.sphere()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        th, ph = rng.uniform(0.2, math.pi - 0.2), rng.uniform(-math.pi, math.pi)
        g = geometric_tensor(S, (th, ph)).metric
        worst = max(worst, np.abs(g - np.diag([0.25, 0.25 * math.sin(th) ** 2])).max())
    R = ricci_scalar(S, (1.1, 0.4))
    report(3, "two-level sphere metric and Ricci", worst < 1e-10 and abs(R - 8) < 1e-4,
           f"metric err {worst:.1e}, R = {R:.8f}")


def test_c04_condensate_curvature(report):
    worst_r = 0.0
    for N in (1, 2, 4, 8):
        geo = condensate_geometry(1, N, [0.8 * np.exp(0.3j)])
        worst_r = max(worst_r, abs(geo.ricci - 8 / N) / (8 / N))
    rng = np.random.default_rng(4)
    worst_b = worst_fs = 0.0
    N = 3.0
    for _ in range(10):
        alpha = rng.uniform(0.1, 2.0, 2) * np.exp(1j * rng.uniform(-3, 3, 2))
        geo = condensate_geometry(2, N, alpha)
        rho = np.abs(alpha)
        S = 1 + rho @ rho
        # block formulas substituted entry by entry
        g_rho = np.array([[((S if k == l else 0) - rho[k] * rho[l]) / S**2 for l in range(2)] for k in range(2)])
        g_phi = np.array([[((S * rho[k] ** 2 if k == l else 0) - rho[k] ** 2 * rho[l] ** 2) / S**2
                           for l in range(2)] for k in range(2)])
        worst_b = max(worst_b, np.abs(geo.g_rho - g_rho).max(), np.abs(geo.g_phi - g_phi).max())
        coords = np.concatenate([rho, np.angle(alpha)])

        def u(c):
            return CondensateState(c[:2] * np.exp(1j * c[2:])).single_particle()

        worst_fs = max(worst_fs, np.abs(geo.metric - hb_metric_general(u, coords, N)).max())
    ok = worst_r < 1e-3 and worst_b < 1e-14 and worst_fs < 1e-7
    report(4, "condensate Ricci 8/N and f=2 blocks", ok,
           f"Ricci rel {worst_r:.1e}, block err {worst_b:.1e}, Fubini-Study err {worst_fs:.1e}")


def test_c05_origin_metric(report):
    worst = 0.0
    for N in (4, 10, 50):
        g = geometric_tensor(LmgModel(N), (0.0, 0.0)).metric
        expected = np.diag([(N - 1) / (32 * N), 1 / (4 * N)])
        worst = max(worst, np.abs(g - expected).max())
    report(5, "closed-form metric at the origin", worst < 1e-10, f"max err {worst:.1e}")


def test_c06_berry_curvature_vanishes(report):
    worst = max(np.abs(t.berry).max() for _, t in random_lmg_points(np.random.default_rng(2), 20))
    report(6, "Berry curvature vanishes for the real model", worst < 1e-12, f"max |F| {worst:.1e}")


def test_c07_circle_circumference(report, dp10):
    ls = [circle_length(10, dp10, R).length for R in (0.02, 0.01, 0.005)]
    monotone = ls[0] >= ls[1] >= ls[2]
    above = min(l - math.pi for l in ls) >= -1e-4
    close = abs(ls[2] - math.pi) < CIRCLE_BOUND_R0005
    report(7, "circle circumference tends to pi", monotone and above and close,
           "lengths " + ", ".join(f"{l:.6f}" for l in ls))


def test_c08_phase_two_ricci_trend(report):
    R = {N: ricci_scalar(LmgModel(N), (2.0, 1.0)) for N in (20, 40, 80)}
    ok = all(r < 0 for r in R.values()) and abs(R[80] + 4) < abs(R[20] + 4)
    report(8, "phase-II Ricci negative and approaching -4", ok,
           ", ".join(f"R({N}) = {r:.4f}" for N, r in R.items()))


def test_c09_phase_one_sign_pattern(report):
    m = LmgModel(200)
    r = {lam: ricci_scalar(m, lam) for lam in [(0.9, 0.2), (-1.0, 0.2), (-6.0, 0.2), (-1.0, 0.1), (-1.0, 0.3)]}
    signs = r[(0.9, 0.2)] > 0 and r[(-1.0, 0.2)] < 0 and r[(-6.0, 0.2)] > 0
    flat = abs(r[(-1.0, 0.1)] - r[(-1.0, 0.3)]) < 0.2 * abs(r[(-1.0, 0.2)])
    report(9, "phase-I Ricci sign pattern at N=200", signs and flat,
           ", ".join(f"R{lam} = {v:.3f}" for lam, v in r.items()))


def test_c10_geodesic_conservation(report):
    dps = tuple(tuple(d.point) for d in refine_all(5))
    ctrl = GeodesicControls(domain=((-7.0, 3.0), (-2.0, 2.0)), dps=dps)
    m = LmgModel(5)
    drifts, fates = [], []
    for k in (1, 7, 13, 19, 25, 31, 37, 43, 49, 55):
        tr = integrate_cauchy(m, (-4.0, (2 * k - 1) / 100), (1.0, 0.0), 200.0, ctrl)
        drifts.append(tr.speed_drift)
        fates.append(tr.termination)
    ok = max(drifts) < 1e-5 and "dp_capture" in fates and "domain_exit" in fates
    report(10, "geodesic speed conserved, fan captured and exiting", ok,
           f"max drift {max(drifts):.1e}, {fates.count('dp_capture')} captured, "
           f"{fates.count('domain_exit')} exited")


def distance_to_critical_lines(lam):
    """Vertical distance to the infinite-size transition lines (chi = +/- chi_c for kappa < 1, chi = 0 above)."""
    k, c = lam
    if k < 1:
        cc = math.sqrt((k - 1) / (k - 2))
        return min(abs(c - cc), abs(c + cc), math.hypot(k - 1, c))
    return abs(c)


def test_c11_hb_degeneracy_contrast(report):
    rng = np.random.default_rng(11)
    m = LmgModel(10)
    worst_hb, min_exact, n = 0.0, math.inf, 0
    while n < 20:
        lam = np.array([rng.uniform(-3, 3), rng.uniform(-2, 2)])
        t = geometric_tensor(m, lam)
        # non-critical: open gap and away from the transition lines, where g_HB diverges
        if t.gap < 0.05 or distance_to_critical_lines(lam) < 0.1:
            continue
        try:
            g_hb = hb_metric_f1(10, lam)
        except SeparatrixError:
            continue
        worst_hb = max(worst_hb, abs(np.linalg.det(g_hb)))
        min_exact = min(min_exact, t.det)
        n += 1
    report(11, "HB metric singular, exact metric regular", worst_hb < 1e-14 and min_exact > 1e-12,
           f"max |det g_HB| {worst_hb:.1e}, min det g {min_exact:.1e}")


def test_c12_separatrix_jump(report):
    below = hb_minimize(None, (0.0, 0.70)).rho
    above = hb_minimize(None, (0.0, 0.72)).rho
    co = hb_minimize(None, (2.0, 0.0))
    pair = sorted(co.degenerate_minima) if co.coexisting else []
    coexist = len(pair) == 2 and pair[0] == pytest.approx(-pair[1], rel=1e-10) and pair[1] > 0
    report(12, "condensate jump across the separatrix", below == 0.0 and abs(above) > 0.1 and coexist,
           f"rho(0, 0.70) = {below}, rho(0, 0.72) = {above:.4f}, minima at (2, 0) {pair}")


def test_c13_two_level_error_decreases(report, dp10):
    prof = approx_error_profile(10, dp10, math.pi / 4, [0.1, 0.05, 0.025])
    ok = not np.isnan(prof.errors).any() and bool(np.all(np.diff(prof.errors, axis=0) < 0))
    report(13, "two-level metric error shrinks toward the DP", ok,
           "errors " + "; ".join(", ".join(f"{e:.6f}" for e in row) for row in prof.errors))


def test_c14_coordinate_invariance(report, dp10):
    m = LmgModel(10)
    worst, min_det = 0.0, math.inf
    for R, th in [(0.05, 0.3), (0.1, 0.5), (0.2, 1.5), (0.3, 2.5), (0.25, 5.5)]:
        f = dp_polar_field(m, dp10, R, th, shift=0.5)
        lam = dp10.point + R * np.array([math.cos(th), math.sin(th)])
        min_det = min(min_det, f.det, geometric_tensor(m, lam).det)
        worst = max(worst, abs(f.ricci - ricci_scalar(m, lam)))
    report(14, "Ricci agrees in cartesian and polar charts", worst < 1e-3 and min_det > 1e-6,
           f"max |dR| {worst:.1e}, min det {min_det:.1e}")


def test_c15_cli_golden_files(report, tmp_path):
    mismatched = []
    for name in ("ricci_map_n5", "dp_find_n10"):
        cfg = GOLDEN / f"{name}.json"
        expected = (GOLDEN / f"{name}.csv").read_bytes()
        for workers in ("1", "3"):
            out = tmp_path / f"{name}_{workers}.csv"
            code = main([json.loads(cfg.read_text())["command"], "--config", str(cfg), "--workers", workers,
                         "--output", str(out)])
            if code != 0 or out.read_bytes() != expected:
                mismatched.append(f"{name}/workers={workers}")
    report(15, "CLI reproduces golden files", not mismatched, "mismatch: " + ", ".join(mismatched) if mismatched else "")
