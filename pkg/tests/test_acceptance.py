"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that the terminal summary prints in
order (see ``conftest.py``).  Tolerances are the stated ones.
"""

import math
import time

import numpy as np
import pytest
from oracles import brute_hole, brute_rel_separation, brute_separation
from suites import EPSILONS, PARTITION_BOX, PARTITION_RESOLUTION, commutator_matrix

from gdl.certify import certify_frame, m1_distance, m1_modulus
from gdl.cli import dominated_matrix
from gdl.deform import LinearMap, check_L1, check_L2, dilation_family, jitter_map
from gdl.experiments import SUITE_STEP, annuli_counterexample, dilation_series, jitter_series
from gdl.frames import frame_bounds, p_lower_bound, tf_lattice
from gdl.molecules import (
    Envelope,
    commutator_schur_matrix,
    envelope_domination_check,
    partition_of_unity,
    schur_norm,
    tighten_for_wilson,
    verify_lower_bound_transfer,
    wilson_basis,
    wilson_envelope,
    wilson_gabor_matrix,
)
from gdl.pointset import Box, PointSet, hole, lattice, rel_separation, separation, weak_distance
from gdl.tfcore import PhasePoint, gaussian_packet, gaussian_window, make_grid, random_signal, stft, stft_full, tf_shift

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def g144():
    return gaussian_window(make_grid(144))


def test_01_stft_isometry():
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(1)
    for L in (64, 128, 256):
        grid = make_grid(L)
        g = gaussian_window(grid)
        for _ in range(100):
            f = random_signal(grid, rng)
            F = stft_full(f, g)
            energy = F.cell_area * np.sum(np.abs(F.values) ** 2)
            worst = max(worst, abs(energy - f.norm() ** 2) / f.norm() ** 2)
    dt = time.perf_counter() - t0
    record(1, worst < 1e-10 and dt < 5, f"max relative Parseval error {worst:.2e}, {dt:.2f} s")


def test_02_commutation_and_covariance():
    rng = np.random.default_rng(2)
    grid = make_grid(64)
    g = gaussian_window(grid)
    h = grid.h
    aligned, frac = 0.0, 0.0
    for _ in range(100):
        f = random_signal(grid, rng)
        z = PhasePoint(*(rng.integers(-64, 64, 2) * h))
        w = PhasePoint(*(rng.integers(-64, 64, 2) * h))
        lhs = tf_shift(tf_shift(f, w), z).samples
        rhs = np.exp(-2j * np.pi * w.xi * z.x) * tf_shift(f, z + w).samples
        aligned = max(aligned, np.abs(lhs - rhs).max() / np.abs(f.samples).max())
        F = np.abs(stft_full(f, g).values)
        G = np.abs(stft_full(tf_shift(f, w), g).values)
        shift = (round(w.x / h), round(w.xi / grid.freq_step))
        aligned = max(aligned, np.abs(G - np.roll(F, shift, axis=(0, 1))).max())
    # fractional shifts act exactly only up to periodization; use localized
    # packets on a grid whose period leaves room for the shifted tails
    grid = make_grid(256)
    g = gaussian_window(grid)
    for _ in range(100):
        c = [PhasePoint(*rng.uniform(-1.5, 1.5, 2)) for _ in range(2)]
        f = gaussian_packet(grid, c, rng.standard_normal(2) + 1j * rng.standard_normal(2))
        z, w = PhasePoint(*rng.uniform(-1, 1, 2)), PhasePoint(*rng.uniform(-1, 1, 2))
        lhs = tf_shift(tf_shift(f, w), z).samples
        rhs = np.exp(-2j * np.pi * w.xi * z.x) * tf_shift(f, z + w).samples
        frac = max(frac, np.abs(lhs - rhs).max())
        pts = rng.uniform(-2, 2, (20, 2))
        d = np.abs(np.abs(stft(tf_shift(f, w), g, pts)) - np.abs(stft(f, g, pts - [w.x, w.xi])))
        frac = max(frac, d.max())
    record(2, aligned < 1e-12 and frac < 1e-8, f"grid-aligned {aligned:.2e}, fractional {frac:.2e}")


def test_03_oversampled_gaussian(g144):
    t0 = time.perf_counter()
    S = tf_lattice(g144.grid, SUITE_STEP, SUITE_STEP)
    rep = frame_bounds(g144, S)
    dt = time.perf_counter() - t0
    locked = abs(rep.A - 1.6818939778) < 1e-8 * 1.68
    ok = rep.A > 0 and rep.cond < 10 and locked and dt < 10
    record(3, ok, f"A={rep.A:.10f} B={rep.B:.4f} cond={rep.cond:.4f} ({len(S)} points, {dt:.2f} s)")


def test_04_critical_density_degradation():
    conds = {}
    for L in (64, 256):
        g = gaussian_window(make_grid(L))
        conds[L] = frame_bounds(g, tf_lattice(g.grid, 1, 1)).cond
    ok = conds[256] >= 2 * conds[64]
    note = " (both singular: even sqrt(L) makes the critical system rank deficient)" if math.isinf(conds[64]) else ""
    record(4, ok, f"cond(64)={conds[64]:.4g} cond(256)={conds[256]:.4g}{note}")


def test_05_jitter_stability(g144):
    base, rows = jitter_series(g144, [0.001, 0.01, 0.05], seed=7)
    A = [r.A for _, r in rows]
    rel = abs(A[1] - base.A) / base.A
    dev = [abs(a - base.A) for a in A]
    # the sweep degrades monotonically: A falls and its deviation grows with eps
    ok = rel < 0.2 and A[0] > A[1] > A[2] and dev[0] < dev[1] < dev[2]
    record(5, ok, f"A={base.A:.5f}; eps 0.001/0.01/0.05 -> {A[0]:.5f}/{A[1]:.5f}/{A[2]:.5f}; "
           f"change at 0.01 {rel:.2e}")


def test_06_dilation(g144):
    base, rows = dilation_series(g144, [4, 8, 16, 32])
    A = [r.A for _, r in rows]
    gaps = [abs(a - base.A) for a in A]
    ok = all(a > 0 for a in A) and all(x > y for x, y in zip(gaps, gaps[1:]))
    record(6, ok, "A_n (n=4,8,16,32) = " + ", ".join(f"{a:.4g}" for a in A) + f"; A={base.A:.4f}")


def test_07_annuli_counterexample():
    g = gaussian_window(make_grid(256))
    rows = annuli_counterexample(g, 8, [10, 20, 40])
    hd = [r.hole_deformed for r in rows]
    h0 = [r.hole_lattice for r in rows]
    last = rows[-1]
    ok = (hd[0] < hd[1] < hd[2] and max(h0) - min(h0) < 1e-12
          and last.A_deformed <= 0.5 * last.A_lattice
          and abs(hd[0] - 1.0750) < 1e-3 and abs(hd[2] - 3.3310) < 1e-3
          and abs(last.A_lattice - 1.7866) < 1e-3)
    record(7, ok, "holes " + ", ".join(f"{x:.4f}" for x in hd) + f"; lattice hole {h0[0]:.4f}; "
           f"A at R=40: {last.A_deformed:.3g} vs {last.A_lattice:.4f}")


def test_08_lipschitz_conditions():
    rng = np.random.default_rng(8)
    S = PointSet(rng.uniform(-4, 4, (120, 2)), 2)
    err = 0.0
    for _ in range(20):
        M = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
        R = rng.uniform(0.5, 3)
        diffs = S.points[:, None, :] - S.points[None, :, :]
        dist = np.linalg.norm(diffs, axis=2)
        mask = (dist <= R) & (dist > 0)
        expect = np.linalg.norm(diffs[mask] @ (M - np.eye(2)).T, axis=1).max()
        err = max(err, abs(check_L1(LinearMap(matrix=M), S, R) - expect))
    Z2 = lattice(np.eye(2), Box.cube(-8, 8, 2))
    worst = 0.0
    for R in (0.5, 1.0, 2.0, 4.0):
        Rp = check_L2(dilation_family([2, 4, 8, 16, 32]), Z2, R, n0=2)
        worst = max(worst, Rp - max(1.0, 2 * R))
    record(8, err <= 1e-12 and worst <= 0, f"L1 analytic error {err:.1e}; max R'-max(1,2R) {worst:.3g}")


def test_09_certifier_soundness():
    g = gaussian_window(make_grid(64))
    grid = g.grid
    zero = m1_modulus(g, 0.0)
    knobs = dict(u_steps=16, phase_steps=16, radial_steps=2)
    om = [m1_modulus(g, d, **knobs) for d in (0.05, 0.1, 0.2, 0.3, 0.5)]
    mono = all(a <= b + 1e-12 for a, b in zip(om, om[1:]))
    rng = np.random.default_rng(9)
    red = 0.0
    for _ in range(50):
        z = PhasePoint(*(rng.integers(-24, 24, 2) * grid.h))
        w = PhasePoint(*(rng.integers(-24, 24, 2) * grid.h))
        theta = 2 * np.pi * (z.xi - w.xi) * w.x
        diff = tf_shift(g.signal, z - w).scale(np.exp(1j * theta)) - g.signal
        F = stft_full(diff, g)
        red = max(red, abs(m1_distance(g, z, w) - F.cell_area * np.abs(F.values).sum()))
    fine = tf_lattice(grid, 0.25, 0.25)
    suite = {
        "a=b=0.25": fine,
        "jittered 0.25": PointSet(jitter_map(fine, 0.02, seed=1)(fine.points), 2),
        "a=b=0.5": tf_lattice(grid, 0.5, 0.5),
        "a=b=1/sqrt2": tf_lattice(grid, SUITE_STEP, SUITE_STEP),
    }
    certified, bad = [], []
    for name, S in suite.items():
        cert = certify_frame(g, S, u_steps=64, phase_steps=8, radial_steps=1)
        if cert.verdict == "certified-frame":
            certified.append(name)
            if frame_bounds(g, S).A <= 1e-10:
                bad.append(name)
    ok = zero == 0 and mono and red < 1e-10 and not bad and certified
    record(9, ok, f"omega_0={zero}; monotone={mono}; reduction error {red:.1e}; "
           f"certified {certified}; unsound {bad}")


def test_10_appendix_machinery():
    A, pts = commutator_matrix()
    ident = 0.0
    sups, schurs = [], []
    for eps in EPSILONS:
        P = partition_of_unity(eps, PARTITION_BOX, PARTITION_RESOLUTION)
        c = P.checks
        ident = max(ident, c["sum_error"], c["symmetry_error"],
                    1 / P.eta ** 2 - c["sq_min"], c["sq_max"] - 1)
        V = commutator_schur_matrix(A, pts, pts, P)
        sups.append(V.max())
        schurs.append(schur_norm(V))
    dec = all(a > b for a, b in zip(sups, sups[1:])) and all(a > b for a, b in zip(schurs, schurs[1:]))
    r1, r2 = sups[-1] / sups[0], schurs[-1] / schurs[0]
    ok = ident <= 1e-12 and dec and r1 <= 0.25 and r2 <= 0.25
    record(10, ok, "sup V " + ", ".join(f"{v:.3f}" for v in sups) + f" (ratio {r1:.3f}); Schur "
           + ", ".join(f"{v:.3f}" for v in schurs) + f" (ratio {r2:.3f})")


def test_11_lower_bound_transfer():
    n = 24
    idx = np.arange(n, dtype=float)[:, None]
    lows, svd_err, statuses = [], 0.0, []
    for seed in range(50):
        A, h = dominated_matrix(n, seed)
        theta = Envelope(1, lambda p, h=h: h * np.exp(-np.abs(p[:, 0])), window=n)
        rep = verify_lower_bound_transfer(A, idx, idx, theta, budget=4, seed=seed)
        statuses.append(rep.status)
        lows.extend(rep.estimates.values())
        svd_err = max(svd_err, abs(p_lower_bound(A, 2) - np.linalg.svd(A, compute_uv=False)[-1]))
        assert rep.c_known >= 1 - 1e-9
    ok = min(lows) >= 0.01 and svd_err <= 1e-9 and all(s == "PASS" for s in statuses)
    record(11, ok, f"min l1/linf estimate {min(lows):.3f} over 50 matrices; p=2 vs SVD {svd_err:.1e}")


def test_12_wilson_basis():
    g = gaussian_window(make_grid(64))
    gt = tighten_for_wilson(g)
    W = wilson_basis(gt)
    gram = np.abs(W.gram() - np.eye(64)).max()
    S = tf_lattice(g.grid, 0.5, 0.5)
    A = wilson_gabor_matrix(W, g, S)
    rep = envelope_domination_check(A, S.points, W.labels, wilson_envelope(gt, g), reduce=g.grid.reduce)
    ok = gram < 1e-8 and rep.holds and abs(rep.constant - 0.70086) < 1e-4
    record(12, ok, f"Gram error {gram:.1e}; domination holds={rep.holds}, constant {rep.constant:.4f}")


def test_13_brute_force_oracles():
    mismatches = 0
    for n in (1, 2, 5, 17, 60, 120, 200):
        for m in (1, 2):
            rng = np.random.default_rng(1000 * m + n)
            P = rng.uniform(-5, 5, (n, m))
            S = PointSet(P, m)
            lo, hi = [-5.0] * m, [5.0] * m
            mismatches += separation(S) != brute_separation(P)
            mismatches += rel_separation(S) != brute_rel_separation(P)
            mismatches += abs(hole(S, Box.cube(-5, 5, m)) - brute_hole(P, lo, hi)) > 1e-9 * max(1, brute_hole(P, lo, hi))
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(100):
        sets = [PointSet(rng.uniform(-2, 2, (rng.integers(0, 15), 2)).reshape(-1, 2), 2) for _ in range(3)]
        z, R = rng.uniform(-1, 1, 2), rng.uniform(0.5, 2)
        d = lambda a, b: weak_distance(sets[a], sets[b], z, R)  # noqa: E731
        worst = max(worst, d(0, 0), abs(d(0, 1) - d(1, 0)), d(0, 1) - d(0, 2) - d(2, 1))
    record(13, mismatches == 0 and worst <= 1e-12, f"oracle mismatches {mismatches}; pseudometric defect {worst:.1e}")
