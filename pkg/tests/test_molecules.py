import numpy as np
import pytest
from suites import EPSILONS, PARTITION_BOX, PARTITION_RESOLUTION, commutator_matrix

from gdl.frames import tf_lattice
from gdl.molecules import (
    Envelope,
    MoleculeSet,
    PreconditionError,
    ambiguity_envelope,
    check_molecules,
    commutator_schur_matrix,
    envelope_domination_check,
    field_envelope,
    g_orbit,
    gaussian_envelope,
    partition_lipschitz,
    partition_of_unity,
    refined_envelope,
    refined_tail,
    schur_norm,
    symmetrized_envelope,
    tighten_for_wilson,
    verify_lower_bound_transfer,
    wilson_basis,
    wilson_envelope,
    wilson_gabor_matrix,
)
from gdl.pointset import Box
from gdl.tfcore import PhasePoint, Signal, Window, gaussian_window, make_grid, stft, stft_full, tf_shift

SIGNS = [np.array(s, dtype=float) for s in ((1, 1), (1, -1), (-1, 1), (-1, -1))]


def _as_set(pts):
    return {tuple(p) for p in np.asarray(pts).tolist()}


def test_g_orbit_examples():
    assert _as_set(g_orbit([1, 2])) == {(1, 2), (-1, 2), (1, -2), (-1, -2)}
    assert _as_set(g_orbit([0, 3])) == {(0, 3), (0, -3)}
    assert len(g_orbit([0, 3])) == 2
    assert _as_set(g_orbit([0, 0])) == {(0, 0)}


def test_symmetrized_envelope_examples(rng):
    theta = gaussian_envelope()
    sym = symmetrized_envelope(theta)
    x = np.array([[0.3, -0.7]])
    assert sym(x)[0] == pytest.approx(4 * theta(x)[0], rel=1e-14)
    assert sym(np.array([[0.0, 0.4]]))[0] == pytest.approx(2 * theta(np.array([[0.0, 0.4]]))[0], rel=1e-14)
    bump = Envelope(2, lambda p: np.exp(-20 * np.sum((p - [1.0, 0.0]) ** 2, axis=1)))
    sb = symmetrized_envelope(bump)
    assert sb(np.array([[1.0, 0.0]]))[0] > 0.5 and sb(np.array([[-1.0, 0.0]]))[0] > 0.5
    shifted = Envelope(2, lambda p: np.exp(-np.sum((p - [0.4, 0.9]) ** 2, axis=1)))
    ss = symmetrized_envelope(shifted)
    for x in rng.uniform(-3, 3, (20, 2)):
        vals = [ss((s * x)[None])[0] for s in SIGNS]
        assert max(vals) - min(vals) < 1e-14


def test_envelope_amalgam_and_tail():
    theta = gaussian_envelope(window=8.0)
    # a 2D Gaussian has cell sups summing to a little above its integral
    assert 1.0 < theta.amalgam_norm < 10.0
    assert not theta.tail_flagged
    wide = gaussian_envelope(width=6.0, window=4.0)
    assert wide.tail_flagged
    assert theta.scaled(2.0).amalgam_norm == pytest.approx(2 * theta.amalgam_norm)


def test_field_envelope_exact_at_nodes(g64):
    grid = g64.grid
    V = np.abs(stft_full(g64.signal, g64).values)
    env = field_envelope(grid, V)
    jj = np.array([0, 3, 17, 63])
    kk = np.array([0, 5, 40, 1])
    pts = np.stack([jj * grid.h, kk * grid.freq_step], 1)
    assert np.array_equal(env(pts), V[jj, kk])
    with pytest.raises(ValueError):
        field_envelope(grid, -V)


def _gabor_molecules(g, pts, factor=1.0):
    return [tf_shift(g.signal, PhasePoint(*p)).scale(factor) for p in pts]


def test_check_molecules_examples(g64):
    grid = g64.grid
    S = tf_lattice(grid, 2.0, 2.0)
    env = ambiguity_envelope(g64)
    chk = check_molecules(MoleculeSet(S, _gabor_molecules(g64, S.points), g64, env))
    assert chk.violation < 1e-10
    chk2 = check_molecules(MoleculeSet(S, _gabor_molecules(g64, S.points, 2.0), g64, env))
    assert chk2.violation == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(grid.reduce(chk2.worst_point - chk2.worst_position), 0, atol=1e-12)


def test_check_molecules_phase_perturbed(g64, rng):
    grid = g64.grid
    S = tf_lattice(grid, 2.0, 2.0)
    members = [f.scale(np.exp(2j * np.pi * rng.uniform())) for f in _gabor_molecules(g64, S.points)]
    base = ambiguity_envelope(g64)
    chk = check_molecules(MoleculeSet(S, members, g64, base.scaled(1.1)))
    # only rounding in the far tail, where both sides are below 1e-15
    assert chk.violation < 1e-10
    with pytest.raises(ValueError):
        MoleculeSet(S, members[:-1], g64, base)


def test_schur_norm_examples(rng):
    assert schur_norm(np.eye(6)) == 1
    assert schur_norm(np.ones((5, 5))) == 5
    d = rng.standard_normal(7)
    assert schur_norm(np.diag(d)) == pytest.approx(np.abs(d).max())
    assert schur_norm(np.zeros((0, 0))) == 0


def test_schur_norm_properties(rng):
    for _ in range(30):
        A = rng.standard_normal((8, 6)) + 1j * rng.standard_normal((8, 6))
        B = rng.standard_normal((6, 9))
        assert schur_norm(A @ B) <= schur_norm(A) * schur_norm(B) + 1e-10
        s = schur_norm(A)
        assert np.linalg.norm(A, 1) <= s + 1e-10
        assert np.linalg.norm(A, np.inf) <= s + 1e-10
        assert np.linalg.norm(A, 2) <= s + 1e-10


def test_envelope_domination_examples(rng):
    pts = rng.uniform(-2, 2, (10, 2))
    theta = gaussian_envelope()
    rep = envelope_domination_check(np.zeros((10, 10)), pts, pts, theta)
    assert rep.holds and rep.max_excess == 0
    D = pts[:, None, :] - pts[None, :, :]
    A = np.exp(-np.pi * np.sum(D * D, axis=2)) * np.exp(1j * rng.uniform(0, 6, (10, 10)))
    rep = envelope_domination_check(A, pts, pts, theta)
    assert rep.holds and rep.constant <= 1 + 1e-12
    A[3, 4] = 10.0
    rep = envelope_domination_check(A, pts, pts, theta)
    assert not rep.holds and rep.max_excess > 0
    with pytest.raises(ValueError):
        envelope_domination_check(A[:, :5], pts, pts, theta)


def test_partition_invariants():
    for eps in EPSILONS:
        P = partition_of_unity(eps, PARTITION_BOX, PARTITION_RESOLUTION)
        c = P.checks
        assert c["sum_error"] <= 1e-12 and c["symmetry_error"] <= 1e-12
        assert 1 / P.eta ** 2 - 1e-12 <= c["sq_min"] and c["sq_max"] <= 1 + 1e-12
        assert np.all(P.indices >= 0)


def test_partition_symmetry_random_points(rng):
    P = partition_of_unity(0.5, PARTITION_BOX, 41)
    x = rng.uniform(-6, 6, (50, 2))
    for s in SIGNS:
        assert np.abs(P(x * s) - P(x)).max() <= 1e-12
    assert np.abs(P(x).sum(axis=0) - 1).max() <= 1e-12


def test_partition_covering_number_and_lipschitz_stable():
    etas, slopes = [], []
    for eps in (1.0, 0.5, 0.25):
        P = partition_of_unity(eps, PARTITION_BOX, 121)
        etas.append(P.eta)
        slopes.append(partition_lipschitz(P))
    assert len(set(etas)) == 1 and etas[0] == 4
    assert max(slopes) / min(slopes) < 1.25
    with pytest.raises(ValueError):
        partition_of_unity(0.0, PARTITION_BOX)


def test_commutator_diagonal_vanishes():
    pts = np.array([[x, y] for x in np.arange(-4, 4.5, 1.0) for y in np.arange(-4, 4.5, 1.0)])
    A = np.diag(np.linspace(1, 2, len(pts)))
    P = partition_of_unity(0.5, Box.cube(-4, 4, 2), 41)
    assert np.abs(commutator_schur_matrix(A, pts, pts, P)).max() == 0


def test_commutator_sweep_decreases():
    A, pts = commutator_matrix()
    sups, schurs = [], []
    for eps in EPSILONS:
        V = commutator_schur_matrix(A, pts, pts, partition_of_unity(eps, PARTITION_BOX, PARTITION_RESOLUTION))
        sups.append(V.max())
        schurs.append(schur_norm(V))
    assert all(a > b for a, b in zip(sups, sups[1:]))
    assert all(a > b for a, b in zip(schurs, schurs[1:]))
    assert sups[0] == pytest.approx(5.193598059, rel=1e-6)
    assert schurs[-1] == pytest.approx(1.758522525, rel=1e-6)


def test_refined_tail_decreases():
    theta = gaussian_envelope(window=8.0)
    tails = [refined_tail(theta, eps) for eps in (1.0, 0.5, 0.25)]
    assert tails[0] > tails[1] > tails[2] >= 0
    assert refined_envelope(theta, 1.0, np.zeros((1, 2)))[0] == pytest.approx(theta.amalgam_norm)


def test_transfer_identity():
    idx = np.arange(6, dtype=float)[:, None]
    theta = Envelope(1, lambda p: np.exp(-np.abs(p[:, 0])), window=6)
    rep = verify_lower_bound_transfer(np.eye(6), idx, idx, theta)
    assert rep.status == "PASS" and rep.heuristic
    assert rep.c_known == pytest.approx(1.0)
    for v in rep.estimates.values():
        assert v == pytest.approx(1.0, abs=1e-12)


def test_transfer_zero_column_fails():
    idx = np.arange(4, dtype=float)[:, None]
    theta = Envelope(1, lambda p: np.exp(-np.abs(p[:, 0])), window=4)
    A = np.eye(4)
    A[:, 2] = 0
    rep = verify_lower_bound_transfer(A, idx, idx, theta)
    assert rep.status == "FAIL" and rep.c_known == 0
    assert all(v == 0 for v in rep.estimates.values())
    with pytest.raises(PreconditionError):
        verify_lower_bound_transfer(5 * np.eye(4), idx, idx, theta)


def test_transfer_gabor_lattice_seeds(g64):
    grid = g64.grid
    rows, cols = tf_lattice(grid, 1.0, 1.0), tf_lattice(grid, 2.0, 2.0)
    A = np.stack([stft(tf_shift(g64.signal, PhasePoint(*c)), g64, rows.points) for c in cols.points], 1)
    theta = ambiguity_envelope(g64)
    lows = []
    for seed in range(50):
        rep = verify_lower_bound_transfer(A, rows.points, cols.points, theta, budget=2, seed=seed,
                                          reduce=grid.reduce)
        assert rep.status == "PASS"
        lows.extend(rep.estimates.values())
    assert rep.c_known == pytest.approx(0.9925441785, rel=1e-8)
    assert min(lows) > 0.99


def test_wilson_basis_orthonormal(g64):
    gt = tighten_for_wilson(g64)
    W = wilson_basis(gt)
    assert len(W.labels) == g64.grid.L
    assert np.abs(W.gram() - np.eye(g64.grid.L)).max() < 1e-8
    assert W.max_coefficient == 1.0
    assert np.all(W.labels[:, 1] >= 0) and np.all(2 * W.labels[:, 0] == np.round(2 * W.labels[:, 0]))


def test_wilson_gabor_domination(g64):
    grid = g64.grid
    gt = tighten_for_wilson(g64)
    W = wilson_basis(gt)
    S = tf_lattice(grid, 0.5, 0.5)
    A = wilson_gabor_matrix(W, g64, S)
    theta = wilson_envelope(gt, g64)
    rep = envelope_domination_check(A, S.points, W.labels, theta, reduce=grid.reduce)
    assert rep.holds
    assert rep.constant == pytest.approx(0.70086, abs=1e-4)


def test_wilson_rejects_bad_windows():
    g = gaussian_window(make_grid(64))
    odd = Window.from_samples(g.grid, np.roll(g.samples, 3))
    with pytest.raises(ValueError):
        wilson_basis(odd)
    with pytest.raises(ValueError):
        tighten_for_wilson(gaussian_window(make_grid(49)))
    assert isinstance(wilson_basis(tighten_for_wilson(g)).signals()[0], Signal)
