"""Denoising solver: inner window problems, reference limit solver, ladder studies."""

import numpy as np
import pytest
from scipy import optimize

from oscilla.denoise import (
    DenoiseProblem,
    _AlignedWindowGrid,
    _family_value,
    _inner_q2,
    _median_flat_interval,
    _minimize_family,
    _zero_mean_shrink,
    almost_minimizer_study,
    convergence_study,
    reference_set_distance,
    rof_objective,
    solve_Feps,
    solve_rof_reference,
)
from oscilla.fields import BoxDomain, ScalarField, lq_distance, lq_norm

DOM = BoxDomain((0.0,), (1.0,))


def grid_points(n):
    return (np.arange(n) + 0.5) / n


def step_plus_noise(n, seed, amp=0.05, where=0.5):
    rng = np.random.default_rng(seed)
    return ScalarField(DOM, (grid_points(n) > where).astype(float) + amp * rng.standard_normal(n))


# --- inner window problems ---------------------------------------------------


def test_inner_q2_matches_direct_search():
    rng = np.random.default_rng(4)
    c1, c2 = 0.35, 2.0
    for _ in range(5):
        fw = rng.standard_normal((1, 6))
        uw, vals = _inner_q2(fw, c1, c2)

        def objective(u):
            return c1 * np.abs(u - u.mean()).sum() + c2 * ((u - fw[0]) ** 2).sum()

        res = optimize.minimize(objective, fw[0], method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
        direct = c1 * np.abs(uw[0] - uw[0].mean()).sum() + c2 * ((uw[0] - fw[0]) ** 2).sum()
        assert vals[0] == pytest.approx(direct, rel=1e-9)
        assert vals[0] <= res.fun + 1e-9
        assert vals[0] == pytest.approx(res.fun, rel=1e-6)


def test_zero_mean_shrink_optimality():
    rng = np.random.default_rng(8)
    g = rng.standard_normal((12, 7))
    kappa = 0.4
    v = _zero_mean_shrink(g, kappa)
    assert np.abs(v.sum(axis=1)).max() < 1e-10

    def val(w):
        return kappa * np.abs(w).sum(axis=1) + 0.5 * ((w - g) ** 2).sum(axis=1)

    base = val(v)
    for _ in range(200):
        d = rng.standard_normal((12, 7))
        d -= d.mean(axis=1, keepdims=True)
        for t in (1e-3, -1e-3, 0.05):
            assert np.all(val(v + t * d) >= base - 1e-12)


# --- reference limit solver ---------------------------------------------------


def test_rof_step_shrinkage_closed_form():
    n = 256
    f = ScalarField(DOM, (grid_points(n) > 0.5).astype(float) - 0.5)
    u = solve_rof_reference(f, 10.0, 2.0, gap_tol=1e-10)
    us = np.asarray(u.samples)
    lo, hi = us[: n // 2], us[n // 2 :]
    # each level moves weight/(2 lam L) = 0.25/(2*10*0.5) toward the middle
    assert np.ptp(lo) < 1e-7 and np.ptp(hi) < 1e-7
    assert abs(lo.mean() + 0.475) < 1e-7
    assert abs(hi.mean() - 0.475) < 1e-7


def test_rof_unique_from_any_start():
    n = 256
    f = ScalarField(DOM, (grid_points(n) > 0.5).astype(float) - 0.5)
    rng = np.random.default_rng(0)
    g1 = ScalarField(DOM, np.asarray(f.samples) + rng.standard_normal(n))
    g2 = ScalarField(DOM, np.asarray(f.samples) - 2.0 + 3 * rng.standard_normal(n))
    u1 = solve_rof_reference(f, 10.0, 2.0, gap_tol=1e-10, init=g1)
    u2 = solve_rof_reference(f, 10.0, 2.0, gap_tol=1e-10, init=g2)
    assert lq_distance(u1, u2, 2.0) < 1e-6


def test_rof_constant_fixed_point():
    f = ScalarField(DOM, np.full(64, 1.3))
    u = solve_rof_reference(f, 5.0, 2.0)
    assert np.allclose(np.asarray(u.samples), 1.3, atol=1e-12)


def test_rof_rejects_other_exponents():
    f = ScalarField(DOM, np.zeros(32))
    with pytest.raises(ValueError):
        solve_rof_reference(f, 1.0, 3.0)


def test_rof_objective_matches_hand_sum():
    n = 8
    s = np.array([0.0, 1.0, 1.0, 0.0, 2.0, 2.0, 2.0, 0.0])
    f = np.array([0.5, 1.0, 0.5, 0.0, 2.0, 1.5, 2.0, 1.0])
    u = ScalarField(DOM, s)
    tv = np.abs(np.diff(s)).sum()
    fid = 3.0 * ((s - f) ** 2).sum() / n
    got = rof_objective(u, ScalarField(DOM, f), 3.0, 2.0)
    assert got == pytest.approx(0.25 * tv + fid, rel=1e-12)


# --- packed objective solver --------------------------------------------------


def test_solve_constant_datum():
    f = ScalarField(DOM, np.full(64, 1.3))
    sol = solve_Feps(DenoiseProblem(f=f, lam=5.0, eps=0.25))
    assert sol.value == 0.0
    assert np.array_equal(np.asarray(sol.u.samples), np.asarray(f.samples))


def test_huge_fidelity_returns_datum():
    f = step_plus_noise(256, 2, where=0.4)
    sol = solve_Feps(DenoiseProblem(f=f, lam=1e6, q=2.0, eps=0.125))
    assert lq_distance(sol.u, f, 2.0) <= 1e-3 * lq_norm(f, 2.0)


def test_fixed_family_oracle_q2():
    # zero stopping slack, then re-pack the returned iterate exactly and solve
    # that family's convex problem in closed form
    f = step_plus_noise(32, 5)
    prob = DenoiseProblem(f=f, lam=20.0, q=2.0, eps=0.25, rho=4, tol=0.0, max_iters=400)
    sol = solve_Feps(prob)
    grid = _AlignedWindowGrid(f.domain, f.resolution, 0.25, 4)
    fam, _ = grid.pack(np.asarray(sol.u.samples))
    u_fix, _ = _minimize_family(np.asarray(f.samples), grid, fam, 20.0, 2.0, 4000)
    oracle = _family_value(u_fix, np.asarray(f.samples), grid, fam, 20.0, 2.0)
    assert oracle <= sol.value + 1e-12
    assert sol.value <= oracle * 1.02


def test_fixed_family_oracle_q1():
    f = step_plus_noise(32, 5)
    prob = DenoiseProblem(f=f, lam=20.0, q=1.0, eps=0.25, rho=4, tol=0.0, max_iters=400)
    sol = solve_Feps(prob)
    grid = _AlignedWindowGrid(f.domain, f.resolution, 0.25, 4)
    fam, _ = grid.pack(np.asarray(sol.u.samples))
    u_fix, _ = _minimize_family(np.asarray(f.samples), grid, fam, 20.0, 1.0, 8000)
    oracle = _family_value(u_fix, np.asarray(f.samples), grid, fam, 20.0, 1.0)
    assert oracle <= sol.value + 1e-12
    assert sol.value <= oracle + 1e-6 * max(oracle, 1.0)


def test_solution_invariants():
    f = step_plus_noise(64, 7)
    sol = solve_Feps(DenoiseProblem(f=f, lam=10.0, q=2.0, eps=0.25, tol=1e-4))
    tr = sol.objective_trace
    assert all(b <= a + 1e-15 for a, b in zip(tr, tr[1:]))
    assert np.abs(np.asarray(sol.u.samples)).max() <= np.abs(np.asarray(f.samples)).max() + 1e-15
    assert sol.lower_bound <= sol.value + 1e-12
    assert sol.lower_bound <= min(sol.meta["raw_values"]) + 1e-12
    assert sol.certificate_gap <= 0.02 * sol.value
    # the datum itself is feasible
    grid = _AlignedWindowGrid(f.domain, f.resolution, 0.25, 4)
    fam_f, _ = grid.pack(np.asarray(f.samples))
    value_at_f = _family_value(np.asarray(f.samples), np.asarray(f.samples), grid, fam_f, 10.0, 2.0)
    assert sol.value <= value_at_f + 1e-12


def test_truncation_never_increases():
    f = step_plus_noise(64, 5)
    grid = _AlignedWindowGrid(DOM, (64,), 0.25, 4)
    farr = np.asarray(f.samples)
    amp = float(np.abs(farr).max())
    rng = np.random.default_rng(9)
    for _ in range(50):
        u = farr + rng.standard_normal(64) * rng.uniform(0.1, 1.0)
        ut = np.clip(u, -amp, amp)
        for q in (1.0, 2.0):
            fam_u, _ = grid.pack(u)
            fam_t, _ = grid.pack(ut)
            fu = _family_value(u, farr, grid, fam_u, 10.0, q)
            ft = _family_value(ut, farr, grid, fam_t, 10.0, q)
            assert ft <= fu + 1e-10 * max(fu, 1e-30)


def test_problem_validation():
    f = ScalarField(DOM, np.zeros(32))
    with pytest.raises(ValueError):
        DenoiseProblem(f=f, lam=0.0)
    with pytest.raises(ValueError):
        DenoiseProblem(f=f, lam=1.0, eps=-0.1)
    with pytest.raises(ValueError):
        DenoiseProblem(f=f, lam=1.0, q=0.5)
    with pytest.raises(ValueError):
        _AlignedWindowGrid(DOM, (32,), 0.3, 4)
    with pytest.raises(ValueError):
        _AlignedWindowGrid(DOM, (32,), 1.0 / 32.0, 4)


# --- ladder studies -----------------------------------------------------------


def test_convergence_study_fixed_point_probe():
    n = 128
    x = grid_points(n)
    g = ScalarField(DOM, np.sin(2 * np.pi * x) + (x > 0.6) * 1.0)
    f0 = solve_rof_reference(g, 6.0, 2.0)
    st = convergence_study(f0, 6.0, 2.0, (1 / 4, 1 / 8, 1 / 16), rho=4, tol=1e-3)
    assert st.verdicts["distances_non_increasing"]
    assert st.verdicts["objective_error_decreasing"]
    assert st.verdicts["uniqueness_probe"]
    assert st.distances[-1] <= 0.1 * lq_norm(f0, 2.0)
    assert st.eps == (0.25, 0.125, 0.0625)


def test_convergence_study_tiny_fidelity():
    f = step_plus_noise(128, 3)
    st = convergence_study(f, 1e-3, 2.0, (1 / 4, 1 / 8), rho=2, tol=1e-4)
    # a vanishing fidelity weight drives both problems toward constants
    assert np.ptp(np.asarray(st.reference.samples)) < 0.01
    assert all(d <= 1e-3 for d in st.distances)


def test_convergence_study_requires_q_above_one():
    f = ScalarField(DOM, np.zeros(32))
    with pytest.raises(ValueError):
        convergence_study(f, 1.0, 1.0, (0.25,))


def test_almost_minimizer_step_datum():
    f = step_plus_noise(64, 5)
    st = almost_minimizer_study(f, 10.0, 1.0, (1 / 4, 1 / 8, 1 / 16), rho=4)
    assert st.verdicts["set_distance_decreasing"]
    assert st.verdicts["equibounded"]
    assert st.distances[-1] <= st.distances[0] + 1e-12


def test_almost_minimizer_constant_datum():
    f = ScalarField(DOM, np.full(64, 0.7))
    st = almost_minimizer_study(f, 10.0, 1.0, (1 / 4, 1 / 8))
    assert st.distances == (0.0, 0.0)


def test_almost_minimizer_requires_q1():
    f = ScalarField(DOM, np.zeros(32))
    with pytest.raises(ValueError):
        almost_minimizer_study(f, 1.0, 2.0)


def test_contrast_equivariance_q1():
    f = ScalarField(DOM, (grid_points(32) > 0.5).astype(float))
    s1 = solve_Feps(DenoiseProblem(f=f, lam=10.0, q=1.0, eps=0.25, tol=1e-4))
    c = 2.5
    f2 = ScalarField(DOM, c * np.asarray(f.samples))
    s2 = solve_Feps(DenoiseProblem(f=f2, lam=10.0, q=1.0, eps=0.25, tol=1e-4))
    scaled = ScalarField(DOM, c * np.asarray(s1.u.samples))
    assert lq_distance(s2.u, scaled, 1.0) <= 1e-4 * c * max(lq_norm(f, 1.0), 1.0)


def test_reference_set_distance_shift_family():
    f = step_plus_noise(64, 5)
    u0 = solve_rof_reference(f, 10.0, 1.0)
    assert reference_set_distance(u0, u0, f) == 0.0
    lo, hi = _median_flat_interval(np.asarray(f.samples) - np.asarray(u0.samples))
    inside = ScalarField(DOM, np.asarray(u0.samples) + 0.5 * (lo + hi))
    assert reference_set_distance(inside, u0, f) <= 1e-12
    outside = ScalarField(DOM, np.asarray(u0.samples) + hi + 0.3)
    assert reference_set_distance(outside, u0, f) == pytest.approx(0.3, rel=1e-9)


def test_median_flat_interval():
    assert _median_flat_interval(np.array([3.0, 1.0, 2.0])) == (2.0, 2.0)
    assert _median_flat_interval(np.array([4.0, 1.0, 2.0, 3.0])) == (2.0, 3.0)
