"""Functional evaluators: sharp constants, eps ladders, anisotropy tables, inequalities."""

import math

import numpy as np
import pytest

from oscilla.fields import (
    BoxDomain,
    Linear,
    Mollifier,
    Polynomial,
    ScalarField,
    Sinusoid,
    Step,
    discrete_variation,
    mollify,
    sample,
    truncate,
)
from oscilla.functionals import (
    AnisotropyTable,
    EvalOptions,
    anisotropic_variation,
    beta_constant,
    estimate_psi,
    eval_H,
    eval_K,
    evaluate_family,
    ladder_non_cauchy,
    psi_axis_cube,
    richardson,
    sweep_eps,
)
from oscilla.packing import enumerate_candidates
from oscilla.windows import oscillation_batch


# --- oracles ---------------------------------------------------------------


def beta_1d_oracle(m: int) -> float:
    """(1/m!) * integral over (-1/2, 1/2) of |x^m - mean|, by exact piecewise quadrature.

    The integrand is polynomial between the real roots of x^m - mean, so
    high-order Gauss-Legendre on each root-split segment is exact.
    """
    coeffs = np.zeros(m + 1)
    coeffs[0] = 1.0
    mean = 0.0 if m % 2 == 1 else 1.0 / (2**m * (m + 1))
    coeffs[-1] = -mean
    roots = np.roots(coeffs)
    cuts = sorted(
        float(r.real) for r in roots if abs(r.imag) < 1e-12 and -0.5 < r.real < 0.5
    )
    edges = [-0.5] + cuts + [0.5]
    nodes, wts = np.polynomial.legendre.leggauss(m + 2)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.abs(x**m - mean) @ wts)
    return total / math.factorial(m)


def square_mean_deviation(nu) -> float:
    """Average of |nu . y| over the centered unit square by a fine midpoint grid."""
    n = 2048
    t = (np.arange(n) + 0.5) / n - 0.5
    vals = np.abs(np.add.outer(nu[0] * t, nu[1] * t))
    return float(vals.mean())


def random_rough_field(rng, n=64):
    dom = BoxDomain((0.0,), (1.0,))
    s = rng.standard_normal(n) * rng.uniform(0.2, 1.0)
    s += rng.uniform(-2, 2) * np.linspace(0, 1, n)
    if rng.uniform() < 0.5:
        s[int(n * rng.uniform(0.2, 0.8)) :] += rng.uniform(-2, 2)
    return ScalarField(dom, s)


def random_smooth_field(rng, n=128):
    dom = BoxDomain((0.0,), (1.0,))
    x = (np.arange(n) + 0.5) / n
    s = np.zeros(n)
    for _ in range(rng.integers(1, 5)):
        s += rng.uniform(-1, 1) * np.sin(
            2 * np.pi * rng.integers(1, 4) * x + rng.uniform(0, 2 * np.pi)
        )
    s += rng.uniform(-2, 2) * x
    return ScalarField(dom, s)


EXACT = EvalOptions(rho=2, solver="exact_1d")
UNIT = BoxDomain((0.0,), (1.0,))
SQUARE = BoxDomain((0.0, 0.0), (1.0, 1.0))


# --- sharp constants --------------------------------------------------------


def test_beta_1d_order1():
    assert beta_1d_oracle(1) == pytest.approx(0.25, abs=1e-12)
    r = beta_constant(1, 1)
    assert r.value == pytest.approx(0.25, abs=1e-8)
    assert r.value > 0


def test_beta_1d_order2():
    oracle = beta_1d_oracle(2)
    assert oracle == pytest.approx(1.0 / (18.0 * math.sqrt(3.0)), abs=1e-12)
    assert beta_constant(1, 2).value == pytest.approx(oracle, abs=1e-6)


def test_beta_1d_order3():
    oracle = beta_1d_oracle(3)
    assert oracle == pytest.approx(1.0 / 192.0, abs=1e-12)
    assert beta_constant(1, 3).value == pytest.approx(oracle, abs=1e-6)


def test_beta_2d_order1_axis_argmax():
    r = beta_constant(2, 1, quad_level=256, starts=4, iters=120)
    assert r.value == pytest.approx(0.25, abs=1e-3)
    assert r.argmax_axis_aligned
    # axis direction beats the diagonal
    diag = square_mean_deviation((1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)))
    assert r.value > diag
    assert r.value == pytest.approx(r.value_coarse, abs=5e-3)


def test_beta_unsupported_orders():
    with pytest.raises(ValueError):
        beta_constant(3, 1)
    with pytest.raises(ValueError):
        beta_constant(1, 4)


# --- eval_H -----------------------------------------------------------------


def test_eval_h_linear_tiling():
    u = sample(Linear(np.array([1.0])), UNIT, 512)
    e = eval_H(u, "interval", 0.125, EvalOptions(rho=1, solver="exact_1d"))
    # 8 windows, each contributing eps/4
    assert e.value == pytest.approx(0.25, rel=1e-3)
    assert e.optimality == "exact"


def test_eval_h_constant_zero():
    u = ScalarField(UNIT, np.full(64, 3.7))
    e = eval_H(u, "interval", 0.25, EXACT)
    assert e.value == 0.0


def test_eval_h_step_straddle():
    dom = BoxDomain((-0.5,), (0.5,))
    u = sample(Step([1.0], 0.0), dom, 256)
    e = eval_H(u, "interval", 0.25, EvalOptions(rho=4, solver="exact_1d"))
    # one straddling window contributes the mean deviation of an indicator,
    # 2t(1-t) maximized at t=1/2
    assert e.value == pytest.approx(0.5, abs=0.05)


def test_estimate_value_weight_relation():
    u = sample(Linear(np.array([1.0, 0.5])), SQUARE, 64)
    e = eval_K(u, 1, 0.25, EvalOptions(rho=2))
    assert e.value == pytest.approx(0.25 * e.total_weight, rel=1e-12)
    assert e.value >= 0.0
    assert e.upper_bound >= e.value - 1e-12


# --- eval_K -----------------------------------------------------------------


def test_eval_k_quadratic_order2_ladder():
    u = sample(Polynomial({(2,): 0.5}), UNIT, 1024)
    lad = sweep_eps(u, "K", 2, (0.25, 0.125, 0.0625), EXACT)
    target = beta_1d_oracle(2)
    assert lad.extrapolated == pytest.approx(target, rel=0.01)
    # normalized values are eps-independent for a pure quadratic
    assert max(lad.values) - min(lad.values) < 1e-3


def test_eval_k_low_degree_annihilated():
    u = sample(Linear(np.array([2.0])), UNIT, 256)
    e = eval_K(u, 2, 0.125, EXACT)
    assert e.value <= e.quad_tol + 1e-12


def test_eval_k_order2_lower_bound():
    u = sample(Sinusoid((1.0,)), UNIT, 1024)
    lad = sweep_eps(u, "K", 2, (0.125, 0.0625, 0.03125), EXACT)
    bound = beta_1d_oracle(2) * discrete_variation(u, 2)
    assert lad.extrapolated >= bound * 0.97


# --- ladders ----------------------------------------------------------------


def test_sweep_linear_flat():
    u = sample(Linear(np.array([1.0])), UNIT, 512)
    lad = sweep_eps(u, "H", 1, (0.25, 0.125, 0.0625), EvalOptions(rho=1, solver="exact_1d"))
    for v in lad.values:
        assert v == pytest.approx(0.25, rel=2e-3)
    assert lad.extrapolated == pytest.approx(0.25, rel=2e-3)
    assert not lad.non_cauchy
    assert lad.eps == (0.25, 0.125, 0.0625)


def test_richardson_first_order_exact():
    eps = [0.2, 0.1, 0.05]
    vals = [1.0 + 3.0 * e for e in eps]
    assert richardson(eps, vals, order=1) == pytest.approx(1.0, abs=1e-12)
    vals2 = [1.0 + 3.0 * e * e for e in eps]
    assert richardson(eps, vals2, order=2) == pytest.approx(1.0, abs=1e-12)
    assert richardson([0.1], [2.0]) == 2.0


def test_non_cauchy_flag():
    assert not ladder_non_cauchy([1.0, 1.5, 1.75, 1.875])
    assert ladder_non_cauchy([1.0, 1.3, 1.1, 1.35])
    # converged ladders never flag, whatever the diff pattern
    assert not ladder_non_cauchy([1.0, 1.0001, 1.00005])
    assert not ladder_non_cauchy([1.0, 2.0])


# --- anisotropy -------------------------------------------------------------


def test_psi_axis_cube_closed_form():
    assert psi_axis_cube((1.0,)) == 0.25
    for ang in (0.0, 0.2, math.pi / 6, math.pi / 4, 1.2, math.pi / 2):
        nu = (math.cos(ang), math.sin(ang))
        assert psi_axis_cube(nu) == pytest.approx(square_mean_deviation(nu), abs=1e-5)
    with pytest.raises(ValueError):
        psi_axis_cube((0.0, 0.0))


def test_estimate_psi_axis_and_diagonal():
    s = 1.0 / math.sqrt(2.0)
    tab = estimate_psi(
        "axis_box",
        [(1.0, 0.0), (s, s), (-1.0, 0.0)],
        (0.25, 0.125, 0.0625),
        resolution=128,
        opts=EvalOptions(rho=2),
    )
    assert tab.values[0] == pytest.approx(0.25, abs=0.005)
    assert tab.values[1] == pytest.approx(1.0 / (3.0 * math.sqrt(2.0)), abs=0.01)
    # sign symmetry
    assert abs(tab.values[2] - tab.values[0]) < 1e-3
    assert min(tab.values) > 0


def test_estimate_psi_rejects_non_unit():
    with pytest.raises(ValueError):
        estimate_psi("axis_box", [(1.0, 1.0)], (0.25, 0.125), resolution=64)


def _eight_direction_table():
    dirs = [
        (math.cos(a), math.sin(a)) for a in np.linspace(0.0, math.pi, 9)[:-1]
    ]
    return estimate_psi(
        "axis_box", dirs, (0.25, 0.125, 0.0625), resolution=128, opts=EvalOptions(rho=2)
    )


def test_psi_tilde_homogeneity_and_convexity():
    tab = _eight_direction_table()
    rng = np.random.default_rng(9)
    for _ in range(30):
        tau = rng.standard_normal(2)
        lam = rng.uniform(-3, 3)
        assert tab.psi_tilde(lam * tau) == pytest.approx(
            abs(lam) * tab.psi_tilde(tau), rel=1e-12
        )
    assert tab.psi_tilde((0.0, 0.0)) == 0.0
    for _ in range(60):
        t1 = rng.standard_normal(2) * rng.uniform(0.5, 2)
        t2 = rng.standard_normal(2) * rng.uniform(0.5, 2)
        mid = tab.psi_tilde(0.5 * (t1 + t2))
        assert mid <= 0.5 * (tab.psi_tilde(t1) + tab.psi_tilde(t2)) + 1e-3


def test_table_interpolates_knots():
    tab = _eight_direction_table()
    for d, v in zip(tab.directions, tab.values):
        assert tab.psi(d) == pytest.approx(v, abs=1e-12)
    lo, hi = tab.bounds()
    assert 0 < lo <= hi


def test_anisotropic_variation_linear_2d():
    nu = np.array([0.6, 0.8])
    s = 1.0 / math.sqrt(2.0)
    dirs = [tuple(nu), (1.0, 0.0), (s, s), (0.0, 1.0), (-0.6, 0.8), (0.8, -0.6), (0.8, 0.6), (-s, s)]
    tab = estimate_psi("axis_box", dirs, (0.25, 0.125, 0.0625), resolution=128, opts=EvalOptions(rho=2))
    u = sample(Linear(2.0 * nu), SQUARE, 128)
    got = anisotropic_variation(u, tab)
    assert got == pytest.approx(tab.psi(tuple(nu)) * 2.0, rel=0.02)


def test_anisotropic_variation_constant_zero():
    tab = _eight_direction_table()
    u = ScalarField(SQUARE, np.full((32, 32), 1.5))
    assert anisotropic_variation(u, tab) == 0.0


def test_anisotropic_variation_linear_1d():
    tab = estimate_psi(
        "interval", [(1.0,)], (0.25, 0.125, 0.0625), resolution=256,
        opts=EvalOptions(rho=2), dim=1,
    )
    u = sample(Linear(np.array([3.0])), UNIT, 256)
    assert anisotropic_variation(u, tab) == pytest.approx(tab.values[0] * 3.0, rel=0.01)


def test_anisotropic_variation_sparse_table_error():
    tab = estimate_psi(
        "axis_box", [(1.0, 0.0), (0.0, 1.0)], (0.25, 0.125), resolution=64,
        opts=EvalOptions(rho=2),
    )
    u = sample(Linear(np.array([1.0, 1.0])), SQUARE, 32)
    with pytest.raises(ValueError):
        anisotropic_variation(u, tab)


def test_equivalence_bounds_2d():
    tab = _eight_direction_table()
    c1, c2 = tab.bounds()
    rng = np.random.default_rng(5)
    n = 96
    x = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    for _ in range(6):
        s = np.zeros((n, n))
        for _ in range(4):
            s += rng.uniform(-1, 1) * np.sin(
                2 * np.pi * (rng.integers(1, 4) * X + rng.integers(1, 4) * Y)
                + rng.uniform(0, 2 * np.pi)
            )
        u = ScalarField(SQUARE, s)
        var = discrete_variation(u, 1)
        got = anisotropic_variation(u, tab)
        assert got <= c2 * var + 1e-12
        # the variation integrates one extra replicated row and column of cells
        assert got >= c1 * var * (1.0 - 3.0 / n)


# --- inequality suite -------------------------------------------------------


def test_estimate_from_above_and_convexity_exact_1d():
    rng = np.random.default_rng(77)
    eps = 0.25
    for _ in range(100):
        u = random_rough_field(rng)
        v = random_rough_field(rng)
        hu = eval_H(u, "interval", eps, EXACT).value
        hv = eval_H(v, "interval", eps, EXACT).value
        diff = ScalarField(u.domain, np.asarray(u.samples) - np.asarray(v.samples))
        hd = eval_H(diff, "interval", eps, EXACT).value
        scale = max(hu, hv, hd, 1e-30)
        assert abs(hu - hv) <= hd + 1e-10 * scale
        lam = rng.uniform()
        mix = ScalarField(
            u.domain, lam * np.asarray(u.samples) + (1 - lam) * np.asarray(v.samples)
        )
        hm = eval_H(mix, "interval", eps, EXACT).value
        assert hm <= lam * hu + (1 - lam) * hv + 1e-10 * scale


def test_truncation_per_window_and_family():
    rng = np.random.default_rng(101)
    eps = 0.25
    cands = enumerate_candidates(UNIT, eps, "interval", 2)
    centers = np.array([c.window.center for c in cands])
    for _ in range(100):
        u = random_rough_field(rng)
        k = rng.uniform(0.1, 1.5)
        tu = truncate(u, k)
        o_u = oscillation_batch(u, centers, eps, "interval")
        o_t = oscillation_batch(tu, centers, eps, "interval")
        assert np.all(o_t <= o_u + 1e-10 * np.maximum(np.abs(o_u), 1e-30))
        hu = eval_H(u, "interval", eps, EXACT).value
        ht = eval_H(tu, "interval", eps, EXACT).value
        assert ht <= hu + 1e-10 * max(hu, 1e-30)


def test_mollification_monotone():
    rng = np.random.default_rng(3)
    inner = BoxDomain((0.125,), (0.875,))
    for _ in range(100):
        u = random_smooth_field(rng)
        h = u.h[0]
        for sig in (2 * h, 4 * h):
            um = mollify(u, Mollifier(sig), inner)
            outer = eval_H(u, "interval", 0.125, EXACT)
            smoothed = eval_H(um, "interval", 0.125, EXACT)
            slack = outer.quad_tol + smoothed.quad_tol
            assert smoothed.value <= outer.value + slack + 1e-10 * max(outer.value, 1e-30)


def test_poincare_ratio_bounded():
    rng = np.random.default_rng(11)
    dom = BoxDomain((0.0,), (1.0,))
    batch_maxima = []
    for _ in range(4):
        ratios = []
        for trial in range(25):
            if trial % 2:
                u = ScalarField(dom, np.cumsum(rng.standard_normal(128)) * 0.2)
            else:
                u = random_smooth_field(rng)
            var = discrete_variation(u, 1)
            for eps in (0.25, 0.125):
                hv = eval_H(u, "interval", eps, EXACT).value
                ratios.append(hv / max(var, 1e-30))
        batch_maxima.append(max(ratios))
    # mean deviation of a 1D window never exceeds half its local variation
    assert max(batch_maxima) <= 0.5 + 1e-9
    mean_c = sum(batch_maxima) / len(batch_maxima)
    assert max(batch_maxima) <= 1.25 * mean_c
    assert min(batch_maxima) >= 0.75 * mean_c


def test_shared_family_triangle_2d_heuristic():
    rng = np.random.default_rng(21)
    n = 48
    x = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    su = np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y) + 0.5 * X
    sv = np.cos(4 * np.pi * X * Y) + rng.standard_normal((n, n)) * 0.05
    u = ScalarField(SQUARE, su)
    v = ScalarField(SQUARE, sv)
    d = ScalarField(SQUARE, su - sv)
    opts = EvalOptions(rho=2, solver="greedy", restarts=2)
    fams = [eval_K(f, 1, 0.25, opts).family for f in (u, v, d)]
    for fam in fams:
        tu = evaluate_family(u, fam)
        tv = evaluate_family(v, fam)
        td = evaluate_family(d, fam)
        scale = max(tu, tv, td, 1e-30)
        assert abs(tu - tv) <= td + 1e-10 * scale
