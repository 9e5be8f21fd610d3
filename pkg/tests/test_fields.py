import math

import numpy as np
import pytest

from oscilla.fields import (
    BoxDomain,
    CantorVitali,
    Linear,
    Mollifier,
    Polynomial,
    ScalarField,
    Sinusoid,
    Step,
    discrete_variation,
    lq_distance,
    lq_norm,
    mollify,
    sample,
    truncate,
)


# ---------------------------------------------------------------- oracles

def cantor_digit_oracle(x: float, depth: int = 60) -> float:
    """Base-3 digit walk: halve the weight per digit, stop at the first 1."""
    y = 0.0
    w = 0.5
    for _ in range(depth):
        x *= 3.0
        d = int(x)
        x -= d
        if d == 1:
            return y + w
        if d == 2:
            y += w
        w *= 0.5
    return y


def brute_convolution(samples: np.ndarray, kernel: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Direct 1D convolution restricted to output cells [lo, hi)."""
    r = (kernel.size - 1) // 2
    out = np.empty(hi - lo)
    for j, i in enumerate(range(lo, hi)):
        acc = 0.0
        for t in range(-r, r + 1):
            acc += kernel[t + r] * samples[i + t]
        out[j] = acc
    return out


# ---------------------------------------------------------------- domain / sampling

def test_box_domain_validation():
    with pytest.raises(ValueError):
        BoxDomain((0.0,), (0.0,))
    with pytest.raises(ValueError):
        BoxDomain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    d = BoxDomain((0.0, -1.0), (2.0, 1.0))
    assert d.dim == 2
    assert d.length(0) == 2.0
    assert d.volume == 4.0
    assert d.center == (1.0, 0.0)


def test_sample_linear_cell_centers():
    dom = BoxDomain((-0.5,), (0.5,))
    u = sample(Linear((1.0,)), dom, 4)
    assert np.allclose(u.samples, [-0.375, -0.125, 0.125, 0.375])
    assert u.h == (0.25,)


def test_cantor_vitali_matches_digit_oracle():
    src = CantorVitali(depth=40)
    pts = np.array([[1.0 / 3.0], [0.25], [0.5], [2.0 / 3.0], [0.123456], [0.987]])
    got = src.value(pts)
    want = [cantor_digit_oracle(float(p[0])) for p in pts]
    assert np.allclose(got, want, atol=2e-12)
    assert got[0] == pytest.approx(0.5, abs=1e-12)


def test_cantor_vitali_monotone_and_anchored():
    src = CantorVitali(depth=40)
    xs = np.linspace(0.0, 1.0, 2001)[:, None]
    v = src.value(xs)
    assert v[0] == pytest.approx(0.0, abs=1e-12)
    assert v[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(v) >= -1e-15)


def test_step_indicator_single_jump():
    u = sample(Step((1.0,), 0.0), BoxDomain((-0.5,), (0.5,)), 64)
    s = np.asarray(u.samples)
    assert set(np.unique(s)) <= {0.0, 1.0}
    assert int(np.abs(np.diff(s)).sum()) == 1


def test_sinusoid_derivative_closed_form():
    src = Sinusoid((1.0, 1.0))
    pts = np.array([[0.2, 0.7], [0.33, 0.1]])
    dx = src.derivative((1, 0), pts)
    want = 2 * math.pi * np.cos(2 * math.pi * pts[:, 0]) * np.sin(2 * math.pi * pts[:, 1])
    assert np.allclose(dx, want)


def test_polynomial_derivative_convention():
    # x^2 about center 0.5: d/dx at x = 2 (x - 0.5)
    src = Polynomial({(2,): 1.0}, center=(0.5,))
    pts = np.array([[0.75], [0.1]])
    assert np.allclose(src.derivative((1,), pts), 2.0 * (pts[:, 0] - 0.5))
    assert np.allclose(src.derivative((2,), pts), 2.0)


# ---------------------------------------------------------------- mollify

def test_mollify_preserves_constants():
    dom = BoxDomain((0.0,), (1.0,))
    u = sample(Linear((0.0,), offset=3.5), dom, 128)
    inner = BoxDomain((0.25,), (0.75,))
    v = mollify(u, Mollifier(0.05), inner)
    assert np.allclose(v.samples, 3.5, atol=1e-12)


def test_mollify_preserves_affine_on_inner():
    dom = BoxDomain((0.0,), (1.0,))
    u = sample(Linear((1.0,)), dom, 256)
    inner = BoxDomain((0.25,), (0.75,))
    v = mollify(u, Mollifier(0.05), inner)
    xs = v.cell_centers(0)
    assert np.allclose(v.samples, xs, atol=1e-10)


def test_mollify_matches_brute_convolution():
    dom = BoxDomain((0.0,), (1.0,))
    rng = np.random.default_rng(3)
    u = sample(Linear((1.0,)), dom, 128).with_samples(rng.standard_normal(128))
    mol = Mollifier(0.1)
    inner = BoxDomain((0.25,), (0.75,))
    v = mollify(u, mol, inner)
    kernel = mol.kernel(u.h[0], 1)
    lo = int(round(0.25 / u.h[0]))
    hi = int(round(0.75 / u.h[0]))
    want = brute_convolution(np.asarray(u.samples), kernel, lo, hi)
    assert np.allclose(np.asarray(v.samples), want, atol=1e-12)


def test_mollified_step_gradient_bounded_by_kernel_slope():
    dom = BoxDomain((-0.5,), (0.5,))
    u = sample(Step((1.0,), 0.0), dom, 512)
    mol = Mollifier(0.1)
    inner = BoxDomain((-0.25,), (0.25,))
    v = mollify(u, mol, inner)
    grad = np.abs(np.diff(np.asarray(v.samples))) / v.h[0]
    kernel = mol.kernel(u.h[0], 1) / u.h[0]
    assert grad.max() <= np.abs(kernel).sum() + 1e-9


def test_mollify_rejects_oversized_sigma():
    dom = BoxDomain((0.0,), (1.0,))
    u = sample(Linear((1.0,)), dom, 64)
    with pytest.raises(ValueError):
        mollify(u, Mollifier(0.3), BoxDomain((0.125,), (0.875,)))


# ---------------------------------------------------------------- truncate

def test_truncate_three_cases():
    dom = BoxDomain((0.0,), (1.0,))
    base = sample(Linear((1.0,)), dom, 8)
    u = base.with_samples(np.array([-2.0, -1.0, -0.2, 0.0, 0.3, 0.9, 1.5, 2.0]))
    v = truncate(u, 1.0)
    assert np.allclose(v.samples, [-1.0, -1.0, -0.2, 0.0, 0.3, 0.9, 1.0, 1.0])


def test_truncate_zero_level_and_identity():
    dom = BoxDomain((0.0,), (1.0,))
    rng = np.random.default_rng(0)
    u = sample(Linear((1.0,)), dom, 32).with_samples(rng.standard_normal(32))
    assert np.allclose(truncate(u, 0.0).samples, 0.0)
    k = float(np.abs(np.asarray(u.samples)).max())
    assert np.array_equal(np.asarray(truncate(u, k).samples), np.asarray(u.samples))


def test_truncate_idempotent_and_lipschitz():
    dom = BoxDomain((0.0,), (1.0,))
    rng = np.random.default_rng(1)
    u = sample(Linear((1.0,)), dom, 64).with_samples(2.0 * rng.standard_normal(64))
    v = sample(Linear((1.0,)), dom, 64).with_samples(2.0 * rng.standard_normal(64))
    tu, tv = truncate(u, 0.7), truncate(v, 0.7)
    assert np.array_equal(np.asarray(truncate(tu, 0.7).samples), np.asarray(tu.samples))
    du = np.abs(np.asarray(tu.samples) - np.asarray(tv.samples)).max()
    assert du <= np.abs(np.asarray(u.samples) - np.asarray(v.samples)).max() + 1e-15


# ---------------------------------------------------------------- discrete variation

def test_variation_linear_unit_gradient():
    dom = BoxDomain((0.0,), (1.0,))
    u = sample(Linear((1.0,)), dom, 256)
    assert discrete_variation(u, 1) == pytest.approx(1.0, abs=1e-10)


def test_variation_annihilates_low_degree():
    dom = BoxDomain((0.0,), (1.0,))
    u = sample(Polynomial({(1,): 2.0, (0,): 0.3}), dom, 128)
    assert discrete_variation(u, 2) == pytest.approx(0.0, abs=1e-9)


def test_variation_cantor_telescopes_to_one():
    dom = BoxDomain((0.0,), (1.0,))
    u = sample(CantorVitali(depth=40), dom, 3**9)
    assert discrete_variation(u, 1) == pytest.approx(1.0, abs=0.01)


def test_variation_triangle_and_homogeneity():
    dom = BoxDomain((0.0, 0.0), (1.0, 1.0))
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.standard_normal((32, 32))
        b = rng.standard_normal((32, 32))
        u = ScalarField(dom, a)
        v = ScalarField(dom, b)
        w = ScalarField(dom, a + b)
        assert discrete_variation(w, 1) <= discrete_variation(u, 1) + discrete_variation(v, 1) + 1e-12
        c = float(rng.uniform(-3, 3))
        assert discrete_variation(ScalarField(dom, c * a), 1) == pytest.approx(
            abs(c) * discrete_variation(u, 1), rel=1e-12, abs=1e-12
        )


# ---------------------------------------------------------------- distances

def test_lq_distance_against_direct_sum():
    dom = BoxDomain((0.0, 0.0), (1.0, 1.0))
    rng = np.random.default_rng(11)
    a = rng.standard_normal((16, 16))
    b = rng.standard_normal((16, 16))
    u, v = ScalarField(dom, a), ScalarField(dom, b)
    h2 = (1.0 / 16) ** 2
    for q in (1.0, 2.0, 3.5):
        want = (np.sum(np.abs(a - b) ** q) * h2) ** (1.0 / q)
        assert lq_distance(u, v, q) == pytest.approx(want, abs=1e-14)
    assert lq_distance(u, u, 2.0) == 0.0


def test_lq_constant_offset_is_abs_c():
    dom = BoxDomain((0.0,), (1.0,))
    u = sample(Linear((1.0,)), dom, 64)
    v = u.with_samples(np.asarray(u.samples) + 0.7)
    for q in (1.0, 2.0, 4.0):
        assert lq_distance(u, v, q) == pytest.approx(0.7, abs=1e-12)
    assert lq_norm(v.with_samples(np.full(64, -0.3)), 1.0) == pytest.approx(0.3, abs=1e-14)


def test_lq_distance_grid_mismatch():
    u = sample(Linear((1.0,)), BoxDomain((0.0,), (1.0,)), 32)
    v = sample(Linear((1.0,)), BoxDomain((0.0,), (1.0,)), 64)
    with pytest.raises(ValueError):
        lq_distance(u, v, 2.0)
