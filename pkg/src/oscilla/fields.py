"""Scalar fields on boxes: analytic sources, cell-centered sampling, and basic field ops.

Everything downstream (window oscillation, packing weights, functionals) consumes
the immutable :class:`ScalarField`. Analytic sources carry exact derivatives so
higher-order window fits do not have to fall back on finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage, signal


@dataclass(frozen=True)
class BoxDomain:
    """Open axis-aligned box (product of open intervals), dim 1 or 2."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        up = tuple(float(x) for x in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if len(lo) != len(up):
            raise ValueError("lower/upper dimension mismatch")
        if len(lo) not in (1, 2):
            raise ValueError("only dim 1 and 2 supported")
        if any(u <= l for l, u in zip(lo, up)):
            raise ValueError("degenerate box")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def length(self, axis: int) -> float:
        return self.upper[axis] - self.lower[axis]

    @property
    def volume(self) -> float:
        v = 1.0
        for a in range(self.dim):
            v *= self.length(a)
        return v

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (l + u) for l, u in zip(self.lower, self.upper))

    def shrink(self, margin: float) -> "BoxDomain":
        if 2 * margin >= min(self.length(a) for a in range(self.dim)):
            raise ValueError("margin swallows the box")
        return BoxDomain(
            tuple(l + margin for l in self.lower),
            tuple(u - margin for u in self.upper),
        )

    def contains_box(self, other: "BoxDomain", tol: float = 1e-12) -> bool:
        return all(
            ol >= l - tol and ou <= u + tol
            for l, u, ol, ou in zip(self.lower, self.upper, other.lower, other.upper)
        )


class AnalyticSource:
    """Base class: exact point values and (where defined) exact derivatives."""

    dim: int

    def value(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, alpha: tuple[int, ...], points: np.ndarray) -> np.ndarray:
        """Partial derivative of multi-order alpha, exact. Raises if unsupported."""
        raise NotImplementedError(f"{type(self).__name__} has no exact derivatives")

    @property
    def smooth(self) -> bool:
        return True


class Linear(AnalyticSource):
    def __init__(self, nu: Sequence[float], offset: float = 0.0):
        self.nu = np.asarray(nu, dtype=float)
        self.offset = float(offset)
        self.dim = self.nu.size

    def value(self, points):
        return points @ self.nu + self.offset

    def derivative(self, alpha, points):
        k = sum(alpha)
        base = np.zeros(points.shape[:-1])
        if k == 0:
            return self.value(points)
        if k == 1:
            return base + self.nu[alpha.index(1)]
        return base


class Polynomial(AnalyticSource):
    """sum_alpha c_alpha (x - center)^alpha with plain power coefficients."""

    def __init__(self, coeffs: Mapping[tuple[int, ...], float], center: Sequence[float] | None = None):
        self.coeffs = {tuple(int(k) for k in a): float(c) for a, c in coeffs.items()}
        self.dim = len(next(iter(self.coeffs)))
        if any(len(a) != self.dim for a in self.coeffs):
            raise ValueError("inconsistent multi-index lengths")
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)

    @property
    def degree(self) -> int:
        return max(sum(a) for a in self.coeffs)

    def value(self, points):
        return self.derivative((0,) * self.dim, points)

    def derivative(self, alpha, points):
        z = points - self.center
        out = np.zeros(points.shape[:-1])
        for a, c in self.coeffs.items():
            if any(ai < bi for ai, bi in zip(a, alpha)):
                continue
            term = np.full(points.shape[:-1], c)
            for ax, (ai, bi) in enumerate(zip(a, alpha)):
                term = term * (math.factorial(ai) / math.factorial(ai - bi))
                if ai - bi > 0:
                    term = term * z[..., ax] ** (ai - bi)
            out += term
        return out


class Sinusoid(AnalyticSource):
    """amplitude * prod_i sin(2 pi f_i x_i + phase_i); axes with f_i = 0 contribute 1."""

    def __init__(self, freq: Sequence[float], amplitude: float = 1.0, phase: Sequence[float] | None = None):
        self.freq = tuple(float(f) for f in freq)
        self.dim = len(self.freq)
        self.amplitude = float(amplitude)
        self.phase = tuple(float(p) for p in (phase if phase is not None else (0.0,) * self.dim))

    def value(self, points):
        return self.derivative((0,) * self.dim, points)

    def derivative(self, alpha, points):
        out = np.full(points.shape[:-1], self.amplitude)
        for ax, k in enumerate(alpha):
            f = self.freq[ax]
            if f == 0.0:
                if k > 0:
                    return np.zeros(points.shape[:-1])
                continue
            w = 2.0 * math.pi * f
            out = out * w**k * np.sin(w * points[..., ax] + self.phase[ax] + k * math.pi / 2.0)
        return out


class Step(AnalyticSource):
    """Indicator of the half space {x . normal > threshold}."""

    def __init__(self, normal: Sequence[float], threshold: float = 0.0):
        self.normal = np.asarray(normal, dtype=float)
        self.threshold = float(threshold)
        self.dim = self.normal.size

    def value(self, points):
        return (points @ self.normal > self.threshold).astype(float)

    @property
    def smooth(self) -> bool:
        return False


class CantorVitali(AnalyticSource):
    """Devil's staircase on [0,1], truncated base-3 expansion of fixed depth."""

    dim = 1

    def __init__(self, depth: int = 40):
        if depth < 1:
            raise ValueError("depth >= 1")
        self.depth = int(depth)

    def value(self, points):
        x = np.clip(points[..., 0], 0.0, 1.0).astype(float)
        y = np.zeros_like(x)
        scale = 0.5
        active = np.ones(x.shape, dtype=bool)
        for _ in range(self.depth):
            if not active.any():
                break
            d = np.floor(3.0 * x).astype(int)
            d = np.clip(d, 0, 2)
            hit = active & (d == 1)
            y[hit] += scale
            go = active & (d != 1)
            y[go & (d == 2)] += scale
            x = 3.0 * x - d
            active = go
            scale *= 0.5
        # unresolved tail after `depth` digits contributes < 2^-depth; close it linearly
        y[active] += scale * 2.0 * np.clip(x[active], 0.0, 1.0)
        return y

    @property
    def smooth(self) -> bool:
        return False


@dataclass(frozen=True)
class ScalarField:
    """Cell-centered samples of a scalar function on a box. Samples are immutable."""

    domain: BoxDomain
    samples: np.ndarray
    source: AnalyticSource | None = field(default=None, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != self.domain.dim:
            raise ValueError("sample rank must match domain dim")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def resolution(self) -> tuple[int, ...]:
        return self.samples.shape

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(self.domain.length(a) / n for a, n in enumerate(self.resolution))

    @property
    def h_min(self) -> float:
        return min(self.h)

    def cell_centers(self, axis: int) -> np.ndarray:
        n = self.resolution[axis]
        hx = self.domain.length(axis) / n
        return self.domain.lower[axis] + (np.arange(n) + 0.5) * hx

    def points(self) -> np.ndarray:
        axes = [self.cell_centers(a) for a in range(self.domain.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def with_samples(self, samples: np.ndarray, source: AnalyticSource | None = None) -> "ScalarField":
        return ScalarField(self.domain, samples, source)


def sample(source: AnalyticSource, domain: BoxDomain, resolution: Sequence[int] | int) -> ScalarField:
    """Evaluate a source at cell centers of a uniform grid."""
    if isinstance(resolution, int):
        resolution = (resolution,) * domain.dim
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != domain.dim or any(r < 1 for r in resolution):
        raise ValueError("bad resolution")
    if source.dim != domain.dim:
        raise ValueError("source/domain dim mismatch")
    axes = [
        domain.lower[a] + (np.arange(resolution[a]) + 0.5) * (domain.length(a) / resolution[a])
        for a in range(domain.dim)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(grids, axis=-1)
    return ScalarField(domain, source.value(pts), source)


@dataclass(frozen=True)
class Mollifier:
    """Compactly supported bump exp(-1/(1-|x/sigma|^2)), discretized on the sample grid.

    The discrete kernel lives on integer cell offsets with |offset * h| < sigma and is
    normalized to sum exactly 1, so mollification preserves constants.
    """

    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma > 0 required")

    def radius_cells(self, h: float) -> int:
        r = int(math.floor(self.sigma / h + 1e-12))
        if abs(r * h - self.sigma) < 1e-12 * max(1.0, self.sigma):
            r -= 1  # support is the open ball |x| < sigma
        return max(r, 0)

    def kernel(self, h: Sequence[float] | float, dim: int) -> np.ndarray:
        hs = (float(h),) * dim if np.isscalar(h) else tuple(float(x) for x in h)
        rs = [self.radius_cells(hx) for hx in hs]
        axes = [np.arange(-r, r + 1) * hx for r, hx in zip(rs, hs)]
        grids = np.meshgrid(*axes, indexing="ij")
        r2 = sum(g**2 for g in grids) / self.sigma**2
        with np.errstate(divide="ignore", over="ignore"):
            k = np.where(r2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
        total = k.sum()
        if total <= 0:
            k = np.zeros_like(k)
            k[tuple(r for r in rs)] = 1.0
            return k
        return k / total


def mollify(u: ScalarField, mollifier: Mollifier, inner: BoxDomain) -> ScalarField:
    """Convolve with the discrete mollifier kernel, restricted to a grid-aligned inner box.

    The inner box must keep a margin of at least the kernel radius, so the result
    never depends on values outside the original domain.
    """
    dom, hs = u.domain, u.h
    if not dom.contains_box(inner):
        raise ValueError("inner box not inside the domain")
    lo_idx, hi_idx = [], []
    for a in range(dom.dim):
        i0 = (inner.lower[a] - dom.lower[a]) / hs[a]
        i1 = (inner.upper[a] - dom.lower[a]) / hs[a]
        if abs(i0 - round(i0)) > 1e-9 or abs(i1 - round(i1)) > 1e-9:
            raise ValueError("inner box must align with cell boundaries")
        lo_idx.append(int(round(i0)))
        hi_idx.append(int(round(i1)))
    kern = mollifier.kernel(hs, dom.dim)
    for a in range(dom.dim):
        r = (kern.shape[a] - 1) // 2
        if lo_idx[a] < r or hi_idx[a] > u.resolution[a] - r:
            raise ValueError("inner box margin smaller than kernel radius")
    arr = np.asarray(u.samples)
    if max(kern.shape) > 31:
        full = signal.fftconvolve(arr, kern, mode="same")
    else:
        full = ndimage.convolve(arr, kern, mode="nearest")
    sl = tuple(slice(i0, i1) for i0, i1 in zip(lo_idx, hi_idx))
    return ScalarField(inner, full[sl])


def truncate(u: ScalarField, k: float) -> ScalarField:
    """Clamp samples to [-k, k]."""
    if k < 0:
        raise ValueError("k >= 0 required")
    return u.with_samples(np.clip(u.samples, -k, k))


def _axis_diff(arr: np.ndarray, axis: int, order: int) -> np.ndarray:
    for _ in range(order):
        arr = np.diff(arr, axis=axis)
    return arr


def multi_indices(dim: int, total: int) -> list[tuple[int, ...]]:
    """All multi-indices of given exact total order."""
    if dim == 1:
        return [(total,)]
    return [(i, total - i) for i in range(total + 1)]


def multinomial(alpha: tuple[int, ...]) -> float:
    m = sum(alpha)
    out = math.factorial(m)
    for a in alpha:
        out /= math.factorial(a)
    return out


def discrete_variation(u: ScalarField, m: int = 1) -> float:
    """Grid total variation of order m: sum of Frobenius norms of the m-th forward
    difference tensor times cell volume. The last m cells per axis reuse the
    nearest interior stencil (one-sided fallback), so a linear field integrates
    to exactly |nu| times the domain volume."""
    if m < 1:
        raise ValueError("m >= 1")
    hs = u.h
    n = u.domain.dim
    inner = tuple(N - m for N in u.resolution)
    if any(s < 1 for s in inner):
        raise ValueError("resolution too small for order m differences")
    acc = np.zeros(u.resolution)
    for alpha in multi_indices(n, m):
        d = np.asarray(u.samples)
        for ax, k in enumerate(alpha):
            d = _axis_diff(d, ax, k)
        d = d[tuple(slice(0, s) for s in inner)]
        d = np.pad(d, [(0, N - s) for N, s in zip(u.resolution, inner)], mode="edge")
        scale = 1.0
        for ax, k in enumerate(alpha):
            scale *= hs[ax] ** k
        acc += multinomial(alpha) * (d / scale) ** 2
    cell = 1.0
    for hx in hs:
        cell *= hx
    return float(np.sqrt(acc).sum() * cell)


def lq_distance(u: ScalarField, v: ScalarField, q: float) -> float:
    """(integral |u-v|^q)^(1/q) with the cell-volume measure."""
    if q < 1:
        raise ValueError("q >= 1")
    if u.resolution != v.resolution or u.domain != v.domain:
        raise ValueError("fields must share grid and domain")
    cell = 1.0
    for hx in u.h:
        cell *= hx
    diff = np.abs(np.asarray(u.samples) - np.asarray(v.samples))
    return float((diff**q).sum() * cell) ** (1.0 / q)


def lq_norm(u: ScalarField, q: float) -> float:
    zero = u.with_samples(np.zeros(u.resolution))
    return lq_distance(u, zero, q)
