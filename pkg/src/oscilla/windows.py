"""Window geometry, quadrature, polynomial fits, and mean-oscillation of a field over a window.

A window is a scaled (side/diameter eps), optionally rotated copy of a reference set
of unit diameter: interval, axis_box (unit cube), rotated_square, ball, diamond.
Integrals over a window use a midpoint rule on the window's own local lattice;
samples are read through bilinear interpolation, so on grid-aligned boxes the rule
degenerates to the exact cell sum. Curved reference shapes get fractional cell
weights from 4x sub-sampling.

The polynomial attached to a window for order-m oscillation is the unique polynomial
of degree m-1 whose window-averaged derivatives match those of the field, where the
averages are taken with the window's discrete quadrature. For m = 1 this is the
window mean and for m = 2 it is the mean plus the averaged-gradient linear term;
for any m it reproduces polynomials of degree m-1 exactly (to roundoff), which is
what the higher-order theory requires of the projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fields import AnalyticSource, BoxDomain, ScalarField, multi_indices

SHAPES_1D = ("interval", "axis_box")
SHAPES_2D = ("axis_box", "rotated_square", "ball", "diamond")


def shape_supports_rotation(shape: str) -> bool:
    return shape == "rotated_square"


def validate_shape(shape: str, dim: int) -> None:
    ok = SHAPES_1D if dim == 1 else SHAPES_2D
    if shape not in ok:
        raise ValueError(f"shape {shape!r} not available in dim {dim}")


@dataclass(frozen=True)
class WindowSpec:
    """Placement of one window: reference shape scaled by eps, rotated by theta, centered."""

    shape: str
    center: tuple[float, ...]
    eps: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        validate_shape(self.shape, self.dim)
        if self.eps <= 0:
            raise ValueError("eps > 0 required")
        if self.theta != 0.0 and not shape_supports_rotation(self.shape):
            raise ValueError(f"shape {self.shape!r} does not take an orientation")

    @property
    def dim(self) -> int:
        return len(self.center)

    def half_extent(self) -> tuple[float, ...]:
        """Axis-aligned half widths of the bounding box (for fit and conflict tests)."""
        if self.shape == "rotated_square" and self.theta != 0.0:
            c, s = abs(math.cos(self.theta)), abs(math.sin(self.theta))
            w = 0.5 * self.eps * (c + s)
            return (w, w)
        return (0.5 * self.eps,) * self.dim

    def fits_inside(self, domain: BoxDomain, tol: float = 1e-10) -> bool:
        he = self.half_extent()
        return all(
            self.center[a] - he[a] >= domain.lower[a] - tol
            and self.center[a] + he[a] <= domain.upper[a] + tol
            for a in range(self.dim)
        )

    def rotation(self) -> np.ndarray:
        if self.dim == 1:
            return np.array([[1.0]])
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])


@lru_cache(maxsize=256)
def reference_quadrature(shape: str, dim: int, k: int, subsample: int = 4):
    """Midpoint lattice on the unit-diameter reference shape.

    Returns (points (K, dim), weights (K,)). Points are the k^dim local cell
    centers of the bounding cube Q = (-1/2, 1/2)^dim; weights are cell volume
    times the in-shape fraction, zero-weight cells dropped.
    """
    if k < 1:
        raise ValueError("k >= 1")
    g = (np.arange(k) + 0.5) / k - 0.5
    if dim == 1:
        pts = g[:, None]
    else:
        X, Y = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    cell = (1.0 / k) ** dim
    if shape in ("interval", "axis_box", "rotated_square") or dim == 1:
        wts = np.full(pts.shape[0], cell)
        return pts, wts
    gs = (np.arange(subsample) + 0.5) / subsample - 0.5
    SX, SY = np.meshgrid(gs, gs, indexing="ij")
    sub = np.stack([SX.ravel(), SY.ravel()], axis=-1) / k
    fine = pts[:, None, :] + sub[None, :, :]
    if shape == "ball":
        inside = (fine**2).sum(axis=-1) < 0.25
    elif shape == "diamond":
        inside = np.abs(fine).sum(axis=-1) < 0.5
    else:
        raise ValueError(shape)
    frac = inside.mean(axis=1)
    keep = frac > 0
    return pts[keep], cell * frac[keep]


def grid_interpolate(arr: np.ndarray, domain: BoxDomain, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of cell-centered samples at arbitrary points.

    Coordinates are clamped to the sample hull; callers keep windows interior
    so the clamp never fires in earnest.
    """
    dim = domain.dim
    flat = pts.reshape(-1, dim)
    idx = []
    frac = []
    for a in range(dim):
        n = arr.shape[a]
        h = domain.length(a) / n
        g = (flat[:, a] - domain.lower[a]) / h - 0.5
        i0 = np.floor(g).astype(np.int64)
        np.clip(i0, 0, max(n - 2, 0), out=i0)
        f = np.clip(g - i0, 0.0, 1.0)
        if n == 1:
            i0 = np.zeros_like(i0)
            f = np.zeros_like(f)
        idx.append(i0)
        frac.append(f)
    if dim == 1:
        a0 = arr
        v = a0[idx[0]] * (1 - frac[0]) + a0[np.minimum(idx[0] + 1, arr.shape[0] - 1)] * frac[0]
    else:
        n1 = arr.shape[1]
        fl = arr.ravel()
        i, j = idx
        fx, fy = frac
        i1 = np.minimum(i + 1, arr.shape[0] - 1)
        j1 = np.minimum(j + 1, n1 - 1)
        v = (
            fl[i * n1 + j] * (1 - fx) * (1 - fy)
            + fl[i1 * n1 + j] * fx * (1 - fy)
            + fl[i * n1 + j1] * (1 - fx) * fy
            + fl[i1 * n1 + j1] * fx * fy
        )
    return v.reshape(pts.shape[:-1])


def default_quad_k(eps: float, h_min: float, min_k: int = 2) -> int:
    return max(min_k, int(round(eps / h_min)))


def indices_up_to(dim: int, degree: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for t in range(degree + 1):
        out.extend(multi_indices(dim, t))
    return out


def _falling(alpha: tuple[int, ...], beta: tuple[int, ...]) -> float:
    out = 1.0
    for a, b in zip(alpha, beta):
        out *= math.factorial(a) / math.factorial(a - b)
    return out


def _ge(alpha: tuple[int, ...], beta: tuple[int, ...]) -> bool:
    return all(a >= b for a, b in zip(alpha, beta))


def _factorial_mi(alpha: tuple[int, ...]) -> float:
    out = 1.0
    for a in alpha:
        out *= math.factorial(a)
    return out


def _derivative_arrays(u: ScalarField, degree: int) -> dict[tuple[int, ...], np.ndarray]:
    """Central-difference derivative fields for all orders 1..degree (sampled path)."""
    out: dict[tuple[int, ...], np.ndarray] = {}
    hs = u.h
    dim = u.domain.dim
    for t in range(1, degree + 1):
        for alpha in multi_indices(dim, t):
            d = np.asarray(u.samples, dtype=float)
            for ax, k in enumerate(alpha):
                for _ in range(k):
                    d = np.gradient(d, hs[ax], axis=ax)
            out[alpha] = d
    return out


class _WindowBatch:
    """Vectorized oscillation of one (shape, eps, theta, m) over many centers.

    Shares the reference quadrature, derivative fields, and discrete moments
    across all centers; memory is bounded by evaluating in center chunks.
    """

    def __init__(
        self,
        u: ScalarField,
        eps: float,
        shape: str,
        theta: float,
        m: int,
        k: int | None = None,
        subsample: int = 4,
    ):
        dim = u.domain.dim
        validate_shape(shape, dim)
        if m < 1:
            raise ValueError("m >= 1")
        if m > 1 and (theta != 0.0 or shape not in ("interval", "axis_box")):
            raise ValueError("order m >= 2 needs an axis-aligned box window")
        if eps < 2 * u.h_min - 1e-12:
            raise ValueError("eps must be at least two cells wide")
        self.u = u
        self.eps = float(eps)
        self.m = int(m)
        self.k = k if k is not None else default_quad_k(eps, u.h_min)
        pts, wts = reference_quadrature(shape, dim, self.k, subsample)
        if theta != 0.0:
            c, s = math.cos(theta), math.sin(theta)
            R = np.array([[c, -s], [s, c]])
            self.local = eps * (pts @ R.T)
        else:
            self.local = eps * pts
        self.ref_pts = pts
        self.wts = wts
        self.wsum = wts.sum()
        self.degree = m - 1
        if m > 1:
            src = u.source
            self.exact_derivs = src is not None and src.smooth
            if not self.exact_derivs:
                self.deriv_arrays = _derivative_arrays(u, self.degree)
            # discrete moments of the window's own quadrature, physical scale
            self.moments = {}
            for gamma in indices_up_to(dim, self.degree):
                mono = np.ones(pts.shape[0])
                for ax, g in enumerate(gamma):
                    if g:
                        mono = mono * (eps * pts[:, ax]) ** g
                self.moments[gamma] = float((mono * wts).sum() / self.wsum)
            self.alphas = indices_up_to(dim, self.degree)

    def _values_at(self, centers: np.ndarray) -> np.ndarray:
        pts = centers[:, None, :] + self.local[None, :, :]
        return grid_interpolate(np.asarray(self.u.samples), self.u.domain, pts)

    def _avg(self, values: np.ndarray) -> np.ndarray:
        return values @ self.wts / self.wsum

    def _deriv_values_at(self, alpha, centers: np.ndarray) -> np.ndarray:
        pts = centers[:, None, :] + self.local[None, :, :]
        if self.exact_derivs:
            return self.u.source.derivative(alpha, pts)
        return grid_interpolate(self.deriv_arrays[alpha], self.u.domain, pts)

    def fit_coefficients(self, centers: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
        """Moment-matched coefficients in the window frame, one array over centers."""
        V0 = self._values_at(centers)
        avgs = {(0,) * self.u.domain.dim: self._avg(V0)}
        for alpha in self.alphas:
            if sum(alpha) >= 1:
                avgs[alpha] = self._avg(self._deriv_values_at(alpha, centers))
        coeffs: dict[tuple[int, ...], np.ndarray] = {}
        for t in range(self.degree, -1, -1):
            for beta in multi_indices(self.u.domain.dim, t):
                corr = 0.0
                for alpha in self.alphas:
                    if sum(alpha) > t and _ge(alpha, beta):
                        gamma = tuple(a - b for a, b in zip(alpha, beta))
                        corr = corr + coeffs[alpha] * _falling(alpha, beta) * self.moments[gamma]
                coeffs[beta] = (avgs[beta] - corr) / _factorial_mi(beta)
        self._last_values = V0
        return coeffs

    def oscillation(self, centers: np.ndarray, chunk: int = 4096) -> np.ndarray:
        centers = np.asarray(centers, dtype=float).reshape(-1, self.u.domain.dim)
        out = np.empty(centers.shape[0])
        for s in range(0, centers.shape[0], chunk):
            cs = centers[s : s + chunk]
            if self.m == 1:
                V = self._values_at(cs)
                mean = self._avg(V)
                vals = np.abs(V - mean[:, None]) @ self.wts / self.wsum
                # a window sampling a single value has zero oscillation; the
                # weighted mean leaves rounding residue otherwise
                vals[V.max(axis=1) == V.min(axis=1)] = 0.0
                out[s : s + chunk] = vals
            else:
                coeffs = self.fit_coefficients(cs)
                V = self._last_values
                P = np.zeros_like(V)
                for alpha, c in coeffs.items():
                    mono = np.ones(self.local.shape[0])
                    for ax, a in enumerate(alpha):
                        if a:
                            mono = mono * self.local[:, ax] ** a
                    P = P + c[:, None] * mono[None, :]
                out[s : s + chunk] = np.abs(V - P) @ self.wts / self.wsum
        return out


@dataclass(frozen=True)
class PolynomialRep:
    """Polynomial in window-frame coordinates z = R(theta)^T (x - center)."""

    center: tuple[float, ...]
    theta: float
    degree: int
    coeffs: dict[tuple[int, ...], float]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        dim = len(self.center)
        z = points - np.asarray(self.center)
        if dim == 2 and self.theta != 0.0:
            c, s = math.cos(self.theta), math.sin(self.theta)
            R = np.array([[c, -s], [s, c]])
            z = z @ R
        out = np.zeros(points.shape[:-1])
        for alpha, cf in self.coeffs.items():
            mono = np.full(points.shape[:-1], cf)
            for ax, a in enumerate(alpha):
                if a:
                    mono = mono * z[..., ax] ** a
            out += mono
        return out


def _check_window(u: ScalarField, w: WindowSpec) -> None:
    if w.dim != u.domain.dim:
        raise ValueError("window/field dim mismatch")
    if not w.fits_inside(u.domain):
        raise ValueError("window does not fit inside the field domain")


def window_average(u: ScalarField, w: WindowSpec, alpha: tuple[int, ...] | None = None, k: int | None = None) -> float:
    """Window average of D^alpha u (alpha omitted or zero: average of u itself)."""
    _check_window(u, w)
    dim = u.domain.dim
    alpha = (0,) * dim if alpha is None else tuple(int(a) for a in alpha)
    order = sum(alpha)
    m = max(1, order + 1)
    batch = _WindowBatch(u, w.eps, w.shape, w.theta, 1 if order == 0 else m, k=k)
    centers = np.asarray([w.center])
    if order == 0:
        return float(batch._avg(batch._values_at(centers))[0])
    # derivative path needs the m>=2 machinery even for rotated m=1 averages
    if w.theta != 0.0 or w.shape not in ("interval", "axis_box"):
        raise ValueError("derivative averages need an axis-aligned box window")
    return float(batch._avg(batch._deriv_values_at(alpha, centers))[0])


def fit_polynomial(u: ScalarField, w: WindowSpec, m: int, k: int | None = None) -> PolynomialRep:
    """Degree m-1 window polynomial whose averaged derivatives match the field's."""
    _check_window(u, w)
    batch = _WindowBatch(u, w.eps, w.shape, w.theta, m, k=k)
    centers = np.asarray([w.center])
    if m == 1:
        c0 = float(batch._avg(batch._values_at(centers))[0])
        return PolynomialRep(w.center, w.theta, 0, {(0,) * u.domain.dim: c0})
    coeffs = batch.fit_coefficients(centers)
    flat = {alpha: float(c[0]) for alpha, c in coeffs.items()}
    return PolynomialRep(w.center, w.theta, m - 1, flat)


def window_oscillation(u: ScalarField, w: WindowSpec, m: int = 1, k: int | None = None) -> float:
    """Mean absolute deviation of u from its window polynomial of degree m-1."""
    _check_window(u, w)
    batch = _WindowBatch(u, w.eps, w.shape, w.theta, m, k=k)
    return float(batch.oscillation(np.asarray([w.center]))[0])


def oscillation_batch(
    u: ScalarField,
    centers: np.ndarray,
    eps: float,
    shape: str,
    theta: float = 0.0,
    m: int = 1,
    k: int | None = None,
) -> np.ndarray:
    """Oscillation weights for many windows sharing (shape, eps, theta, m)."""
    return _WindowBatch(u, eps, shape, theta, m, k=k).oscillation(centers)
