"""Scaled oscillation functionals over packed families, eps ladders, anisotropy, beta constants.

The order-m functional of a field u at scale eps is

    eps^(n-m) * max over pairwise-disjoint window families of
                sum over windows of the mean oscillation of u
                against its degree m-1 window polynomial,

with families drawn from the enumerated candidate lattices. The first-order
functional (m = 1, translations of a fixed shape) and the cube functional with
orientation freedom are the two entry points eval_H and eval_K.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ._env import worker_count
from .fields import BoxDomain, Linear, ScalarField, multi_indices, sample
from .packing import (
    PackingFamily,
    PackingSolution,
    PlacementCandidate,
    enumerate_candidates,
    lattice_tilings,
    solve_exact_1d,
    solve_exact_small,
    solve_greedy_local,
)
from .windows import WindowSpec, _WindowBatch, default_quad_k, shape_supports_rotation


@dataclass(frozen=True)
class EvalOptions:
    """Knobs for one functional evaluation.

    orientations: int count (uniform grid on [0, pi/2)) or explicit angle list.
    solver: auto | exact_1d | exact_small | greedy.
    """

    rho: int = 4
    orientations: int | Sequence[float] = 1
    solver: str = "auto"
    seed: int = 0
    quad_min_k: int = 2
    quad_max_k: int = 64
    exact_limit: int = 40
    max_rounds: int = 3
    restarts: int = 2
    threads: int | None = None

    def orientation_list(self, shape: str, m: int) -> list[float]:
        if m >= 2 or not shape_supports_rotation(shape):
            return [0.0]
        if isinstance(self.orientations, int):
            count = max(1, self.orientations)
            return [j * (math.pi / 2) / count for j in range(count)]
        return [float(t) for t in self.orientations]


@dataclass(frozen=True)
class FunctionalEstimate:
    kind: str
    m: int
    eps: float
    value: float
    total_weight: float
    family: PackingFamily = field(repr=False)
    optimality: str
    upper_bound: float
    quad_tol: float
    meta: dict = field(default_factory=dict, repr=False)


def _quad_k(eps: float, u: ScalarField, opts: EvalOptions) -> int:
    return min(opts.quad_max_k, default_quad_k(eps, u.h_min, opts.quad_min_k))


def _pick_solver(dim: int, n_candidates: int, opts: EvalOptions) -> str:
    if opts.solver != "auto":
        return opts.solver
    if dim == 1:
        return "exact_1d"
    if n_candidates <= opts.exact_limit:
        return "exact_small"
    return "greedy"


def _solve(
    cands: list[PlacementCandidate], solver: str, opts: EvalOptions, seeds: Sequence[Sequence[int]] = ()
) -> PackingSolution:
    if solver == "exact_1d":
        return solve_exact_1d(cands)
    if solver == "exact_small":
        return solve_exact_small(cands, limit=max(opts.exact_limit, len(cands)))
    if solver == "greedy":
        restarts = opts.restarts if len(cands) <= 20000 else min(opts.restarts, 1)
        return solve_greedy_local(
            cands, seed=opts.seed, max_rounds=opts.max_rounds, restarts=restarts, seed_families=seeds
        )
    raise ValueError(f"unknown solver {solver!r}")


def _edge_distance(center: Sequence[float], domain) -> float:
    return min(
        min(center[a] - domain.lower[a], domain.upper[a] - center[a]) for a in range(domain.dim)
    )


def _mixed_seeds(
    cands: list[PlacementCandidate], domain, eps: float, tilings: list[list[int]]
) -> list[list[int]]:
    """Rotated-core plus axis-ring seed families.

    A rotated tiling cannot reach the domain boundary, so each rotated class is
    retracted by one window width and the freed strip is pre-filled with the
    first ring of an axis-aligned class; the margins make the union disjoint.
    """
    if domain.dim != 2:
        return []
    axis_ring: list[int] = []
    for fam in tilings:
        w0 = cands[fam[0]].window
        if w0.theta == 0.0 and w0.shape in ("axis_box", "interval"):
            ring = [i for i in fam if _edge_distance(cands[i].window.center, domain) <= eps / 2 + 1e-9]
            if len(ring) > len(axis_ring):
                axis_ring = ring
    if not axis_ring:
        return []
    out: list[list[int]] = []
    for fam in tilings:
        w0 = cands[fam[0]].window
        if w0.theta == 0.0:
            continue
        margin = eps + max(w0.half_extent()) - 1e-9
        core = [i for i in fam if _edge_distance(cands[i].window.center, domain) >= margin]
        if core:
            out.append(core + axis_ring)
    return out


def _evaluate(
    u: ScalarField, kind: str, placements: Sequence[tuple[str, float]], m: int, eps: float, opts: EvalOptions
) -> FunctionalEstimate:
    n = u.domain.dim
    if eps < 2 * u.h_min - 1e-12:
        raise ValueError("eps must be at least two cells wide")
    t0 = time.perf_counter()
    k = _quad_k(eps, u, opts)
    cands: list[PlacementCandidate] = []
    for shape, theta in placements:
        group = enumerate_candidates(u.domain, eps, shape, rho=opts.rho, orientations=[theta])
        if not group:
            continue
        centers = np.array([c.window.center for c in group])
        w = _WindowBatch(u, eps, shape, theta, m, k=k).oscillation(centers)
        cands.extend(PlacementCandidate(c.window, float(wi)) for c, wi in zip(group, w))
    solver = _pick_solver(n, len(cands), opts)
    seeds: list[list[int]] = []
    if solver == "greedy":
        tilings = lattice_tilings(cands, opts.rho)
        mixed = _mixed_seeds(cands, u.domain, eps, tilings)
        ranked = tilings + mixed
        ranked.sort(key=lambda fam: -sum(cands[i].weight for i in fam))
        seeds = ranked
    sol = _solve(cands, solver, opts, seeds)
    scale = eps ** (n - m)
    value = scale * sol.family.total_weight
    quad_tol = abs(value) * (u.h_min / eps) ** 2
    meta = {
        "rho": opts.rho,
        "orientations": len(placements),
        "quad_k": k,
        "solver": solver,
        "candidates": len(cands),
        "family_size": len(sol.family),
        "runtime_s": time.perf_counter() - t0,
    }
    return FunctionalEstimate(
        kind=kind,
        m=m,
        eps=float(eps),
        value=float(value),
        total_weight=float(sol.family.total_weight),
        family=sol.family,
        optimality=sol.optimality,
        upper_bound=float(scale * sol.upper_bound),
        quad_tol=float(quad_tol),
        meta=meta,
    )


def eval_H(u: ScalarField, shape: str, eps: float, opts: EvalOptions = EvalOptions()) -> FunctionalEstimate:
    """First-order functional over translations of one reference shape (no rotation)."""
    return _evaluate(u, "H", [(shape, 0.0)], 1, eps, opts)


def eval_K(u: ScalarField, m: int, eps: float, opts: EvalOptions = EvalOptions()) -> FunctionalEstimate:
    """Order-m cube functional; orientation freedom applies for m = 1 in 2D."""
    if u.domain.dim == 1:
        return _evaluate(u, "K", [("interval", 0.0)], m, eps, opts)
    thetas = opts.orientation_list("rotated_square", m)
    placements = [("axis_box", 0.0) if t == 0.0 else ("rotated_square", t) for t in thetas]
    return _evaluate(u, "K", placements, m, eps, opts)


def evaluate_family(u: ScalarField, family: PackingFamily, m: int = 1, k: int | None = None) -> float:
    """Re-evaluate the oscillation sum of a fixed family on a (possibly different) field."""
    total = 0.0
    groups: dict[tuple, list] = {}
    for c in family.members:
        wdw = c.window
        groups.setdefault((wdw.shape, wdw.eps, wdw.theta), []).append(wdw.center)
    for (shape, eps, theta), centers in groups.items():
        kk = k if k is not None else default_quad_k(eps, u.h_min)
        batch = _WindowBatch(u, eps, shape, theta, m, k=kk)
        total += float(batch.oscillation(np.array(centers)).sum())
    return total


def richardson(eps: Sequence[float], values: Sequence[float], order: int = 1) -> float:
    """One-step Richardson extrapolation from the last two ladder points."""
    if len(values) < 2:
        return float(values[-1])
    e0, e1 = eps[-2], eps[-1]
    v0, v1 = values[-2], values[-1]
    r = (e1 / e0) ** order
    return float(v1 - r * (v0 - v1) / (1.0 - r))


@dataclass(frozen=True)
class EpsLadder:
    kind: str
    m: int
    eps: tuple[float, ...]
    values: tuple[float, ...]
    extrapolated: float
    non_cauchy: bool
    estimates: tuple[FunctionalEstimate, ...] = field(repr=False, default=())

    def series(self) -> list[tuple[float, float]]:
        return list(zip(self.eps, self.values))


def ladder_non_cauchy(values: Sequence[float]) -> bool:
    """Heuristic flag: successive differences fail to shrink at a meaningful scale."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return False
    d = np.abs(np.diff(v))
    scale = np.max(np.abs(v)) + 1e-30
    if d[-1] <= 1e-3 * scale:
        return False
    return bool(d[-1] > 0.75 * d[:-1].max())


def sweep_eps(
    u: ScalarField,
    kind: str,
    m: int,
    eps_list: Sequence[float],
    opts: EvalOptions = EvalOptions(),
    shape: str | None = None,
    order: int = 1,
) -> EpsLadder:
    """Evaluate the functional along a decreasing eps ladder and extrapolate.

    Ladder points run concurrently when the worker pool allows it.
    """
    eps_list = sorted(float(e) for e in eps_list)[::-1]
    if kind == "H":
        sh = shape if shape is not None else ("interval" if u.domain.dim == 1 else "axis_box")
        fn: Callable[[float], FunctionalEstimate] = lambda e: eval_H(u, sh, e, opts)
    elif kind == "K":
        fn = lambda e: eval_K(u, m, e, opts)
    else:
        raise ValueError("kind must be H or K")
    workers = worker_count(opts.threads)
    if workers > 1 and len(eps_list) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ests = list(pool.map(fn, eps_list))
    else:
        ests = [fn(e) for e in eps_list]
    values = tuple(e.value for e in ests)
    return EpsLadder(
        kind=kind,
        m=m,
        eps=tuple(eps_list),
        values=values,
        extrapolated=richardson(eps_list, values, order),
        non_cauchy=ladder_non_cauchy(values),
        estimates=tuple(ests),
    )


@dataclass(frozen=True)
class AnisotropyTable:
    """Direction-indexed first-order limits on the unit cube, with 1-homogeneous extension."""

    directions: tuple[tuple[float, ...], ...]
    values: tuple[float, ...]
    shape: str
    meta: dict = field(default_factory=dict, repr=False)

    def psi(self, direction: Sequence[float]) -> float:
        d = np.asarray(direction, dtype=float)
        nd = np.linalg.norm(d)
        if nd == 0:
            raise ValueError("psi needs a nonzero direction")
        d = d / nd
        if len(self.directions[0]) == 1:
            return float(self.values[0])
        angles = np.array([math.atan2(v[1], v[0]) % math.pi for v in self.directions])
        order = np.argsort(angles)
        a = angles[order]
        vals = np.asarray(self.values)[order]
        x = math.atan2(d[1], d[0]) % math.pi
        # periodic linear interpolation in the angle, period pi
        aa = np.concatenate([a, a[:1] + math.pi])
        vv = np.concatenate([vals, vals[:1]])
        return float(np.interp(x, aa, vv, period=None))

    def psi_tilde(self, vector: Sequence[float]) -> float:
        v = np.asarray(vector, dtype=float)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return 0.0
        return nv * self.psi(v)

    def bounds(self) -> tuple[float, float]:
        return float(min(self.values)), float(max(self.values))


def estimate_psi(
    shape: str,
    directions: Sequence[Sequence[float]],
    eps_list: Sequence[float],
    resolution: int = 256,
    opts: EvalOptions = EvalOptions(rho=2),
    dim: int | None = None,
) -> AnisotropyTable:
    """First-order limit of linear fields x . nu over the unit cube, per direction."""
    dirs = [tuple(float(x) for x in d) for d in directions]
    n = dim if dim is not None else len(dirs[0])
    dom = BoxDomain((0.0,) * n, (1.0,) * n)
    sh = "interval" if n == 1 else shape
    vals = []
    ladders = []
    for d in dirs:
        nd = np.linalg.norm(d)
        if abs(nd - 1.0) > 1e-9:
            raise ValueError("directions must be unit vectors")
        u = sample(Linear(np.asarray(d)), dom, resolution)
        lad = sweep_eps(u, "H", 1, eps_list, opts, shape=sh)
        vals.append(lad.extrapolated)
        ladders.append(lad)
    meta = {"resolution": resolution, "eps": list(map(float, eps_list)), "ladders": [list(l.values) for l in ladders]}
    return AnisotropyTable(tuple(dirs), tuple(vals), sh, meta)


def anisotropic_variation(u: ScalarField, table: AnisotropyTable) -> float:
    """Integral of psi_tilde(grad u) by forward differences (first-order boundary layer excluded)."""
    hs = u.h
    n = u.domain.dim
    if n == 2 and len(table.directions) < 8:
        raise ValueError("direction table too sparse for 2D interpolation (need >= 8)")
    if n == 1:
        d = np.diff(np.asarray(u.samples)) / hs[0]
        psi_plus = table.psi((1.0,))
        return float(np.abs(d).sum() * psi_plus * hs[0])
    gx = np.diff(np.asarray(u.samples), axis=0)[:, :-1] / hs[0]
    gy = np.diff(np.asarray(u.samples), axis=1)[:-1, :] / hs[1]
    mag = np.hypot(gx, gy)
    out = 0.0
    nz = mag > 0
    if nz.any():
        gxn = gx[nz] / mag[nz]
        gyn = gy[nz] / mag[nz]
        vals = np.array([table.psi((a, b)) for a, b in zip(gxn, gyn)])
        out = float((vals * mag[nz]).sum() * hs[0] * hs[1])
    return out


def psi_axis_cube(direction: Sequence[float]) -> float:
    """Closed-form first-order limit density for axis-aligned cube windows.

    Piecewise integration of |x . nu - mean| over the unit square gives
    cos(phi)/4 + sin(phi)^2 / (12 cos(phi)) for the gradient angle phi folded
    into [0, pi/4]; in 1D the value is 1/4.
    """
    d = np.asarray(direction, dtype=float)
    nd = float(np.linalg.norm(d))
    if nd == 0.0:
        raise ValueError("direction must be nonzero")
    if d.size == 1:
        return 0.25
    phi = math.atan2(abs(d[1]), abs(d[0]))
    if phi > math.pi / 4:
        phi = math.pi / 2 - phi
    c, s = math.cos(phi), math.sin(phi)
    return c / 4.0 + s * s / (12.0 * c)


# ---------------------------------------------------------------------------
# beta constants


@dataclass(frozen=True)
class BetaResult:
    n: int
    m: int
    value: float
    argmax: dict[tuple[int, ...], float]
    argmax_axis_aligned: bool
    value_coarse: float
    quad_level: int
    trace: tuple[tuple[str, float], ...]


def _beta_1d_exact(m: int) -> float:
    # integrand |x^m - mean| with mean = 0 (odd m) or 1/(2^m (m+1)) (even m)
    if m % 2 == 1:
        integral = 2.0 * (0.5) ** (m + 1) / (m + 1)
    else:
        c = 1.0 / (2**m * (m + 1))
        r = c ** (1.0 / m)
        F = lambda x: x ** (m + 1) / (m + 1)
        inner = 2 * (c * r - F(r))
        outer = 2 * ((F(0.5) - F(r)) - c * (0.5 - r))
        integral = inner + outer
    return integral / math.factorial(m)


def _tensor_basis(n: int, m: int):
    alphas = multi_indices(n, m)
    mults = np.array([math.factorial(m) / np.prod([math.factorial(a) for a in alpha]) for alpha in alphas])
    return alphas, mults


def _beta_objective_2d(m: int, level: int):
    g = (np.arange(level) + 0.5) / level - 0.5
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    alphas, mults = _tensor_basis(2, m)

    def moment(k: int) -> float:
        return 0.0 if k % 2 else 1.0 / (2**k * (k + 1))

    cols = []
    for alpha, mult in zip(alphas, mults):
        mono = pts[:, 0] ** alpha[0] * pts[:, 1] ** alpha[1]
        mono = mono - moment(alpha[0]) * moment(alpha[1])
        cols.append(math.sqrt(mult) * mono)
    Phi = np.stack(cols, axis=-1)

    def f_and_grad(y: np.ndarray):
        z = Phi @ y
        val = float(np.abs(z) @ w) / math.factorial(m)
        grad = (Phi.T @ (np.sign(z) * w)) / math.factorial(m)
        return val, grad

    return alphas, mults, f_and_grad


def beta_constant(
    n: int,
    m: int,
    quad_level: int = 512,
    starts: int = 8,
    iters: int = 200,
    seed: int = 0,
) -> BetaResult:
    """Sharp anisotropy constant: maximize the centered |nu . x^m| average over unit tensors.

    n = 1 is integrated exactly (piecewise polynomial); n = 2 uses tensor-product
    midpoint quadrature and multi-start projected gradient ascent on the sphere in
    multiplicity-weighted symmetric-tensor coordinates.
    """
    if n not in (1, 2) or m not in (1, 2, 3):
        raise ValueError("supported: n in {1,2}, m in {1,2,3}")
    if n == 1:
        v = _beta_1d_exact(m)
        return BetaResult(
            n=1, m=m, value=v, argmax={(m,): 1.0}, argmax_axis_aligned=True,
            value_coarse=v, quad_level=0, trace=(("exact", v),),
        )
    alphas, mults, fg = _beta_objective_2d(m, quad_level)
    _, _, fg_coarse = _beta_objective_2d(m, max(quad_level // 2, 16))
    T = len(alphas)
    rng = np.random.default_rng(seed)
    start_list: list[tuple[str, np.ndarray]] = []
    for i in range(T):
        e = np.zeros(T)
        e[i] = 1.0
        start_list.append((f"axis{i}", e))
    for j in range(starts):
        y = rng.standard_normal(T)
        start_list.append((f"rand{j}", y / np.linalg.norm(y)))
    best_y, best_v = None, -1.0
    trace = []
    for label, y0 in start_list:
        y = y0 / np.linalg.norm(y0)
        v, g = fg(y)
        step = 0.5
        for _ in range(iters):
            gt = g - (g @ y) * y
            gn = np.linalg.norm(gt)
            if gn < 1e-12:
                break
            accepted = False
            for _ in range(30):
                y_new = y + step * gt
                y_new /= np.linalg.norm(y_new)
                v_new, g_new = fg(y_new)
                if v_new > v + 1e-15:
                    y, v, g = y_new, v_new, g_new
                    step *= 1.3
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        trace.append((label, v))
        if v > best_v:
            best_v, best_y = v, y
    v_coarse, _ = fg_coarse(best_y)
    nu = {alpha: float(best_y[i] / math.sqrt(mults[i])) for i, alpha in enumerate(alphas)}
    axis = max(range(T), key=lambda i: abs(best_y[i]))
    pure = [i for i, a in enumerate(alphas) if max(a) == m]
    axis_aligned = axis in pure and abs(best_y[axis]) > 0.999
    return BetaResult(
        n=n, m=m, value=float(best_v), argmax=nu, argmax_axis_aligned=bool(axis_aligned),
        value_coarse=float(v_coarse), quad_level=quad_level, trace=tuple(trace),
    )
