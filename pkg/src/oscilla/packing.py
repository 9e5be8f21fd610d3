"""Selecting pairwise-disjoint window families of maximum total weight.

Disjointness is in the open-set sense, so families that tile (touching boundaries)
are feasible. Every shape in the catalog reduces to either a rotated square or a
ball for the pairwise test: a diamond is a square rotated by pi/4 with side
eps/sqrt(2), and 1D windows are intervals.

Solvers: an interval-scheduling DP (1D, exact), branch and bound on the conflict
graph (small instances, exact), and greedy insertion by weight with a local
remove-and-reinsert search (scales to large 2D candidate sets).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fields import BoxDomain
from .windows import WindowSpec, shape_supports_rotation, validate_shape


@dataclass(frozen=True)
class PlacementCandidate:
    window: WindowSpec
    weight: float = 0.0


@dataclass(frozen=True)
class PackingFamily:
    members: tuple[PlacementCandidate, ...]
    total_weight: float

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class PackingSolution:
    family: PackingFamily
    optimality: str  # "exact" or "heuristic"
    upper_bound: float


def enumerate_candidates(
    domain: BoxDomain,
    eps: float,
    shape: str,
    rho: int = 4,
    orientations: Sequence[float] = (0.0,),
) -> list[PlacementCandidate]:
    """Candidate centers on a sub-lattice of spacing eps/rho, one lattice per orientation.

    Axis-aligned lattices start at the first admissible center per axis. Rotated
    lattices are aligned with the window frame (rotated about the domain center),
    so perfect tilings at each listed orientation stay inside the candidate set.
    """
    validate_shape(shape, domain.dim)
    if rho < 1:
        raise ValueError("rho >= 1")
    if eps <= 0:
        raise ValueError("eps > 0")
    if eps > min(domain.length(a) for a in range(domain.dim)) + 1e-12:
        raise ValueError("eps larger than the domain extent")
    step = eps / rho
    out: list[PlacementCandidate] = []
    for theta in orientations:
        theta = float(theta)
        if theta != 0.0 and not shape_supports_rotation(shape):
            raise ValueError(f"shape {shape!r} does not take orientations")
        probe = WindowSpec(shape, (0.0,) * domain.dim, eps, theta)
        he = probe.half_extent()
        if any(2 * he[a] > domain.length(a) + 1e-12 for a in range(domain.dim)):
            continue
        if theta == 0.0:
            axes_pos = []
            for a in range(domain.dim):
                start = domain.lower[a] + he[a]
                span = domain.length(a) - 2 * he[a]
                count = int(math.floor(span / step + 1e-9)) + 1
                axes_pos.append(start + step * np.arange(count))
            if domain.dim == 1:
                centers = axes_pos[0][:, None]
            else:
                X, Y = np.meshgrid(axes_pos[0], axes_pos[1], indexing="ij")
                centers = np.stack([X.ravel(), Y.ravel()], axis=-1)
        else:
            c0 = np.asarray(domain.center)
            half = np.asarray([domain.length(a) / 2 for a in range(domain.dim)])
            reach = float(np.linalg.norm(half))
            jmax = int(math.ceil(reach / step))
            g = step * np.arange(-jmax, jmax + 1)
            Z1, Z2 = np.meshgrid(g, g, indexing="ij")
            z = np.stack([Z1.ravel(), Z2.ravel()], axis=-1)
            c, s = math.cos(theta), math.sin(theta)
            R = np.array([[c, -s], [s, c]])
            centers = c0[None, :] + z @ R.T
            lo = np.asarray(domain.lower) + np.asarray(he) - 1e-10
            hi = np.asarray(domain.upper) - np.asarray(he) + 1e-10
            keep = np.all((centers >= lo) & (centers <= hi), axis=1)
            centers = centers[keep]
            order = np.lexsort((centers[:, 1], centers[:, 0]))
            centers = centers[order]
        for cpt in centers:
            out.append(PlacementCandidate(WindowSpec(shape, tuple(cpt), eps, theta)))
    return out


class _Geometry:
    """Normalized arrays for vectorized pairwise disjointness."""

    def __init__(self, windows: Sequence[WindowSpec]):
        n = len(windows)
        self.dim = windows[0].dim if n else 1
        self.center = np.array([w.center for w in windows], dtype=float).reshape(n, self.dim)
        self.is_ball = np.zeros(n, dtype=bool)
        self.side = np.zeros(n)
        self.theta = np.zeros(n)
        self.radius = np.zeros(n)
        for i, w in enumerate(windows):
            if w.shape == "ball" and w.dim == 2:
                self.is_ball[i] = True
                self.radius[i] = 0.5 * w.eps
            elif w.shape == "diamond" and w.dim == 2:
                self.side[i] = w.eps / math.sqrt(2.0)
                self.theta[i] = math.pi / 4.0
            else:
                self.side[i] = w.eps
                self.theta[i] = w.theta
        self.circum = np.where(
            self.is_ball, self.radius, self.side * (math.sqrt(2.0) / 2.0 if self.dim == 2 else 0.5)
        )

    def disjoint_one_many(self, i: int, js: np.ndarray) -> np.ndarray:
        """Open-set disjointness of window i against windows js (boolean array)."""
        if js.size == 0:
            return np.zeros(0, dtype=bool)
        d = self.center[js] - self.center[i]
        tol = 1e-9 * np.maximum(self.circum[js], self.circum[i])
        if self.dim == 1:
            return np.abs(d[:, 0]) >= 0.5 * self.side[i] + 0.5 * self.side[js] - tol
        out = np.zeros(js.size, dtype=bool)
        bi = self.is_ball[i]
        bj = self.is_ball[js]
        both_ball = bj & bi
        if both_ball.any():
            sel = both_ball
            out[sel] = np.hypot(d[sel, 0], d[sel, 1]) >= self.radius[i] + self.radius[js[sel]] - tol[sel]
        sq_sq = (~bj) & (not bi)
        if np.any(sq_sq):
            sel = np.where(sq_sq)[0]
            out[sel] = self._sat_square_square(i, js[sel], d[sel], tol[sel])
        mixed = bj ^ bi
        if np.any(mixed):
            sel = np.where(mixed)[0]
            for idx in sel:
                j = int(js[idx])
                if bi:
                    out[idx] = self._ball_square(i, j, tol[idx])
                else:
                    out[idx] = self._ball_square(j, i, tol[idx])
        return out

    def _sat_square_square(self, i: int, js: np.ndarray, d: np.ndarray, tol: np.ndarray) -> np.ndarray:
        si = 0.5 * self.side[i]
        sj = 0.5 * self.side[js]
        ci, swi = math.cos(self.theta[i]), math.sin(self.theta[i])
        cj = np.cos(self.theta[js])
        sp = np.sin(self.theta[js])
        disjoint = np.zeros(js.size, dtype=bool)
        # axes of square i (constant vectors)
        for ax, ay in ((ci, swi), (-swi, ci)):
            proj = np.abs(d[:, 0] * ax + d[:, 1] * ay)
            ei = si
            ej = sj * (np.abs(cj * ax + sp * ay) + np.abs(-sp * ax + cj * ay))
            disjoint |= proj >= ei + ej - tol
        # axes of each square j (vectors per candidate)
        for ux, uy in ((cj, sp), (-sp, cj)):
            proj = np.abs(d[:, 0] * ux + d[:, 1] * uy)
            ei = si * (np.abs(ci * ux + swi * uy) + np.abs(-swi * ux + ci * uy))
            ej = sj
            disjoint |= proj >= ei + ej - tol
        return disjoint

    def _ball_square(self, ball_i: int, sq_j: int, tol: float) -> bool:
        c, s = math.cos(self.theta[sq_j]), math.sin(self.theta[sq_j])
        rel = self.center[ball_i] - self.center[sq_j]
        z = np.array([c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1]])
        half = 0.5 * self.side[sq_j]
        q = np.clip(z, -half, half)
        return float(np.hypot(*(z - q))) >= self.radius[ball_i] - tol


# axis boxes are rotated squares at theta=0, so the two share a geometry class
_KIND_CLASS = {
    "interval": "interval",
    "axis_box": "square",
    "rotated_square": "square",
    "ball": "ball",
    "diamond": "diamond",
}


def disjoint(a: WindowSpec, b: WindowSpec) -> bool:
    """True when the two open windows do not overlap (touching counts as disjoint)."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if _KIND_CLASS[a.shape] != _KIND_CLASS[b.shape]:
        raise ValueError("mixed shape kinds")
    geom = _Geometry([a, b])
    return bool(geom.disjoint_one_many(0, np.array([1]))[0])


def family_is_disjoint(windows: Sequence[WindowSpec]) -> bool:
    geom = _Geometry(list(windows))
    n = len(windows)
    for i in range(n):
        js = np.arange(i + 1, n)
        if js.size and not geom.disjoint_one_many(i, js).all():
            return False
    return True


def _conflict_graph(geom: _Geometry) -> tuple[np.ndarray, np.ndarray]:
    """CSR adjacency of the overlap graph, via a static hash grid over centers."""
    n = geom.center.shape[0]
    cell = max(2.0 * float(geom.circum.max()), 1e-12)
    keys = np.floor(geom.center / cell).astype(np.int64)
    buckets: dict[tuple[int, ...], list[int]] = {}
    for i, key in enumerate(map(tuple, keys)):
        buckets.setdefault(key, []).append(i)
    if geom.dim == 1:
        offsets = [(-1,), (0,), (1,)]
    else:
        offsets = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    adj: list[list[int]] = [[] for _ in range(n)]
    for key, members in buckets.items():
        pool: list[int] = []
        for off in offsets:
            pool.extend(buckets.get(tuple(k + o for k, o in zip(key, off)), ()))
        pool_arr = np.asarray(pool, dtype=np.int64)
        for i in members:
            js = pool_arr[pool_arr > i]
            if js.size == 0:
                continue
            bad = js[~geom.disjoint_one_many(i, js)]
            for j in bad:
                adj[i].append(int(j))
                adj[int(j)].append(i)
    deg = np.fromiter((len(a) for a in adj), dtype=np.int64, count=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    for i, a in enumerate(adj):
        indices[indptr[i] : indptr[i + 1]] = a
    return indptr, indices


def _solution(cands: Sequence[PlacementCandidate], chosen: Sequence[int], optimality: str, upper: float) -> PackingSolution:
    members = tuple(cands[i] for i in sorted(chosen))
    total = float(sum(c.weight for c in members))
    return PackingSolution(PackingFamily(members, total), optimality, float(upper))


def solve_exact_1d(candidates: Sequence[PlacementCandidate]) -> PackingSolution:
    """Weighted interval scheduling over 1D windows; exact. Touching intervals compose."""
    if not candidates:
        return PackingSolution(PackingFamily((), 0.0), "exact", 0.0)
    if candidates[0].window.dim != 1:
        raise ValueError("solve_exact_1d needs 1D windows")
    arr = [
        (c.window.center[0] + 0.5 * c.window.eps, c.window.center[0] - 0.5 * c.window.eps, i)
        for i, c in enumerate(candidates)
    ]
    arr.sort()
    rights = [a[0] for a in arr]
    scale = max(abs(r) for r in rights) + 1.0
    tol = 1e-9 * scale
    n = len(arr)
    dp = [0.0] * (n + 1)
    take = [False] * n
    pred = [0] * n
    for i in range(n):
        r, l, orig = arr[i]
        p = bisect_right(rights, l + tol, 0, i)
        pred[i] = p
        w = candidates[orig].weight
        if dp[p] + w > dp[i]:
            dp[i + 1] = dp[p] + w
            take[i] = True
        else:
            dp[i + 1] = dp[i]
    chosen = []
    i = n
    while i > 0:
        if take[i - 1]:
            chosen.append(arr[i - 1][2])
            i = pred[i - 1]
        else:
            i -= 1
    opt = dp[n]
    return _solution(candidates, chosen, "exact", opt)


def solve_exact_small(candidates: Sequence[PlacementCandidate], limit: int = 40) -> PackingSolution:
    """Branch and bound over the conflict graph. Exact, intended for <= `limit` candidates."""
    n = len(candidates)
    if n > limit:
        raise ValueError(f"instance size {n} exceeds limit {limit}")
    if n == 0:
        return PackingSolution(PackingFamily((), 0.0), "exact", 0.0)
    order = sorted(range(n), key=lambda i: (-candidates[i].weight, candidates[i].window.center))
    geom = _Geometry([candidates[i].window for i in order])
    w = np.array([candidates[i].weight for i in order])
    conflict_mask = [0] * n
    for i in range(n):
        js = np.arange(i + 1, n)
        if js.size:
            bad = js[~geom.disjoint_one_many(i, js)]
            for j in bad:
                conflict_mask[i] |= 1 << int(j)
                conflict_mask[int(j)] |= 1 << i
    best_w = -1.0
    best_set = 0

    def avail_sum(mask: int, start: int) -> float:
        total = 0.0
        m = mask >> start
        i = start
        while m:
            if m & 1:
                total += w[i]
            m >>= 1
            i += 1
        return total

    def rec(i: int, cur_w: float, cur_set: int, avail: int) -> None:
        nonlocal best_w, best_set
        if cur_w > best_w:
            best_w, best_set = cur_w, cur_set
        while i < n and not (avail >> i) & 1:
            i += 1
        if i >= n:
            return
        if cur_w + avail_sum(avail, i) <= best_w + 1e-15:
            return
        rec(i + 1, cur_w + w[i], cur_set | (1 << i), avail & ~conflict_mask[i] & ~(1 << i))
        rec(i + 1, cur_w, cur_set, avail & ~(1 << i))

    rec(0, 0.0, 0, (1 << n) - 1)
    chosen = [order[i] for i in range(n) if (best_set >> i) & 1]
    return _solution(candidates, chosen, "exact", best_w)


def lattice_tilings(candidates: Sequence[PlacementCandidate], rho: int) -> list[list[int]]:
    """Anchored sub-lattice families: index lists that are pairwise disjoint by construction.

    Candidates enumerated on a spacing eps/rho lattice split into offset classes with
    spacing eps along every lattice axis; each class is a partial tiling. Diamonds
    additionally admit the denser checkerboard classes (L1 spacing eps) when rho is
    even. Families are returned sorted by descending weight sum.
    """
    groups: dict[tuple, list[int]] = {}
    for idx, c in enumerate(candidates):
        w = c.window
        groups.setdefault((w.shape, w.eps, w.theta), []).append(idx)
    fams: list[tuple[float, list[int]]] = []
    for (shape, eps, theta), members in groups.items():
        step = eps / rho
        ref = np.asarray(candidates[members[0]].window.center, dtype=float)
        pts = np.array([candidates[i].window.center for i in members], dtype=float) - ref
        if theta != 0.0:
            c, s = math.cos(theta), math.sin(theta)
            pts = pts @ np.array([[c, -s], [s, c]])
        ij = np.rint(pts / step).astype(int)
        classes: dict[tuple, list[int]] = {}
        for row, i in zip(ij, members):
            key = tuple(int(x) % rho for x in row)
            classes.setdefault(("sq",) + key, []).append(i)
            if shape == "diamond" and rho % 2 == 0 and len(row) == 2:
                ck = (int(row[0] + row[1]) % rho, int(row[0] - row[1]) % rho)
                classes.setdefault(("ck",) + ck, []).append(i)
        for fam in classes.values():
            fams.append((sum(candidates[i].weight for i in fam), fam))
    fams.sort(key=lambda t: -t[0])
    return [fam for _, fam in fams]


def solve_greedy_local(
    candidates: Sequence[PlacementCandidate],
    seed: int = 0,
    max_rounds: int = 3,
    restarts: int | None = None,
    upper_bound_classes: bool | None = None,
    seed_families: Sequence[Sequence[int]] = (),
    max_seed_families: int = 6,
) -> PackingSolution:
    """Greedy by weight with deterministic tie-breaks, then remove-and-reinsert local search.

    Weight ordering is quantized (relative 1e-9) so near-ties fall back to the
    spatial tie-break instead of float noise; on translation-invariant fields the
    plain greedy then walks the lattice coherently. Restarts reorder candidates by
    multiplicatively perturbed weights so distinct-weight instances genuinely
    diversify; small instances get more restarts since they cost nothing.
    seed_families (index lists, e.g. from lattice_tilings) are used as extra
    starting points: each seed is greedily completed and locally improved, and
    the best attempt wins.

    The reported upper bound partitions candidates into internally disjoint classes
    (greedy coloring) and uses #classes x heaviest class; on instances too large to
    color it falls back to the total weight, which is always valid.
    """
    n = len(candidates)
    if n == 0:
        return PackingSolution(PackingFamily((), 0.0), "heuristic", 0.0)
    if restarts is None:
        restarts = 24 if n <= 60 else (8 if n <= 400 else 2)
    geom = _Geometry([c.window for c in candidates])
    weights = np.array([c.weight for c in candidates])
    centers = [c.window.center for c in candidates]
    thetas = [c.window.theta for c in candidates]
    wmax = float(np.abs(weights).max())
    quant = (np.rint(weights / (wmax * 1e-9)) if wmax > 0 else weights).tolist()
    base_order = sorted(range(n), key=lambda i: (-quant[i], centers[i], thetas[i]))
    rng = np.random.default_rng(seed)
    indptr, indices = _conflict_graph(geom)

    starts: list[tuple[Sequence[int], list[int]]] = [((), base_order)]
    for fam in list(seed_families)[:max_seed_families]:
        starts.append((fam, base_order))
    for _ in range(max(0, restarts - 1)):
        # multiplicative perturbation keeps heavy candidates likely-early while
        # still escaping the deterministic order's local optima
        keys = weights * rng.uniform(0.4, 1.0, n)
        order = sorted(range(n), key=lambda i: (-keys[i], centers[i], thetas[i]))
        starts.append(((), order))
    rank = np.empty(n, dtype=np.int64)

    def attempt(preset: Sequence[int], order: list[int]) -> tuple[np.ndarray, float]:
        rank[order] = np.arange(n)
        chosen = np.zeros(n, dtype=bool)
        blocked = np.zeros(n, dtype=np.int32)  # number of chosen neighbors
        wsum = np.zeros(n)  # weight of chosen neighbors

        def choose(i: int) -> None:
            chosen[i] = True
            a = indices[indptr[i] : indptr[i + 1]]
            blocked[a] += 1
            wsum[a] += weights[i]

        def unchoose(i: int) -> None:
            chosen[i] = False
            a = indices[indptr[i] : indptr[i + 1]]
            blocked[a] -= 1
            wsum[a] -= weights[i]

        for i in preset:
            i = int(i)
            if not chosen[i] and blocked[i] == 0:
                choose(i)
        for i in order:
            if not chosen[i] and blocked[i] == 0:
                choose(i)
        for _ in range(max_rounds):
            improved = False
            for i in order:
                if chosen[i]:
                    continue
                if blocked[i] == 0:
                    choose(i)
                    improved = True
                    continue
                if weights[i] - wsum[i] <= 1e-12 * max(1.0, abs(weights[i])):
                    continue
                a = indices[indptr[i] : indptr[i + 1]]
                removed = a[chosen[a]]
                for j in removed:
                    unchoose(int(j))
                choose(i)
                improved = True
                freed: set[int] = set()
                for j in removed:
                    freed.update(indices[indptr[j] : indptr[j + 1]].tolist())
                for k in sorted(freed, key=rank.__getitem__):
                    if not chosen[k] and blocked[k] == 0:
                        choose(k)
            # reverse move: drop one chosen window when the candidates it blocks
            # are jointly worth more (insert-based swaps never find this)
            for j in range(n):
                if not chosen[j]:
                    continue
                unchoose(j)
                refilled = []
                for k in sorted(indices[indptr[j] : indptr[j + 1]].tolist(), key=rank.__getitem__):
                    if not chosen[k] and blocked[k] == 0:
                        choose(k)
                        refilled.append(k)
                gain = float(weights[refilled].sum()) - float(weights[j])
                if gain > 1e-12 * max(1.0, abs(weights[j])):
                    improved = True
                else:
                    for k in refilled:
                        unchoose(k)
                    choose(j)
            if not improved:
                break
        return chosen, float(weights[chosen].sum())

    best: np.ndarray | None = None
    best_w = -1.0
    for preset, order in starts:
        chosen, total = attempt(preset, order)
        if total > best_w:
            best_w, best = total, chosen.copy()

    # ruin-and-recreate on the incumbent: drop a random chunk of the chosen set
    # and rebuild in a perturbed order; escapes optima that reordering alone keeps
    perturb_rounds = 40 if n <= 60 else (12 if n <= 400 else 0)
    for _ in range(perturb_rounds):
        kept = [int(i) for i in np.flatnonzero(best) if rng.uniform() > 0.35]
        keys = weights * rng.uniform(0.4, 1.0, n)
        order = sorted(range(n), key=lambda i: (-keys[i], centers[i], thetas[i]))
        chosen, total = attempt(kept, order)
        if total > best_w:
            best_w, best = total, chosen.copy()

    if upper_bound_classes is None:
        upper_bound_classes = n <= 30000
    upper = float(weights.sum())
    if upper_bound_classes:
        # greedy coloring: each color class is pairwise disjoint, so the optimum
        # is at most (#classes) x (heaviest class sum)
        color = np.full(n, -1, dtype=np.int64)
        class_sum: list[float] = []
        for i in base_order:
            a = indices[indptr[i] : indptr[i + 1]]
            used = set(int(c) for c in color[a] if c >= 0)
            c = 0
            while c in used:
                c += 1
            color[i] = c
            if c == len(class_sum):
                class_sum.append(0.0)
            class_sum[c] += float(weights[i])
        upper = min(upper, len(class_sum) * max(class_sum))
    upper = max(upper, best_w)
    return _solution(candidates, list(np.flatnonzero(best)), "heuristic", upper)


def family_rows(family: PackingFamily) -> list[tuple[float, ...]]:
    """Flatten a family for CSV dumps: center coords, eps, theta, weight."""
    rows = []
    for c in family.members:
        rows.append(tuple(c.window.center) + (c.window.eps, c.window.theta, c.weight))
    return rows
