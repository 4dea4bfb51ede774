"""Heavy-light index for generalized star queries (count, ANN, sampling),
and the linear-size index for queries whose output lies inside one atom."""
from __future__ import annotations

import math
from collections import Counter
from itertools import product
from typing import Iterable

import numpy as np

from .errors import EmptyResult, ModeMismatch, NotCovered, WrongClass
from .geom import AnnTree, RangeTree, as_rng
from .relational import (
    DatabaseInstance,
    QuerySpec,
    Rect,
    as_point,
    classify,
    count_extensions,
    extend_rect,
    reduce_atoms,
    star_shape,
)
from .star import QueryStats, check_budget, clamp_alpha, input_size

MODES = ("count", "ann", "sample")


def parse_modes(mode) -> frozenset[str]:
    modes = {mode} if isinstance(mode, str) else set(mode)
    bad = modes - set(MODES)
    if bad or not modes:
        raise ValueError(f"mode must be drawn from {MODES}, got {sorted(bad) or 'nothing'}")
    return frozenset(modes)


def check_eps(modes: frozenset[str], eps) -> float:
    if "ann" not in modes:
        return 0.0 if eps is None else float(eps)
    if eps is None or not 0 < float(eps) <= 1:
        raise ValueError(f"ann mode needs eps in (0, 1], got {eps!r}")
    return float(eps)


def weighted_points(rows: Iterable[tuple], d: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapse duplicate points into (unique points, multiplicities)."""
    counts = Counter(rows)
    pts = sorted(counts)
    coords = np.array(pts, dtype=np.float64).reshape(len(pts), d)
    return coords, np.array([counts[p] for p in pts], dtype=np.int64)


def _within(values: tuple, bounds: list[tuple[float, float]]) -> bool:
    return all(lo <= v <= hi for v, (lo, hi) in zip(values, bounds))


class _Part:
    """Counting and ANN structures over one weighted point multiset."""

    __slots__ = ("attrs", "tree", "ann", "coords")

    def __init__(self, attrs, coords, weights, count: bool, ann: bool, eps: float):
        self.attrs = tuple(attrs)
        self.coords = coords
        self.tree = RangeTree(coords, weights, self.attrs) if count else None
        self.ann = AnnTree(coords, eps) if ann and self.attrs and len(coords) else None

    def bounds(self, r: Rect):
        return r.bounds(self.attrs)

    def count(self, r: Rect) -> int:
        lo, hi = self.bounds(r)
        return self.tree.count(lo, hi)

    def sample(self, r: Rect, rng) -> tuple | None:
        lo, hi = self.bounds(r)
        i = self.tree.sample(lo, hi, rng)
        return None if i is None else tuple(self.coords[i].tolist())

    def nearest(self, point: dict) -> tuple[tuple, float]:
        """Approximate nearest point and its squared distance."""
        if not self.attrs:
            return (), 0.0
        q = [point[a] for a in self.attrs]
        i, dist = self.ann.nearest(q)
        return tuple(self.coords[i].tolist()), dist * dist

    def stored_entries(self) -> int:
        total = 0
        if self.tree is not None:
            total += self.tree.stored_entries()
        if self.ann is not None:
            total += self.ann.stored_entries()
        return total


class HeavyLightIndex:
    def __init__(self, q, rels, alpha, n_input, modes, eps, project=True):
        self.q, self.alpha, self.N_input = q, alpha, n_input
        self.modes, self.eps, self.project = modes, eps, project
        if "ann" in modes and not project:
            raise ModeMismatch("ann mode needs the projected index")
        shape = star_shape(q)
        self.join = shape.join
        self.coord_attrs = q.output if project else q.attributes
        coord = set(self.coord_attrs)
        self.join_out = tuple(a for a in self.join if a in coord)
        self.heads_out = [tuple(a for a in h if a in coord) for h in shape.private]
        self.N = sum(len(r) for r in rels)
        counting = bool(modes & {"count", "sample"})
        ann = "ann" in modes

        groups: list[dict[tuple, list[tuple]]] = []
        for rel, heads in zip(rels, self.heads_out):
            g: dict[tuple, list[tuple]] = {}
            for b, h in zip(rel.keys(self.join), rel.keys(heads)):
                g.setdefault(b, []).append(h)
            groups.append(g)
        sizes = Counter()
        for g in groups:
            for b, members in g.items():
                sizes[b] += len(members)
        # heavy when |T_b| >= N / alpha
        self.heavy = sorted(b for b, s in sizes.items() if s * alpha >= self.N)
        self.light = sorted(b for b, s in sizes.items() if s * alpha < self.N)
        self.sizes = dict(sizes)
        if len(self.heavy) > alpha:
            raise AssertionError(f"{len(self.heavy)} heavy values exceed alpha={alpha}")

        pos = {a: i for i, a in enumerate(self.coord_attrs)}
        join_pos = [self.join.index(a) for a in self.join_out]
        light_rows: Counter = Counter()
        for b in self.light:
            per_rel = [Counter(g[b]) for g in groups]
            bvals = tuple(b[i] for i in join_pos)
            for combo in product(*(c.items() for c in per_rel)):
                point = [0.0] * len(self.coord_attrs)
                for a, v in zip(self.join_out, bvals):
                    point[pos[a]] = v
                w = 1
                for heads, (vals, c) in zip(self.heads_out, combo):
                    w *= c
                    for a, v in zip(heads, vals):
                        point[pos[a]] = v
                light_rows[tuple(point)] += w
        pts = sorted(light_rows)
        coords = np.array(pts, dtype=np.float64).reshape(len(pts), len(self.coord_attrs))
        weights = np.array([light_rows[p] for p in pts], dtype=np.int64)
        self.q_light_size = int(weights.sum())
        self.light_part = _Part(self.coord_attrs, coords, weights, counting, ann, eps)

        self.heavy_parts: dict[tuple, list[_Part]] = {}
        for b in self.heavy:
            parts = []
            for g, heads in zip(groups, self.heads_out):
                c, w = weighted_points(g[b], len(heads))
                parts.append(_Part(heads, c, w, counting, ann, eps))
            self.heavy_parts[b] = parts
        self._join_pos = join_pos

    def _need(self, mode: str) -> None:
        ok = self.modes & {"count", "sample"} if mode in ("count", "sample") else "ann" in self.modes
        if not ok:
            raise ModeMismatch(f"index built for {sorted(self.modes)}, query needs {mode}")

    def _coord_rect(self, r: Rect) -> Rect:
        r.check(self.q.output)
        return r if self.project else extend_rect(self.q, r)

    def _heavy_weights(self, r: Rect, stats: QueryStats | None):
        join_bounds = [r[a] for a in self.join_out]
        out = []
        for b, parts in self.heavy_parts.items():
            if not _within(tuple(b[i] for i in self._join_pos), join_bounds):
                continue
            if stats is not None:
                stats.heavy_branches += 1
            z = 1
            for p in parts:
                z *= p.count(r)
                if not z:
                    break
            if z:
                out.append((b, z))
        return out

    def count(self, r: Rect, stats: QueryStats | None = None) -> int:
        self._need("count")
        r = self._coord_rect(r)
        n1 = self.light_part.count(r)
        n2 = sum(z for _, z in self._heavy_weights(r, stats))
        if stats is not None:
            stats.l1 += n1
            stats.l2 = [n2]
        return n1 + n2

    def _assemble(self, b, parts_vals) -> dict:
        out = dict(zip(self.join_out, (b[i] for i in self._join_pos)))
        for heads, vals in zip(self.heads_out, parts_vals):
            out.update(zip(heads, vals))
        return out

    def sample(self, r: Rect, rng) -> tuple | None:
        self._need("sample")
        rng = as_rng(rng)
        r = self._coord_rect(r)
        n1 = self.light_part.count(r)
        heavy = self._heavy_weights(r, None)
        total = n1 + sum(z for _, z in heavy)
        if total == 0:
            return None
        u = rng.randrange(total)
        if u < n1:
            vals = dict(zip(self.coord_attrs, self.light_part.sample(r, rng)))
        else:
            u -= n1
            for b, z in heavy:
                if u < z:
                    break
                u -= z
            parts = [p.sample(r, rng) for p in self.heavy_parts[b]]
            vals = self._assemble(b, parts)
        return tuple(vals[a] for a in self.q.output)

    def ann(self, point) -> tuple:
        self._need("ann")
        q = dict(zip(self.q.output, as_point(self.q, point)))
        best, best_d = None, math.inf
        if len(self.light_part.coords):
            vals, d2 = self.light_part.nearest(q)
            best, best_d = dict(zip(self.coord_attrs, vals)), d2
        for b, parts in self.heavy_parts.items():
            bvals = [b[i] for i in self._join_pos]
            d2 = sum((q[a] - v) ** 2 for a, v in zip(self.join_out, bvals))
            found = []
            for p in parts:
                vals, pd = p.nearest(q)
                found.append(vals)
                d2 += pd
            if d2 < best_d:
                best, best_d = self._assemble(b, found), d2
        if best is None:
            raise EmptyResult("query has no results")
        return tuple(best[a] for a in self.q.output)

    def stored_entries(self) -> int:
        total = self.light_part.stored_entries() + len(self.sizes)
        for parts in self.heavy_parts.values():
            total += 1 + sum(p.stored_entries() for p in parts)
        return total


def hl_build(
    db: DatabaseInstance,
    q: QuerySpec,
    T: float,
    mode="count",
    eps: float | None = None,
    project: bool = True,
) -> HeavyLightIndex:
    qc = classify(q)
    if qc.kind not in ("star", "generalized_star"):
        raise WrongClass(f"heavy-light index needs a (generalized) star query, got {qc}")
    modes = parse_modes(mode)
    eps = check_eps(modes, eps)
    n = input_size(q, db)
    check_budget(T, n)
    rels = reduce_atoms(q, db)
    return HeavyLightIndex(q, rels, clamp_alpha(T, n), n, modes, eps, project)


def hl_rcq(idx: HeavyLightIndex, r: Rect, stats: QueryStats | None = None) -> int:
    return idx.count(r, stats)


def hl_ann(idx: HeavyLightIndex, q) -> tuple:
    return idx.ann(q)


def hl_rsq(idx: HeavyLightIndex, r: Rect, rng) -> tuple | None:
    return idx.sample(r, rng)


class CoveredOutputIndex:
    """Weighted index over one atom's tuples when it holds every output attribute."""

    def __init__(self, q: QuerySpec, db: DatabaseInstance, j: int, eps: float = 0.0):
        self.q, self.j, self.eps = q, j, eps
        rels = reduce_atoms(q, db)
        ext = count_extensions(q, rels, j)
        rows: Counter = Counter()
        for key, w in zip(rels[j].keys(q.output), ext.tolist()):
            rows[key] += w
        pts = sorted(rows)
        self.coords = np.array(pts, dtype=np.float64).reshape(len(pts), len(q.output))
        self.weights = np.array([rows[p] for p in pts], dtype=np.int64)
        self.tree = RangeTree(self.coords, self.weights, q.output)
        self.ann_tree = AnnTree(self.coords, eps) if len(pts) and q.output else None

    @property
    def total(self) -> int:
        return self.tree.total

    def count(self, r: Rect) -> int:
        r.check(self.q.output)
        lo, hi = r.bounds(self.q.output)
        return self.tree.count(lo, hi)

    def ann(self, point) -> tuple:
        q = as_point(self.q, point)
        if self.ann_tree is None:
            raise EmptyResult("query has no results")
        return self.ann_tree.query(q)

    def sample(self, r: Rect, rng) -> tuple | None:
        lo, hi = r.bounds(self.q.output)
        i = self.tree.sample(lo, hi, rng)
        return None if i is None else tuple(self.coords[i].tolist())

    def stored_entries(self) -> int:
        total = self.tree.stored_entries()
        if self.ann_tree is not None:
            total += self.ann_tree.stored_entries()
        return total


def covered_build(
    db: DatabaseInstance, q: QuerySpec, j: int | None = None, eps: float = 1.0
) -> CoveredOutputIndex:
    y = set(q.output)
    if j is None:
        j = next((i for i, a in enumerate(q.atoms) if y <= set(a.attrs)), None)
        if j is None:
            raise NotCovered("no atom contains every output attribute")
    elif not y <= set(q.atoms[j].attrs):
        raise NotCovered(f"atom {q.atoms[j]} does not contain every output attribute")
    return CoveredOutputIndex(q, db, j, eps)


def covered_count(idx: CoveredOutputIndex, r: Rect) -> int:
    return idx.count(r)


def covered_ann(idx: CoveredOutputIndex, q) -> tuple:
    return idx.ann(q)
