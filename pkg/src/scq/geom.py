"""Geometric primitives: weighted range trees, block trees, and ANN trees.

Range trees answer weighted orthogonal range counts and weighted uniform
sampling. Dimensions up to three use a layered range tree; higher
dimensions fall back to a kd-tree with subtree weights, which is exact but
not polylogarithmic.

Block trees partition rank-space points into blocks of at most ``alpha``
points and expose the canonical decomposition of a query box into fully
covered tree nodes plus partially intersected blocks.
"""
from __future__ import annotations

import heapq
import math
import random
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySet

LEAF_BUCKET = 8
LAYERED_MAX_DIM = 3
ANN_BUCKET = 16


def as_rng(rng) -> random.Random:
    if isinstance(rng, random.Random):
        return rng
    return random.Random(rng)


# ---------------------------------------------------------------------------
# Range trees


class _Sorted1D:
    """Sorted keys with prefix weights; the innermost range-tree level."""

    __slots__ = ("keys", "prefix", "ids")

    def __init__(self, keys: list, weights: list, ids: np.ndarray):
        self.keys = keys
        prefix = [0]
        acc = 0
        for w in weights:
            acc += w
            prefix.append(acc)
        self.prefix = prefix
        self.ids = ids

    def count(self, lo, hi, axis_lo: float, axis_hi: float) -> int:
        i = bisect_left(self.keys, axis_lo)
        j = bisect_right(self.keys, axis_hi)
        return self.prefix[j] - self.prefix[i] if i < j else 0

    def pieces(self, lo, hi, axis_lo, axis_hi, out: list) -> None:
        i = bisect_left(self.keys, axis_lo)
        j = bisect_right(self.keys, axis_hi)
        if i < j and self.prefix[j] > self.prefix[i]:
            out.append((self.prefix[j] - self.prefix[i], self, i, j))

    def entries(self) -> int:
        return 2 * len(self.keys) + 1


class _Layer:
    """One level of a layered range tree, sorted on ``axis``.

    An implicit segment tree over the sorted positions; every internal node
    carries a secondary structure on the remaining axes. Leaf buckets are
    scanned directly.
    """

    __slots__ = ("axis", "keys", "ids", "nodes", "coords", "weights", "d")

    def __init__(self, coords, weights, ids: np.ndarray, axis: int, d: int):
        self.axis, self.d = axis, d
        self.coords, self.weights = coords, weights
        self.ids = ids
        self.keys = coords[ids, axis].tolist()
        # node: [lo, hi, left, right, secondary]
        self.nodes: list[list] = []
        if len(ids):
            self._build(0, len(ids))

    def _build(self, lo: int, hi: int) -> int:
        me = len(self.nodes)
        node = [lo, hi, -1, -1, None]
        self.nodes.append(node)
        if hi - lo > LEAF_BUCKET:
            mid = (lo + hi) // 2
            node[2] = self._build(lo, mid)
            node[3] = self._build(mid, hi)
            node[4] = _make_level(self.coords, self.weights, self.ids[lo:hi], self.axis + 1, self.d)
        return me

    def _scan(self, s: int, e: int, lo, hi) -> np.ndarray:
        sub = self.ids[s:e]
        pts = self.coords[sub, self.axis + 1 :]
        mask = np.all((pts >= lo[self.axis + 1 :]) & (pts <= hi[self.axis + 1 :]), axis=1)
        return sub[mask]

    def _visit(self, lo, hi, on_node, on_scan) -> None:
        if not self.nodes:
            return
        i = bisect_left(self.keys, lo[self.axis])
        j = bisect_right(self.keys, hi[self.axis])
        if i >= j:
            return
        stack = [0]
        nodes = self.nodes
        while stack:
            nlo, nhi, left, right, sec = nodes[stack.pop()]
            if nhi <= i or nlo >= j:
                continue
            if i <= nlo and nhi <= j and sec is not None:
                on_node(sec)
            elif left < 0:
                on_scan(max(nlo, i), min(nhi, j))
            else:
                stack.append(right)
                stack.append(left)

    def count(self, lo, hi, axis_lo=None, axis_hi=None) -> int:
        total = 0
        nxt = self.axis + 1

        def on_node(sec):
            nonlocal total
            total += sec.count(lo, hi, lo[nxt], hi[nxt])

        def on_scan(s, e):
            nonlocal total
            sel = self._scan(s, e, lo, hi)
            if len(sel):
                total += int(self.weights[sel].sum())

        self._visit(lo, hi, on_node, on_scan)
        return total

    def pieces(self, lo, hi, axis_lo, axis_hi, out: list) -> None:
        nxt = self.axis + 1

        def on_node(sec):
            sec.pieces(lo, hi, lo[nxt], hi[nxt], out)

        def on_scan(s, e):
            sel = self._scan(s, e, lo, hi)
            if len(sel):
                w = self.weights[sel]
                tot = int(w.sum())
                if tot:
                    out.append((tot, None, sel, w))

        self._visit(lo, hi, on_node, on_scan)

    def entries(self) -> int:
        total = 2 * len(self.keys)
        for node in self.nodes:
            total += 1
            if node[4] is not None:
                total += node[4].entries()
        return total


def _make_level(coords, weights, ids: np.ndarray, axis: int, d: int):
    order = np.lexsort((ids, coords[ids, axis]))
    ids = ids[order]
    if axis == d - 1:
        return _Sorted1D(coords[ids, axis].tolist(), weights[ids].tolist(), ids)
    return _Layer(coords, weights, ids, axis, d)


class _KdCount:
    """kd-tree with subtree weights; points permuted so nodes are contiguous."""

    def __init__(self, coords: np.ndarray, weights: np.ndarray):
        n, d = coords.shape
        self.coords, self.d = coords, d
        self.perm = np.arange(n)
        self.nodes: list[list] = []  # [lo, hi, left, right, box_lo, box_hi]
        if n:
            self._build(0, n, 0)
        w = weights[self.perm]
        self.prefix = [0] + np.cumsum(w).tolist()
        self.weights = weights

    def _build(self, lo: int, hi: int, depth: int) -> int:
        idx = self.perm[lo:hi]
        pts = self.coords[idx]
        me = len(self.nodes)
        node = [lo, hi, -1, -1, pts.min(axis=0).tolist(), pts.max(axis=0).tolist()]
        self.nodes.append(node)
        if hi - lo > LEAF_BUCKET:
            spread = np.subtract(node[5], node[4])
            axis = int(np.argmax(spread))
            if spread[axis] > 0:
                order = np.lexsort((idx, pts[:, axis]))
                self.perm[lo:hi] = idx[order]
                mid = (lo + hi) // 2
                node[2] = self._build(lo, mid, depth + 1)
                node[3] = self._build(mid, hi, depth + 1)
        return me

    def _visit(self, lo, hi, on_range, on_pts) -> None:
        if not self.nodes:
            return
        # only bounded axes can exclude anything
        axes = [(i, float(lo[i]), float(hi[i])) for i in range(self.d) if lo[i] > -math.inf or hi[i] < math.inf]
        stack = [0]
        while stack:
            nlo, nhi, left, right, blo, bhi = self.nodes[stack.pop()]
            if any(bhi[i] < a or blo[i] > b for i, a, b in axes):
                continue
            if all(blo[i] >= a and bhi[i] <= b for i, a, b in axes):
                on_range(nlo, nhi)
            elif left < 0:
                idx = self.perm[nlo:nhi]
                pts = self.coords[idx]
                on_pts(idx[np.all((pts >= lo) & (pts <= hi), axis=1)])
            else:
                stack.append(right)
                stack.append(left)

    def count(self, lo, hi, axis_lo=None, axis_hi=None) -> int:
        total = 0

        def on_range(s, e):
            nonlocal total
            total += self.prefix[e] - self.prefix[s]

        def on_pts(sel):
            nonlocal total
            if len(sel):
                total += int(self.weights[sel].sum())

        self._visit(lo, hi, on_range, on_pts)
        return total

    def pieces(self, lo, hi, axis_lo, axis_hi, out: list) -> None:
        def on_range(s, e):
            if self.prefix[e] > self.prefix[s]:
                out.append((self.prefix[e] - self.prefix[s], self, s, e))

        def on_pts(sel):
            if len(sel):
                w = self.weights[sel]
                tot = int(w.sum())
                if tot:
                    out.append((tot, None, sel, w))

        self._visit(lo, hi, on_range, on_pts)

    @property
    def ids(self):
        return self.perm

    def entries(self) -> int:
        return len(self.nodes) * (2 + 2 * self.d) + 2 * len(self.perm) + 1


class RangeTree:
    """Weighted orthogonal range counting and sampling over points in R^d.

    Intervals are closed; endpoints may be infinite. Weights are
    non-negative integers (multiplicities).
    """

    def __init__(self, coords, weights=None, attrs: Sequence[str] | None = None):
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim == 1:
            coords = coords.reshape(-1, len(attrs) if attrs is not None else 1)
        n, d = coords.shape
        if weights is None:
            weights = np.ones(n, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.int64)
        if len(weights) != n:
            raise ValueError("one weight per point required")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        self.coords, self.weights = coords, weights
        self.n, self.d = n, d
        self.attrs = tuple(attrs) if attrs is not None else tuple(f"x{i}" for i in range(d))
        if len(self.attrs) != d:
            raise DimensionMismatch("attribute names do not match dimension")
        self.total = int(weights.sum())
        ids = np.arange(n)
        if d == 0 or n == 0:
            self._root = None
        elif d <= LAYERED_MAX_DIM:
            self._root = _make_level(coords, weights, ids, 0, d)
        else:
            self._root = _KdCount(coords, weights)

    def _bounds(self, lo, hi):
        lo = np.asarray(lo, dtype=np.float64).reshape(-1)
        hi = np.asarray(hi, dtype=np.float64).reshape(-1)
        if len(lo) != self.d or len(hi) != self.d:
            raise DimensionMismatch(f"expected {self.d} intervals, got {len(lo)}")
        return lo, hi

    def count(self, lo, hi) -> int:
        lo, hi = self._bounds(lo, hi)
        if np.any(lo > hi):
            return 0
        if self._root is None:
            return self.total
        return self._root.count(lo, hi, lo[0], hi[0])

    def sample(self, lo, hi, rng) -> int | None:
        """Index of a point drawn with probability proportional to weight."""
        lo, hi = self._bounds(lo, hi)
        rng = as_rng(rng)
        if np.any(lo > hi) or self.total == 0:
            return None
        if self._root is None:
            return _pick_weighted(self.weights, rng.randrange(self.total))
        pieces: list = []
        self._root.pieces(lo, hi, lo[0], hi[0], pieces)
        total = sum(p[0] for p in pieces)
        if total == 0:
            return None
        u = rng.randrange(total)
        for w, owner, a, b in pieces:
            if u < w:
                if owner is None:
                    return int(a[_pick_weighted(b, u)])
                target = owner.prefix[a] + u
                pos = bisect_right(owner.prefix, target) - 1
                return int(owner.ids[pos])
            u -= w
        raise AssertionError("unreachable")

    def point(self, i: int) -> tuple[float, ...]:
        return tuple(self.coords[i].tolist())

    def stored_entries(self) -> int:
        base = self.n * (self.d + 1)
        return base + (self._root.entries() if self._root is not None else 1)


def _pick_weighted(weights, u: int) -> int:
    acc = 0
    for i, w in enumerate(np.asarray(weights).tolist()):
        acc += w
        if u < acc:
            return i
    raise AssertionError("weight offset out of range")


def _rect_bounds(t: RangeTree, r) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(r, "intervals"):
        r.check(t.attrs)
        return r.bounds(t.attrs)
    pairs = list(r)
    if len(pairs) != t.d:
        raise DimensionMismatch(f"expected {t.d} intervals, got {len(pairs)}")
    lo = np.array([p[0] for p in pairs], dtype=np.float64)
    hi = np.array([p[1] for p in pairs], dtype=np.float64)
    return lo, hi


def rt_build(points, weights=None, d: int | None = None, attrs=None) -> RangeTree:
    points = np.asarray(points, dtype=np.float64)
    if d is not None:
        points = points.reshape(-1, d)
    return RangeTree(points, weights, attrs)


def rt_count(t: RangeTree, r) -> int:
    """Total weight in a Rect keyed by the tree's attributes, or a list of (lo, hi)."""
    lo, hi = _rect_bounds(t, r)
    return t.count(lo, hi)


def rt_sample(t: RangeTree, r, rng) -> tuple[float, ...] | None:
    lo, hi = _rect_bounds(t, r)
    i = t.sample(lo, hi, rng)
    return None if i is None else t.point(i)


# ---------------------------------------------------------------------------
# Rank space


class RankSpace:
    """Per-attribute composite-key ranks: position in (value, tuple id) order."""

    def __init__(self, columns: np.ndarray):
        columns = np.asarray(columns, dtype=np.float64)
        n, d = columns.shape
        self.ranks = np.empty((n, d), dtype=np.int64)
        self.sorted_values: list[list[float]] = []
        for c in range(d):
            order = np.argsort(columns[:, c], kind="stable")
            self.ranks[order, c] = np.arange(n)
            self.sorted_values.append(columns[order, c].tolist())

    def interval(self, dim: int, lo: float, hi: float) -> tuple[int, int]:
        """Rank interval of a closed value interval; lo > hi when empty."""
        vals = self.sorted_values[dim]
        return bisect_left(vals, lo), bisect_right(vals, hi) - 1

    def box(self, intervals: Sequence[tuple[float, float]]) -> tuple[tuple[int, int], ...] | None:
        out = []
        for dim, (lo, hi) in enumerate(intervals):
            a, b = self.interval(dim, lo, hi)
            if a > b:
                return None
            out.append((a, b))
        return tuple(out)


# ---------------------------------------------------------------------------
# Block trees


@dataclass
class CanonicalSet:
    """Canonical decomposition of a rank-space box.

    ``nodes`` are global node ids whose blocks lie fully inside the box;
    ``partial`` are global block ids (or chunk labels) that intersect it
    partially; ``covered`` lists one rank box per covered region, and
    ``partial_ids`` the tuple ids from partial blocks that satisfy the box.
    """

    nodes: list[int] = field(default_factory=list)
    partial: list[int] = field(default_factory=list)
    covered: list[tuple[tuple[int, int], ...]] = field(default_factory=list)
    partial_ids: list[int] = field(default_factory=list)
    touched: int = 0

    @property
    def interval(self) -> tuple[int, int] | None:
        """The covered rank interval in the one-dimensional case."""
        if not self.covered:
            return None
        if len(self.covered) != 1 or len(self.covered[0]) != 1:
            raise DimensionMismatch("covered region is not a single interval")
        return self.covered[0][0]


class _Registry:
    def __init__(self):
        self.blocks: list[np.ndarray] = []
        self.node_span: list[tuple[int, int]] = []
        self.node_children: list[tuple[int, int] | None] = []


class _Level1D:
    """Blocks of alpha consecutive points on the last axis, with a tree over them."""

    def __init__(self, ids: np.ndarray, ranks: np.ndarray, alpha: int, axis: int, reg: _Registry):
        order = np.argsort(ranks[ids, axis], kind="stable")
        self.ids = ids[order]
        self.keys = ranks[self.ids, axis].tolist()
        self.axis, self.alpha = axis, alpha
        n = len(self.ids)
        self.nblocks = -(-n // alpha) if n else 0
        self.block0 = len(reg.blocks)
        for j in range(self.nblocks):
            reg.blocks.append(self.ids[j * alpha : (j + 1) * alpha])
        self.reg = reg
        self.root = self._build(0, self.nblocks) if self.nblocks else -1

    def _build(self, lo: int, hi: int) -> int:
        reg = self.reg
        me = len(reg.node_span)
        reg.node_span.append((self.block0 + lo, self.block0 + hi))
        reg.node_children.append(None)
        if hi - lo > 1:
            mid = (lo + hi) // 2
            left = self._build(lo, mid)
            right = self._build(mid, hi)
            reg.node_children[me] = (left, right)
        return me

    def decompose(self, jlo: int, jhi: int, out: list[int]) -> None:
        """Maximal nodes whose block range lies in [jlo, jhi] (local ids)."""
        glo, ghi = self.block0 + jlo, self.block0 + jhi + 1
        stack = [self.root]
        reg = self.reg
        while stack:
            u = stack.pop()
            s, e = reg.node_span[u]
            if e <= glo or s >= ghi:
                continue
            if glo <= s and e <= ghi:
                out.append(u)
            else:
                left, right = reg.node_children[u]
                stack.append(right)
                stack.append(left)

    def canonical(self, box, ranks, prefix: tuple, cs: CanonicalSet) -> None:
        if not self.nblocks:
            return
        lo, hi = box[self.axis]
        a = bisect_left(self.keys, lo)
        b = bisect_right(self.keys, hi) - 1
        if a > b:
            return
        alpha, n = self.alpha, len(self.keys)
        jlo = -(-a // alpha)
        jhi = self.nblocks - 1 if b == n - 1 else (b + 1) // alpha - 1
        for j in sorted({a // alpha, b // alpha}):
            if jlo <= j <= jhi:
                continue
            blk = self.ids[j * alpha : (j + 1) * alpha]
            cs.partial.append(self.block0 + j)
            cs.touched += len(blk)
            keys = self.keys[j * alpha : (j + 1) * alpha]
            s = bisect_left(keys, lo)
            e = bisect_right(keys, hi)
            cs.partial_ids.extend(blk[s:e].tolist())
        if jlo <= jhi:
            self.decompose(jlo, jhi, cs.nodes)
            p0, p1 = jlo * alpha, min((jhi + 1) * alpha, n) - 1
            cs.covered.append(prefix + ((self.keys[p0], self.keys[p1]),))

    def entries(self) -> int:
        return len(self.ids) + 2 * self.nblocks


class _LevelUpper:
    """Segment tree over alpha-sized chunks on one axis; each node holds a
    block structure on the remaining axes."""

    def __init__(self, ids: np.ndarray, ranks: np.ndarray, alpha: int, axis: int, reg: _Registry):
        order = np.argsort(ranks[ids, axis], kind="stable")
        self.ids = ids[order]
        self.keys = ranks[self.ids, axis].tolist()
        self.axis, self.alpha = axis, alpha
        d = ranks.shape[1]
        n = len(self.ids)
        self.nchunks = -(-n // alpha) if n else 0
        # node: [chunk_lo, chunk_hi, left, right, secondary]
        self.nodes: list[list] = []

        def build(lo, hi):
            me = len(self.nodes)
            node = [lo, hi, -1, -1, None]
            self.nodes.append(node)
            if hi - lo > 1:
                mid = (lo + hi) // 2
                node[2] = build(lo, mid)
                node[3] = build(mid, hi)
            members = self.ids[lo * alpha : min(hi * alpha, n)]
            nxt = axis + 1
            node[4] = (_Level1D if nxt == d - 1 else _LevelUpper)(members, ranks, alpha, nxt, reg)
            return me

        if self.nchunks:
            build(0, self.nchunks)

    def canonical(self, box, ranks, prefix: tuple, cs: CanonicalSet) -> None:
        if not self.nchunks:
            return
        lo, hi = box[self.axis]
        a = bisect_left(self.keys, lo)
        b = bisect_right(self.keys, hi) - 1
        if a > b:
            return
        alpha, n = self.alpha, len(self.keys)
        jlo = -(-a // alpha)
        jhi = self.nchunks - 1 if b == n - 1 else (b + 1) // alpha - 1
        rest = box[self.axis :]
        for j in sorted({a // alpha, b // alpha}):
            if jlo <= j <= jhi:
                continue
            blk = self.ids[j * alpha : (j + 1) * alpha]
            cs.partial.append(-1)
            cs.touched += len(blk)
            pts = ranks[blk, self.axis :]
            mask = np.ones(len(blk), dtype=bool)
            for c, (l, h) in enumerate(rest):
                mask &= (pts[:, c] >= l) & (pts[:, c] <= h)
            cs.partial_ids.extend(blk[mask].tolist())
        if jlo > jhi:
            return
        stack = [0]
        while stack:
            clo, chi, left, right, sec = self.nodes[stack.pop()]
            if chi <= jlo or clo > jhi:
                continue
            if jlo <= clo and chi - 1 <= jhi:
                p0, p1 = clo * alpha, min(chi * alpha, n) - 1
                sec.canonical(box, ranks, prefix + ((self.keys[p0], self.keys[p1]),), cs)
            else:
                stack.append(right)
                stack.append(left)

    def entries(self) -> int:
        return len(self.ids) + sum(1 + node[4].entries() for node in self.nodes)


class BlockTree:
    """Blocks of at most ``alpha`` rank-space points and a balanced tree over them.

    ``ranks`` is an n x d integer array whose columns are permutations of
    rank values (distinct per column). With d = 1 the blocks are runs of
    ``alpha`` consecutive ranks; with d > 1 an upper segment tree over the
    first axis carries a block level on the remaining axes at every node.
    """

    def __init__(self, ranks: np.ndarray, alpha: int):
        ranks = np.asarray(ranks, dtype=np.int64)
        if ranks.ndim == 1:
            ranks = ranks.reshape(-1, 1)
        self.ranks = ranks
        self.n, self.d = ranks.shape
        self.alpha = max(1, int(alpha))
        self.reg = _Registry()
        ids = np.arange(self.n)
        if self.d == 0:
            raise DimensionMismatch("block trees need at least one axis")
        cls = _Level1D if self.d == 1 else _LevelUpper
        self.top = cls(ids, ranks, self.alpha, 0, self.reg)

    @property
    def blocks(self) -> list[np.ndarray]:
        return self.reg.blocks

    @property
    def node_span(self) -> list[tuple[int, int]]:
        return self.reg.node_span

    @property
    def num_nodes(self) -> int:
        return len(self.reg.node_span)

    def node_members(self, u: int) -> np.ndarray:
        s, e = self.reg.node_span[u]
        parts = self.reg.blocks[s:e]
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

    def canonical(self, box: Sequence[tuple[int, int]]) -> CanonicalSet:
        if len(box) != self.d:
            raise DimensionMismatch(f"expected {self.d} rank intervals")
        cs = CanonicalSet()
        if any(lo > hi for lo, hi in box):
            return cs
        self.top.canonical(tuple(box), self.ranks, (), cs)
        return cs

    def stored_entries(self) -> int:
        return self.top.entries() + 3 * self.num_nodes


def block_tree_over_values(values, alpha: int) -> tuple[BlockTree, RankSpace]:
    """A one-dimensional block tree over raw values via composite-key ranks."""
    cols = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    rs = RankSpace(cols)
    return BlockTree(rs.ranks, alpha), rs


def rt_canonical(t: BlockTree, interval: tuple[int, int]) -> CanonicalSet:
    return t.canonical([interval])


# ---------------------------------------------------------------------------
# Approximate nearest neighbour


class AnnTree:
    """kd-tree with best-first search and (1+eps) pruning."""

    def __init__(self, points, eps: float = 0.0, bucket: int = ANN_BUCKET):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if not 0 <= eps:
            raise ValueError("eps must be non-negative")
        self.points, self.eps, self.bucket = pts, float(eps), bucket
        self.n, self.d = pts.shape
        self.perm = np.arange(self.n)
        # node: (lo, hi, left, right, box_lo, box_hi)
        self.nodes: list[tuple] = []
        if self.n:
            self._build(0, self.n)

    def _build(self, lo: int, hi: int) -> int:
        idx = self.perm[lo:hi]
        pts = self.points[idx]
        blo, bhi = pts.min(axis=0), pts.max(axis=0)
        me = len(self.nodes)
        self.nodes.append(None)
        left = right = -1
        if hi - lo > self.bucket and self.d:
            spread = bhi - blo
            axis = int(np.argmax(spread))
            if spread[axis] > 0:
                order = np.lexsort((idx, pts[:, axis]))
                self.perm[lo:hi] = idx[order]
                mid = (lo + hi) // 2
                left = self._build(lo, mid)
                right = self._build(mid, hi)
        self.nodes[me] = (lo, hi, left, right, blo, bhi)
        return me

    def nearest(self, q) -> tuple[int, float]:
        """Index of an approximate nearest point and its distance."""
        if not self.n:
            raise EmptySet("nearest-neighbour query on an empty point set")
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if len(q) != self.d:
            raise DimensionMismatch(f"query has {len(q)} coordinates, expected {self.d}")
        shrink = (1.0 + self.eps) ** 2
        best, best_i = math.inf, -1
        heap = [(0.0, 0)]
        while heap:
            d2, u = heapq.heappop(heap)
            if d2 * shrink >= best and best_i >= 0:
                break
            lo, hi, left, right, _, _ = self.nodes[u]
            if left < 0:
                idx = self.perm[lo:hi]
                dist = ((self.points[idx] - q) ** 2).sum(axis=1)
                k = int(np.argmin(dist))
                if dist[k] < best:
                    best, best_i = float(dist[k]), int(idx[k])
                continue
            for c in (left, right):
                blo, bhi = self.nodes[c][4], self.nodes[c][5]
                gap = np.maximum(np.maximum(blo - q, q - bhi), 0.0)
                heapq.heappush(heap, (float(gap @ gap), c))
        return best_i, math.sqrt(best)

    def query(self, q) -> tuple[float, ...]:
        i, _ = self.nearest(q)
        return tuple(self.points[i].tolist())

    def stored_entries(self) -> int:
        return self.n * (self.d + 1) + len(self.nodes) * (4 + 2 * self.d)


def ann_build(points, eps: float) -> AnnTree:
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return AnnTree(points, eps)


def ann_query(t: AnnTree, q) -> tuple[float, ...]:
    return t.query(q)
