"""Range-count index for k-star queries.

Every head attribute group is mapped to composite-key rank space, so blocks
and boxes never straddle equal values ambiguously. A query splits into the
combinations of fully covered block-tree nodes (read from precomputed
counts) and the tuples of partially covered blocks (answered with the
per-join-value primitive index).
"""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import BadBudget, WrongClass
from .geom import BlockTree, RangeTree, RankSpace
from .relational import (
    DatabaseInstance,
    QuerySpec,
    Rect,
    Relation,
    classify,
    reduce_atoms,
    star_shape,
)


@dataclass
class QueryStats:
    """Work counters filled in by instrumented queries."""

    touched: int = 0  # tuples in partial blocks scanned
    prim_calls: int = 0
    sub_calls: int = 0
    heavy_branches: int = 0
    l1: int = 0
    l2: list[int] = field(default_factory=list)


def key_ids(*columns: list[tuple]) -> tuple[list[np.ndarray], list[tuple]]:
    """Dense integer ids for tuple-valued keys shared across several columns."""
    universe = sorted(set().union(*map(set, columns)))
    lookup = {k: i for i, k in enumerate(universe)}
    out = [np.fromiter((lookup[k] for k in col), dtype=np.int64, count=len(col)) for col in columns]
    return out, universe


def input_size(q: QuerySpec, db: DatabaseInstance) -> int:
    return sum(len(db[a.relation]) for a in q.atoms)


def check_budget(T: float, n: int) -> None:
    if not (isinstance(T, (int, float)) and math.isfinite(T)):
        raise BadBudget(f"time budget must be a finite number, got {T!r}")
    if T < 1 or T > max(n, 1):
        raise BadBudget(f"time budget T={T} outside [1, N={n}]")


def clamp_alpha(a: float, n: int) -> int:
    return int(max(1, min(math.ceil(a), max(n, 1))))


def block_matrix(tree: BlockTree, keys: np.ndarray, nkeys: int) -> sparse.csr_matrix:
    """Join-key by block count matrix."""
    rows, cols = [], []
    for j, blk in enumerate(tree.blocks):
        rows.append(keys[blk])
        cols.append(np.full(len(blk), j, dtype=np.int64))
    if rows:
        r, c = np.concatenate(rows), np.concatenate(cols)
    else:
        r = c = np.empty(0, dtype=np.int64)
    return sparse.csr_matrix(
        (np.ones(len(r), dtype=np.int64), (r, c)), shape=(nkeys, len(tree.blocks))
    )


def node_table(leaf: np.ndarray, trees: Sequence[BlockTree]) -> np.ndarray:
    """Counts for every tuple of tree nodes from a leaf-block count tensor."""
    k = leaf.ndim
    prefix = np.zeros(tuple(s + 1 for s in leaf.shape), dtype=np.int64)
    prefix[tuple(slice(1, None) for _ in range(k))] = leaf
    for ax in range(k):
        np.cumsum(prefix, axis=ax, out=prefix)
    spans = [np.asarray(t.node_span, dtype=np.int64).reshape(-1, 2) for t in trees]
    table = np.zeros(tuple(len(s) for s in spans), dtype=np.int64)
    for bits in product((0, 1), repeat=k):
        idx = [spans[i][:, bits[i]] for i in range(k)]
        sign = -1 if (k - sum(bits)) % 2 else 1
        table += sign * prefix[np.ix_(*idx)]
    return table


class PrimitiveIndex:
    """Per join value b and relation i, a counting structure over the
    rank-space head coordinates of the tuples of relation i carrying b."""

    def __init__(self, spaces: Sequence[RankSpace], bkeys: Sequence[np.ndarray]):
        self.k = len(spaces)
        self.dims = [s.ranks.shape[1] for s in spaces]
        self.lists: list[dict[int, object]] = []
        for space, keys in zip(spaces, bkeys):
            groups: dict[int, list[int]] = {}
            for t, b in enumerate(keys.tolist()):
                groups.setdefault(b, []).append(t)
            per_b: dict[int, object] = {}
            for b, members in groups.items():
                coords = space.ranks[members]
                if coords.shape[1] == 1:
                    per_b[b] = sorted(coords[:, 0].tolist())
                else:
                    per_b[b] = RangeTree(coords.astype(np.float64))
            self.lists.append(per_b)

    def count_one(self, i: int, b: int, box) -> int:
        s = self.lists[i].get(b)
        if s is None:
            return 0
        if self.dims[i] == 1:
            lo, hi = box[0]
            return bisect_right(s, hi) - bisect_left(s, lo)
        lo = [iv[0] for iv in box]
        hi = [iv[1] for iv in box]
        return s.count(lo, hi)

    def count(self, b: int, boxes) -> int:
        out = 1
        for i, box in enumerate(boxes):
            out *= self.count_one(i, b, box)
            if not out:
                break
        return out

    def stored_entries(self) -> int:
        total = 0
        for per_b in self.lists:
            for s in per_b.values():
                total += 1 + (len(s) if isinstance(s, list) else s.stored_entries())
        return total


class StarCore:
    """Star index over already reduced relations, queried in rank space."""

    def __init__(
        self,
        rels: Sequence[Relation],
        join: Sequence[str],
        heads: Sequence[Sequence[str]],
        alpha: int,
    ):
        self.k = len(rels)
        self.alpha = alpha
        self.join = tuple(join)
        self.heads = [tuple(h) for h in heads]
        self.spaces = [RankSpace(r.project(h)) for r, h in zip(rels, self.heads)]
        self.bkeys, self.bvalues = key_ids(*(r.keys(self.join) for r in rels))
        self.prim = PrimitiveIndex(self.spaces, self.bkeys)
        self.trees = [BlockTree(s.ranks, alpha) for s in self.spaces]
        nb = len(self.bvalues)
        mats = [block_matrix(t, keys, nb) for t, keys in zip(self.trees, self.bkeys)]
        self.table = node_table(self._leaf_counts(mats), self.trees)

    def _leaf_counts(self, mats: list[sparse.csr_matrix]) -> np.ndarray:
        if self.k == 2:
            return (mats[0].T @ mats[1]).toarray().astype(np.int64)
        leaf = np.zeros(tuple(m.shape[1] for m in mats), dtype=np.int64)
        for b in range(mats[0].shape[0]):
            idx, vals = [], []
            for m in mats:
                s, e = m.indptr[b], m.indptr[b + 1]
                idx.append(m.indices[s:e])
                vals.append(m.data[s:e])
            if any(len(v) == 0 for v in idx):
                continue
            leaf[np.ix_(*idx)] += reduce(np.multiply.outer, vals)
        return leaf

    def count_boxes(self, boxes, stats: QueryStats | None = None) -> int:
        """Bag count of results whose i-th source tuple lies in rank box i."""
        if any(b is None for b in boxes):
            return 0
        canon = [t.canonical(box) for t, box in zip(self.trees, boxes)]
        l1 = 0
        if all(c.nodes for c in canon):
            l1 = int(self.table[np.ix_(*[c.nodes for c in canon])].sum())
        l2 = []
        prim_calls = 0
        for i in range(self.k):
            part = 0
            keys = self.bkeys[i]
            memo: dict[int, int] = {}
            for t in canon[i].partial_ids:
                b = int(keys[t])
                f = memo.get(b)
                if f is None:
                    f = 1
                    for j in range(self.k):
                        if j == i:
                            continue
                        if j < i:
                            f *= sum(self.prim.count_one(j, b, cb) for cb in canon[j].covered)
                        else:
                            f *= self.prim.count_one(j, b, boxes[j])
                        prim_calls += 1
                        if not f:
                            break
                    memo[b] = f
                part += f
            l2.append(part)
        if stats is not None:
            stats.touched += sum(c.touched for c in canon)
            stats.prim_calls += prim_calls
            stats.l1 += l1
            stats.l2 = [a + b for a, b in zip(stats.l2, l2)] if stats.l2 else l2
        return l1 + sum(l2)

    def stored_entries(self) -> int:
        total = self.prim.stored_entries() + int(self.table.size)
        total += sum(t.stored_entries() for t in self.trees)
        total += sum(2 * s.ranks.size for s in self.spaces)
        total += sum(len(k) for k in self.bkeys) + len(self.bvalues)
        return total


def rank_boxes(spaces: Sequence[RankSpace], heads: Sequence[Sequence[str]], r: Rect):
    return [s.box([r[a] for a in h]) for s, h in zip(spaces, heads)]


class StarIndex:
    def __init__(self, q: QuerySpec, rels: list[Relation], alpha: int, n: int):
        shape = star_shape(q)
        self.q, self.alpha, self.N = q, alpha, n
        self.rels = rels
        self.core = StarCore(rels, shape.join, shape.private, alpha)

    @property
    def k(self) -> int:
        return self.core.k

    def count(self, r: Rect, stats: QueryStats | None = None) -> int:
        r.check(self.q.output)
        return self.core.count_boxes(rank_boxes(self.core.spaces, self.core.heads, r), stats)

    def stored_entries(self) -> int:
        return self.core.stored_entries()


def _require_star(q: QuerySpec) -> None:
    qc = classify(q)
    if qc.kind != "star":
        raise WrongClass(f"star index needs a Star query, got {qc}")


def prim_build(db: DatabaseInstance, q: QuerySpec) -> "ValuePrimitive":
    _require_star(q)
    rels = reduce_atoms(q, db)
    return ValuePrimitive(q, rels)


class ValuePrimitive:
    """The primitive index addressed by raw join values and value rectangles."""

    def __init__(self, q: QuerySpec, rels: list[Relation]):
        shape = star_shape(q)
        self.q = q
        self.heads = shape.private
        self.join = shape.join
        self.spaces = [RankSpace(r.project(h)) for r, h in zip(rels, self.heads)]
        self.bkeys, self.bvalues = key_ids(*(r.keys(self.join) for r in rels))
        self.lookup = {b: i for i, b in enumerate(self.bvalues)}
        self.index = PrimitiveIndex(self.spaces, self.bkeys)

    def count(self, b, r: Rect) -> int:
        key = tuple(float(v) for v in (b if isinstance(b, (tuple, list)) else (b,)))
        bid = self.lookup.get(key)
        if bid is None:
            return 0
        boxes = rank_boxes(self.spaces, self.heads, r)
        if any(box is None for box in boxes):
            return 0
        return self.index.count(bid, boxes)

    def stored_entries(self) -> int:
        return self.index.stored_entries()


def prim_count(idx: ValuePrimitive, b, r: Rect) -> int:
    return idx.count(b, r)


def star_build(db: DatabaseInstance, q: QuerySpec, T: float) -> StarIndex:
    _require_star(q)
    n = input_size(q, db)
    check_budget(T, n)
    rels = reduce_atoms(q, db)
    return StarIndex(q, rels, clamp_alpha(T, n), n)


def star_rcq(idx: StarIndex, r: Rect, stats: QueryStats | None = None) -> int:
    return idx.count(r, stats)
