"""Comparison baselines: per-join-value sorted lists, and full materialization."""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right

from .errors import WrongClass
from .geom import RangeTree
from .relational import (
    BRUTE_FORCE_BUDGET,
    DatabaseInstance,
    QuerySpec,
    Rect,
    materialize,
    reduce_atoms,
    star_shape,
)
from .star import QueryStats


class RangeSIndex:
    """For each join value b, one sorted value list per relation.

    A relation contributing no output attribute keeps only its tuple count.
    """

    def __init__(self, q: QuerySpec, db: DatabaseInstance):
        shape = star_shape(q)
        if shape is None:
            raise WrongClass(f"sorted-list baseline needs a star-shaped query, got {q}")
        y = set(q.output)
        self.q = q
        self.join_out = tuple(a for a in shape.join if a in y)
        self.heads: list[str | None] = []
        for private in shape.private:
            out = [a for a in private if a in y]
            if len(out) > 1:
                raise WrongClass("sorted-list baseline supports one output attribute per relation")
            self.heads.append(out[0] if out else None)
        self._join_pos = [shape.join.index(a) for a in self.join_out]
        rels = reduce_atoms(q, db)
        per_b: dict[tuple, list] = {}
        for i, (rel, head) in enumerate(zip(rels, self.heads)):
            keys = rel.keys(shape.join)
            vals = rel.column(head).tolist() if head else [None] * len(rel)
            for b, v in zip(keys, vals):
                slot = per_b.setdefault(b, [[] if h else 0 for h in self.heads])
                if head:
                    slot[i].append(v)
                else:
                    slot[i] += 1
        for slot in per_b.values():
            for lst in slot:
                if isinstance(lst, list):
                    lst.sort()
        self.lists = dict(sorted(per_b.items()))
        self.N = sum(len(r) for r in rels)

    def count(self, r: Rect, stats: QueryStats | None = None) -> int:
        r.check(self.q.output)
        bounds = [r[h] if h else None for h in self.heads]
        join_bounds = [r[a] for a in self.join_out]
        total = 0
        comparisons = 0
        for b, slot in self.lists.items():
            if not all(lo <= b[i] <= hi for i, (lo, hi) in zip(self._join_pos, join_bounds)):
                continue
            prod = 1
            for lst, bd in zip(slot, bounds):
                if bd is None:
                    prod *= lst
                    continue
                comparisons += 2 * math.ceil(math.log2(len(lst) + 1))
                prod *= bisect_right(lst, bd[1]) - bisect_left(lst, bd[0])
                if not prod:
                    break
            total += prod
        if stats is not None:
            stats.prim_calls += comparisons
        return total

    def stored_entries(self) -> int:
        total = 0
        for slot in self.lists.values():
            total += 1 + sum(len(x) if isinstance(x, list) else 1 for x in slot)
        return total


class RangeTIndex:
    """A weighted range tree over the materialized query output."""

    def __init__(self, q: QuerySpec, db: DatabaseInstance, budget: int = BRUTE_FORCE_BUDGET):
        self.q = q
        rels = reduce_atoms(q, db)
        pts, w = materialize(rels, q.output, budget)
        self.tree = RangeTree(pts, w, q.output)
        self.size = self.tree.total

    def count(self, r: Rect, stats: QueryStats | None = None) -> int:
        r.check(self.q.output)
        lo, hi = r.bounds(self.q.output)
        return self.tree.count(lo, hi)

    def sample(self, r: Rect, rng):
        lo, hi = r.bounds(self.q.output)
        i = self.tree.sample(lo, hi, rng)
        return None if i is None else self.tree.point(i)

    def stored_entries(self) -> int:
        # every materialized result counts, plus the tree over distinct points
        return self.size + (self.tree.stored_entries() if self.tree.n else 0)


def ranges_build(db: DatabaseInstance, q: QuerySpec) -> RangeSIndex:
    return RangeSIndex(q, db)


def ranges_query(idx: RangeSIndex, r: Rect, stats: QueryStats | None = None) -> int:
    return idx.count(r, stats)


def ranget_build(db: DatabaseInstance, q: QuerySpec, budget: int = BRUTE_FORCE_BUDGET) -> RangeTIndex:
    return RangeTIndex(q, db, budget)


def ranget_query(idx: RangeTIndex, r: Rect) -> int:
    return idx.count(r)
