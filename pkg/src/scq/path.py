"""Range-count index for k-path queries, built inductively.

The two endpoint relations get block trees and a table of pair counts
between their tree nodes. Tuples in partially covered endpoint blocks are
answered by two sub-indexes on the (k-1)-path prefix and suffix; the
recursion ends at a 2-star.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import WrongClass
from .geom import BlockTree, RankSpace
from .relational import (
    DatabaseInstance,
    QuerySpec,
    Rect,
    Relation,
    classify,
    path_shape,
    reduce_atoms,
    star_shape,
)
from .star import (
    QueryStats,
    StarCore,
    block_matrix,
    check_budget,
    input_size,
    key_ids,
    node_table,
)


def int_root_ceil(T: float, p: int) -> int:
    """Smallest positive integer a with a**p >= T."""
    a = max(1, math.ceil(T ** (1.0 / p)))
    while a > 1 and (a - 1) ** p >= T:
        a -= 1
    while a**p < T:
        a += 1
    return a


def path_core(rels, links, first, last, alpha):
    if len(rels) == 2:
        return StarCore(rels, links[0], [first, last], alpha)
    return PathCore(rels, links, first, last, alpha)


class PathCore:
    """Path index over reduced relations in path order, queried in rank space.

    ``links[i]`` holds the attributes shared by relations i and i+1.
    """

    def __init__(
        self,
        rels: Sequence[Relation],
        links: Sequence[Sequence[str]],
        first: Sequence[str],
        last: Sequence[str],
        alpha: int,
    ):
        self.k = len(rels)
        self.alpha = alpha
        self.links = [tuple(x) for x in links]
        self.heads = [tuple(first), tuple(last)]
        r1, rk = rels[0], rels[-1]
        self.spaces = [RankSpace(r1.project(first)), RankSpace(rk.project(last))]
        self.trees = [BlockTree(s.ranks, alpha) for s in self.spaces]
        # join-key values of endpoint tuples, used for sub-index point lookups
        self.first_link = r1.keys(self.links[0])
        self.last_link = rk.keys(self.links[-1])
        self.pair_table = node_table(self._pair_leaf(rels), self.trees)
        self.prefix = path_core(rels[:-1], self.links[:-1], first, self.links[-1], alpha)
        self.suffix = path_core(rels[1:], self.links[1:], self.links[0], last, alpha)

    def _pair_leaf(self, rels) -> np.ndarray:
        # per link: key ids on its left relation, its right relation, and key count
        link_ids = []
        for i, link in enumerate(self.links):
            (left, right), universe = key_ids(rels[i].keys(link), rels[i + 1].keys(link))
            link_ids.append((left, right, len(universe)))
        chain = block_matrix(self.trees[0], link_ids[0][0], link_ids[0][2]).T.tocsr()
        for i in range(1, self.k - 1):
            rows, cols = link_ids[i - 1][1], link_ids[i][0]
            adj = sparse.csr_matrix(
                (np.ones(len(rows), dtype=np.int64), (rows, cols)),
                shape=(link_ids[i - 1][2], link_ids[i][2]),
            )
            chain = (chain @ adj).tocsr()
        last = link_ids[-1]
        mk = block_matrix(self.trees[1], last[1], last[2])
        return (chain @ mk).toarray().astype(np.int64)

    def count_boxes(self, boxes, stats: QueryStats | None = None) -> int:
        box1, box2 = boxes
        if box1 is None or box2 is None:
            return 0
        c1 = self.trees[0].canonical(box1)
        c2 = self.trees[1].canonical(box2)
        l1 = 0
        if c1.nodes and c2.nodes:
            l1 = int(self.pair_table[np.ix_(c1.nodes, c2.nodes)].sum())
        calls = 0
        head_suffix = self.suffix.spaces[0]
        memo: dict[tuple, int] = {}
        l2a = 0
        for t in c1.partial_ids:
            key = self.first_link[t]
            v = memo.get(key)
            if v is None:
                box = head_suffix.box([(x, x) for x in key])
                v = self.suffix.count_boxes([box, box2], stats)
                calls += 1
                memo[key] = v
            l2a += v
        head_prefix = self.prefix.spaces[-1]
        memo = {}
        l2b = 0
        if c1.covered:
            for t in c2.partial_ids:
                key = self.last_link[t]
                v = memo.get(key)
                if v is None:
                    box = head_prefix.box([(x, x) for x in key])
                    v = sum(self.prefix.count_boxes([cb, box], stats) for cb in c1.covered)
                    calls += 1
                    memo[key] = v
                l2b += v
        if stats is not None:
            stats.touched += c1.touched + c2.touched
            stats.sub_calls += calls
        return l1 + l2a + l2b

    def sub_indexes(self) -> list:
        return [self.prefix, self.suffix]

    def stored_entries(self) -> int:
        total = int(self.pair_table.size)
        total += sum(t.stored_entries() for t in self.trees)
        total += sum(2 * s.ranks.size for s in self.spaces)
        total += len(self.first_link) + len(self.last_link)
        return total + self.prefix.stored_entries() + self.suffix.stored_entries()


class PathIndex:
    def __init__(self, q: QuerySpec, rels: list[Relation], alpha: int, n: int):
        self.q, self.alpha, self.N = q, alpha, n
        shape = path_shape(q)
        if shape is not None:
            order, links, first, last = shape.order, shape.links, shape.first, shape.last
        else:
            s = star_shape(q)
            order, links, first, last = (0, 1), (s.join,), s.private[0], s.private[1]
        self.order = tuple(order)
        self.rels = [rels[i] for i in order]
        self.core = path_core(self.rels, links, first, last, alpha)
        self.k = len(order)

    @property
    def heads(self):
        return self.core.heads

    def count(self, r: Rect, stats: QueryStats | None = None) -> int:
        r.check(self.q.output)
        boxes = [s.box([r[a] for a in h]) for s, h in zip(self.core.spaces, self.core.heads)]
        return self.core.count_boxes(boxes, stats)

    def stored_entries(self) -> int:
        return self.core.stored_entries()


def path_build(db: DatabaseInstance, q: QuerySpec, T: float) -> PathIndex:
    qc = classify(q)
    if not (qc.kind == "path" or (qc.kind == "star" and qc.k == 2)):
        raise WrongClass(f"path index needs a Path query, got {qc}")
    n = input_size(q, db)
    check_budget(T, n)
    k = len(q.atoms)
    alpha = max(1, min(int_root_ceil(T, k - 1), max(n, 1)))
    rels = reduce_atoms(q, db)
    return PathIndex(q, rels, alpha, n)


def path_rcq(idx: PathIndex, r: Rect, stats: QueryStats | None = None) -> int:
    return idx.count(r, stats)
