"""Relational data model, conjunctive queries, and brute-force oracles.

Relations hold finite float64 rows; the row position is the tuple id used
for tie-breaking. Queries bind relations positionally: an atom ``R(A,B)``
renames the columns of relation ``R`` to ``A`` and ``B``.
"""
from __future__ import annotations

import csv
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    CyclicQuery,
    DataError,
    DimensionMismatch,
    NaNValue,
    QueryError,
)

INF = math.inf
BRUTE_FORCE_BUDGET = 10**8


@dataclass(frozen=True, eq=False)
class Relation:
    name: str
    attrs: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1 and data.size == 0:
            data = data.reshape(0, len(self.attrs))
        if data.ndim != 2 or data.shape[1] != len(self.attrs):
            raise DataError(
                f"relation {self.name}: rows must have arity {len(self.attrs)}"
            )
        if not np.all(np.isfinite(data)):
            raise NaNValue(f"relation {self.name}: NaN or infinite value")
        data.setflags(write=False)
        object.__setattr__(self, "attrs", tuple(self.attrs))
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def arity(self) -> int:
        return len(self.attrs)

    @cached_property
    def tuples(self) -> list[tuple[float, ...]]:
        return [tuple(row) for row in self.data.tolist()]

    def index_of(self, attr: str) -> int:
        return self.attrs.index(attr)

    def column(self, attr: str) -> np.ndarray:
        return self.data[:, self.index_of(attr)]

    def project(self, attrs: Sequence[str]) -> np.ndarray:
        return self.data[:, [self.index_of(a) for a in attrs]]

    def keys(self, attrs: Sequence[str]) -> list[tuple[float, ...]]:
        """Per-tuple projections as hashable tuples, in id order."""
        return [tuple(r) for r in self.project(attrs).tolist()]

    def take(self, rows) -> "Relation":
        return Relation(self.name, self.attrs, self.data[rows])

    def renamed(self, name: str, attrs: Sequence[str]) -> "Relation":
        if len(attrs) != self.arity:
            raise QueryError(
                f"atom {name}{tuple(attrs)} has arity {len(attrs)}, "
                f"relation {self.name} has arity {self.arity}"
            )
        return Relation(name, tuple(attrs), self.data)

    def __repr__(self) -> str:
        return f"Relation({self.name}{self.attrs}, {len(self)} tuples)"


class DatabaseInstance:
    def __init__(self, relations: Iterable[Relation]):
        self.relations: dict[str, Relation] = {}
        for rel in relations:
            if rel.name in self.relations:
                raise DataError(f"duplicate relation name {rel.name}")
            self.relations[rel.name] = rel

    def __getitem__(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise DataError(f"unknown relation {name}") from None

    def __iter__(self) -> Iterator[Relation]:
        return iter(self.relations.values())

    def __len__(self) -> int:
        return len(self.relations)

    @property
    def N(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def __repr__(self) -> str:
        return f"DatabaseInstance({list(self.relations.values())})"


def make_relation(name: str, attrs: Sequence[str], rows) -> Relation:
    rows = list(rows)
    data = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(attrs)))
    return Relation(name, tuple(attrs), data)


def load_csv(path, name: str | None = None) -> Relation:
    """Read a numeric CSV whose header row names the attributes."""
    path = Path(path)
    name = name or path.stem
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: missing header row") from None
        header = [h.strip() for h in header]
        if not header or any(not h for h in header):
            raise DataError(f"{path}: empty attribute name in header")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate attribute name in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {header[col]}: "
                        f"not a number: {cell!r}"
                    ) from None
                if math.isnan(v):
                    raise NaNValue(f"{path}: row {lineno}, column {header[col]}: NaN")
                if math.isinf(v):
                    raise NaNValue(
                        f"{path}: row {lineno}, column {header[col]}: infinite value"
                    )
                values.append(v)
            rows.append(values)
    return make_relation(name, header, rows)


def write_csv(rel: Relation, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(rel.attrs)
        for row in rel.data.tolist():
            w.writerow([_fmt(v) for v in row])


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


# ---------------------------------------------------------------------------
# Queries


@dataclass(frozen=True)
class Atom:
    relation: str
    attrs: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.attrs)})"


@dataclass(frozen=True)
class QuerySpec:
    atoms: tuple[Atom, ...]
    output: tuple[str, ...]

    def __post_init__(self):
        atoms = tuple(
            a if isinstance(a, Atom) else Atom(a[0], tuple(a[1])) for a in self.atoms
        )
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "output", tuple(self.output))
        if not atoms:
            raise QueryError("query has no atoms")
        for a in atoms:
            if not a.attrs:
                raise QueryError(f"atom {a.relation} has no attributes")
            if any(not x for x in a.attrs):
                raise QueryError(f"atom {a.relation}: empty attribute name")
            if len(set(a.attrs)) != len(a.attrs):
                raise QueryError(f"atom {a}: repeated attribute")
        if len(set(self.output)) != len(self.output):
            raise QueryError("duplicate output attribute")
        missing = set(self.output) - set(self.attributes)
        if missing:
            raise QueryError(f"output attributes not in any atom: {sorted(missing)}")

    @classmethod
    def of(cls, atoms, output=None) -> "QuerySpec":
        atoms = tuple(Atom(r, tuple(at)) for r, at in atoms)
        if output is None:
            output = _ordered_union(a.attrs for a in atoms)
        return cls(atoms, tuple(output))

    @classmethod
    def parse(cls, text: str) -> "QuerySpec":
        """Parse ``Rel(A,B)`` lines followed by ``OUTPUT: A,B``."""
        atoms, output = [], None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if output is not None:
                raise QueryError(f"line {lineno}: content after OUTPUT line")
            if line.upper().startswith("OUTPUT:"):
                body = line.split(":", 1)[1]
                output = [x.strip() for x in body.split(",") if x.strip()]
                continue
            m = re.fullmatch(r"([A-Za-z_][\w.]*)\s*\(([^()]*)\)", line)
            if not m:
                raise QueryError(f"line {lineno}: expected Rel(A,B,...), got {raw!r}")
            attrs = tuple(x.strip() for x in m.group(2).split(","))
            atoms.append(Atom(m.group(1), attrs))
        if output is None:
            raise QueryError("missing OUTPUT line")
        return cls(tuple(atoms), tuple(output))

    @classmethod
    def from_file(cls, path) -> "QuerySpec":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        lines = [str(a) for a in self.atoms]
        lines.append("OUTPUT: " + ",".join(self.output))
        return "\n".join(lines) + "\n"

    @cached_property
    def attributes(self) -> tuple[str, ...]:
        return _ordered_union(a.attrs for a in self.atoms)

    @cached_property
    def edges(self) -> dict[str, frozenset[int]]:
        """E_A: the atom positions containing each attribute."""
        e: dict[str, set[int]] = defaultdict(set)
        for i, a in enumerate(self.atoms):
            for x in a.attrs:
                e[x].add(i)
        return {x: frozenset(e[x]) for x in self.attributes}

    @cached_property
    def join_attrs(self) -> tuple[str, ...]:
        return tuple(x for x in self.attributes if len(self.edges[x]) > 1)

    @property
    def is_full(self) -> bool:
        return set(self.output) == set(self.attributes)

    @cached_property
    def aliases(self) -> tuple[str, ...]:
        counts = Counter(a.relation for a in self.atoms)
        seen: Counter = Counter()
        out = []
        for a in self.atoms:
            seen[a.relation] += 1
            if counts[a.relation] > 1:
                out.append(f"{a.relation}#{seen[a.relation]}")
            else:
                out.append(a.relation)
        return tuple(out)

    def full(self) -> "QuerySpec":
        return QuerySpec(self.atoms, self.attributes)

    def with_output(self, output: Sequence[str]) -> "QuerySpec":
        return QuerySpec(self.atoms, tuple(output))

    def sub(self, atom_positions: Sequence[int], output: Sequence[str]) -> "QuerySpec":
        return QuerySpec(tuple(self.atoms[i] for i in atom_positions), tuple(output))

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.atoms)
        return f"Q({','.join(self.output)}) :- {body}"


def _ordered_union(groups: Iterable[Iterable[str]]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for g in groups:
        for x in g:
            seen.setdefault(x, None)
    return tuple(seen)


@dataclass(frozen=True)
class QueryClass:
    kind: str  # star | generalized_star | path | hierarchical | general
    k: int | None = None

    def __str__(self) -> str:
        names = {
            "star": "Star",
            "generalized_star": "GeneralizedStar",
            "path": "Path",
            "hierarchical": "Hierarchical",
            "general": "General",
        }
        return names[self.kind] + (f"{{{self.k}}}" if self.k is not None else "")


@dataclass(frozen=True)
class StarShape:
    join: tuple[str, ...]  # the shared attributes B
    private: tuple[tuple[str, ...], ...]  # A_i per atom, in atom order


@dataclass(frozen=True)
class PathShape:
    order: tuple[int, ...]  # atom positions from one end to the other
    first: tuple[str, ...]  # private attributes of the first atom
    last: tuple[str, ...]  # private attributes of the last atom
    links: tuple[tuple[str, ...], ...]  # B_1..B_{k-1}


def star_shape(q: QuerySpec) -> StarShape | None:
    m = len(q.atoms)
    if m < 2:
        return None
    everywhere = frozenset(range(m))
    join = tuple(x for x in q.attributes if q.edges[x] == everywhere)
    if not join:
        return None
    if any(len(q.edges[x]) not in (1, m) for x in q.attributes):
        return None
    private = tuple(
        tuple(x for x in a.attrs if x not in join) for a in q.atoms
    )
    return StarShape(join, private)


def path_shape(q: QuerySpec) -> PathShape | None:
    m = len(q.atoms)
    if m < 3:
        return None
    if any(len(e) > 2 for e in q.edges.values()):
        return None
    nbrs: dict[int, set[int]] = defaultdict(set)
    for x in q.attributes:
        e = sorted(q.edges[x])
        if len(e) == 2:
            nbrs[e[0]].add(e[1])
            nbrs[e[1]].add(e[0])
    if any(len(nbrs[i]) > 2 for i in range(m)):
        return None
    ends = [i for i in range(m) if len(nbrs[i]) == 1]
    if len(ends) != 2:
        return None
    order = [ends[0]]
    prev = None
    while len(order) < m:
        cur = order[-1]
        nxt = [j for j in nbrs[cur] if j != prev]
        if len(nxt) != 1:
            return None
        prev = cur
        order.append(nxt[0])
    if len(set(order)) != m or order[-1] != ends[1]:
        return None

    def private(i):
        return tuple(x for x in q.atoms[i].attrs if len(q.edges[x]) == 1)

    if any(private(i) for i in order[1:-1]):
        return None
    first, last = private(order[0]), private(order[-1])
    if not first or not last:
        return None
    links = []
    for a, b in zip(order, order[1:]):
        links.append(tuple(x for x in q.atoms[a].attrs if b in q.edges[x]))
    return PathShape(tuple(order), first, last, tuple(links))


def is_hierarchical(q: QuerySpec) -> bool:
    for x, y in combinations(q.attributes, 2):
        ex, ey = q.edges[x], q.edges[y]
        if not (ex <= ey or ey <= ex or not (ex & ey)):
            return False
    return True


def classify(q: QuerySpec) -> QueryClass:
    m = len(q.atoms)
    y = set(q.output)
    s = star_shape(q)
    if s is not None:
        if not y & set(s.join) and all(s.private):
            return QueryClass("star", m)
        return QueryClass("generalized_star", m)
    p = path_shape(q)
    if p is not None and y <= set(p.first) | set(p.last):
        return QueryClass("path", m)
    if is_hierarchical(q):
        return QueryClass("hierarchical")
    return QueryClass("general")


# ---------------------------------------------------------------------------
# Binding, join trees, semijoin reduction


def bind(q: QuerySpec, db: DatabaseInstance) -> list[Relation]:
    """One relation per atom, with columns renamed to the atom's attributes."""
    return [
        db[a.relation].renamed(alias, a.attrs) for a, alias in zip(q.atoms, q.aliases)
    ]


def join_tree(q: QuerySpec) -> tuple[list[int], list[int | None]]:
    """GYO ear removal.

    Returns the elimination order (ears first, root last) and the parent of
    every atom in the resulting join forest, joined into one tree.
    """
    m = len(q.atoms)
    attrs = [set(a.attrs) for a in q.atoms]
    alive = set(range(m))
    parent: list[int | None] = [None] * m
    order: list[int] = []
    while len(alive) > 1:
        for e in sorted(alive):
            others = alive - {e}
            shared = attrs[e] & set().union(*(attrs[o] for o in others))
            host = next((f for f in sorted(others) if shared <= attrs[f]), None)
            if host is not None:
                parent[e] = host
                order.append(e)
                alive.remove(e)
                break
        else:
            raise CyclicQuery(f"no join tree exists for {q}")
    order.append(alive.pop())
    return order, parent


def _semijoin(r: Relation, s: Relation) -> Relation:
    shared = [x for x in r.attrs if x in s.attrs]
    if not shared:
        return r if len(s) else r.take(np.zeros(len(r), dtype=bool))
    keys = set(s.keys(shared))
    mask = np.fromiter((k in keys for k in r.keys(shared)), dtype=bool, count=len(r))
    return r if mask.all() else r.take(mask)


def reduce_atoms(q: QuerySpec, db: DatabaseInstance) -> list[Relation]:
    """Semijoin-reduce the bound relations; returns one relation per atom."""
    rels = bind(q, db)
    order, parent = join_tree(q)
    for e in order[:-1]:
        p = parent[e]
        rels[p] = _semijoin(rels[p], rels[e])
    for e in reversed(order[:-1]):
        p = parent[e]
        rels[e] = _semijoin(rels[e], rels[p])
    return rels


def semijoin_reduce(db: DatabaseInstance, q: QuerySpec) -> DatabaseInstance:
    """Remove dangling tuples.

    The result holds one relation per atom, named by the atom's alias, with
    the original column names.
    """
    reduced = reduce_atoms(q, db)
    out = []
    for atom, rel in zip(q.atoms, reduced):
        orig = db[atom.relation]
        out.append(Relation(rel.name, orig.attrs, rel.data))
    return DatabaseInstance(out)


def rooted_children(q: QuerySpec, root: int) -> tuple[list[int], dict[int, list[int]]]:
    """Re-root the join tree at ``root``; returns BFS order and children lists."""
    _, parent = join_tree(q)
    adj: dict[int, list[int]] = defaultdict(list)
    for c, p in enumerate(parent):
        if p is not None:
            adj[c].append(p)
            adj[p].append(c)
    order, children = [root], defaultdict(list)
    seen = {root}
    for u in order:
        for v in sorted(adj[u]):
            if v not in seen:
                seen.add(v)
                children[u].append(v)
                order.append(v)
    return order, children


def count_extensions(q: QuerySpec, rels: Sequence[Relation], root: int) -> np.ndarray:
    """For every tuple of atom ``root``, the number of join results using it."""
    order, children = rooted_children(q, root)
    counts: dict[int, np.ndarray] = {}
    for u in reversed(order):
        c = np.ones(len(rels[u]), dtype=np.int64)
        for v in children[u]:
            shared = [x for x in rels[v].attrs if x in rels[u].attrs]
            agg: dict[tuple, int] = defaultdict(int)
            for key, w in zip(rels[v].keys(shared), counts[v].tolist()):
                agg[key] += w
            c *= np.fromiter(
                (agg.get(k, 0) for k in rels[u].keys(shared)),
                dtype=np.int64,
                count=len(rels[u]),
            )
        counts[u] = c
    return counts[root]


# ---------------------------------------------------------------------------
# Join evaluation


def iter_join(rels: Sequence[Relation]) -> tuple[tuple[str, ...], Iterator[tuple]]:
    """Hash-indexed backtracking join (bag semantics).

    Returns the attribute order and an iterator over full result tuples.
    """
    attrs = _ordered_union(r.attrs for r in rels)
    pos = {x: i for i, x in enumerate(attrs)}
    remaining = list(range(len(rels)))
    plan = []
    bound: set[str] = set()
    while remaining:
        best = max(remaining, key=lambda i: (len(set(rels[i].attrs) & bound), -i))
        remaining.remove(best)
        rel = rels[best]
        key_attrs = [x for x in rel.attrs if x in bound]
        new_attrs = [x for x in rel.attrs if x not in bound]
        index: dict[tuple, list[tuple]] = defaultdict(list)
        for k, v in zip(rel.keys(key_attrs), rel.keys(new_attrs)):
            index[k].append(v)
        plan.append(([pos[x] for x in key_attrs], [pos[x] for x in new_attrs], index))
        bound |= set(rel.attrs)

    def gen():
        if any(len(r) == 0 for r in rels):
            return
        cur = [0.0] * len(attrs)

        def rec(level):
            if level == len(plan):
                yield tuple(cur)
                return
            kpos, npos, index = plan[level]
            for vals in index.get(tuple(cur[p] for p in kpos), ()):
                for p, v in zip(npos, vals):
                    cur[p] = v
                yield from rec(level + 1)

        yield from rec(0)

    return attrs, gen()


def materialize(
    rels: Sequence[Relation], out_attrs: Sequence[str], budget: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Projected join results as unique points with multiplicity weights."""
    attrs, it = iter_join(rels)
    idx = [attrs.index(x) for x in out_attrs]
    counter: Counter = Counter()
    n = 0
    for t in it:
        counter[tuple(t[i] for i in idx)] += 1
        n += 1
        if budget is not None and n > budget:
            raise BudgetExceeded(f"join output exceeds budget {budget}")
    if not counter:
        return np.empty((0, len(out_attrs))), np.empty(0, dtype=np.int64)
    pts = sorted(counter)
    return (
        np.array(pts, dtype=np.float64).reshape(len(pts), len(out_attrs)),
        np.array([counter[p] for p in pts], dtype=np.int64),
    )


def join_size(q: QuerySpec, db: DatabaseInstance) -> int:
    """|Q(I)| under bag semantics, via tree-shaped counting (acyclic only)."""
    rels = bind(q, db)
    return int(count_extensions(q, rels, 0).sum())


def brute_force_results(
    q: QuerySpec, db: DatabaseInstance, budget: int = BRUTE_FORCE_BUDGET
) -> list[tuple[float, ...]]:
    """Nested-loop evaluation of Q(I) with duplicates preserved.

    Each candidate tuple inspection counts as one step; exceeding ``budget``
    raises BudgetExceeded.
    """
    rels = bind(q, db)
    tuples = [r.tuples for r in rels]
    atom_attrs = [r.attrs for r in rels]
    out_attrs = q.output
    results: list[tuple[float, ...]] = []
    assignment: dict[str, float] = {}
    steps = 0

    def rec(i: int):
        nonlocal steps
        if i == len(rels):
            results.append(tuple(assignment[x] for x in out_attrs))
            return
        attrs = atom_attrs[i]
        for t in tuples[i]:
            steps += 1
            if steps > budget:
                raise BudgetExceeded(f"brute force exceeded {budget} steps")
            added = []
            ok = True
            for x, v in zip(attrs, t):
                if x in assignment:
                    if assignment[x] != v:
                        ok = False
                        break
                else:
                    assignment[x] = v
                    added.append(x)
            if ok:
                rec(i + 1)
            for x in added:
                del assignment[x]

    rec(0)
    return results


# ---------------------------------------------------------------------------
# Rectangles


class Rect:
    """Closed axis-aligned box keyed by attribute name; endpoints may be infinite."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Mapping[str, tuple[float, float]] | None = None, **kw):
        merged = dict(intervals or {})
        merged.update(kw)
        out = {}
        for attr, iv in merged.items():
            lo, hi = float(iv[0]), float(iv[1])
            if math.isnan(lo) or math.isnan(hi):
                raise DataError(f"NaN endpoint on {attr}")
            if lo > hi:
                raise DataError(f"empty interval on {attr}: [{lo}, {hi}]")
            out[attr] = (lo, hi)
        self.intervals: dict[str, tuple[float, float]] = out

    @classmethod
    def full(cls, attrs: Iterable[str]) -> "Rect":
        return cls({a: (-INF, INF) for a in attrs})

    @classmethod
    def parse(cls, text: str) -> "Rect":
        """``A=1:2,C=-inf:5`` style."""
        out = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            try:
                attr, rng = part.split("=", 1)
                lo, hi = rng.split(":", 1)
                out[attr.strip()] = (float(lo), float(hi))
            except ValueError:
                raise DataError(f"bad interval {part!r}; expected ATTR=LO:HI") from None
        return cls(out)

    def attrs(self) -> tuple[str, ...]:
        return tuple(self.intervals)

    def __getitem__(self, attr: str) -> tuple[float, float]:
        return self.intervals.get(attr, (-INF, INF))

    def __contains__(self, attr: str) -> bool:
        return attr in self.intervals

    def contains(self, attrs: Sequence[str], point: Sequence[float]) -> bool:
        for a, v in zip(attrs, point):
            lo, hi = self[a]
            if not lo <= v <= hi:
                return False
        return True

    def restrict(self, attrs: Iterable[str]) -> "Rect":
        return Rect({a: self[a] for a in attrs})

    def bounds(self, attrs: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self[a][0] for a in attrs], dtype=np.float64)
        hi = np.array([self[a][1] for a in attrs], dtype=np.float64)
        return lo, hi

    def check(self, expected: Iterable[str]) -> None:
        expected = set(expected)
        extra = set(self.intervals) - expected
        if extra:
            raise DimensionMismatch(f"rectangle has unknown attributes {sorted(extra)}")

    def __eq__(self, other) -> bool:
        return isinstance(other, Rect) and self.intervals == other.intervals

    def __hash__(self):
        return hash(tuple(sorted(self.intervals.items())))

    def __repr__(self) -> str:
        body = " x ".join(f"{a}[{lo:g},{hi:g}]" for a, (lo, hi) in self.intervals.items())
        return f"Rect({body})"


def as_point(q: QuerySpec, point) -> tuple[float, ...]:
    """Normalize a query point (mapping or sequence in output order)."""
    if isinstance(point, Mapping):
        missing = set(q.output) - set(point)
        if missing:
            raise DimensionMismatch(f"query point lacks {sorted(missing)}")
        vals = tuple(float(point[a]) for a in q.output)
    else:
        vals = tuple(float(v) for v in point)
        if len(vals) != len(q.output):
            raise DimensionMismatch(
                f"query point has {len(vals)} coordinates, expected {len(q.output)}"
            )
    if not all(math.isfinite(v) for v in vals):
        raise DataError("query point must be finite")
    return vals


def count_in_rect(
    results: Sequence[Sequence[float]], attrs: Sequence[str], r: Rect
) -> int:
    return sum(1 for t in results if r.contains(attrs, t))


def brute_force_rcq(
    q: QuerySpec, db: DatabaseInstance, r: Rect, budget: int = BRUTE_FORCE_BUDGET
) -> int:
    r.check(q.output)
    return count_in_rect(brute_force_results(q, db, budget), q.output, r)


def extend_rect(q: QuerySpec, r: Rect) -> Rect:
    """Lift a rectangle over the output attributes to all attributes."""
    r.check(q.output)
    return Rect({a: (r[a] if a in q.output else (-INF, INF)) for a in q.attributes})


# ---------------------------------------------------------------------------
# Synthetic data


def matrix_query() -> QuerySpec:
    return QuerySpec.of([("R1", ("A", "B")), ("R2", ("C", "B"))], ("A", "C"))


def synth_gen(
    n1: int, n2: int, dom_a: int, dom_b: int, seed: int
) -> DatabaseInstance:
    """Two relations R1(A,B), R2(C,B) with i.i.d. uniform integers in [1, dom]."""
    if min(n1, n2) < 0 or min(dom_a, dom_b) < 1:
        raise ValueError("sizes must be non-negative and domains positive")
    rng = np.random.default_rng(seed)
    r1 = np.column_stack(
        [rng.integers(1, dom_a + 1, n1), rng.integers(1, dom_b + 1, n1)]
    ).astype(np.float64)
    r2 = np.column_stack(
        [rng.integers(1, dom_a + 1, n2), rng.integers(1, dom_b + 1, n2)]
    ).astype(np.float64)
    return DatabaseInstance(
        [Relation("R1", ("A", "B"), r1), Relation("R2", ("C", "B"), r2)]
    )
