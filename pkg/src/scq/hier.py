"""Attribute-tree index for hierarchical queries, and the reduction of
general queries to hierarchical ones through a user-supplied decomposition.

Nodes of the attribute tree are groups of attributes sharing the same set
of atoms. Every atom also gets a virtual leaf under its deepest node, so
each root-to-leaf path corresponds to one atom. Down to the cut level,
every node splits its values into heavy and light; light results are
materialized, heavy values recurse into the children. Nodes one level below
the cut store their sub-joins per combination of heavy ancestor values.
"""
from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyResult,
    InvalidGhd,
    ModeMismatch,
    NotHierarchical,
    NotHierarchicalDecomposition,
    WrongClass,
)
from .geom import as_rng
from .heavylight import _Part, check_eps, parse_modes
from .path import int_root_ceil
from .relational import (
    DatabaseInstance,
    QuerySpec,
    Rect,
    Relation,
    as_point,
    bind,
    is_hierarchical,
    iter_join,
    reduce_atoms,
)
from .star import QueryStats, check_budget, input_size


@dataclass
class AttrNode:
    id: int
    attrs: tuple[str, ...]
    atoms: frozenset[int]
    parent: int | None
    depth: int
    children: list[int] = field(default_factory=list)
    atom: int | None = None  # set on virtual leaves

    @property
    def virtual(self) -> bool:
        return self.atom is not None


class AttrTree:
    def __init__(self, q: QuerySpec):
        if not is_hierarchical(q):
            raise NotHierarchical(f"{q} is not hierarchical")
        self.q = q
        groups: dict[frozenset[int], list[str]] = {}
        for a in q.attributes:
            groups.setdefault(q.edges[a], []).append(a)
        esets = list(groups)
        self.nodes: list[AttrNode] = []
        by_eset: dict[frozenset[int], int] = {}
        # supersets first so parents exist before children
        for e in sorted(esets, key=lambda s: (-len(s), esets.index(s))):
            supers = [s for s in esets if e < s]
            parent = by_eset[min(supers, key=len)] if supers else None
            depth = 0 if parent is None else self.nodes[parent].depth + 1
            node = AttrNode(len(self.nodes), tuple(groups[e]), e, parent, depth)
            self.nodes.append(node)
            by_eset[e] = node.id
            if parent is not None:
                self.nodes[parent].children.append(node.id)
        self.real_count = len(self.nodes)
        for i in range(len(q.atoms)):
            deepest = min((by_eset[e] for e in esets if i in e), key=lambda u: len(self.nodes[u].atoms))
            owner = self.nodes[deepest]
            leaf = AttrNode(len(self.nodes), (), frozenset({i}), owner.id, owner.depth + 1, atom=i)
            self.nodes.append(leaf)
            owner.children.append(leaf.id)
        self.roots = [n.id for n in self.nodes if n.parent is None]
        self.ancestors: list[tuple[str, ...]] = []
        for n in self.nodes:
            chain = []
            p = n.parent
            while p is not None:
                chain.append(self.nodes[p])
                p = self.nodes[p].parent
            self.ancestors.append(tuple(a for node in reversed(chain) for a in node.attrs))
        self.subtree_attrs: list[tuple[str, ...]] = [()] * len(self.nodes)
        for n in reversed(self.nodes):
            self._fill_subtree(n.id)

    def _fill_subtree(self, u: int) -> tuple[str, ...]:
        n = self.nodes[u]
        attrs = list(n.attrs)
        for c in n.children:
            attrs.extend(self.subtree_attrs[c] or self._fill_subtree(c))
        self.subtree_attrs[u] = tuple(attrs)
        return self.subtree_attrs[u]

    @property
    def real_nodes(self) -> list[AttrNode]:
        return self.nodes[: self.real_count]

    @property
    def num_levels(self) -> int:
        return 1 + max(n.depth for n in self.real_nodes)

    def level_width(self, depth: int) -> int | None:
        """Largest atom-set size among real nodes at ``depth``."""
        sizes = [len(n.atoms) for n in self.real_nodes if n.depth == depth]
        return max(sizes) if sizes else None

    def components(self) -> list[tuple[int, frozenset[int]]]:
        return [(r, self.nodes[r].atoms) for r in self.roots]

    def leaf_count(self, u: int) -> int:
        n = self.nodes[u]
        return 1 if not n.children else sum(self.leaf_count(c) for c in n.children)


def build_attr_tree(q: QuerySpec) -> AttrTree:
    return AttrTree(q)


def predicted_space(tree: AttrTree, n: int, T: float, level: int) -> float:
    m = len(tree.q.atoms)
    width = tree.level_width(level + 1) or 1
    return float(n) ** m / float(T) ** ((m - 1) / (level + 1)) + float(n) ** width


def choose_level(tree: AttrTree, n: int, T: float) -> int:
    costs = [predicted_space(tree, n, T, lv) for lv in range(tree.num_levels)]
    return min(range(len(costs)), key=lambda lv: (costs[lv], lv))


class HierIndex:
    def __init__(self, q, rels, T, level, n_input, modes, eps):
        self.q, self.modes, self.eps = q, modes, eps
        self.tree = AttrTree(q)
        self.N_input = n_input
        self.N = sum(len(r) for r in rels)
        self.level = level
        self.alpha = int_root_ceil(T, level + 1)
        self.rels = rels
        counting = bool(modes & {"count", "sample"})
        ann = "ann" in modes
        tree, y = self.tree, set(q.output)
        self.out_attrs = [tuple(a for a in n.attrs if a in y) for n in tree.nodes]
        self.sub_out = [tuple(a for a in s if a in y) for s in tree.subtree_attrs]

        # heavy values per node at depth <= level
        self.heavy: dict[int, set[tuple]] = {}
        for node in tree.real_nodes:
            if node.depth > level:
                continue
            sizes: Counter = Counter()
            for a in node.atoms:
                sizes.update(rels[a].keys(node.attrs))
            self.heavy[node.id] = {x for x, s in sizes.items() if s * self.alpha >= self.N}
            if len(self.heavy[node.id]) > self.alpha:
                raise AssertionError(f"node {node.attrs}: heavy set exceeds alpha={self.alpha}")

        # heavy child values reachable from each ancestor key
        self.vals: dict[int, dict[tuple, list[tuple]]] = {}
        for uid, heavy in self.heavy.items():
            node = tree.nodes[uid]
            rel = rels[min(node.atoms)]
            anc = tree.ancestors[uid]
            found: dict[tuple, set] = defaultdict(set)
            for k, x in zip(rel.keys(anc), rel.keys(node.attrs)):
                if x in heavy:
                    found[k].add(x)
            self.vals[uid] = {k: sorted(v) for k, v in found.items()}

        self.light: dict[int, dict[tuple, _Part]] = {}
        self.cut: dict[int, dict[tuple, _Part]] = {}
        self.leaf_counts: dict[int, Counter] = {}
        self.light_sizes: dict[int, int] = {}
        for node in tree.nodes:
            if node.virtual:
                self.leaf_counts[node.id] = Counter(rels[node.atom].keys(tree.ancestors[node.id]))
            elif node.depth <= level:
                parts, size = self._grouped(node.id, True, counting, ann)
                self.light[node.id] = parts
                self.light_sizes[node.id] = size
            elif node.depth == level + 1:
                self.cut[node.id], _ = self._grouped(node.id, False, counting, ann)

    def _ancestors_heavy(self, uid: int) -> list[tuple[tuple[str, ...], set]]:
        out = []
        p = self.tree.nodes[uid].parent
        while p is not None:
            out.append((self.tree.nodes[p].attrs, self.heavy[p]))
            p = self.tree.nodes[p].parent
        return out

    def _grouped(self, uid: int, light_self: bool, counting: bool, ann: bool):
        """Sub-join of the node's atoms grouped by ancestor key.

        Ancestor values are restricted to heavy ones; with ``light_self`` the
        node's own value is restricted to light ones.
        """
        node = self.tree.nodes[uid]
        conds = self._ancestors_heavy(uid)
        restricted = []
        for a in sorted(node.atoms):
            rel = self.rels[a]
            mask = np.ones(len(rel), dtype=bool)
            for attrs, heavy in conds:
                keys = rel.keys(attrs)
                mask &= np.fromiter((k in heavy for k in keys), dtype=bool, count=len(rel))
            if light_self:
                heavy = self.heavy[uid]
                keys = rel.keys(node.attrs)
                mask &= np.fromiter((k not in heavy for k in keys), dtype=bool, count=len(rel))
            restricted.append(rel.take(mask))
        attrs, it = iter_join(restricted)
        anc = self.tree.ancestors[uid]
        coords = self.sub_out[uid]
        kpos = [attrs.index(a) for a in anc]
        cpos = [attrs.index(a) for a in coords]
        groups: dict[tuple, Counter] = defaultdict(Counter)
        size = 0
        for t in it:
            groups[tuple(t[i] for i in kpos)][tuple(t[i] for i in cpos)] += 1
            size += 1
        parts = {}
        for key, rows in groups.items():
            pts = sorted(rows)
            arr = np.array(pts, dtype=np.float64).reshape(len(pts), len(coords))
            w = np.array([rows[p] for p in pts], dtype=np.int64)
            parts[key] = _Part(coords, arr, w, counting, ann, self.eps)
        return parts, size

    # -- counting -------------------------------------------------------------

    def _need(self, mode: str) -> None:
        ok = self.modes & {"count", "sample"} if mode in ("count", "sample") else "ann" in self.modes
        if not ok:
            raise ModeMismatch(f"index built for {sorted(self.modes)}, query needs {mode}")

    def _child_count(self, u: int, key: tuple, r: Rect, stats) -> int:
        node = self.tree.nodes[u]
        if node.virtual:
            return self.leaf_counts[u].get(key, 0)
        if node.depth <= self.level:
            return self._count(u, key, r, stats)
        part = self.cut[u].get(key)
        return part.count(r) if part is not None else 0

    def _heavy_terms(self, v: int, key: tuple, r: Rect, stats):
        node = self.tree.nodes[v]
        bounds = [r[a] for a in node.attrs]
        out = []
        for x in self.vals[v].get(key, ()):
            if not all(lo <= val <= hi for val, (lo, hi) in zip(x, bounds)):
                continue
            if stats is not None:
                stats.heavy_branches += 1
            sub = key + x
            prod = 1
            for c in node.children:
                prod *= self._child_count(c, sub, r, stats)
                if not prod:
                    break
            if prod:
                out.append((x, prod))
        return out

    def _light_count(self, v: int, key: tuple, r: Rect) -> int:
        part = self.light[v].get(key)
        return part.count(r) if part is not None else 0

    def _count(self, v: int, key: tuple, r: Rect, stats) -> int:
        return self._light_count(v, key, r) + sum(p for _, p in self._heavy_terms(v, key, r, stats))

    def count(self, r: Rect, stats: QueryStats | None = None) -> int:
        self._need("count")
        r.check(self.q.output)
        total = 1
        for root in self.tree.roots:
            total *= self._count(root, (), r, stats)
            if not total:
                break
        return total

    # -- sampling -------------------------------------------------------------

    def _sample_child(self, u: int, key: tuple, r: Rect, rng) -> dict:
        node = self.tree.nodes[u]
        if node.virtual:
            return {}
        if node.depth <= self.level:
            return self._sample(u, key, r, rng)
        vals = self.cut[u][key].sample(r, rng)
        return dict(zip(self.sub_out[u], vals))

    def _sample(self, v: int, key: tuple, r: Rect, rng) -> dict:
        light = self._light_count(v, key, r)
        heavy = self._heavy_terms(v, key, r, None)
        u = rng.randrange(light + sum(p for _, p in heavy))
        if u < light:
            vals = self.light[v][key].sample(r, rng)
            return dict(zip(self.sub_out[v], vals))
        u -= light
        for x, p in heavy:
            if u < p:
                break
            u -= p
        node = self.tree.nodes[v]
        out = {a: val for a, val in zip(node.attrs, x) if a in self.sub_out[v]}
        for c in node.children:
            out.update(self._sample_child(c, key + x, r, rng))
        return out

    def sample(self, r: Rect, rng) -> tuple | None:
        self._need("sample")
        r.check(self.q.output)
        rng = as_rng(rng)
        if self.count(r) == 0:
            return None
        out: dict = {}
        for root in self.tree.roots:
            out.update(self._sample(root, (), r, rng))
        return tuple(out[a] for a in self.q.output)

    # -- nearest neighbour ----------------------------------------------------

    def _ann_child(self, u: int, key: tuple, q: dict):
        node = self.tree.nodes[u]
        if node.virtual:
            return {}, 0.0
        if node.depth <= self.level:
            return self._ann(u, key, q)
        vals, d2 = self.cut[u][key].nearest(q)
        return dict(zip(self.sub_out[u], vals)), d2

    def _ann(self, v: int, key: tuple, q: dict):
        best, best_d = None, math.inf
        part = self.light[v].get(key)
        if part is not None and len(part.coords):
            vals, best_d = part.nearest(q)
            best = dict(zip(self.sub_out[v], vals))
        node = self.tree.nodes[v]
        for x in self.vals[v].get(key, ()):
            cand = {a: val for a, val in zip(node.attrs, x) if a in self.sub_out[v]}
            d2 = sum((q[a] - val) ** 2 for a, val in cand.items())
            for c in node.children:
                vals, cd = self._ann_child(c, key + x, q)
                cand.update(vals)
                d2 += cd
            if d2 < best_d:
                best, best_d = cand, d2
        return best, best_d

    def ann(self, point) -> tuple:
        self._need("ann")
        q = dict(zip(self.q.output, as_point(self.q, point)))
        out: dict = {}
        for root in self.tree.roots:
            vals, _ = self._ann(root, (), q)
            if vals is None:
                raise EmptyResult("query has no results")
            out.update(vals)
        return tuple(out[a] for a in self.q.output)

    def stored_entries(self) -> int:
        total = 0
        for parts in list(self.light.values()) + list(self.cut.values()):
            total += sum(1 + p.stored_entries() for p in parts.values())
        total += sum(len(c) for c in self.leaf_counts.values())
        total += sum(len(h) for h in self.heavy.values())
        total += sum(sum(len(v) for v in d.values()) for d in self.vals.values())
        return total


def hier_build(
    db: DatabaseInstance,
    q: QuerySpec,
    T: float,
    level: int | None = None,
    mode="count",
    eps: float | None = None,
) -> HierIndex:
    if not is_hierarchical(q):
        raise WrongClass(f"hierarchical index needs a hierarchical query, got {q}")
    modes = parse_modes(mode)
    eps = check_eps(modes, eps)
    n = input_size(q, db)
    check_budget(T, n)
    tree = AttrTree(q)
    if level is None:
        level = choose_level(tree, max(n, 1), T)
    elif not 0 <= level < tree.num_levels:
        raise ValueError(f"level must lie in [0, {tree.num_levels - 1}], got {level}")
    rels = reduce_atoms(q, db)
    return HierIndex(q, rels, T, level, n, modes, eps)


def hier_rcq(idx: HierIndex, r: Rect, stats: QueryStats | None = None) -> int:
    return idx.count(r, stats)


def hier_ann(idx: HierIndex, q) -> tuple:
    return idx.ann(q)


def hier_rsq(idx: HierIndex, r: Rect, rng) -> tuple | None:
    return idx.sample(r, rng)


# ---------------------------------------------------------------------------
# Decompositions


@dataclass(frozen=True)
class Bag:
    id: str
    parent: str | None
    attrs: tuple[str, ...]
    atoms: tuple[str, ...] = ()


@dataclass(frozen=True)
class GhdSpec:
    bags: tuple[Bag, ...]

    @classmethod
    def parse(cls, text: str) -> "GhdSpec":
        bags = []
        pattern = re.compile(
            r"BAG\s+(\S+)\s+(?:parent=)?(\S+)\s+(?:λ|lambda|attrs)=\{([^}]*)\}"
            r"(?:\s+atoms=\{([^}]*)\})?\s*$"
        )
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = pattern.fullmatch(line)
            if not m:
                raise InvalidGhd("syntax", f"line {lineno}: {raw!r}")
            bid, parent, attrs, atoms = m.groups()
            split = lambda s: tuple(x.strip() for x in (s or "").split(",") if x.strip())
            bags.append(Bag(bid, None if parent == "-" else parent, split(attrs), split(atoms)))
        if not bags:
            raise InvalidGhd("syntax", "no bags")
        return cls(tuple(bags))

    @classmethod
    def from_file(cls, path) -> "GhdSpec":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        lines = []
        for b in self.bags:
            lines.append(
                f"BAG {b.id} {b.parent or '-'} λ={{{','.join(b.attrs)}}} atoms={{{','.join(b.atoms)}}}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class GhdMaterialization:
    query: QuerySpec
    db: DatabaseInstance
    bag_sizes: dict[str, int]
    assignment: dict[str, str]  # atom alias -> bag id

    def __iter__(self):
        yield self.query
        yield self.db

    def width_proxy(self, n: int) -> float:
        """Largest log_N of a materialized bag size."""
        if n < 2:
            return 0.0
        return max((math.log(max(s, 1)) / math.log(n) for s in self.bag_sizes.values()), default=0.0)


def validate_ghd(q: QuerySpec, g: GhdSpec) -> dict[str, str]:
    """Check tree shape, coverage and connectivity; returns atom -> bag."""
    ids = [b.id for b in g.bags]
    if len(set(ids)) != len(ids):
        raise InvalidGhd("tree", "duplicate bag id")
    bags = {b.id: b for b in g.bags}
    roots = [b.id for b in g.bags if b.parent is None]
    if len(roots) != 1:
        raise InvalidGhd("tree", f"expected one root, found {len(roots)}")
    for b in g.bags:
        if b.parent is not None and b.parent not in bags:
            raise InvalidGhd("tree", f"bag {b.id} has unknown parent {b.parent}")
        seen, p = {b.id}, b.parent
        while p is not None:
            if p in seen:
                raise InvalidGhd("tree", f"cycle through bag {b.id}")
            seen.add(p)
            p = bags[p].parent
        if not b.attrs:
            raise InvalidGhd("tree", f"bag {b.id} is empty")
        unknown = set(b.attrs) - set(q.attributes)
        if unknown:
            raise InvalidGhd("coverage", f"bag {b.id} has unknown attributes {sorted(unknown)}")

    alias_of = {}
    counts = Counter(a.relation for a in q.atoms)
    for alias, atom in zip(q.aliases, q.atoms):
        alias_of[alias] = alias
        if counts[atom.relation] == 1:
            alias_of[atom.relation] = alias
    attrs_of = {alias: set(atom.attrs) for alias, atom in zip(q.aliases, q.atoms)}
    assignment: dict[str, str] = {}
    for b in g.bags:
        for name in b.atoms:
            alias = alias_of.get(name)
            if alias is None:
                raise InvalidGhd("coverage", f"bag {b.id} lists unknown atom {name}")
            if alias in assignment:
                raise InvalidGhd("coverage", f"atom {name} assigned to two bags")
            if not attrs_of[alias] <= set(b.attrs):
                raise InvalidGhd("coverage", f"atom {name} not inside bag {b.id}")
            assignment[alias] = b.id
    for alias in q.aliases:
        if alias in assignment:
            continue
        host = next((b.id for b in g.bags if attrs_of[alias] <= set(b.attrs)), None)
        if host is None:
            raise InvalidGhd("coverage", f"no bag covers atom {alias}")
        assignment[alias] = host

    for x in q.attributes:
        holding = {b.id for b in g.bags if x in b.attrs}
        edges = sum(1 for b in g.bags if b.id in holding and b.parent in holding)
        if not holding or edges != len(holding) - 1:
            raise InvalidGhd("connectivity", f"bags holding {x} are not connected")
    return assignment


def ghd_materialize(db: DatabaseInstance, q: QuerySpec, g: GhdSpec) -> GhdMaterialization:
    assignment = validate_ghd(q, g)
    induced = QuerySpec.of([(f"G_{b.id}", b.attrs) for b in g.bags], q.output)
    if not is_hierarchical(induced):
        raise NotHierarchicalDecomposition("the bag query is not hierarchical")
    bound = dict(zip(q.aliases, bind(q, db)))
    relations, sizes = [], {}
    for b in g.bags:
        lam = set(b.attrs)
        parts = []
        for alias, rel in bound.items():
            if assignment[alias] == b.id:
                parts.append(rel)
            else:
                shared = [a for a in rel.attrs if a in lam]
                if shared:
                    proj = np.unique(rel.project(shared), axis=0) if len(rel) else rel.project(shared)
                    parts.append(Relation(alias, tuple(shared), proj))
        attrs, it = iter_join(parts)
        pos = [attrs.index(a) for a in b.attrs]
        rows = [tuple(t[i] for i in pos) for t in it]
        data = np.array(rows, dtype=np.float64).reshape(len(rows), len(b.attrs))
        relations.append(Relation(f"G_{b.id}", b.attrs, data))
        sizes[b.id] = len(rows)
    return GhdMaterialization(induced, DatabaseInstance(relations), sizes, assignment)
