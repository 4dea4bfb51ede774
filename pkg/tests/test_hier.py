from __future__ import annotations

import math
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import (
    intro_query,
    make_db,
    naive_count,
    naive_results,
    nn_distance,
    path_query,
    random_intro_db,
    random_rect,
    random_rows,
    random_star_db,
    random_triangle_db,
    star_query,
    triangle_query,
    uniformity,
)
from scq.errors import InvalidGhd, ModeMismatch, NotHierarchical, NotHierarchicalDecomposition, WrongClass
from scq.heavylight import hl_build, hl_rcq
from scq.hier import (
    GhdSpec,
    build_attr_tree,
    choose_level,
    ghd_materialize,
    hier_ann,
    hier_build,
    hier_rcq,
    hier_rsq,
    predicted_space,
    validate_ghd,
)
from scq.relational import QuerySpec, Rect, brute_force_rcq, brute_force_results

TRIANGLE_GHD = "BAG 1 - λ={A,B,C} atoms={R1,R2,R3}\n"
CYCLE_GHD = "BAG 1 - λ={A,B,C} atoms={R1,R2}\nBAG 2 1 λ={A,C,D} atoms={R3,R4}\n"


def cycle_query(output=("A", "B", "C", "D")) -> QuerySpec:
    return QuerySpec.of([("R1", ("A", "B")), ("R2", ("B", "C")), ("R3", ("C", "D")), ("R4", ("D", "A"))], output)


def random_cycle_db(rng, n_per, dom=5):
    q = cycle_query()
    return q, make_db({a.relation: (a.attrs, random_rows(rng, n_per, [dom, dom])) for a in q.atoms})


def gen_star_query() -> QuerySpec:
    return QuerySpec.of([("R1", ("A1", "B")), ("R2", ("A2", "B")), ("R3", ("A3", "B"))], ["A1", "B", "A3"])


def node_by_attrs(tree, attrs):
    return next(n for n in tree.real_nodes if n.attrs == tuple(attrs))


# ---------------------------------------------------------------------------
# Attribute tree


def test_intro_attr_tree():
    tree = build_attr_tree(intro_query())
    root = node_by_attrs(tree, ["A"])
    assert tree.roots == [root.id]
    kids = sorted(tree.nodes[c].attrs for c in root.children)
    assert kids == [("B",), ("C",)]
    b, c = node_by_attrs(tree, ["B"]), node_by_attrs(tree, ["C"])
    assert sorted(tree.nodes[x].attrs for x in b.children if not tree.nodes[x].virtual) == [("D",), ("E",)]
    assert sorted(tree.nodes[x].attrs for x in c.children if not tree.nodes[x].virtual) == [("F",), ("G",)]
    assert tree.level_width(1) == 2
    assert tree.num_levels == 3


def test_star_attr_tree():
    tree = build_attr_tree(star_query(2))
    root = tree.nodes[tree.roots[0]]
    assert root.attrs == ("B",)
    assert sorted(tree.nodes[c].attrs for c in root.children) == [("A1",), ("A2",)]


def test_cross_product_components():
    q = QuerySpec.of([("R1", ("A1", "B")), ("R2", ("A2", "B")), ("S1", ("C1", "D")), ("S2", ("C2", "D"))])
    assert len(build_attr_tree(q).components()) == 2


def test_not_hierarchical():
    with pytest.raises(NotHierarchical):
        build_attr_tree(path_query(3).full())


def test_every_atom_has_one_leaf():
    tree = build_attr_tree(intro_query())
    leaves = [n for n in tree.nodes if n.virtual]
    assert sorted(n.atom for n in leaves) == [0, 1, 2, 3]
    for leaf in leaves:
        path_attrs = set(tree.ancestors[leaf.id])
        assert path_attrs == set(intro_query().atoms[leaf.atom].attrs)


# ---------------------------------------------------------------------------
# Level selection


def test_level_choice_intro():
    tree = build_attr_tree(intro_query())
    n = 400
    T = math.sqrt(n)
    # four atoms; widest node at depth 1 spans two atoms, at depth 2 one atom
    cost0 = n**4 / T**3 + n**2
    cost1 = n**4 / T**1.5 + n**1
    assert predicted_space(tree, n, T, 0) == pytest.approx(cost0)
    assert predicted_space(tree, n, T, 1) == pytest.approx(cost1)
    assert choose_level(tree, n, T) == min(range(tree.num_levels), key=lambda lv: (predicted_space(tree, n, T, lv), lv))


def test_level_default_and_bounds():
    rng = random.Random(0)
    q, db = random_intro_db(rng, 10)
    idx = hier_build(db, q, 4)
    assert 0 <= idx.level < 3
    with pytest.raises(ValueError):
        hier_build(db, q, 4, level=3)


# ---------------------------------------------------------------------------
# Build


def test_level_zero_generalized_star():
    rng = random.Random(1)
    q = QuerySpec.of([("R1", ("A1", "B")), ("R2", ("A2", "B")), ("R3", ("A3", "B"))])
    db = make_db({a.relation: (a.attrs, random_rows(rng, 15, [6, 3])) for a in q.atoms})
    idx = hier_build(db, q, 6, level=0)
    root = idx.tree.roots[0]
    assert list(idx.light) == [root]
    assert set(idx.light[root]) <= {()}
    assert idx.heavy[root]
    children = [c for c in idx.tree.nodes[root].children if not idx.tree.nodes[c].virtual]
    assert len(children) == 3
    for c in children:
        assert set(idx.cut[c]) == set(idx.heavy[root])


def test_heavy_bound_random_instances():
    rng = random.Random(2)
    for _ in range(100):
        q, db = random_intro_db(rng, rng.randint(1, 20))
        level = rng.randint(0, 2)
        idx = hier_build(db, q, rng.randint(1, db.N), level=level)
        assert all(len(h) <= idx.alpha for h in idx.heavy.values())


def test_wrong_class(db_p):
    with pytest.raises(WrongClass):
        hier_build(db_p, path_query(3).full(), 1)


def test_mode_mismatch():
    rng = random.Random(3)
    q, db = random_intro_db(rng, 8)
    idx = hier_build(db, q, 2, mode="ann", eps=0.5)
    with pytest.raises(ModeMismatch):
        hier_rcq(idx, Rect())
    idx = hier_build(db, q, 2)
    with pytest.raises(ModeMismatch):
        hier_ann(idx, (1,) * 7)


# ---------------------------------------------------------------------------
# Counting


@pytest.mark.parametrize("level", [0, 1, 2])
def test_intro_query_vs_oracle(level):
    rng = random.Random(10 + level)
    for _ in range(5):
        q, db = random_intro_db(rng, 25)
        expected = Counter(brute_force_results(q, db))
        idx = hier_build(db, q, rng.randint(1, db.N), level=level)
        for _ in range(100):
            r = random_rect(rng, q.output, 0, 7)
            assert hier_rcq(idx, r) == naive_count(expected, q.output, r)


def test_generalized_star_agrees_with_heavy_light():
    rng = random.Random(4)
    q = gen_star_query()
    for _ in range(20):
        db = make_db({a.relation: (a.attrs, random_rows(rng, rng.randint(2, 20), [8, 4])) for a in q.atoms})
        T = rng.randint(1, db.N)
        h, l = hier_build(db, q, T), hl_build(db, q, T)
        for _ in range(10):
            r = random_rect(rng, q.output, 0, 9)
            assert hier_rcq(h, r) == hl_rcq(l, r)


def test_disconnected_query_is_product():
    rng = random.Random(5)
    q = QuerySpec.of([("R1", ("A1", "B")), ("R2", ("A2", "B")), ("S1", ("C1", "D"))], ["A1", "A2", "C1"])
    left = q.sub([0, 1], ["A1", "A2"])
    for _ in range(20):
        db = make_db(
            {
                "R1": (("A1", "B"), random_rows(rng, 8, [6, 3])),
                "R2": (("A2", "B"), random_rows(rng, 8, [6, 3])),
                "S1": (("C1", "D"), random_rows(rng, 5, [6, 3])),
            }
        )
        idx = hier_build(db, q, rng.randint(1, db.N))
        r = random_rect(rng, q.output, 0, 7)
        lhs = brute_force_rcq(left, db, r.restrict(["A1", "A2"]))
        rhs = sum(1 for t in db["S1"].tuples if r.contains(["C1"], t[:1]))
        assert hier_rcq(idx, r) == lhs * rhs == brute_force_rcq(q, db, r)


@given(st.integers(0, 10**6), st.integers(0, 2))
def test_projected_intro_query_matches_oracle(seed, level):
    rng = random.Random(seed)
    q, db = random_intro_db(rng, rng.randint(1, 5), dom_key=2, dom_free=4)
    q = q.with_output(rng.sample(q.attributes, rng.randint(1, 4)))
    idx = hier_build(db, q, rng.randint(1, db.N), level=level)
    expected = naive_results(q, db)
    for _ in range(5):
        r = random_rect(rng, q.output, 0, 5)
        assert hier_rcq(idx, r) == naive_count(expected, q.output, r)


# ---------------------------------------------------------------------------
# Nearest neighbour and sampling


@pytest.mark.parametrize("eps", [0.5, 1.0])
def test_ann_bound(eps):
    rng = random.Random(int(eps * 10))
    for _ in range(30):
        q, db = random_intro_db(rng, 15)
        results = brute_force_results(q, db)
        if not results:
            continue
        members = set(results)
        idx = hier_build(db, q, rng.randint(1, db.N), level=rng.randint(0, 2), mode="ann", eps=eps)
        for _ in range(10):
            p = tuple(rng.uniform(0, 7) for _ in q.output)
            ans = hier_ann(idx, p)
            assert ans in members
            assert math.dist(ans, p) <= (1 + eps) * nn_distance(results, p) + 1e-9


def test_ann_exact_hit():
    rng = random.Random(6)
    q, db = random_intro_db(rng, 12)
    results = brute_force_results(q, db)
    idx = hier_build(db, q, 3, mode="ann", eps=0.5)
    assert hier_ann(idx, results[0]) == results[0]


def test_sample_uniform():
    rng = random.Random(7)
    q = intro_query().with_output(["A", "B", "D"])
    while True:
        _, db = random_intro_db(rng, 10)
        r = Rect(D=(1, 3))
        expected = Counter(t for t in brute_force_results(q, db) if r.contains(q.output, t))
        if 5 <= sum(expected.values()) <= 20:
            break
    idx = hier_build(db, q, 4, mode="sample")
    draws = Counter(hier_rsq(idx, r, rng) for _ in range(20000))
    dev, stat, crit = uniformity(draws, expected)
    assert dev <= 0.02 and stat < crit


def test_sample_empty_rect():
    rng = random.Random(8)
    q, db = random_intro_db(rng, 10)
    idx = hier_build(db, q, 4, mode="sample")
    assert hier_rsq(idx, Rect(D=(100, 200)), rng) is None


# ---------------------------------------------------------------------------
# Decompositions


def test_ghd_parse_round_trip():
    g = GhdSpec.parse(CYCLE_GHD)
    assert GhdSpec.parse(g.to_text()) == g
    assert [b.parent for b in g.bags] == [None, "1"]


def test_triangle_single_bag_lists_triangles():
    rng = random.Random(9)
    q, db = random_triangle_db(rng, 20)
    m = ghd_materialize(db, q, GhdSpec.parse(TRIANGLE_GHD))
    q2, db2 = m
    assert len(db2) == 1
    assert Counter(db2["G_1"].tuples) == Counter(brute_force_results(q, db))
    assert m.bag_sizes == {"1": len(brute_force_results(q, db))}


def test_identity_decomposition_preserves_semantics():
    rng = random.Random(10)
    q, db = random_star_db(rng, 2, 15)
    g = GhdSpec.parse("BAG r - λ={B} atoms={}\nBAG a r λ={A1,B} atoms={R1}\nBAG b r λ={A2,B} atoms={R2}\n")
    q2, db2 = ghd_materialize(db, q, g)
    for _ in range(30):
        r = random_rect(rng, q.output, 0, 13)
        assert brute_force_rcq(q2, db2, r) == brute_force_rcq(q, db, r)


@pytest.mark.parametrize(
    "text,condition",
    [
        ("BAG 1 - λ={A,B,C} atoms={R1,R2,R3}\nBAG 2 - λ={A} atoms={}\n", "tree"),
        ("BAG 1 9 λ={A,B,C} atoms={R1,R2,R3}\n", "tree"),
        ("BAG 1 - λ={A,B} atoms={R1}\n", "coverage"),
        ("BAG 1 - λ={A,B,C} atoms={R1,R2,R9}\n", "coverage"),
        ("BAG 1 - λ={A,B} atoms={R1,R3}\n", "coverage"),
        ("BAG 1 - λ={A,B,Z} atoms={R1}\n", "coverage"),
        ("BAG 1 - λ={A,B} atoms={R1}\nBAG 2 1 λ={B,C} atoms={R2}\nBAG 3 2 λ={A,C} atoms={R3}\n", "connectivity"),
        ("BAG 1 - λ={A,B,C}\nBAG 1 1 λ={A}\n", "tree"),
        ("not a bag\n", "syntax"),
    ],
)
def test_ghd_validation_mutations(text, condition):
    with pytest.raises(InvalidGhd) as exc:
        validate_ghd(triangle_query(), GhdSpec.parse(text))
    assert exc.value.condition == condition


def test_ghd_not_hierarchical():
    q = path_query(3).full()
    g = GhdSpec.parse("BAG 1 - λ={A1,B1}\nBAG 2 1 λ={B1,B2}\nBAG 3 2 λ={B2,A2}\n")
    with pytest.raises(NotHierarchicalDecomposition):
        ghd_materialize(_path_db(), q, g)


def _path_db():
    return make_db(
        {"R1": (("A1", "B1"), [(1, 2)]), "R2": (("B1", "B2"), [(2, 3)]), "R3": (("B2", "A2"), [(3, 9)])}
    )


@pytest.mark.parametrize("text,maker", [(TRIANGLE_GHD, random_triangle_db), (CYCLE_GHD, random_cycle_db)])
def test_ghd_hier_vs_brute_force(text, maker):
    rng = random.Random(len(text))
    g = GhdSpec.parse(text)
    for _ in range(15):
        q, db = maker(rng, rng.randint(3, 25))
        q = q.with_output(rng.sample(q.attributes, rng.randint(1, len(q.attributes))))
        q2, db2 = ghd_materialize(db, q, g)
        if db2.N == 0:
            continue
        idx = hier_build(db2, q2, rng.randint(1, db2.N), level=0)
        for _ in range(20):
            r = random_rect(rng, q.output, 0, 7)
            assert hier_rcq(idx, r) == brute_force_rcq(q, db, r)
