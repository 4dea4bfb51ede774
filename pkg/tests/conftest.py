from __future__ import annotations

import itertools
import math
import random
from collections import Counter

import pytest
from hypothesis import HealthCheck, settings
from scipy.stats import chi2

from scq.relational import DatabaseInstance, QuerySpec, Rect, make_relation

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


def make_db(tables: dict[str, tuple[tuple[str, ...], list]]) -> DatabaseInstance:
    return DatabaseInstance([make_relation(n, attrs, rows) for n, (attrs, rows) in tables.items()])


def naive_results(q: QuerySpec, db: DatabaseInstance) -> Counter:
    """Cartesian product of all atoms, filtered for consistency. Tiny inputs only."""
    rels = [db[a.relation] for a in q.atoms]
    out: Counter = Counter()
    for combo in itertools.product(*(r.tuples for r in rels)):
        val: dict[str, float] = {}
        ok = True
        for atom, t in zip(q.atoms, combo):
            for x, v in zip(atom.attrs, t):
                if val.setdefault(x, v) != v:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out[tuple(val[x] for x in q.output)] += 1
    return out


def naive_count(results: Counter, attrs, r: Rect) -> int:
    return sum(m for t, m in results.items() if r.contains(attrs, t))


# ---------------------------------------------------------------------------
# Fixed instances


def star_query(k: int = 2) -> QuerySpec:
    return QuerySpec.of([(f"R{i}", (f"A{i}", "B")) for i in range(1, k + 1)], [f"A{i}" for i in range(1, k + 1)])


def path_query(k: int) -> QuerySpec:
    names = ["A1"] + [f"B{i}" for i in range(1, k)] + ["A2"]
    atoms = [(f"R{i + 1}", (names[i], names[i + 1])) for i in range(k)]
    return QuerySpec.of(atoms, ["A1", "A2"])


def intro_query() -> QuerySpec:
    return QuerySpec.of(
        [("R1", ("A", "B", "D")), ("R2", ("A", "B", "E")), ("R3", ("A", "C", "F")), ("R4", ("A", "C", "G"))]
    )


def triangle_query(output=("A", "B", "C")) -> QuerySpec:
    return QuerySpec.of([("R1", ("A", "B")), ("R2", ("B", "C")), ("R3", ("A", "C"))], output)


@pytest.fixture
def db_a() -> DatabaseInstance:
    return make_db({"R1": (("A1", "B"), [(1, 5), (2, 5), (3, 6)]), "R2": (("A2", "B"), [(10, 5), (11, 6)])})


@pytest.fixture
def db_p() -> DatabaseInstance:
    return make_db(
        {
            "R1": (("A1", "B1"), [(1, 2)]),
            "R2": (("B1", "B2"), [(2, 3), (2, 4)]),
            "R3": (("B2", "A2"), [(3, 9), (4, 9)]),
        }
    )


def small_star_db() -> DatabaseInstance:
    r1 = [(4, 1), (5, 1), (7, 2), (8, 3), (9, 3), (1, 4)]
    r2 = [(7, 1), (8, 2), (2, 3), (1, 4)]
    return make_db({"R1": (("A1", "B"), r1), "R2": (("A2", "B"), r2)})


@pytest.fixture
def small_star() -> DatabaseInstance:
    return small_star_db()


# ---------------------------------------------------------------------------
# Random instances


def random_rows(rng: random.Random, n: int, domains: list[int]) -> list[tuple]:
    return [tuple(rng.randint(1, d) for d in domains) for _ in range(n)]


def random_star_db(rng: random.Random, k: int, n_per: int, dom_head: int = 12, dom_b: int = 6):
    q = star_query(k)
    tables = {f"R{i}": ((f"A{i}", "B"), random_rows(rng, n_per, [dom_head, dom_b])) for i in range(1, k + 1)}
    return q, make_db(tables)


def random_path_db(rng: random.Random, k: int, n_per: int, dom_end: int = 12, dom_mid: int = 5):
    q = path_query(k)
    tables = {}
    for i, atom in enumerate(q.atoms):
        doms = [dom_end if x in ("A1", "A2") else dom_mid for x in atom.attrs]
        tables[atom.relation] = (atom.attrs, random_rows(rng, n_per, doms))
    return q, make_db(tables)


def random_intro_db(rng: random.Random, n_per: int, dom_key: int = 3, dom_free: int = 6):
    q = intro_query()
    tables = {}
    for atom in q.atoms:
        doms = [dom_key if x in ("A", "B", "C") else dom_free for x in atom.attrs]
        tables[atom.relation] = (atom.attrs, random_rows(rng, n_per, doms))
    return q, make_db(tables)


def random_triangle_db(rng: random.Random, n_per: int, dom: int = 6):
    q = triangle_query()
    tables = {a.relation: (a.attrs, random_rows(rng, n_per, [dom, dom])) for a in q.atoms}
    return q, make_db(tables)


def random_rect(rng: random.Random, attrs, lo: float = 0, hi: float = 13) -> Rect:
    iv = {}
    for a in attrs:
        roll = rng.random()
        if roll < 0.1:
            iv[a] = (float("-inf"), float("inf"))
        else:
            x, y = rng.uniform(lo, hi), rng.uniform(lo, hi)
            if roll < 0.4:
                x, y = round(x), round(y)
            iv[a] = (min(x, y), max(x, y))
    return Rect(iv)


def uniformity(draws: Counter, expected: Counter) -> tuple[float, float, float]:
    """Max absolute frequency deviation, chi-square statistic and its 0.999 quantile."""
    n = sum(draws.values())
    total = sum(expected.values())
    assert set(draws) <= set(expected), "sampled a tuple outside the result set"
    dev = max(abs(draws[t] / n - m / total) for t, m in expected.items())
    stat = sum((draws[t] - n * m / total) ** 2 / (n * m / total) for t, m in expected.items())
    df = max(len(expected) - 1, 1)
    return dev, stat, float(chi2.ppf(0.999, df))


def nn_distance(results, point) -> float:
    return min(math.dist(t, point) for t in results)
