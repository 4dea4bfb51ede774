"""Index construction by kind, persistence, rectangle generators, and the
benchmark loop that produces plot-ready CSV reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import pickle
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import RangeSIndex, RangeTIndex
from .errors import ScqError
from .heavylight import hl_build
from .hier import GhdSpec, ghd_materialize, hier_build
from .path import path_build
from .relational import DatabaseInstance, QuerySpec, Rect, as_point
from .star import star_build

KINDS = ("star", "path", "heavylight", "hier", "ranges", "ranget")
FORMAT_VERSION = 1
MAGIC = b"SCQIDX\x00"
REPORT_FIELDS = (
    "index",
    "dataset",
    "N",
    "T",
    "build_time",
    "stored_entries",
    "avg_query_time",
    "selectivity",
    "trials",
    "seed",
)


class ConfigError(ScqError, ValueError):
    def __init__(self, fieldname: str, message: str):
        self.field = fieldname
        super().__init__(f"{fieldname}: {message}")


@dataclass
class BenchConfig:
    query: QuerySpec
    db: DatabaseInstance
    kinds: Sequence[str]
    T: float
    dataset: str = "data"
    mode: str = "count"
    eps: float | None = None
    seed: int = 0
    trials: int = 100
    selectivity: int | None = None
    level: int | None = None
    ghd: GhdSpec | None = None
    timing: bool = True

    def validate(self) -> None:
        for k in self.kinds:
            if k not in KINDS:
                raise ConfigError("index", f"unknown kind {k!r}; choose from {', '.join(KINDS)}")
        if not self.kinds:
            raise ConfigError("index", "no index kind given")
        if self.mode not in ("count", "ann", "sample"):
            raise ConfigError("mode", f"unknown mode {self.mode!r}")
        if self.mode == "ann" and (self.eps is None or not 0 < self.eps <= 1):
            raise ConfigError("eps", "ann mode needs eps in (0, 1]")
        if self.mode != "count":
            bad = [k for k in self.kinds if k not in ("heavylight", "hier")]
            if bad:
                raise ConfigError("index", f"{self.mode} mode is not supported by {', '.join(bad)}")
        if self.trials < 1:
            raise ConfigError("trials", "must be positive")
        if self.selectivity is not None and self.selectivity < 1:
            raise ConfigError("selectivity", "must be positive")
        if not math.isfinite(self.T) or self.T < 1:
            raise ConfigError("time-budget", "must be a number >= 1")


@dataclass
class BuiltIndex:
    kind: str
    params: dict
    query: QuerySpec
    index: object
    bag_sizes: dict | None = None

    def count(self, r: Rect) -> int:
        return self.index.count(r)

    def ann(self, point) -> tuple:
        return self.index.ann(point)

    def sample(self, r: Rect, rng) -> tuple | None:
        return self.index.sample(r, rng)

    def stored_entries(self) -> int:
        return measure_entries(self.index)


def build_index(
    kind: str,
    db: DatabaseInstance,
    q: QuerySpec,
    T: float = 1,
    mode: str = "count",
    eps: float | None = None,
    level: int | None = None,
    ghd: GhdSpec | None = None,
) -> BuiltIndex:
    params = {"T": T, "mode": mode, "eps": eps, "level": level}
    bag_sizes = None
    if kind == "star":
        idx = star_build(db, q, T)
    elif kind == "path":
        idx = path_build(db, q, T)
    elif kind == "heavylight":
        modes = {"count", mode} if mode != "ann" else {"ann"}
        idx = hl_build(db, q, T, mode=modes, eps=eps)
    elif kind == "hier":
        modes = {"count", mode} if mode != "ann" else {"ann"}
        if ghd is not None:
            m = ghd_materialize(db, q, ghd)
            bag_sizes = m.bag_sizes
            params["ghd"] = ghd.to_text()
            q2, db2 = m
            T = max(1, min(T, max(db2.N, 1)))
            idx = hier_build(db2, q2, T, level=level, mode=modes, eps=eps)
        else:
            idx = hier_build(db, q, T, level=level, mode=modes, eps=eps)
    elif kind == "ranges":
        idx = RangeSIndex(q, db)
    elif kind == "ranget":
        idx = RangeTIndex(q, db)
    else:
        raise ConfigError("index", f"unknown kind {kind!r}")
    return BuiltIndex(kind, params, q, idx, bag_sizes)


def measure_entries(index) -> int:
    if index is None:
        return 0
    if isinstance(index, BuiltIndex):
        index = index.index
    return int(index.stored_entries())


# ---------------------------------------------------------------------------
# Persistence


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def save_index(built: BuiltIndex, path) -> dict:
    body = pickle.dumps(built, protocol=pickle.HIGHEST_PROTOCOL)
    blob = MAGIC + FORMAT_VERSION.to_bytes(2, "little") + body
    Path(path).write_bytes(blob)
    manifest = {
        "kind": built.kind,
        "params": {k: v for k, v in built.params.items() if k != "ghd"},
        "query": built.query.to_text(),
        "format_version": FORMAT_VERSION,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "stored_entries": built.stored_entries(),
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_index(path) -> BuiltIndex:
    path = Path(path)
    blob = path.read_bytes()
    if not blob.startswith(MAGIC):
        raise ConfigError("index-file", f"{path} is not an index image")
    version = int.from_bytes(blob[len(MAGIC) : len(MAGIC) + 2], "little")
    if version != FORMAT_VERSION:
        raise ConfigError("index-file", f"unsupported format version {version}")
    mpath = manifest_path(path)
    if mpath.exists():
        manifest = json.loads(mpath.read_text())
        if manifest.get("sha256") != hashlib.sha256(blob).hexdigest():
            raise ConfigError("index-file", "checksum mismatch against manifest")
    return pickle.loads(blob[len(MAGIC) + 2 :])


# ---------------------------------------------------------------------------
# Workload generation


def attribute_values(q: QuerySpec, db: DatabaseInstance, attr: str) -> np.ndarray:
    """All values of ``attr`` in the first atom holding it, sorted."""
    for atom in q.atoms:
        if attr in atom.attrs:
            rel = db[atom.relation]
            return np.sort(rel.data[:, atom.attrs.index(attr)])
    raise ConfigError("query", f"attribute {attr} not in any atom")


def active_domain(q: QuerySpec, db: DatabaseInstance, attr: str) -> np.ndarray:
    vals = [
        db[a.relation].data[:, a.attrs.index(attr)] for a in q.atoms if attr in a.attrs
    ]
    return np.unique(np.concatenate(vals)) if vals else np.empty(0)


def uniform_rects(q: QuerySpec, db: DatabaseInstance, n: int, rng: random.Random) -> list[Rect]:
    """Endpoints are two values drawn uniformly from each attribute's active domain."""
    domains = {a: active_domain(q, db, a).tolist() for a in q.output}
    rects = []
    for _ in range(n):
        iv = {}
        for a in q.output:
            dom = domains[a]
            if not dom:
                iv[a] = (0.0, 0.0)
                continue
            x, y = rng.choice(dom), rng.choice(dom)
            iv[a] = (min(x, y), max(x, y))
        rects.append(Rect(iv))
    return rects


def selectivity_offsets(values: Sequence[float], s: int) -> list[int]:
    """Start offsets of windows of exactly ``s`` tuples with clean boundaries."""
    n = len(values)
    out = []
    for i in range(0, n - s + 1):
        if i > 0 and values[i - 1] == values[i]:
            continue
        j = i + s - 1
        if j + 1 < n and values[j + 1] == values[j]:
            continue
        out.append(i)
    return out


def selectivity_rects(
    q: QuerySpec, db: DatabaseInstance, n: int, s: int, rng: random.Random
) -> list[Rect]:
    """Each side's interval contains exactly ``s`` tuples of its relation."""
    choices = {}
    for a in q.output:
        vals = attribute_values(q, db, a).tolist()
        offs = selectivity_offsets(vals, s)
        if not offs:
            raise ConfigError("selectivity", f"no interval on {a} holds exactly {s} tuples")
        choices[a] = (vals, offs)
    rects = []
    for _ in range(n):
        iv = {}
        for a, (vals, offs) in choices.items():
            i = rng.choice(offs)
            iv[a] = (vals[i], vals[i + s - 1])
        rects.append(Rect(iv))
    return rects


def random_points(q: QuerySpec, db: DatabaseInstance, n: int, rng: random.Random) -> list[tuple]:
    domains = {a: active_domain(q, db, a) for a in q.output}
    out = []
    for _ in range(n):
        pt = []
        for a in q.output:
            dom = domains[a]
            lo, hi = (float(dom[0]), float(dom[-1])) if len(dom) else (0.0, 0.0)
            pt.append(rng.uniform(lo, hi))
        out.append(tuple(pt))
    return out


# ---------------------------------------------------------------------------
# Benchmark loop


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)
    detail: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow(row)
        return buf.getvalue()

    def detail_csv(self) -> str:
        buf = io.StringIO()
        if self.detail:
            w = csv.DictWriter(buf, fieldnames=list(self.detail[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(self.detail)
        return buf.getvalue()

    def write(self, path, detail_path=None) -> None:
        Path(path).write_text(self.to_csv())
        if detail_path is not None:
            Path(detail_path).write_text(self.detail_csv())


def _fmt_time(x: float | None) -> str:
    return "" if x is None else f"{x:.6g}"


def run_bench(cfg: BenchConfig) -> BenchReport:
    cfg.validate()
    q, db = cfg.query, cfg.db
    rng = random.Random(cfg.seed)
    if cfg.mode == "ann":
        workload = random_points(q, db, cfg.trials, rng)
    elif cfg.selectivity is not None:
        workload = selectivity_rects(q, db, cfg.trials, cfg.selectivity, rng)
    else:
        workload = uniform_rects(q, db, cfg.trials, rng)
    warmup = cfg.trials // 10
    n = sum(len(db[a.relation]) for a in q.atoms)
    report = BenchReport()
    answers: dict[str, list] = {}
    for kind in cfg.kinds:
        t0 = time.perf_counter()
        built = build_index(kind, db, q, cfg.T, cfg.mode, cfg.eps, cfg.level, cfg.ghd)
        build_time = time.perf_counter() - t0
        sample_rng = random.Random(cfg.seed + 1)
        times, results = [], []
        for item in workload:
            t0 = time.perf_counter()
            if cfg.mode == "count":
                res = built.count(item)
            elif cfg.mode == "ann":
                res = built.ann(item)
            else:
                res = built.sample(item, sample_rng)
            times.append(time.perf_counter() - t0)
            results.append(res)
        answers[kind] = results
        kept = times[warmup:] or times
        report.rows.append(
            {
                "index": kind,
                "dataset": cfg.dataset,
                "N": n,
                "T": f"{cfg.T:g}",
                "build_time": _fmt_time(build_time if cfg.timing else None),
                "stored_entries": built.stored_entries(),
                "avg_query_time": _fmt_time(sum(kept) / len(kept) if cfg.timing else None),
                "selectivity": "" if cfg.selectivity is None else cfg.selectivity,
                "trials": cfg.trials,
                "seed": cfg.seed,
            }
        )
    for i in range(len(workload)):
        row = {"query": i}
        for kind in cfg.kinds:
            row[kind] = answers[kind][i]
        report.detail.append(row)
    return report


def parse_budget(text: str, n: int) -> float:
    """A number, or ``N^p`` / ``sqrt`` relative to the input size, rounded up."""
    t = text.strip().lower().replace(" ", "")
    if t == "sqrt":
        return float(max(1, math.ceil(math.sqrt(n))))
    if t.startswith("n^") or t.startswith("n**"):
        p = float(t.split("^", 1)[1] if "^" in t else t.split("**", 1)[1])
        return float(max(1, math.ceil(n**p)))
    try:
        return float(t)
    except ValueError:
        raise ConfigError("time-budget", f"cannot parse {text!r}") from None


def parse_point(q: QuerySpec, text: str) -> tuple[float, ...]:
    """``1,2`` in output order, or ``A=1,C=2``."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if parts and all("=" in p for p in parts):
            return as_point(q, {k.strip(): float(v) for k, v in (p.split("=", 1) for p in parts)})
        return as_point(q, [float(p) for p in parts])
    except ValueError as e:
        raise ConfigError("point", str(e)) from None

