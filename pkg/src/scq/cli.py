"""Command-line front end: ``scq gen|build|query|bench``."""
from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .bench import (
    KINDS,
    BenchConfig,
    ConfigError,
    build_index,
    load_index,
    parse_budget,
    parse_point,
    run_bench,
    save_index,
)
from .errors import ScqError
from .hier import GhdSpec
from .relational import (
    DatabaseInstance,
    QuerySpec,
    Rect,
    load_csv,
    matrix_query,
    synth_gen,
    write_csv,
)


def _load_data(args) -> tuple[DatabaseInstance, str]:
    if args.data:
        rels = []
        for item in args.data:
            name, _, path = item.partition("=") if "=" in item else (None, "", item)
            if not Path(path).exists():
                raise ConfigError("data", f"no such file: {path}")
            rels.append(load_csv(path, name or None))
        return DatabaseInstance(rels), ",".join(r.name for r in rels)
    if args.n1 is not None:
        db = synth_gen(args.n1, args.n2 if args.n2 is not None else args.n1, args.dom_a, args.dom_b, args.seed)
        return db, f"synth-{args.n1}-{args.n2 if args.n2 is not None else args.n1}-{args.dom_a}-{args.dom_b}"
    raise ConfigError("data", "give CSV files with --data or synthetic sizes with --n1")


def _load_query(args) -> QuerySpec:
    if args.query:
        if not Path(args.query).exists():
            raise ConfigError("query", f"no such file: {args.query}")
        return QuerySpec.from_file(args.query)
    if args.n1 is not None:
        return matrix_query()
    raise ConfigError("query", "a query spec file is required")


def _load_ghd(args) -> GhdSpec | None:
    if not getattr(args, "ghd", None):
        return None
    if not Path(args.ghd).exists():
        raise ConfigError("ghd", f"no such file: {args.ghd}")
    return GhdSpec.from_file(args.ghd)


def _kinds(text: str) -> list[str]:
    return [k.strip() for k in text.split(",") if k.strip()]


def cmd_gen(args) -> int:
    db = synth_gen(args.n1, args.n2 if args.n2 is not None else args.n1, args.dom_a, args.dom_b, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rel in db:
        write_csv(rel, out / f"{rel.name}.csv")
    (out / "query.txt").write_text(matrix_query().to_text())
    print(f"wrote {', '.join(r.name for r in db)} ({db.N} tuples) and query.txt to {out}")
    return 0


def cmd_build(args) -> int:
    q = _load_query(args)
    db, _ = _load_data(args)
    n = sum(len(db[a.relation]) for a in q.atoms)
    T = parse_budget(args.time_budget, n)
    built = build_index(args.index, db, q, T, args.mode, args.eps, args.level, _load_ghd(args))
    manifest = save_index(built, args.out)
    print(json.dumps({"out": str(args.out), **manifest}, sort_keys=True))
    return 0


def cmd_query(args) -> int:
    if args.index_file:
        built = load_index(args.index_file)
    else:
        q = _load_query(args)
        db, _ = _load_data(args)
        n = sum(len(db[a.relation]) for a in q.atoms)
        T = parse_budget(args.time_budget, n)
        built = build_index(args.index, db, q, T, args.mode, args.eps, args.level, _load_ghd(args))
    q = built.query
    if args.mode == "ann":
        if not args.point:
            raise ConfigError("point", "ann mode needs --point")
        answer = built.ann(parse_point(q, args.point))
        print(",".join(f"{v:g}" for v in answer))
        return 0
    r = Rect.parse(args.rect or "")
    if args.mode == "sample":
        res = built.sample(r, random.Random(args.seed))
        print("none" if res is None else ",".join(f"{v:g}" for v in res))
    else:
        print(built.count(r))
    return 0


def cmd_bench(args) -> int:
    q = _load_query(args)
    db, name = _load_data(args)
    n = sum(len(db[a.relation]) for a in q.atoms)
    cfg = BenchConfig(
        query=q,
        db=db,
        kinds=_kinds(args.index),
        T=parse_budget(args.time_budget, n),
        dataset=args.dataset or name,
        mode=args.mode,
        eps=args.eps,
        seed=args.seed,
        trials=args.trials,
        selectivity=args.selectivity,
        level=args.level,
        ghd=_load_ghd(args),
        timing=not args.no_timing,
    )
    report = run_bench(cfg)
    if args.out:
        report.write(args.out, args.detail)
    else:
        sys.stdout.write(report.to_csv())
        if args.detail:
            Path(args.detail).write_text(report.detail_csv())
    return 0


def _common(p: argparse.ArgumentParser, index_default: str | None = "star") -> None:
    p.add_argument("--query", help="query spec file")
    p.add_argument("--data", nargs="+", help="CSV relations, as PATH or NAME=PATH")
    p.add_argument("--index", default=index_default, help=f"index kind: {', '.join(KINDS)}")
    p.add_argument("--time-budget", default="sqrt", help="T as a number, 'sqrt', or 'N^p'")
    p.add_argument("--mode", default="count", choices=("count", "ann", "sample"))
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--level", type=int, default=None, help="cut level for the hierarchical index")
    p.add_argument("--ghd", help="decomposition file for general queries (hier index)")
    p.add_argument("--seed", type=int, default=0)
    _synth(p)


def _synth(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n1", type=int, help="synthetic size of R1 (instead of --data)")
    p.add_argument("--n2", type=int, help="synthetic size of R2 (defaults to --n1)")
    p.add_argument("--dom-a", type=int, default=100000)
    p.add_argument("--dom-b", type=int, default=4500)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scq", description="Range queries over join results")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic two-relation instance")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int)
    p.add_argument("--dom-a", type=int, default=100000)
    p.add_argument("--dom-b", type=int, default=4500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", help="build and persist an index")
    _common(p)
    p.add_argument("--out", required=True, help="index image path")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer one count, ann or sample query")
    _common(p)
    p.add_argument("--index-file", help="persisted index image")
    p.add_argument("--rect", help="intervals like A=1:5,C=-inf:3")
    p.add_argument("--point", help="query point like 1,2 or A=1,C=2")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="run a benchmark and write a CSV report")
    _common(p, index_default="star,ranges")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--selectivity", type=int, default=None)
    p.add_argument("--out", help="report CSV path (stdout when omitted)")
    p.add_argument("--detail", help="per-query answers CSV path")
    p.add_argument("--dataset", help="dataset label in the report")
    p.add_argument("--no-timing", action="store_true", help="blank timing columns for reproducible reports")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        parser.exit(2, f"scq: error: --{e.field}: {str(e).split(': ', 1)[1]}\n")
    except (ScqError, OSError) as e:
        parser.exit(1, f"scq: error: {e}\n")


if __name__ == "__main__":
    sys.exit(main())
