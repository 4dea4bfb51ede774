from __future__ import annotations

import csv
import io
import json
import random
import subprocess
import sys

import pytest

from conftest import intro_query, make_db, random_intro_db, star_query
from scq.bench import (
    REPORT_FIELDS,
    BenchConfig,
    ConfigError,
    build_index,
    load_index,
    manifest_path,
    measure_entries,
    parse_budget,
    parse_point,
    run_bench,
    save_index,
    selectivity_rects,
    uniform_rects,
)
from scq.cli import main
from scq.relational import QuerySpec, Rect, brute_force_rcq, matrix_query, synth_gen, write_csv

def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))

def write_db(db, directory):
    paths = []
    for rel in db:
        p = directory / f"{rel.name}.csv"
        write_csv(rel, p)
        paths.append(f"{rel.name}={p}")
    return paths

# ---------------------------------------------------------------------------
# Workload generators

def test_uniform_rects_use_active_domain():
    db = synth_gen(200, 200, 1000, 20, 1)
    q = matrix_query()
    adom = {"A": set(db["R1"].data[:, 0].tolist()), "C": set(db["R2"].data[:, 0].tolist())}
    for r in uniform_rects(q, db, 50, random.Random(0)):
        for a in q.output:
            lo, hi = r[a]
            assert lo <= hi and lo in adom[a] and hi in adom[a]

@pytest.mark.parametrize("s", [1, 3, 10])
def test_selectivity_exact(s):
    db = synth_gen(300, 300, 200, 20, 2)
    q = matrix_query()
    for r in selectivity_rects(q, db, 40, s, random.Random(s)):
        for a, rel in (("A", db["R1"]), ("C", db["R2"])):
            lo, hi = r[a]
            col = rel.data[:, 0]
            assert int(((col >= lo) & (col <= hi)).sum()) == s

def test_selectivity_impossible():
    db = make_db({"R1": (("A", "B"), [(1, 1)] * 3), "R2": (("C", "B"), [(2, 1)] * 3)})
    with pytest.raises(ConfigError):
        selectivity_rects(matrix_query(), db, 5, 2, random.Random(0))

# ---------------------------------------------------------------------------
# Config and parsing

@pytest.mark.parametrize(
    "kw,field",
    [
        ({"kinds": ["nope"]}, "index"),
        ({"kinds": []}, "index"),
        ({"mode": "ann"}, "eps"),
        ({"mode": "ann", "eps": 0.5}, "index"),
        ({"trials": 0}, "trials"),
        ({"selectivity": 0}, "selectivity"),
        ({"T": 0.5}, "time-budget"),
    ],
)
def test_config_validation(kw, field, db_a):
    cfg = BenchConfig(**{"query": star_query(2), "db": db_a, "kinds": ["star"], "T": 2, **kw})
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    assert exc.value.field == field

def test_parse_budget():
    assert parse_budget("sqrt", 100) == 10
    assert parse_budget("N^0.25", 10000) == 10
    assert parse_budget("7", 100) == 7
    with pytest.raises(ConfigError):
        parse_budget("lots", 100)

def test_parse_point():
    q = star_query(2)
    assert parse_point(q, "1,2") == (1.0, 2.0)
    assert parse_point(q, "A2=5,A1=3") == (3.0, 5.0)
    with pytest.raises(ConfigError):
        parse_point(q, "1")

# ---------------------------------------------------------------------------
# Entries and persistence

def test_measure_entries_empty():
    assert measure_entries(None) == 0
    db = make_db({"R1": (("A1", "B"), []), "R2": (("A2", "B"), [])})
    assert measure_entries(build_index("ranges", db, star_query(2))) == 0

@pytest.mark.parametrize("kind", ["star", "path", "heavylight", "hier", "ranges", "ranget"])
def test_persistence_round_trip(kind, tmp_path, db_a):
    built = build_index(kind, db_a, star_query(2), 2)
    manifest = save_index(built, tmp_path / "idx.bin")
    assert manifest["kind"] == kind and manifest["stored_entries"] == built.stored_entries()
    loaded = load_index(tmp_path / "idx.bin")
    for r in (Rect(), Rect(A1=(1, 2), A2=(10, 10)), Rect(A1=(4, 9))):
        assert loaded.count(r) == built.count(r)

def test_persistence_detects_tampering(tmp_path, db_a):
    path = tmp_path / "idx.bin"
    save_index(build_index("star", db_a, star_query(2), 2), path)
    blob = bytearray(path.read_bytes())
    blob[-1] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ConfigError, match="checksum"):
        load_index(path)
    path.write_bytes(b"garbage")
    manifest_path(path).unlink()
    with pytest.raises(ConfigError, match="not an index image"):
        load_index(path)

# ---------------------------------------------------------------------------
# Benchmark runs

def test_bench_star_vs_ranges_identical(db_a):
    cfg = BenchConfig(star_query(2), db_a, ["star", "ranges"], 2, trials=100, seed=3)
    report = run_bench(cfg)
    assert [r["index"] for r in report.rows] == ["star", "ranges"]
    assert len(report.detail) == 100
    assert all(row["star"] == row["ranges"] for row in report.detail)
    header = report.to_csv().splitlines()[0]
    assert header.split(",") == list(REPORT_FIELDS)

def test_bench_answers_match_oracle():
    db = synth_gen(60, 60, 50, 8, 4)
    q = matrix_query()
    cfg = BenchConfig(q, db, ["star", "path", "heavylight", "hier", "ranges", "ranget"], 8, trials=30, seed=1)
    report = run_bench(cfg)
    rects = uniform_rects(q, db, 30, random.Random(1))
    for row, r in zip(report.detail, rects):
        want = brute_force_rcq(q, db, r)
        assert all(row[k] == want for k in cfg.kinds)

def test_bench_reproducible_without_timing():
    db = synth_gen(100, 100, 100, 10, 5)
    cfg = dict(query=matrix_query(), db=db, kinds=["star", "ranges"], T=10, seed=9, trials=20, timing=False)
    a, b = run_bench(BenchConfig(**cfg)), run_bench(BenchConfig(**cfg))
    assert a.to_csv() == b.to_csv() and a.detail_csv() == b.detail_csv()
    assert all(row["build_time"] == "" and row["avg_query_time"] == "" for row in read_csv(a.to_csv()))

def test_bench_timing_columns_filled(db_a):
    report = run_bench(BenchConfig(star_query(2), db_a, ["star"], 2, trials=10))
    row = read_csv(report.to_csv())[0]
    assert float(row["build_time"]) >= 0 and float(row["avg_query_time"]) >= 0

def test_bench_sample_and_ann_modes():
    rng = random.Random(0)
    q, db = random_intro_db(rng, 10)
    rep = run_bench(BenchConfig(q, db, ["hier"], 4, mode="sample", trials=10))
    assert len(rep.detail) == 10
    rep = run_bench(BenchConfig(q, db, ["hier"], 4, mode="ann", eps=0.5, trials=10))
    assert all(len(row["hier"]) == len(q.output) for row in rep.detail)

# ---------------------------------------------------------------------------
# Command line

def test_cli_gen_build_query(tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["gen", "--n1", "50", "--n2", "40", "--dom-a", "30", "--dom-b", "5", "--seed", "1", "--out", str(out)]) == 0
    q = str(out / "query.txt")
    data = [f"R1={out / 'R1.csv'}", f"R2={out / 'R2.csv'}"]
    idx = tmp_path / "star.idx"
    assert main(["build", "--query", q, "--data", *data, "--index", "star", "--time-budget", "sqrt", "--out", str(idx)]) == 0
    assert manifest_path(idx).exists()
    capsys.readouterr()
    assert main(["query", "--index-file", str(idx), "--rect", "A=1:15,C=5:30"]) == 0
    got = int(capsys.readouterr().out.strip())
    db = synth_gen(50, 40, 30, 5, 1)
    assert got == brute_force_rcq(matrix_query(), db, Rect(A=(1, 15), C=(5, 30)))

def test_cli_ann_and_sample(tmp_path, capsys, db_a):
    qf = tmp_path / "q.txt"
    qf.write_text(star_query(2).to_text())
    data = write_db(db_a, tmp_path)
    assert main(["query", "--query", str(qf), "--data", *data, "--index", "heavylight", "--mode", "ann", "--eps", "0.5", "--time-budget", "2", "--point", "2,10"]) == 0
    assert capsys.readouterr().out.strip() == "2,10"
    assert main(["query", "--query", str(qf), "--data", *data, "--index", "hier", "--mode", "sample", "--time-budget", "2", "--rect", "A1=3:3"]) == 0
    assert capsys.readouterr().out.strip() == "3,11"

def test_cli_bench_report(tmp_path, db_a):
    qf = tmp_path / "q.txt"
    qf.write_text(star_query(2).to_text())
    data = write_db(db_a, tmp_path)
    args = ["bench", "--query", str(qf), "--data", *data, "--index", "star,ranges", "--time-budget", "2", "--trials", "20", "--no-timing"]
    main([*args, "--out", str(tmp_path / "a.csv"), "--detail", str(tmp_path / "a_detail.csv")])
    main([*args, "--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    detail = read_csv((tmp_path / "a_detail.csv").read_text())
    assert len(detail) == 20 and all(r["star"] == r["ranges"] for r in detail)

def test_cli_selectivity(tmp_path):
    main(["bench", "--n1", "200", "--dom-a", "100", "--dom-b", "10", "--index", "star", "--selectivity", "5", "--trials", "10", "--out", str(tmp_path / "r.csv")])
    row = read_csv((tmp_path / "r.csv").read_text())[0]
    assert row["selectivity"] == "5" and row["index"] == "star"

@pytest.mark.parametrize(
    "argv,needle",
    [
        (["bench", "--n1", "20", "--index", "bogus"], "--index"),
        (["bench", "--n1", "20", "--mode", "ann"], "--eps"),
        (["bench", "--query", "/nonexistent/q.txt", "--n1", "20"], "--query"),
        (["build", "--n1", "20", "--data", "/nonexistent.csv", "--out", "x"], "--data"),
        (["build", "--n1", "20", "--time-budget", "abc", "--out", "x"], "--time-budget"),
    ],
)
def test_cli_config_errors(argv, needle, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert needle in capsys.readouterr().err

def test_cli_wrong_class(tmp_path, capsys, db_p):
    qf = tmp_path / "q.txt"
    qf.write_text(intro_query().to_text())
    with pytest.raises(SystemExit) as exc:
        main(["query", "--query", str(qf), "--data", *write_db(db_p, tmp_path), "--index", "star"])
    assert exc.value.code == 1
    assert "scq: error" in capsys.readouterr().err

def test_cli_ghd(tmp_path, capsys):
    q = QuerySpec.of([("R1", ("A", "B")), ("R2", ("B", "C")), ("R3", ("A", "C"))], ["A", "C"])
    db = make_db(
        {
            "R1": (("A", "B"), [(1, 1), (1, 2), (2, 2)]),
            "R2": (("B", "C"), [(1, 3), (2, 3), (2, 4)]),
            "R3": (("A", "C"), [(1, 3), (2, 4), (1, 4)]),
        }
    )
    (tmp_path / "q.txt").write_text(q.to_text())
    (tmp_path / "g.txt").write_text("BAG 1 - λ={A,B,C} atoms={R1,R2,R3}\n")
    data = write_db(db, tmp_path)
    main(["query", "--query", str(tmp_path / "q.txt"), "--data", *data, "--index", "hier", "--ghd", str(tmp_path / "g.txt"), "--time-budget", "1"])
    assert int(capsys.readouterr().out) == brute_force_rcq(q, db, Rect())

def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "scq.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("gen", "build", "query", "bench"):
        assert cmd in res.stdout

def test_manifest_contents(tmp_path, db_a):
    path = tmp_path / "i.bin"
    save_index(build_index("hier", db_a, star_query(2), 2), path)
    manifest = json.loads(manifest_path(path).read_text())
    assert {"kind", "params", "query", "format_version", "sha256", "stored_entries"} <= set(manifest)
