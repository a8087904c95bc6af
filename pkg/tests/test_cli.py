from __future__ import annotations

import json
import re

from capsplit import (
    CappedEngine,
    FieldKind,
    emit_report,
    emit_strategy_script,
    parse,
    parse_group_spec,
    parse_strategy_script,
    plan_prescribed,
)
from capsplit.cli import main

from conftest import CUBA_BASE, REFERENCE_GROUPS_CUBA


# -- gen / ingest -------------------------------------------------------------


def test_gen_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    for path in (a, b):
        assert main(["gen", "--seed", "42", "--n", "500", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes().count(b"\r") == 0  # LF endings only


def test_gen_profile_file_with_overrides(tmp_path, capsys):
    profile = {
        "seed": 1,
        "n_records": 50,
        "year_range": [2007, 2007],
        "country_weights": {"CUBA": 1.0},
        "multi_title_prob": 0.0,
    }
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(profile))
    out = tmp_path / "c.tsv"
    assert main(["gen", "--profile", str(path), "--n", "20", "--out", str(out)]) == 0
    assert main(["ingest", "--corpus", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "20 records"


def test_gen_countries_flag(tmp_path):
    out = tmp_path / "c.tsv"
    assert main(["gen", "--n", "30", "--countries", "CUBA:2,SPAIN", "--out", str(out)]) == 0
    body = out.read_text()
    assert "CUBA" in body or "SPAIN" in body


def test_gen_bad_profile_is_data_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"seed": 1, "n_records": 5, "bogus_field": true}')
    assert main(["gen", "--profile", str(path)]) == 3
    assert "error:" in capsys.readouterr().err


def test_gen_fixture(tmp_path, capsys):
    out = tmp_path / "cuba.tsv"
    assert main(["gen", "--fixture", "cuba_t3", "--out", str(out)]) == 0
    assert main(["ingest", "--corpus", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "910 records"


def test_ingest_malformed_is_data_error(tmp_path, capsys):
    path = tmp_path / "bad.tsv"
    path.write_text("R1\t2007\tA REV\tUSA\t\nR1\t2007\tB REV\tUSA\t\n")
    assert main(["ingest", "--corpus", str(path)]) == 3
    assert "duplicate id" in capsys.readouterr().err


def test_missing_corpus_file_is_data_error(capsys):
    assert main(["count", "--corpus", "/nonexistent.tsv", "PY=2007"]) == 3


# -- count ---------------------------------------------------------------------


def test_count_prints_exact_value(cuba_file, capsys):
    assert main(["count", "--corpus", cuba_file, "PY=2007 AND CU=CUBA"]) == 0
    assert capsys.readouterr().out.strip() == "910"


def test_count_censored_prints_floor(cuba_file, capsys):
    args = ["count", "--corpus", cuba_file, "--cap", "500", "--mode", "censored"]
    assert main(args + ["PY=2007 AND CU=CUBA"]) == 0
    assert capsys.readouterr().out.strip() == ">=500"


def test_count_bad_query_is_usage_error(cuba_file, capsys):
    assert main(["count", "--corpus", cuba_file, "PY=2007 AND"]) == 2
    assert "offset" in capsys.readouterr().err


# -- flag validation -------------------------------------------------------------


def test_unknown_flag_and_bad_cap_are_usage_errors(cuba_file, capsys):
    assert main(["count", "--corpus", cuba_file, "--frobnicate", "PY=1"]) == 2
    assert main(["plan", "--cap", "0", "--corpus", cuba_file, "--base", "PY=1", "--auto"]) == 2
    assert main(["bogus-command"]) == 2
    capsys.readouterr()


def test_split_pivot_requires_split_field(cuba_file, capsys):
    args = ["run", "--corpus", cuba_file, "--base", CUBA_BASE, "--split-pivot", "HAVANA"]
    assert main(args) == 2
    assert "--split-field" in capsys.readouterr().err


def test_exactly_one_planning_source(cuba_file, capsys):
    args = ["run", "--corpus", cuba_file, "--base", CUBA_BASE,
            "--auto", "--groups", "A,B"]
    assert main(args) == 2
    capsys.readouterr()


# -- plan ------------------------------------------------------------------------


def test_plan_script_facsimile_and_round_trip(cuba_file, tmp_path, capsys):
    out1, out2 = tmp_path / "s1.txt", tmp_path / "s2.txt"
    args = ["plan", "--corpus", cuba_file, "--base", CUBA_BASE,
            "--groups", REFERENCE_GROUPS_CUBA]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    text = out1.read_text()
    lines = text.splitlines()
    assert lines[0] == "1. PY=2007 AND CU=CUBA AND (SO=A* OR SO=B*)"
    assert lines[5] == "6. PY=2007 AND CU=CUBA AND SO=J* AND AD=HAVANA"
    assert lines[6] == "7. PY=2007 AND CU=CUBA AND SO=J* NOT AD=HAVANA"
    assert "Statement to find overlapping" in lines
    assert "New Search Strategy (Excluding overlapping)" in lines
    assert lines[-1] == "15. #7 NOT #8"
    warning = capsys.readouterr().err
    assert "uncovered" in warning


def test_plan_infeasible_exit_code(cuba_file, capsys):
    args = ["plan", "--corpus", cuba_file, "--cap", "100", "--base", CUBA_BASE,
            "--groups", REFERENCE_GROUPS_CUBA]
    assert main(args) == 4
    assert "cap is 100" in capsys.readouterr().err


def test_degenerate_single_statement_script():
    from capsplit import CorpusProfile, EngineConfig, generate, plan_auto

    corpus = generate(CorpusProfile(seed=6, n_records=40))
    engine = CappedEngine(corpus, EngineConfig(cap=10_000))
    strategy = plan_auto(engine, parse("PY=2*"), FieldKind.SO)
    assert len(strategy.statements) == 1
    lines = emit_strategy_script(strategy).splitlines()
    assert lines[1] == "Statement to find overlapping"
    assert lines[2] == "2. #1 NOT #1"  # no pairs exist with one statement
    assert lines[4] == "3. #1 NOT #2"


def test_emitted_script_reparses_to_same_statements(cuba_corpus):
    engine = CappedEngine(cuba_corpus)
    strategy = plan_prescribed(
        engine, parse(CUBA_BASE), FieldKind.SO, parse_group_spec(REFERENCE_GROUPS_CUBA)
    )
    script = emit_strategy_script(strategy)
    assert emit_strategy_script(strategy) == script  # idempotent
    parsed = parse_strategy_script(script)
    assert parsed.statements == strategy.statements
    assert parsed.overlap == strategy.overlap_stmt
    assert parsed.exclusions == strategy.exclusion_stmts


# -- run / validate -----------------------------------------------------------------


def test_validate_reference_fixture(cuba_file, capsys):
    args = ["validate", "--corpus", cuba_file, "--base", CUBA_BASE,
            "--groups", REFERENCE_GROUPS_CUBA]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "overlap.count=34" in out
    assert "method_a.total=910" in out
    assert "method_b.total=910" in out
    assert "direct.count=910" in out
    assert "direct.source=engine" in out
    assert out.endswith("verdict=Exact\n")


def test_report_lines_are_machine_parseable(cuba_file, capsys):
    args = ["validate", "--corpus", cuba_file, "--base", CUBA_BASE,
            "--groups", REFERENCE_GROUPS_CUBA]
    assert main(args) == 0
    out = capsys.readouterr().out
    for line in out.splitlines():
        assert re.fullmatch(r"[a-z_.0-9]+=[A-Za-z0-9]+", line), line
    assert out.splitlines()[-1] == "verdict=Exact"


def test_report_marks_unavailable_totals_on_cap_violation():
    from capsplit import Strategy, build_exclusions, build_overlap_statement, run_strategy
    from capsplit.corpus import Corpus
    from capsplit.engine import EngineConfig
    from helpers import make_record

    records = tuple(make_record(f"R{i:03d}", ("A REV",)) for i in range(30))
    engine = CappedEngine(Corpus(records), EngineConfig(cap=10))
    strategy = Strategy(
        base=parse("PY=2007"),
        cap=10,
        partition_field=FieldKind.SO,
        groups=(),
        statements=(parse("PY=2007 AND SO=A*"),),
        overlap_stmt=build_overlap_statement(1),
        exclusion_stmts=tuple(build_exclusions(1, 2)),
    )
    text = emit_report(run_strategy(strategy, engine))
    assert "statement.1.count=30" in text
    assert "method_a.total=unavailable" in text
    assert "verdict=CapViolation" in text


def test_run_deterministic_output(cuba_file, tmp_path):
    out1, out2 = tmp_path / "r1.txt", tmp_path / "r2.txt"
    args = ["run", "--corpus", cuba_file, "--base", CUBA_BASE,
            "--groups", REFERENCE_GROUPS_CUBA]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_validate_mismatch_exits_one(tmp_path, capsys):
    lines = ["# corpus"]
    for i in range(5):
        lines.append(f"R{i}\t2007\tACTA REV {i}\tCUBA\t")
    lines.append("R90\t2007\t0RPHAN REV\tCUBA\t")
    path = tmp_path / "gap.tsv"
    path.write_text("\n".join(lines) + "\n")
    args = ["validate", "--corpus", str(path), "--base", "PY=2007",
            "--groups", "ABCDEFGHIJKLMNOPQRSTUVWXYZ123456789"]
    assert main(args) == 1
    out = capsys.readouterr().out
    assert "verdict=Mismatch" in out
    assert "direct.count=6" in out


def test_validate_censored_uses_oracle_direct(cuba_file, capsys):
    args = ["validate", "--corpus", cuba_file, "--cap", "500", "--mode", "censored",
            "--base", CUBA_BASE, "--auto"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "direct.count=910" in out
    assert "direct.source=oracle" in out
    assert "verdict=Exact" in out


def test_validate_split_pivot_flags(tmp_path, capsys):
    # whole-base pivot split through the CLI flags
    lines = ["# corpus"]
    for i in range(4):
        lines.append(f"L{i}\t2007\tA REV {i}\tENGLAND\tUCL LONDON")
    for i in range(7):
        lines.append(f"O{i}\t2007\tB REV {i}\tSCOTLAND\tUNIV EDINBURGH")
    path = tmp_path / "uk.tsv"
    path.write_text("\n".join(lines) + "\n")
    args = ["validate", "--corpus", str(path),
            "--base", "PY=2007 AND CU=(England OR Scotland)",
            "--split-field", "AD", "--split-pivot", "LONDON"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "statement.1.count=4" in out
    assert "statement.2.count=7" in out
    assert "direct.count=11" in out


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
