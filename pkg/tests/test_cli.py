import json
import subprocess
import sys
import time

import pytest

from revex.cli import main

from .conftest import CORPUS


def revex(*args, timeout=120):
    return subprocess.run(
        [sys.executable, "-m", "revex", *map(str, args)], capture_output=True, text=True, timeout=timeout
    )


def test_verify_fixture_end_to_end(tmp_path):
    out = tmp_path / "verdicts.jsonl"
    proc = revex("verify", "--corpus", CORPUS / "contracts", "--report", CORPUS / "fixtures" / "bank_report.json",
                 "--out", out)
    assert proc.returncode == 0, proc.stderr
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 1
    assert records[0]["contract_id"] == "bank" and records[0]["outcome"] == "confirmed"
    assert "bank 0x2e1a7d4d confirmed" in proc.stdout


def test_combos_lists_127(capsys):
    assert main(["combos", "--tools", "8"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 127 and lines[-1].count("+") == 7


def test_score_empty(tmp_path, capsys):
    truth = tmp_path / "truth.json"
    truth.write_text("{}")
    out = tmp_path / "m.json"
    assert main(["score", "--truth", str(truth), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())["verified"]
    assert (doc["tp"], doc["fp"], doc["fn"], doc["tn"]) == (0, 0, 0, 0)
    assert doc["precision_undefined"] and doc["recall_undefined"] and doc["f1_undefined"]


def test_score_corpus_round_trip(tmp_path, capsys):
    verdicts = tmp_path / "v.jsonl"
    reports = sorted((CORPUS / "reports").glob("*.json"))
    assert main(["verify", "--corpus", str(CORPUS / "contracts"), "--report", *map(str, reports),
                 "--out", str(verdicts)]) == 0
    out = tmp_path / "m.json"
    assert main(["score", "--truth", str(CORPUS / "truth.json"), "--verdicts", str(verdicts),
                 "--report", *map(str, reports), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert (doc["verified"]["tp"], doc["verified"]["fp"]) == (4, 0)
    assert doc["Mythril"]["precision"] == "50.0"


def test_merge_and_combos_scoring(tmp_path, capsys):
    reports = [str(p) for p in sorted((CORPUS / "reports").glob("*.json"))]
    out = tmp_path / "merged.json"
    assert main(["merge", "--report", *reports, "--tools", "Slither,Mythril", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["tool_name"] == "Mythril+Slither"
    combos = tmp_path / "combos.json"
    assert main(["combos", "--combo-sizes", "8", "--corpus", str(CORPUS / "contracts"), "--report", *reports,
                 "--truth", str(CORPUS / "truth.json"), "--out", str(combos)]) == 0
    (record,) = json.loads(combos.read_text()).values()
    assert record["verified"]["fp"] == 0 and record["verified"]["tp"] == 4
    assert record["origin"]["fp"] > 0


def test_export_graphs(tmp_path, capsys):
    assert main(["export-graphs", "--corpus", str(CORPUS / "contracts"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bank.cfg.dot").read_text().startswith("digraph")
    assert (tmp_path / "bank.2e1a7d4d.fdg.dot").exists()


def test_bad_flags_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify", "--timeout", "-3"])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_engine_error_exit_1(tmp_path, capsys):
    assert main(["verify", "--corpus", str(tmp_path / "missing"), "--report", str(tmp_path / "r.json")]) == 1
    assert "revex: error" in capsys.readouterr().err


def test_budget_exhaustion_is_unknown_in_time(tmp_path):
    out = tmp_path / "v.jsonl"
    start = time.monotonic()
    proc = revex("verify", "--corpus", CORPUS / "budget", "--report", CORPUS / "budget" / "report.json",
                 "--timeout", 3, "--out", out, timeout=60)
    elapsed = time.monotonic() - start
    assert proc.returncode == 0, proc.stderr
    (record,) = [json.loads(line) for line in out.read_text().splitlines()]
    assert record["outcome"] == "unknown" and "budget" in record["reason"]
    assert elapsed < 3 + 5
