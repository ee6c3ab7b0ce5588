import asyncio
import json

import jsonschema
import pytest

from main import main
from src.config import REPO_ROOT

LIBRARY = REPO_ROOT / "library"
SCHEMAS = REPO_ROOT / "schemas"


def run(capsys, *argv):
    code = asyncio.run(main(list(argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


def schema(name: str) -> dict:
    return json.loads((SCHEMAS / name).read_text(encoding="utf-8"))


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("LMR_FUEL", "LMR_SEED", "LMR_INSTANCES", "LMR_WORKERS", "LMR_LIBRARY_DIR"):
        monkeypatch.delenv(name, raising=False)


def test_check_certifies_the_case_study(capsys):
    code, out, _ = run(capsys, "check", str(LIBRARY / "append.lmr"))
    assert code == 0
    assert "theorem append_correct: certified" in out
    assert "law get_after_set_cell: passed" in out


def test_check_json_matches_the_schema(capsys):
    code, out, _ = run(capsys, "check", "--json", str(LIBRARY / "prelude.lmr"),
                       str(LIBRARY / "append.lmr"))
    assert code == 0
    verdicts = json.loads(out)
    jsonschema.validate(verdicts, schema("check.schema.json"))
    assert {v["file"] for v in verdicts} == {str(LIBRARY / "prelude.lmr"), str(LIBRARY / "append.lmr")}
    assert all(v["status"] in ("ok", "certified", "passed") for v in verdicts)


def test_missing_file_is_an_io_error(capsys, tmp_path):
    code, out, _ = run(capsys, "check", "--json", str(tmp_path / "nope.lmr"))
    assert code == 2
    [verdict] = json.loads(out)
    assert verdict["status"] == "io-error"


def test_unproved_and_failing_theorems(capsys, tmp_path):
    source = tmp_path / "stub.lmr"
    source.write_text(
        "theorem open_one [p q : prop] : p |- q\n"
        "\n"
        "theorem wrong [p q : prop] : p * q |- q * p\n"
        "proof wrong {\n"
        "  rule hyp;\n"
        "  qed\n"
        "}\n", encoding="utf-8")
    code, out, _ = run(capsys, "check", "--json", "--no-prelude", str(source))
    assert code == 1
    verdicts = json.loads(out)
    jsonschema.validate(verdicts, schema("check.schema.json"))
    by_name = {v["name"]: v for v in verdicts}
    assert by_name["open_one"]["status"] == "unproved"
    failed = by_name["wrong"]
    assert failed["status"] == "failed"
    assert failed["errors"][0]["span"]["line"] == 5


def test_case_study_without_its_first_step_rule_fails(capsys, tmp_path):
    text = (LIBRARY / "append.lmr").read_text(encoding="utf-8")
    assert "  rule wp_step;\n" in text
    source = tmp_path / "append.lmr"
    source.write_text(text.replace("  rule wp_step;\n", "", 1), encoding="utf-8")
    code, out, _ = run(capsys, "check", "--json", str(source))
    assert code == 1
    verdicts = json.loads(out)
    jsonschema.validate(verdicts, schema("check.schema.json"))
    by_name = {v["name"]: v for v in verdicts}
    failed = by_name["append_correct"]
    assert failed["status"] == "failed"
    error = failed["errors"][0]
    assert error["path"]
    assert "rule-mismatch" in error["message"]
    assert by_name["swap_cells"]["status"] == "certified"


def test_syntax_errors_exit_with_two(capsys, tmp_path):
    source = tmp_path / "broken.lmr"
    source.write_text("theorem : |- \n", encoding="utf-8")
    code, out, _ = run(capsys, "check", "--json", "--no-prelude", str(source))
    assert code == 2
    assert any(v["status"] == "parse-error" for v in json.loads(out))


def test_eval_expression(capsys):
    code, out, _ = run(capsys, "eval", "-e", "x <- new 5; set x 7; get x", "--fuel", "10")
    assert code == 0
    assert out.strip() == "Done value=7 heap={0↦7} steps=1"


def test_eval_entry_with_trace(capsys):
    code, out, _ = run(capsys, "eval", str(LIBRARY / "append.lmr"), "--entry", "main", "--trace")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "[1] get loc 0"
    assert lines[-1].startswith("Done value=7")


def test_eval_on_an_initial_heap(capsys):
    code, out, _ = run(capsys, "eval", "-e", "get (loc [nat] 1)", "--heap", "5; 7")
    assert code == 0
    assert out.strip() == "Done value=7 heap={0↦5, 1↦7} steps=1"


def test_eval_out_of_fuel(capsys):
    code, out, _ = run(capsys, "eval", "-e", "step; ret 0", "--fuel", "0")
    assert code == 0
    assert out.strip() == "OutOfFuel"


def test_eval_rejects_pure_terms(capsys):
    code, _, err = run(capsys, "eval", "-e", "5")
    assert code == 2
    assert err


def test_eval_dangling_read_fails(capsys):
    code, _, err = run(capsys, "eval", "-e", "get (loc [nat] 3)")
    assert code == 1
    assert "dangling" in err or "unallocated" in err


def test_laws_json(capsys):
    code, out, _ = run(capsys, "laws", "--seed", "0", "--instances", "5", "--json")
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, schema("laws.schema.json"))
    assert report["ok"] and len(report["rules"]) == 17


def test_injected_fault_is_caught(capsys):
    code, out, _ = run(capsys, "laws", "--seed", "0", "--instances", "8", "--json",
                       "--inject-fault", "get-free")
    assert code == 1
    report = json.loads(out)
    jsonschema.validate(report, schema("laws.schema.json"))
    assert not report["ok"]


def test_bad_environment_setting(capsys, monkeypatch):
    monkeypatch.setenv("LMR_FUEL", "lots")
    code, _, err = run(capsys, "laws", "--instances", "1")
    assert code == 2
    assert "LMR_FUEL" in err
