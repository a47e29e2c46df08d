import csv
import io
import json
import subprocess
import sys

import pytest

from friendly_wigner.cli import SYMBOLS, main, run_subcommand, symbol_for


def _json(argv):
    code, doc = run_subcommand(argv)
    assert code == 0, argv
    return json.loads(doc)


def test_exact_json():
    doc = _json(["exact"])
    cells = {(c["outcome_wbar"], c["outcome_w"]): c["probability"] for c in doc["payload"]["joint"]}
    assert cells[("okbar", "ok")] == {"value": pytest.approx(1 / 12, abs=1e-12), "symbol": "1/12"}
    assert cells[("failsbar", "fails")]["symbol"] == "3/4"
    assert doc["payload"]["marginal_wbar"]["okbar"]["symbol"] == "1/6"
    assert doc["payload"]["conditional_w_given_wbar"]["ok|failsbar"]["symbol"] == "1/10"
    assert set(doc["metadata"]) == {"version", "config_hash"}


def test_exact_csv_layout():
    code, doc = run_subcommand(["exact", "--format", "csv"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(doc)))
    assert rows[0] == ["outcome_wbar", "outcome_w", "probability", "stderr"]
    assert [r[:2] for r in rows[1:]] == [["okbar", "ok"], ["okbar", "fails"], ["failsbar", "ok"], ["failsbar", "fails"]]
    assert all(r[3] == "" for r in rows[1:])
    assert float(rows[4][2]) == pytest.approx(0.75, abs=1e-12)


def test_markdown_uses_six_digits():
    code, doc = run_subcommand(["exact", "--format", "markdown"])
    assert code == 0
    assert "| okbar | ok | 0.0833333 (1/12) |" in doc


def test_outputs_are_byte_deterministic():
    for argv in (["exact"], ["simulate", "--rounds", "5000", "--seed", "3"], ["report", "--format", "markdown"]):
        assert run_subcommand(argv) == run_subcommand(argv)


def test_stamp_only_in_metadata():
    doc = _json(["exact", "--stamp"])
    assert "generated_at" in doc["metadata"]
    assert doc["payload"] == _json(["exact"])["payload"]


def test_simulate_seed_from_environment(monkeypatch):
    monkeypatch.setenv("FRIENDLY_WIGNER_SEED", "77")
    from_env = _json(["simulate", "--rounds", "2000"])
    explicit = _json(["simulate", "--rounds", "2000", "--seed", "77"])
    assert from_env == explicit
    assert from_env["metadata"]["seed"] == 77
    monkeypatch.delenv("FRIENDLY_WIGNER_SEED")
    assert _json(["simulate", "--rounds", "10"])["metadata"]["seed"] == 0


def test_simulate_workers_do_not_change_output():
    a = run_subcommand(["simulate", "--rounds", "40000", "--seed", "9", "--workers", "1"])
    b = run_subcommand(["simulate", "--rounds", "40000", "--seed", "9", "--workers", "4"])
    assert a == b


def test_simulate_single_round_flags_degenerate_stderr():
    doc = _json(["simulate", "--rounds", "1", "--seed", "1"])
    assert doc["payload"]["degenerate_stderr"] is True
    assert all(c["stderr"] is None for c in doc["payload"]["joint"])


def test_usage_errors_exit_2(capsys):
    assert run_subcommand(["simulate", "--rounds", "0"])[0] == 2
    assert "usage" in capsys.readouterr().err
    assert run_subcommand(["frobnicate"])[0] == 2
    code, _ = run_subcommand(["reason", "--pathway", "WBAR:t3,F:t3,FBAR:t1"])
    err = capsys.readouterr().err
    assert code == 2
    assert "WBAR:t3,F:t2,FBAR:t1" in err and "WBAR:t3,F:t3,FBAR:t3" in err


def test_validation_errors_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[initial]\nheads = "sqrt:1/2"\ntails = "sqrt:2/5"\n')
    assert run_subcommand(["exact", "--config", str(bad)])[0] == 3
    assert "normalization" in capsys.readouterr().err

    broken = tmp_path / "broken.toml"
    broken.write_text("[initial\n")
    assert run_subcommand(["exact", "--config", str(broken)])[0] == 3
    assert "broken.toml:1:" in capsys.readouterr().err

    assert run_subcommand(["exact", "--config", str(tmp_path / "missing.toml")])[0] == 3
    assert run_subcommand(["perspectives", "--agent", "F", "--time", "t1", "--condition", "z=plus"])[0] == 3


def test_missing_config_with_default_flag(tmp_path):
    doc = _json(["exact", "--config", str(tmp_path / "missing.toml"), "--default"])
    assert doc["metadata"]["config_hash"] == _json(["exact"])["metadata"]["config_hash"]


def test_reason_all_and_single():
    doc = _json(["reason", "--all"])
    assert doc["payload"]["count"] == 9
    eq = [v for v in doc["payload"]["verdicts"] if v["pathway"] == "WBAR:t3,F:t3,FBAR:t3"][0]
    assert eq["probability"]["value"] == 0.5
    one = _json(["reason", "--pathway", "WBAR:t3,F:t2,FBAR:t1"])
    (v,) = one["payload"]["verdicts"]
    assert v["verdict"] == "ContradictionWithQM"
    assert v["claimed"]["value"] == 0 and v["quantum"]["value"] == 0.5


def test_perspectives_outputs():
    doc = _json(["perspectives", "--agent", "FBAR", "--time", "t3", "--condition", "lbar=okbar", "--lab", "L"])
    (a,) = doc["payload"]["assignments"]
    assert a["kind"] == "record_superposition"
    assert a["messages"]["effective_probability"]["symbol"] == "1/(4-2*sqrt2)"
    both = _json(["perspectives", "--agent", "F", "--time", "t3", "--condition", "z=plus"])
    assert [x["lab"] for x in both["payload"]["assignments"]] == ["Lbar", "L"]


def test_report_json():
    doc = _json(["report"])
    p = doc["payload"]
    assert p["overall"] == "consistent"
    assert p["conditional_chain"]["product"]["symbol"] == "1/12"
    assert p["non_equal_time_check"]["contradiction"] is True
    assert len(p["pathways"]) == 9


def test_symbol_table():
    assert symbol_for(1 / 12) == "1/12"
    assert symbol_for(0.853553390593) == "1/(4-2*sqrt2)"
    assert symbol_for(0.3) is None
    assert len(SYMBOLS) == 11


def test_main_writes_stdout(capsys):
    assert main(["reason", "--all", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("pathway,verdict")
    assert len(out.splitlines()) == 10


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "friendly_wigner", "exact", "--format", "csv"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("outcome_wbar,outcome_w,probability,stderr")
