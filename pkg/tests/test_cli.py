import json
import subprocess
import sys
from pathlib import Path

import pytest

from slreduce.cli import main

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestClassify:
    def test_list_segment(self, capsys):
        code, out, _ = run(capsys, "classify", SAMPLES / "ex_ls.sl")
        assert code == 0
        assert "progressing=false" in out and "safe=false" in out
        assert "ls#1 progressing" in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "classify", SAMPLES / "ex42.sl", "--json")
        data = json.loads(out)
        assert code == 0 and data["safe"] is True
        assert data["fv_profile"]["right"]["p"] == [2]

    def test_exact_establishment_flag(self, capsys):
        code, out, _ = run(capsys, "classify", SAMPLES / "ex_ls.sl", "--exact-establishment", "2")
        assert code == 0


class TestReduce:
    def test_worked_example(self, capsys, tmp_path):
        code, out, _ = run(capsys, "reduce", SAMPLES / "ex42.sl", "-o", tmp_path)
        assert code == 0
        assert "right p#1: 4 generated, 2 kept" in out
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["counts"]["per_rule"]["right"]["p#1"] == {"generated": 4, "kept": 2}
        assert (tmp_path / "rhat.sid").exists() and (tmp_path / "instance_0.entail").exists()

    def test_json(self, capsys, tmp_path):
        code, out, _ = run(capsys, "reduce", SAMPLES / "ex42.sl", "-o", tmp_path, "--json")
        assert code == 0 and json.loads(out)["counts"]["instances"] == 2

    def test_gate(self, capsys, tmp_path):
        code, _, err = run(capsys, "reduce", SAMPLES / "ex_ls.sl", "-o", tmp_path)
        assert code == 3 and "not safe" in err

    def test_forced_non_progressing(self, capsys, tmp_path):
        code, _, err = run(capsys, "reduce", SAMPLES / "ex_ls.sl", "-o", tmp_path, "--force")
        assert code == 3 and "not progressing" in err

    def test_budget(self, capsys, tmp_path):
        code, _, err = run(capsys, "reduce", SAMPLES / "ex42.sl", "-o", tmp_path, "--budget", "1")
        assert code == 4 and "budget" in err


class TestOracle:
    def test_counterexample(self, capsys):
        code, out, _ = run(capsys, "oracle", SAMPLES / "bad.sl", "--max-heap", 2)
        assert code == 1
        assert out.startswith("counterexample\nstore: ")
        assert "heap: " in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "oracle", SAMPLES / "bad.sl", "--max-heap", 2, "--json")
        data = json.loads(out)
        assert code == 1 and len(data["structure"]["heap"]) == 1

    def test_valid(self, capsys):
        code, out, _ = run(capsys, "oracle", SAMPLES / "nelist.sl", "--max-heap", 2)
        assert code == 0 and "no counterexample with at most 2 cells" in out

    def test_non_progressing(self, capsys):
        code, _, err = run(capsys, "oracle", SAMPLES / "ex_ls.sl", "--max-heap", 1)
        assert code == 3

    def test_steps(self, capsys):
        code, out, _ = run(capsys, "oracle", SAMPLES / "nelist.sl", "--max-heap", 3, "--timeout-steps", 1)
        assert code == 4 and "step budget" in out


class TestErrors:
    def test_parse_error(self, capsys, tmp_path):
        f = tmp_path / "broken.sl"
        f.write_text("fields 1;\nentail a = |- a = a\n")
        code, _, err = run(capsys, "classify", f)
        assert code == 2 and "2:12" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "oracle", tmp_path / "nope.sl", "--max-heap", 1)
        assert code == 2 and "cannot read" in err

    def test_negative_bound(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["oracle", str(SAMPLES / "bad.sl"), "--max-heap", "-1"])
        assert e.value.code == 2


class TestXCheck:
    def test_valid(self, capsys):
        code, out, _ = run(capsys, "xcheck", SAMPLES / "nelist.sl", "--max-heap", 2)
        assert code == 0 and "agree=true" in out

    def test_invalid(self, capsys):
        code, out, _ = run(capsys, "xcheck", SAMPLES / "bad.sl", "--max-heap", 1, "--json")
        data = json.loads(out)
        assert code == 1 and data["agree"] and data["transfer_ok"]
        assert data["reduced_bound"] == 3

    def test_unsafe(self, capsys):
        code, _, _ = run(capsys, "xcheck", SAMPLES / "ex_ls.sl", "--max-heap", 1)
        assert code == 3


class TestGrammar:
    def test_gen(self, capsys, tmp_path):
        out_file = tmp_path / "u.entail"
        code, out, _ = run(capsys, "gen-cfg", SAMPLES / "universal.cfg", "-o", out_file)
        assert code == 0
        assert "hat0 != hat1 * T(x, y, hat0, hat1) |- S(x, y, hat0, hat1)" in out_file.read_text()
        code, _, _ = run(capsys, "oracle", out_file, "--max-heap", 3)
        assert code == 0

    def test_cfg_oracle(self, capsys):
        code, out, _ = run(capsys, "cfg-oracle", SAMPLES / "zeros.cfg", "--max-heap", 1)
        assert code == 1 and "spelling '1'" in out

    def test_epsilon(self, capsys, tmp_path):
        f = tmp_path / "e.cfg"
        f.write_text("S -> 0\nS -> eps\n")
        code, _, err = run(capsys, "gen-cfg", f, "-o", tmp_path / "o")
        assert code == 2 and "empty word" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "slreduce", "oracle", str(SAMPLES / "bad.sl"), "--max-heap", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 1 and "counterexample" in r.stdout
