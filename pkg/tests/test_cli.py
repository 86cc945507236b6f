from __future__ import annotations

import json
import subprocess
import sys

import pytest

from carnotint.cli import main

SCHEMA = ["system", "D", "degree", "prolongations", "num_equations", "num_unknowns", "v_spfl",
          "v_mon", "v_bimon", "v_red", "rank_red", "delta", "lambda0", "modulus", "verdict",
          "elapsed_s", "tool_version"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("argv,code", [
    (["verify", "ell6"], 0),
    (["verify", "dim8_23568"], 0),
    (["verify", "nosuch"], 3),
    (["obstruct", "par6", "-d", "2"], 0),
    (["obstruct", "ell6", "-d", "2"], 1),
    (["obstruct", "engel", "-d", "2"], 4),
    (["obstruct", "par6", "-d", "6"], 4),
    (["obstruct", "nosuch", "-d", "1"], 3),
    (["obstruct", "gen6", "-d", "1", "--b", "0"], 4),
    (["reduce", "par6", "--c", "c9=1"], 4),
    (["reduce", "engel", "--c", "c3=1"], 4),
    (["integrate", "--Q", "Q3:1", "--ic", "0,0,0", "--tmax", "1"], 4),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_obstruct_json_schema_and_determinism(capsys, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        code, _, _ = run(capsys, "obstruct", "par6", "-d", "2", "--mod", "101", "--out", str(path))
        assert code == 0
        d = json.loads(path.read_text())
        assert list(d) == SCHEMA and d["modulus"] == 101 and d["verdict"] == "NoFinalIntegral"
        d.pop("elapsed_s")
        outs.append(d)
    assert outs[0] == outs[1]


def test_obstruct_auto_primes(capsys):
    code, out, _ = run(capsys, "obstruct", "dim7", "-d", "2", "--auto-primes")
    assert code == 0 and "NoFinalIntegral(2)" in out


@pytest.mark.parametrize("argv,expect", [
    (["reduce", "par6", "--c", "c5=-1/10,c6=20"], "kind Q1; a=10; b=-1/10"),
    (["reduce", "heis3", "--c", "c3=1"], "kind constant"),
    (["reduce", "par6", "--c", "c5=0,c6=2"], "kind degenerate"),
])
def test_reduce_examples(capsys, argv, expect):
    code, out, _ = run(capsys, *argv)
    assert code == 0 and expect in out


def test_reduce_json(capsys, tmp_path):
    path = tmp_path / "r.json"
    run(capsys, "reduce", "par6", "--c", "c3=1,c4=2,c5=3,c6=4", "--json", str(path))
    d = json.loads(path.read_text())
    assert d["kind"] == "Q1"


def test_integrate_and_section_outputs(capsys, tmp_path):
    csv_path = tmp_path / "t.csv"
    code, _, _ = run(capsys, "integrate", "--Q", "const:2", "--ic", "0,0,0", "--tmax", "3",
                     "--out", str(csv_path), "--svg", str(tmp_path / "t.svg"))
    assert code == 0
    assert csv_path.read_text().splitlines()[0] == "t,x,y,z"
    assert (tmp_path / "t.svg").read_text().count('width="1000"') >= 1
    sec = tmp_path / "s.csv"
    code, _, _ = run(capsys, "section", "--Q", "Q2:2,1,0", "--ic", "0.1,0,0", "--count", "5",
                     "--out", str(sec))
    assert code == 0 and len(sec.read_text().splitlines()) == 6
    assert json.loads((tmp_path / "s.csv.json").read_text())


def test_section_truncated_exit(capsys, tmp_path):
    code, _, _ = run(capsys, "section", "--Q", "const:0", "--ic", "0,0,0", "--count", "3",
                     "--tmax", "5", "--out", str(tmp_path / "s.csv"))
    assert code == 5


def test_algebra_file(capsys, tmp_path):
    path = tmp_path / "h.alg"
    path.write_text("dim 3\ngrading 2 1\nbracket 1 2 3 1\n")
    assert run(capsys, "verify", str(path))[0] == 0
    assert run(capsys, "verify", str(tmp_path / "missing.alg"))[0] == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "carnotint", "verify", "heis3"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "heis3" in r.stdout
