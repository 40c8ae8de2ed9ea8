import csv
import io
import json
import os
import subprocess
import sys

import pytest

from uisbench.cli import main
from uisbench.harness import reactor_text

PREGNANCY = """
prop swollen, sick, male leaf
prop preg goal
P(preg | swollen & sick) = 0.4
P(preg | male) = 0
"""


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_maxent_empty_rule_set(capsys, files):
    code, out, err = run(capsys, "maxent", files("r.rules", "prop A, B\n"))
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["A", "B", "weight"]
    assert [float(r[2]) for r in rows[1:]] == [0.25] * 4
    assert "iterations=" in err


def test_maxent_pregnancy_check_printed(capsys, files):
    code, out, err = run(capsys, "maxent", files("p.rules", PREGNANCY))
    assert code == 0
    assert "check P(preg | male) = 0.0: achieved 0" in err
    assert "check" not in out


def test_maxent_infeasible_exit_2(capsys, files):
    code, out, err = run(capsys, "maxent", files("bad.rules", "prop A; P(A) = 0.3; P(A & A) = 0.7"))
    assert code == 2 and out == ""
    assert "infeasible" in err


def test_maxent_duplicate_prior_is_a_parse_error(capsys, files):
    code, _, err = run(capsys, "maxent", files("dup.rules", "prop A; P(A) = 0.3; P(A) = 0.7"))
    assert code == 1 and "duplicate-prior" in err


def test_maxent_non_convergence_exit_3(capsys, files):
    text = "prop A, B, C; P(A) = 0.3; P(B | A) = 0.9; P(C | A & B) = 0.2"
    code, _, err = run(capsys, "maxent", files("r.rules", text), "--max-iter", "1")
    assert code == 3 and "no convergence" in err


def test_missing_file_and_bad_flags(capsys, tmp_path):
    assert run(capsys, "maxent", str(tmp_path / "nope.rules"))[0] == 1
    assert run(capsys, "sweep", "--figure", "9")[0] == 1
    assert run(capsys, "infer", "a", "b", "--engines", "bogus")[0] == 1
    assert run(capsys, "--help")[0] == 0


def test_output_dir_env(capsys, files, tmp_path, monkeypatch):
    monkeypatch.setenv("UISBENCH_OUTDIR", str(tmp_path / "outdir"))
    code, out, err = run(capsys, "maxent", files("r.rules", "prop A\n"), "-o", "joint.csv")
    assert code == 0 and out == ""
    assert (tmp_path / "outdir" / "joint.csv").read_text().startswith("A,weight\n")


def test_compare_reactor_columns(capsys, files):
    rules = files("reactor.rules", reactor_text())
    ev = files("loca.ev", "pzr_pressure_low = 0.95\npzr_level_low = 0.95\n")
    code, out, err = run(capsys, "compare", rules, ev)
    assert code == 0
    header = out.splitlines()[1].split()
    assert header == ["FST", "MYC", "DST", "IND"]


def test_compare_single_engine(capsys, files):
    rules = files("p.rules", PREGNANCY)
    ev = files("male.ev", "swollen = 1; sick = 1; male = 1")
    code, out, _ = run(capsys, "compare", rules, ev, "--engines", "ind")
    assert code == 0
    assert out.splitlines()[1].split() == ["IND"]
    code, out, _ = run(capsys, "compare", rules, ev, "--engines", "ind", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {r["engine"] for r in rows} == {"IND"}
    assert float(next(r for r in rows if r["metric"] == "abs")["value"]) == pytest.approx(0.4)


def test_compare_non_leaf_evidence(capsys, files):
    rules = files("p.rules", PREGNANCY)
    code, out, err = run(capsys, "compare", rules, files("bad.ev", "preg = 1"))
    assert code == 1 and out == ""
    assert "non-leaf-evidence" in err


def test_compare_priors_file(capsys, files):
    rules = files("p.rules", PREGNANCY)
    ev = files("male.ev", "swollen = 1; sick = 1; male = 1")
    pri = files("pri.txt", "swollen = 0.5; sick = 0.5; male = 0.5; preg = 0.2")
    code, out, _ = run(capsys, "compare", rules, ev, "--engines", "mycin", "--priors", "file", "--priors-file", pri)
    assert code == 0
    code, _, err = run(capsys, "compare", rules, ev, "--priors", "file")
    assert code == 1 and "--priors-file" in err


def test_infer_formats(capsys, files):
    rules = files("c.rules", "prop A, B, C; P(B | A) = 0.8; P(C | B) = 0.9")
    ev = files("a.ev", "A = 1")
    code, out, _ = run(capsys, "infer", rules, ev, "--engines", "maxc,dst", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert [d["engine"] for d in data] == ["maxc", "dst"]
    c = data[0]["nodes"][-1]
    assert c["node"] == "C" and c["point"] == pytest.approx(0.72)
    code, out, _ = run(capsys, "infer", rules, ev, "--engines", "maxc", "--format", "csv")
    assert out.splitlines()[0] == "node,engine,class,point,support,plausibility,native"


def test_sweep_figure_1(capsys):
    code, out, _ = run(capsys, "sweep", "--figure", "1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3 * 101
    at = {r["engine"]: float(r["value"]) for r in rows if r["x"] == "0.4"}
    assert at == pytest.approx({"MAXC": 0.4, "IND": 0.64, "MINC": 0.8})


def test_sweep_conj_flags_match_figure_2(capsys):
    _, by_flags, _ = run(capsys, "sweep", "--op", "conj", "--pB", "0.6")
    _, by_figure, _ = run(capsys, "sweep", "--figure", "2")
    assert by_flags == by_figure


def test_sweep_bad_grid(capsys):
    assert run(capsys, "sweep", "--op", "conj", "--pB", "0.6", "--grid-step", "-1")[0] == 1
    assert run(capsys, "sweep")[0] == 1


def test_dst_pathology(capsys):
    code, out, _ = run(capsys, "dst-pathology")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 9
    assert all(float(r["bel_t1"]) == 0.0 and float(r["bel_t2"]) == 0.0 for r in rows)


def test_verify_baselines_deterministic(capsys):
    a = run(capsys, "verify-baselines", "--samples", "20000", "--seed", "7")[1]
    b = run(capsys, "verify-baselines", "--samples", "20000", "--seed", "7")[1]
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert len(rows) == 5 * (2 + 6 + 2)
    assert max(abs(float(r["diff"])) for r in rows) < 0.02


def test_console_entry_point(tmp_path):
    env = dict(os.environ, UISBENCH_OUTDIR=str(tmp_path))
    proc = subprocess.run([sys.executable, "-m", "uisbench", "dst-pathology", "-o", "p.csv"], capture_output=True,
                          text=True, env=env)
    assert proc.returncode == 0 and proc.stdout == ""
    assert (tmp_path / "p.csv").read_text().startswith("beta,bel_t1,bel_t2\n")
