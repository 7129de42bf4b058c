import json
import subprocess
import sys

import pytest

from epiban.cli import main
from epiban.report import FORMAT, load_report, strip_timing

from helpers import SOUNDNESS, fixture_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_valid(capsys):
    code, out, _ = run(capsys, "check", fixture_path("keyexchange"), "K[a](good) => good")
    assert code == 0 and out.startswith("valid")


def test_check_invalid_prints_trace(capsys, tmp_path):
    rep = tmp_path / "r.json"
    code, out, _ = run(capsys, "check", fixture_path("mixed"), "good", "-o", rep)
    assert code == 1
    assert "counterexample w1 at (r2, 0)" in out and "good = false" in out
    d = load_report(rep)
    assert d["results"][0]["status"] == "invalid"
    assert d["witnesses"]["w1"]["run"] == "r2"


def test_check_accepts_ban(capsys):
    code, out, _ = run(capsys, "check", fixture_path("keyexchange"), "a believes a sees na")
    assert code in (0, 1)
    code2, out2, _ = run(capsys, "check", fixture_path("keyexchange"), "--ban",
                         "a believes a sees na")
    assert (code, out) == (code2, out2)


def test_validation_failure_is_exit_2(capsys):
    code, out, err = run(capsys, "check", fixture_path("zeroweight"), "good")
    assert code == 2 and "[H4]" in err
    code, out, _ = run(capsys, "check", fixture_path("zeroweight"), "P[a]>=1/2(good)",
                       "--skip-validate")
    assert code == 2 and "ZeroConditioning" in out


def test_errors_are_exit_2(capsys, tmp_path):
    assert run(capsys, "check", fixture_path("mixed"), "p &&")[0] == 2
    assert run(capsys, "check", tmp_path / "missing.scn", "p")[0] == 2
    code, _, err = run(capsys, "check", fixture_path("mixed"), "X X X p")
    assert code == 2
    assert run(capsys, "soundness", fixture_path("mixed"), "--rules", "R12")[0] == 2


def test_horizon_safe(capsys):
    code, out, _ = run(capsys, "check", fixture_path("mixed"), "X true", "--horizon-safe")
    assert code == 0


def test_translate(capsys):
    code, out, _ = run(capsys, "translate", "a believes fresh(na)", "--agents", "a", "b",
                       "--stats")
    assert code == 0
    assert out.startswith("!K[a](P[a]>=1(!good))")
    assert "nodes(F) = 3" in out
    assert run(capsys, "translate", "a sees na")[0] == 2


def test_soundness_and_trace(capsys, tmp_path):
    rep = tmp_path / "s.json"
    code, out, _ = run(capsys, "soundness", fixture_path("said-nested"), "--said=alt",
                       "--rules", "R1", "-o", rep)
    assert code == 1
    assert "FAIL  R1  i=a, j=b, k=k, F=enc(n1, k2), l=b  witness (r, 2)  w1" in out
    code, out, _ = run(capsys, "trace", rep, "w1")
    assert code == 0
    assert "witness (r, 2)" in out and "b -> a : y" in out
    code, _, err = run(capsys, "trace", rep, "w7")
    assert code == 2 and "unknown witness" in err


def test_soundness_subst_file(capsys, tmp_path):
    f = tmp_path / "subst.txt"
    f.write_text("R1 i=a j=b k=k F=enc(n1, k2) l=b\n")
    code, out, _ = run(capsys, "soundness", fixture_path("said-nested"), "--subst", f)
    assert code == 0 and out.startswith("ok    R1")


def test_validate(capsys):
    assert run(capsys, "validate", fixture_path("keyexchange"))[0] == 0
    code, out, _ = run(capsys, "validate", fixture_path("zeroweight"))
    assert code == 1 and "[H4]" in out


@pytest.mark.parametrize("argv", [
    ["soundness", fixture_path("keyexchange")],
    ["check", fixture_path("said-first"),
     "(!sent[a]('c1') & X sent[a]('c1')) => K[a]('n1' <= 'c1')", "--horizon-safe"],
])
def test_reports_are_byte_identical(capsys, tmp_path, argv):
    outs = []
    for n in range(3):
        p = tmp_path / f"{n}.json"
        run(capsys, *argv, "-o", p, "--no-timing")
        outs.append(p.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    assert json.loads(outs[0])["format"] == FORMAT
    assert "timing" not in json.loads(outs[0])


def test_timing_is_the_only_difference(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "soundness", fixture_path("runenc"), "-o", a)
    run(capsys, "soundness", fixture_path("runenc"), "-o", b)
    assert "timing" in json.loads(a.read_text())
    assert strip_timing(a.read_text()) == strip_timing(b.read_text())


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "epiban", "validate",
                          str(fixture_path(SOUNDNESS[0]))], capture_output=True, text=True)
    assert out.returncode == 0 and "all hypotheses hold" in out.stdout
