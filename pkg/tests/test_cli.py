import csv
import subprocess
import sys

import pytest

from rqclab.cli import EXIT_GUARD, EXIT_OK, EXIT_PARAM, EXIT_REJECTION, run


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    lines = text.splitlines()
    assert lines[0].startswith("# config:")
    return list(csv.DictReader(lines[1:]))


def test_weight_evolve_rows(capsys):
    code, out, _ = _run(capsys, "weight-evolve", "--n", "2", "--start", "1", "--t", "1")
    assert code == EXIT_OK
    rows = _rows(out)
    assert [(int(r["k"]), float(r["prob"])) for r in rows] == [(1, 0.4), (2, 0.6)]


def test_gambler_row(capsys):
    code, out, _ = _run(capsys, "gambler", "--a", "2", "--p", "0.6666667", "--trials", "1000000", "--seed", "7")
    assert code == EXIT_OK
    (row,) = _rows(out)
    exact = float(row["exact"])
    assert exact == pytest.approx(3 / 7, abs=1e-7)
    assert abs(float(row["mc"]) - exact) <= 3 * (exact * (1 - exact) / 1_000_000) ** 0.5
    assert "seed=7" in out.splitlines()[0]


@pytest.mark.parametrize(
    "argv",
    [
        ["depth", "--n", "16", "--t", "40", "--trials", "50", "--seed", "3"],
        ["coverage", "--n", "12", "--trials", "500", "--seed", "3"],
        ["hitting-time", "--n", "32", "--trials", "300", "--seed", "3"],
        ["string-shells", "--n", "4", "--t", "30", "--trials", "2000", "--seed", "3"],
        ["moment-check", "--n", "2", "--t", "2", "--trials", "500", "--ensemble", "clifford"],
        ["decouple", "--n", "3", "--e", "1", "--trials", "4", "--grid", "0,5"],
    ],
)
def test_reruns_are_byte_identical(capsys, argv):
    first = _run(capsys, *argv)
    second = _run(capsys, *argv)
    assert first[0] == EXIT_OK
    assert first[1] == second[1]
    assert first[1].startswith("# config:")


def test_threads_do_not_change_output(capsys):
    base = ["hitting-time", "--n", "20", "--trials", "200000", "--seed", "1"]
    _, one, _ = _run(capsys, *base)
    _, many, _ = _run(capsys, *base, "--threads", "4")
    assert one.splitlines()[1:] == many.splitlines()[1:]


def test_csv_headers(capsys):
    headers = {
        ("weight-evolve", "--n", "3"): "k,prob",
        ("hitting-time", "--n", "8", "--trials", "10"): "start,target,trial_count,censored,p50,p90,p99,mean",
        ("string-shells", "--n", "3", "--trials", "10"): "k,shell_size,chi2,dof,pvalue",
        ("gambler", "--a", "1", "--p", "0.7", "--trials", "10"): "a,p_minus,p,exact,mc,stderr,trials",
        ("depth", "--n", "4", "--t", "3", "--trials", "2"): "n,t,trial,depth,rejections",
        ("coverage", "--n", "4", "--t", "3", "--trials", "2"): "n,t,trials,covered,bound",
        ("decouple", "--n", "2", "--e", "1", "--t", "1", "--trials", "2"): "n,e_qubits,s,t,trials,mean,stderr",
        ("moment-check", "--n", "2", "--trials", "10"): "nu,empirical,exact,z",
    }
    for argv, header in headers.items():
        code, out, _ = _run(capsys, *argv)
        assert code == EXIT_OK, argv
        assert out.splitlines()[1] == header


def test_hitting_histogram_file(capsys, tmp_path):
    hist = tmp_path / "hist.csv"
    code, _, _ = _run(capsys, "hitting-time", "--n", "2", "--target", "2", "--trials", "1000", "--hist", str(hist))
    assert code == EXIT_OK
    lines = hist.read_text().splitlines()
    assert lines[0].startswith("# config:") and lines[1] == "t,count"
    assert sum(int(line.split(",")[1]) for line in lines[2:]) == 1000


def test_out_file(capsys, tmp_path):
    path = tmp_path / "w.csv"
    assert run(["weight-evolve", "--n", "2", "--t", "1", "--out", str(path)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert path.read_text().splitlines()[2] == "1,0.4"


def test_depth_with_rejection_sampling(capsys):
    code, out, _ = _run(capsys, "depth", "--n", "8", "--t", "12", "--d", "12", "--trials", "5")
    assert code == EXIT_OK
    assert all(int(r["rejections"]) == 0 for r in _rows(out))


@pytest.mark.parametrize(
    "argv, code, fragment",
    [
        (["bogus"], EXIT_PARAM, ""),
        (["weight-evolve", "--n", "x"], EXIT_PARAM, ""),
        (["weight-evolve"], EXIT_PARAM, "--n is required"),
        (["weight-evolve", "--n", "1"], EXIT_PARAM, "n >= 2"),
        (["hitting-time", "--n", "10", "--target", "11"], EXIT_PARAM, "unreachable"),
        (["hitting-time", "--n", "100", "--delta", "0.1"], EXIT_PARAM, "delta"),
        (["gambler", "--a", "2", "--p", "0.4"], EXIT_PARAM, "> 1/2"),
        (["string-shells", "--n", "11", "--trials", "5"], EXIT_GUARD, "n <= 10"),
        (["moment-check", "--n", "5", "--trials", "5"], EXIT_GUARD, "n <= 4"),
        (["decouple", "--n", "9", "--e", "1", "--trials", "1"], EXIT_GUARD, "guarded"),
        (["depth", "--n", "16", "--t", "8", "--d", "1", "--trials", "1"], EXIT_REJECTION, "attempts"),
        (["depth", "--n", "16", "--t", "40", "--d", "2", "--trials", "1"], EXIT_PARAM, "counting bound"),
        (["depth", "--n", "16", "--trials", "0"], EXIT_PARAM, "positive"),
    ],
)
def test_exit_codes(capsys, argv, code, fragment):
    got, _, err = _run(capsys, *argv)
    assert got == code
    assert fragment in err


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "rqclab", "weight-evolve", "--n", "2", "--t", "1"], capture_output=True, text=True
    )
    assert res.returncode == 0
    assert res.stdout.splitlines()[2:] == ["1,0.4", "2,0.6"]
