import json

import pytest

from fractal_mra.cli import main

C4 = "builtin:cantor-quarter-gap"
C3 = "builtin:cantor-third"
NL = "builtin:nonlinear-example"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", "--spec", C3)
    rep = json.loads(out)
    assert code == 0 and rep["N"] == 3 and rep["A"] == [0, 2]
    assert set(rep["meta"]) >= {"spec_hash", "seed", "tolerances", "version"}


def test_validate_decreasing(tmp_path, capsys):
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"maps": [{"family": "affine", "a": -0.5, "b": 0.5},
                                      {"family": "affine", "a": 0.5, "b": 0.5}], "core": [0, 1]}))
    code, out, _ = run(capsys, "validate", "--spec", str(p))
    assert code == 1 and "not increasing" in out


def test_validate_truncated(tmp_path, capsys):
    p = tmp_path / "t.json"
    p.write_text('{"maps": [')
    code, _, err = run(capsys, "validate", "--spec", str(p))
    assert code == 3 and "malformed" in err


def test_validate_missing_file(capsys):
    assert run(capsys, "validate", "--spec", "/nonexistent.json")[0] == 3


def test_unknown_command(capsys):
    assert run(capsys, "frobnicate")[0] == 3


def test_scaling_plot_nonlinear(capsys):
    code, out, _ = run(capsys, "scaling", "plot-data", "--spec", NL, "--samples", "101")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "x,sigma"
    rows = dict(tuple(map(float, l.split(","))) for l in lines[1:])
    assert rows[0.0] == 0.0
    assert rows[0.75] == pytest.approx(1.75)


def test_scaling_plot_linear_slope(capsys):
    code, out, _ = run(capsys, "scaling", "plot-data", "--spec", C3, "--range", "-1,2", "--samples", "31")
    rows = [tuple(map(float, l.split(","))) for l in out.splitlines()[1:]]
    assert all(abs(y - 3 * x) < 1e-12 for x, y in rows)


def test_scaling_bad_range(capsys):
    assert run(capsys, "scaling", "plot-data", "--spec", C3, "--range", "2,1")[0] == 3


@pytest.mark.parametrize("spec", [C3, C4, NL])
def test_wavelet_report(spec, capsys):
    code, out, _ = run(capsys, "wavelet", "report", "--spec", spec, "--levels", "2", "--shifts", "4",
                       "--samples", "20")
    rep = json.loads(out)
    assert code == 0 and rep["gram"]["max_offdiag"] < 1e-10


def test_wavelet_gram_identical_across_systems(capsys):
    digests = set()
    for spec in (C3, NL):
        _, out, _ = run(capsys, "wavelet", "report", "--spec", spec, "--levels", "1", "--shifts", "2",
                        "--samples", "5")
        digests.add(json.loads(out)["gram_digest"])
    assert len(digests) == 1


def test_wavelet_report_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        main(["wavelet", "report", "--spec", C3, "--levels", "1", "--shifts", "2", "--samples", "5",
              "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_fourier_relaxed_fails(capsys):
    code, out, _ = run(capsys, "fourier", "report", "--N", "3", "--A", "0,2", "--L", "0,3/4", "--kmax", "5",
                       "--gram-size", "16")
    rep = json.loads(out)
    assert code == 1 and rep["verdict"] == "orthonormality-fails"
    assert rep["witness"]["abs_inner_product"] == pytest.approx(0.466, abs=1e-3)


def test_fourier_no_integer_dual_set(capsys):
    code, out, _ = run(capsys, "fourier", "report", "--N", "3", "--A", "0,2")
    assert code == 1 and json.loads(out)["dual_sets_mod_N"] == []


def test_fourier_c4_auto(capsys):
    code, out, _ = run(capsys, "fourier", "report", "--N", "4", "--A", "0,3", "--kmax", "8")
    rep = json.loads(out)
    assert rep["L"] == ["0", "2"] and rep["unitary"]
    assert rep["gram_max_offdiag"] < 1e-10
    # Lambda alone misses the orbit of the extremal cycle, so Q stays below 1
    assert rep["verdict"] == "inconclusive" and code == 2
    assert min(q["value"] for q in rep["Q_samples_cycle_completed"]) > 0.999


def test_fourier_lebesgue_baseline(capsys):
    code, out, _ = run(capsys, "fourier", "report", "--N", "2", "--A", "0,1", "--L", "0,1", "--kmax", "10")
    rep = json.loads(out)
    assert rep["gram_max_offdiag"] < 1e-12
    half = [q for q in rep["Q_samples"] if abs(q["t"] - 10 / 21) < 1e-12]
    assert rep["verdict"] == "inconclusive" and code == 2 and half


@pytest.mark.parametrize("argv", [
    ["fourier", "report", "--N", "4"],
    ["fourier", "report", "--N", "4", "--A", "1,3"],
    ["fourier", "report", "--N", "4", "--A", "0,x"],
    ["fourier", "report", "--N", "4", "--A", "0,3", "--tol", "0"],
])
def test_fourier_input_errors(argv, capsys):
    assert run(capsys, *argv)[0] == 3


def test_conjugacy_eval(capsys):
    code, out, _ = run(capsys, "conjugacy", "eval", "--src", C4, "--dst", C3, "--x", "3/4")
    rep = json.loads(out)
    v = rep["values"][0]
    assert code == 0 and abs(v["value"] - 2 / 3) <= v["error_bound"]


def test_conjugacy_eval_inverse(capsys):
    _, out, _ = run(capsys, "conjugacy", "eval", "--src", C4, "--dst", C3, "--x", "2/3", "--inverse")
    assert json.loads(out)["values"][0]["value"] == pytest.approx(0.75)


def test_conjugacy_plot(capsys):
    code, out, _ = run(capsys, "conjugacy", "plot-data", "--src", C4, "--dst", C3)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "x,phi" and len(lines) == 1025
    assert lines[1] == "0.0,0.0" and lines[-1] == "1.0,1.0"


def test_conjugacy_gram(capsys):
    code, out, _ = run(capsys, "conjugacy", "gram", "--src", C4, "--dst", C3)
    rep = json.loads(out)
    assert code == 0 and rep["max_identity_deviation"] < 2e-3


def test_conjugacy_gram_tolerance_breach(capsys):
    assert run(capsys, "conjugacy", "gram", "--src", C4, "--dst", C3, "--tol", "1e-30")[0] == 2


def test_conjugacy_N_mismatch(tmp_path, capsys):
    p = tmp_path / "two.json"
    p.write_text(json.dumps({"core_maps": [{"family": "affine", "a": 0.5, "b": 0},
                                           {"family": "affine", "a": 0.5, "b": 0.5}], "auto_fill": True}))
    assert run(capsys, "conjugacy", "eval", "--src", str(p), "--dst", C3, "--x", "0.5")[0] == 3


def test_budget_env(monkeypatch, capsys):
    monkeypatch.setenv("FRACTAL_MRA_BUDGET", "100")
    assert run(capsys, "fourier", "report", "--N", "4", "--A", "0,3")[0] == 3
    monkeypatch.setenv("FRACTAL_MRA_BUDGET", "-1")
    assert run(capsys, "validate", "--spec", C3)[0] == 3
