import csv
import json
import os

import pytest

from hierarchylab import cli


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path) as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_gen_akns_alpha5(tmp_path):
    assert run("gen", "--family", "akns", "--n", 5, "--out", tmp_path) == 0
    txt = (tmp_path / "akns" / "5.txt").read_text()
    assert "α₅ = " in txt and "q''''" in txt.replace("q^(4)", "q''''")
    obj = json.loads((tmp_path / "akns" / "5.json").read_text())
    assert obj["config"]["family"] == "akns" and obj["config"]["n"] == 5


def test_gen_gardner_h0(tmp_path, capsys):
    assert run("gen", "--family", "gardner", "--n", 0, "--out", tmp_path) == 0
    assert "1/2 w²" in (tmp_path / "gardner" / "0.txt").read_text()


def test_gen_goodvar_reciprocal_term(tmp_path):
    assert run("gen", "--family", "goodvar", "--n", 2, "--out", tmp_path) == 0
    assert "(v+1)^-3 (−45/8 (v')⁴)" in (tmp_path / "goodvar" / "2.txt").read_text()


def test_rationals_are_strings(tmp_path):
    run("gen", "--family", "kdv", "--n", 2, "--out", tmp_path)
    text = (tmp_path / "kdv" / "2.json").read_text()
    assert '"5/2"' in text


def test_defaults_printed(tmp_path, capsys):
    run("gen", "--out", tmp_path)
    err = capsys.readouterr().err
    cfg = json.loads(err.split("config: ", 1)[1].splitlines()[0])
    assert cfg["family"] == "kdv" and cfg["n"] == 3 and cfg["tol_ode"] == 1e-10


def test_config_file_then_flags(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"gen": {"family": "mkdv", "n": 1}}))
    run("gen", "--config", tmp_path / "c.json", "--out", tmp_path)
    assert (tmp_path / "mkdv" / "1.json").exists()
    (tmp_path / "c.toml").write_text('family = "mkdv"\nn = 1\n')
    run("gen", "--config", tmp_path / "c.toml", "--n", 2, "--out", tmp_path)
    obj = json.loads((tmp_path / "mkdv" / "2.json").read_text())
    assert obj["config"]["n"] == 2 and obj["config"]["family"] == "mkdv"


def test_scatter_zero_potential(tmp_path):
    assert run("scatter", "--potential", "zero", "--z", "0+2i", "--z", "1+1i", "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "scatter.csv")
    assert all(float(r["T_renormalized_re"]) == 1.0 and float(r["T_renormalized_im"]) == 0.0
               for r in rows)


def test_scatter_det2_and_remainder(tmp_path):
    assert run("scatter", "--potential", "sech:a=0.5", "--z", "0+2i", "--det2",
               "--remainder", "N=1", "--z-ray", "4,8,16,32", "--out", tmp_path) == 0
    r = read_csv(tmp_path / "scatter.csv")[0]
    assert float(r["route_difference"]) < 1e-6 and float(r["det2_difference"]) < 1e-6
    rem = read_csv(tmp_path / "remainder.csv")
    assert abs(float(rem[0]["fitted_slope"]) + 2) < 0.3


def test_scatter_exit_code(tmp_path, capsys):
    assert run("scatter", "--z", "1-2i", "--out", tmp_path) == cli.EXIT_SCATTER
    assert run("scatter", "--potential", "sech2:a=-2", "--z", "0+1i", "--det2",
               "--out", tmp_path) == cli.EXIT_SCATTER
    assert "sech2:a=-2" in capsys.readouterr().err


def test_flow_default_run(tmp_path):
    assert run("flow", "--out", tmp_path, "--no-plots") == 0
    obj = json.loads((tmp_path / "diagnostics.json").read_text())
    assert obj["drift"]["H0"] < 1e-10


def test_flow_intertwining_plot(tmp_path):
    assert run("flow", "--tau0", 2, "--potential", "wave:a=0.3,b=0.1,p=0", "--t-end", 0.2,
               "--intertwining", "--out", tmp_path) == 0
    assert (tmp_path / "residuals.png").exists() and (tmp_path / "drift.png").exists()
    obj = json.loads((tmp_path / "diagnostics.json").read_text())
    assert obj["intertwining_max"]["miura"] < 1e-6
    assert obj["intertwining_max"]["good_variable"] < 1e-6


def test_flow_zero_data(tmp_path):
    assert run("flow", "--potential", "zero", "--t-end", 0.05, "--out", tmp_path, "--no-plots") == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert all(float(v) == 0.0 for r in rows for k, v in r.items() if k != "t")


def test_flow_exit_codes(tmp_path, capsys):
    assert run("flow", "--n", 2, "--integrator", "rk4", "--out", tmp_path) == cli.EXIT_FLOW
    assert run("flow", "--family", "kdv", "--grid", 64, "--dt", 0.05, "--t-end", 2,
               "--potential", "wave:a=50,b=0", "--out", tmp_path) == cli.EXIT_FLOW
    assert "last good time" in capsys.readouterr().err


def test_determinism(tmp_path):
    args = ["--potential", "wave:a=0.3,b=0.1,p=0", "--t-end", 0.05, "--intertwining", "--no-plots"]
    a, b = tmp_path / "a", tmp_path / "b"
    run("flow", *args, "--out", a)
    run("flow", *args, "--out", a)  # rerun in place
    snap = {f: (a / f).read_bytes() for f in os.listdir(a)}
    run("flow", *args, "--out", a)
    assert snap == {f: (a / f).read_bytes() for f in os.listdir(a)}
    run("scatter", "--z", "1+2i", "--out", b)
    first = (b / "scatter.json").read_bytes()
    run("scatter", "--z", "1+2i", "--out", b)
    assert (b / "scatter.json").read_bytes() == first
    assert not [f for f in os.listdir(a) if ".tmp" in f]


def test_threads_env(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert cli.threads() == 1
    monkeypatch.setenv(cli.THREADS_ENV, "junk")
    assert cli.threads() >= 1


def test_parse_z():
    assert cli.parse_z("1+2i") == 1 + 2j
    assert cli.parse_z("4i") == 4j
    assert cli.format_z(2j) == "0+2i"


def test_verify_symbolic_and_fault(tmp_path, capsys):
    assert run("verify", "--suite", "symbolic", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") >= 40
    rep = json.loads((tmp_path / "verify-symbolic.json").read_text())
    assert rep["passed"]
    assert run("verify", "--suite", "symbolic", "--inject-fault", "kdv-H2",
               "--out", tmp_path) == cli.EXIT_VERIFY
    assert "FAILED lenard.recursion.H2" in capsys.readouterr().err


def test_usage_error():
    with pytest.raises(SystemExit) as ei:
        cli.main(["gen", "--family", "nope"])
    assert ei.value.code == 2
