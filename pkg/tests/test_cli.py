import json

import pytest

from reflectdiff.cli import main

COARSE = ["--dt", "0.01", "--delta", "0.02"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_conecheck_fixtures(tmp_path, capsys):
    js = tmp_path / "c.json"
    code, out, _ = run(["conecheck", "--scenario", "lens", "--samples", "40", "--point", "0,0",
                        "--json", str(js)], capsys)
    assert code == 0 and "41/41" in out
    rep = json.loads(js.read_text())
    assert rep["n_points"] == 41 and rep["n_failed"] == 0 and rep["min_margin"] > 0
    code, _, _ = run(["conecheck", "--scenario", "cusp", "--samples", "0", "--point", "0,0"],
                     capsys)
    assert code == 0


def test_conecheck_failure_exit_code(tmp_path, capsys):
    from reflectdiff.fixtures import cusp_domain_split
    from reflectdiff.scenario import load_scenario
    d = load_scenario("cusp").to_dict()
    d["domain"] = cusp_domain_split().to_dict()
    path = tmp_path / "split.json"
    path.write_text(json.dumps(d))
    code, out, _ = run(["conecheck", "--scenario", str(path), "--samples", "0",
                        "--point", "0,0"], capsys)
    assert code == 1 and "0/1" in out


def test_simulate_outputs_are_bitwise_reproducible(tmp_path, capsys):
    outs = []
    for k, workers in enumerate(["1", "1", "3"]):
        prefix = tmp_path / f"run{k}"
        code, _, _ = run(["simulate", "--scenario", "lens", *COARSE, "--seed", "5", "--paths",
                          "4", "--lambda0-target", "0.5", "--emit", "constrained", "--workers",
                          workers, "--out", str(prefix)], capsys)
        assert code == 0
        outs.append(((tmp_path / f"run{k}_summary.csv").read_bytes(),
                     (tmp_path / f"run{k}_paths.json").read_bytes()))
    assert outs[0] == outs[1]
    # the worker count is recorded, so only the path rows must match across counts
    assert outs[0][0] == outs[2][0]
    a, b = json.loads(outs[0][1]), json.loads(outs[2][1])
    assert a["paths"] == b["paths"] and b["meta"]["workers"] == 3


@pytest.mark.parametrize("emit", ["summary", "controlled", "sder"])
def test_simulate_modes(emit, tmp_path, capsys):
    code, out, _ = run(["simulate", "--scenario", "cusp", *COARSE, "--paths", "2",
                        "--lambda0-target", "0.3", "--emit", emit, "--out", "-"], capsys)
    assert code == 0 and out.startswith("path,")
    code, out, _ = run(["simulate", "--scenario", "cusp", *COARSE, "--paths", "2", "--mode",
                        "sder", "--lambda0-target", "0.3", "--out", "-"], capsys)
    assert code == 0 and "decomposition_residual" in out


def test_resolvent_and_viscosity(tmp_path, capsys):
    js = tmp_path / "r.json"
    code, out, _ = run(["resolvent", "--scenario", "half_line", *COARSE, "--h", "const:1",
                        "--paths", "20", "--horizon", "5", "--json", str(js)], capsys)
    assert code == 0 and "resolvent[constrained]" in out
    rep = json.loads(js.read_text())
    assert rep["agreement"]["passes"] and rep["controlled"]["seed"] + 1 == rep["constrained"]["seed"]
    code, _, _ = run(["resolvent", "--scenario", "half_line", *COARSE, "--h", "const:1",
                      "--paths", "20", "--horizon", "5", "--reference", "0.5"], capsys)
    assert code == 1
    grid = tmp_path / "g.json"
    code, _, _ = run(["resolvent", "--scenario", "half_line", *COARSE, "--h", "exp:-1",
                      "--paths", "10", "--horizon", "5", "--spacing", "2.5",
                      "--grid-out", str(grid)], capsys)
    assert code == 0 and len(json.loads(grid.read_text())["values"]) == 5
    code, out, _ = run(["viscosity", "--scenario", "half_line", "--grid", str(grid), "--f",
                        "const:0", "--h", "exp:-1", "--tol", "10"], capsys)
    assert code == 0 and "subsolution" in out


def test_markov_and_converge(tmp_path, capsys):
    csv = tmp_path / "m.csv"
    code, out, _ = run(["markov-test", "--scenario", "half_line", *COARSE, "--rule", "fixed:0.3",
                        "--paths", "100", "--x0", "0.5", "--seed", "1", "--csv", str(csv)],
                       capsys)
    assert code == 0 and "pass" in out
    assert csv.read_text().startswith("cell,n,lag,coord,ks,p")
    code, out, _ = run(["converge", "--scenario", "lens", "--ladder", "0.01,0.004",
                        "--metric", "clock", "--paths", "3", "--horizon", "0.3"], capsys)
    assert code == 0 and out.count("converge[clock]") == 2


@pytest.mark.parametrize("argv", [
    ["conecheck", "--scenario", "missing_scenario"],
    ["simulate", "--scenario", "lens", "--x0", "a,b"],
    ["simulate", "--scenario", "lens", "--dt", "0.01", "--delta", "0.5"],
    ["resolvent", "--scenario", "lens", "--h", "sin:1"],
    ["viscosity", "--scenario", "lens", "--grid", "/nonexistent.json", "--f", "const:0",
     "--h", "const:0"],
    ["markov-test", "--scenario", "half_line", "--rule", "exit:1"],
    ["markov-test", "--scenario", "half_line", "--rule", "{broken"],
    ["converge", "--scenario", "lens", "--ladder", "0.01", "--metric", "clock"],
    ["converge", "--scenario", "lens", "--ladder", "x,y", "--metric", "clock"],
])
def test_input_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and "error" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 2


def test_worker_env_default(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("REFLECTDIFF_WORKERS", "2")
    js = tmp_path / "r.json"
    code, _, _ = run(["resolvent", "--scenario", "half_line", *COARSE, "--h", "const:1",
                      "--paths", "4", "--horizon", "1", "--json", str(js)], capsys)
    assert code == 0 and json.loads(js.read_text())["workers"] == 2
    monkeypatch.setenv("REFLECTDIFF_WORKERS", "many")
    code, _, _ = run(["resolvent", "--scenario", "half_line", *COARSE, "--h", "const:1",
                      "--paths", "4"], capsys)
    assert code == 2
