import csv
import json

import numpy as np
import pytest

from quadgen.cli import CSV_COLUMNS, BenchmarkSpec, ConfigError, main, measure_from_config
from quadgen.orthopoly import gauss_rule, recurrence_coefficients, uniform


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def uniform_1d(tmp_path):
    return write_json(tmp_path / "m.json", {"schema": "quadgen.measure/1", "type": "uniform", "dim": 1})


# ---------------------------------------------------------------- indexset / gauss / moments

def test_indexset_table_row(tmp_path, capsys):
    out = tmp_path / "lam.json"
    assert main(["indexset", "--dim", "2", "--degree", "20", "--half-set", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["size"] == 231 and data["heuristic"] == 77 and data["L"] == 66


def test_indexset_anova_stdout(capsys):
    assert main(["indexset", "--dim", "4", "--degree", "3", "--anova-order", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["size"] == 1 + 4 * 3


def test_gauss_matches_golub_welsch(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gauss", "--points", "5", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    ref = gauss_rule(recurrence_coefficients(uniform(), 6), 5)
    assert data["schema"] == "quadgen.gauss/1"
    assert np.allclose(data["nodes"], ref.nodes, atol=1e-15)
    assert np.allclose(data["weights"], ref.weights, atol=1e-15)


def test_gauss_radau(capsys):
    assert main(["gauss", "--points", "3", "--radau", "1.5"]) == 0
    assert sum(json.loads(capsys.readouterr().out)["weights"]) == pytest.approx(1.0, abs=1e-14)


def test_moments_unit_vector(tmp_path, capsys):
    cfg = write_json(tmp_path / "m.json", {"type": "uniform", "dim": 2})
    assert main(["moments", "--measure", cfg, "--degree", "3"]) == 0
    m = json.loads(capsys.readouterr().out)["moments"]
    assert len(m) == 10 and m[0] == pytest.approx(1.0) and np.allclose(m[1:], 0, atol=1e-14)


# ---------------------------------------------------------------- generate / verify

def test_generate_gauss_rule_and_verify(tmp_path, uniform_1d, capsys):
    out, init = tmp_path / "r.json", tmp_path / "init.json"
    assert main(["generate", "--measure", uniform_1d, "--degree", "9", "--out", str(out),
                 "--dump-initial", str(init)]) == 0
    rule = json.loads(out.read_text())
    ref = gauss_rule(recurrence_coefficients(uniform(), 6), 5)
    nodes = np.sort(np.asarray(rule["nodes"])[:, 0])
    assert len(nodes) == 5 and np.allclose(nodes, ref.nodes, atol=1e-8)
    assert init.exists() and json.loads(init.read_text())["nodes"]
    capsys.readouterr()
    assert main(["verify", str(out), "--table"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["positive"] and rep["inside"] and "table" in rep


def test_generate_byte_identical(tmp_path):
    cfg = write_json(tmp_path / "m.json", {"type": "uniform", "dim": 2})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["generate", "--measure", cfg, "--degree", "4", "--seed", "3", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_fails_on_tampered_rule(tmp_path, uniform_1d, capsys):
    out = tmp_path / "r.json"
    assert main(["generate", "--measure", uniform_1d, "--degree", "5", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    data["weights"][0] *= 1.5
    out.write_text(json.dumps(data))
    assert main(["verify", str(out)]) == 1


def test_generate_from_empirical_csv(tmp_path):
    cloud = np.random.default_rng(0).uniform(-1, 1, (200, 2))
    np.savetxt(tmp_path / "s.csv", cloud, delimiter=",")
    cfg = write_json(tmp_path / "m.json", {"type": "empirical", "csv": str(tmp_path / "s.csv"),
                                           "box": [[-1, -1], [1, 1]]})
    out = tmp_path / "r.json"
    assert main(["generate", "--measure", cfg, "--degree", "3", "--out", str(out)]) == 0
    rule = json.loads(out.read_text())
    assert len(rule["weights"]) <= 10 and min(rule["weights"]) > 0


# ---------------------------------------------------------------- errors

def test_invalid_measure_type_exits_2(tmp_path, capsys):
    cfg = write_json(tmp_path / "m.json", {"type": "bogus"})
    assert main(["generate", "--measure", cfg, "--degree", "2"]) == 2
    assert "unknown measure type" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert main(["moments", "--measure", str(tmp_path / "nope.json"), "--degree", "2"]) == 2


def test_wrong_schema():
    with pytest.raises(ConfigError):
        measure_from_config({"schema": "quadgen.measure/9", "type": "uniform", "dim": 1})


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["generate"])
    assert exc.value.code == 2


@pytest.mark.parametrize("cfg,dim", [
    ({"type": "tensor", "factors": [{"family": "jacobi", "alpha": 1, "beta": 1}, {"family": "uniform"}]}, 2),
    ({"type": "banana", "domain": "I"}, 2),
    ({"type": "ridge", "s": 2, "d": 6, "seed": 1}, 2),
])
def test_measure_configs(cfg, dim):
    assert measure_from_config(cfg).dim == dim


# ---------------------------------------------------------------- baseline / benchmark

@pytest.mark.parametrize("kind,param,size", [("stroud2", 0, 4), ("stroud3", 0, 6), ("sobol", 16, 16),
                                             ("mc", 10, 10), ("sparse_grid", 1, 6)])
def test_baseline_json(tmp_path, kind, param, size):
    # level-1 Smolyak in 3D: the centre weight is d*2/3 - (d-1) = 0 and is dropped
    out = tmp_path / "b.json"
    assert main(["baseline", "--kind", kind, "--dim", "3", "--param", str(param), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["schema"] == "quadgen.baseline/1"
    assert len(data["weights"]) == size and np.asarray(data["nodes"]).shape == (size, 3)
    assert sum(data["weights"]) == pytest.approx(1.0, abs=1e-13)


def test_benchmark_csv(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["benchmark", "--integrand", "cp", "--dim", "2", "--methods", "reduced,l1-initial,mc,stroud3",
                 "--degrees", "2-3", "--sizes", "50", "--reps", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == CSV_COLUMNS
    assert {r["method"] for r in rows} == {"reduced", "l1-initial", "mc", "stroud3"}
    red = [r for r in rows if r["method"] == "reduced"]
    assert len(red) == 4
    for r in rows:
        assert float(r["min_error"]) <= float(r["median_error"]) <= float(r["max_error"])
        assert float(r["abs_error"]) == pytest.approx(abs(float(r["estimate"]) - float(r["reference"])))


def test_benchmark_spec_file_matches_flags(tmp_path):
    spec = write_json(tmp_path / "s.json", {"integrand": "cp", "dim": 2, "methods": ["reduced"], "degrees": [2]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["benchmark", "--spec", spec, "--out", str(a)]) == 0
    assert main(["benchmark", "--methods", "reduced", "--degrees", "2", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


@pytest.mark.parametrize("kwargs", [dict(reps=0), dict(methods=["nope"]), dict(degrees=[], levels=[], sizes=[])])
def test_benchmark_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        BenchmarkSpec("cp", **kwargs)
