import json

import pytest

from qdchain.cli import fmt, main, parse_config, to_csv, to_json
from qdchain.errors import ParameterError, SchemaError

G = {"r": 2, "s": 1, "q": 0.5, "alpha": [1, 1], "phi": 0.5}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_parse_defaults():
    cfg = parse_config(json.dumps(G))
    assert cfg.params.kappa == pytest.approx(4.5)
    assert (cfg.window.n_min, cfg.window.n_max) == (-60, 60)
    assert cfg.tol == 1e-10 and cfg.levels == 8 and cfg.seed == 0
    assert cfg.params.epsilon == -1


@pytest.mark.parametrize("change,exc", [
    ({"q": 1.5}, ParameterError), ({"r": 3}, ParameterError), ({"extra": 1}, SchemaError),
    ({"window": {"nmin": 0, "nmax": 9, "step": 1}}, SchemaError), ({"q": "half"}, SchemaError),
    ({"tol": -1}, ParameterError), ({"strategy": "guess"}, ParameterError),
])
def test_parse_rejects(change, exc):
    with pytest.raises(exc):
        parse_config(json.dumps(dict(G, **change)))


def test_schema_error_has_path():
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(dict(G, window={"nmin": 0, "nmax": 9, "bad": 1})))
    assert err.value.path == "window.bad"


def test_number_format():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(1 / 3)) == 1 / 3
    assert fmt(3) == "3" and fmt(True) == "true"
    assert to_json({"b": [1.5, 2], "a": None}) == '{\n  "a": null,\n  "b": [1.5, 2]\n}'
    assert to_csv(["x", "y"], [(1, 0.5)]) == "x,y\n1,0.5\n"


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, G)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["kappa"]["kind"] == "open-interval"
    assert max(rep["residuals"].values()) <= 1e-12


def test_validate_bad_kappa(tmp_path, capsys):
    code = main(["validate", "--config", write(tmp_path, dict(G, kappa=5.5))])
    err = json.loads(capsys.readouterr().err)
    assert code == 1
    assert err["bound"] == "upper" and err["min_radicand"]["value"] < 0


def test_spectrum_levels(tmp_path, capsys):
    assert main(["spectrum", "--config", write(tmp_path, G), "--levels", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("lambda")
    first = [float(line.split(",")[0]) for line in lines[1:6]]
    assert first == [0, 0.5, 0.75, 0.875, 0.9375]


def test_spectrum_writes_files(tmp_path):
    out = tmp_path / "out"
    assert main(["spectrum", "--config", write(tmp_path, G), "--out", str(out)]) == 0
    assert (out / "spectrum.csv").exists() and (out / "eigenfunctions.csv").exists()
    assert b"\r" not in (out / "spectrum.csv").read_bytes()


def test_verify_report(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--config", write(tmp_path, G), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    for key in ("params", "residuals", "kappa", "spectrum", "completeness_defect", "timings_ms"):
        assert key in rep
    assert rep["spectrum"]["max_abs_diff"] <= 1e-8
    assert set(rep["residuals"]) == {"eq2_j1", "eq2_j2", "eq3"}


def test_verify_deterministic(tmp_path):
    cfg = write(tmp_path, G)
    for d in ("a", "b"):
        assert main(["verify", "--config", cfg, "--out", str(tmp_path / d), "--seed", "3"]) == 0
    assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()


def test_limit_csv(tmp_path, capsys):
    doc = {"r": 2, "alpha": [3, 1], "hsweep": [0.2, 0.1]}
    assert main(["limit", "--config", write(tmp_path, doc)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "h,q,error,error_over_h" and len(rows) == 3


def test_solve_r6(tmp_path):
    doc = {"r": 6, "s": 3, "q": 0.8, "alpha": [1] * 6, "phi": 0,
           "window": {"nmin": -30, "nmax": 30}}
    out = tmp_path / "s"
    assert main(["solve", "--config", write(tmp_path, doc), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["solver"]["converged"] and rep["solver"]["residual"] <= 1e-8


def test_solve_nonconvergence_exit_code(tmp_path, capsys):
    # a tolerance below rounding can never be met
    doc = {"r": 4, "s": 2, "q": 0.5, "alpha": [1] * 4, "phi": 0,
           "window": {"nmin": -10, "nmax": 10}, "tol": 1e-300}
    code = main(["solve", "--config", write(tmp_path, doc)])
    err = capsys.readouterr().err
    assert code == 2
    assert json.loads(err)["error"] in ("not_converged", "singular_jacobian")


def test_window_too_small_exit_code(tmp_path, capsys):
    doc = {"r": 6, "s": 3, "q": 0.5, "alpha": [1] * 6, "phi": 0,
           "window": {"nmin": -8, "nmax": 8}}
    assert main(["solve", "--config", write(tmp_path, doc)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "window_too_small"


def test_missing_file(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "none.json")]) == 1
    assert "error" in json.loads(capsys.readouterr().err)
