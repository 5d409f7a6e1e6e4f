import json
import subprocess
import sys

import numpy as np
import pytest

from ncprob.cli import main
from ncprob.cumulants import MONOTONE, make_nu
from ncprob.dist import (RealizedCP, random_cp, random_hermitian,
                         tensor_to_json, tensor_from_json, _nested_complex)
from ncprob.matalg import matrix_to_json


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _arcsine_file(tmp_path, name="arcsine.json"):
    unit = RealizedCP(1, 1, np.zeros((1, 1)), np.ones((1, 1)))
    m = make_nu(np.zeros((1, 1)), unit, MONOTONE, 6)
    return _write(tmp_path, name, tensor_to_json(m))


def _cp_file(tmp_path, rng, d=2, k=2, with_gamma=True, name="gen.json"):
    cp = random_cp(rng, d, k)
    obj = {"type": "cp", "d": d, "k": k,
           "A": _nested_complex(cp.A), "V": _nested_complex(cp.V)}
    if with_gamma:
        obj["gamma"] = _nested_complex(random_hermitian(rng, d, 0.3))
    return _write(tmp_path, name, obj)


def test_cumulants_command_arcsine(tmp_path, capsys):
    src = _arcsine_file(tmp_path)
    out = tmp_path / "cum.json"
    rc = main(["cumulants", "--in", src, "--species", "monotone",
               "--out", str(out)])
    assert rc == 0
    blob = json.loads(out.read_text())
    assert blob["header"]["command"] == "cumulants"
    assert blob["header"]["seed"] == 0
    assert blob["species"] == "monotone"
    c = tensor_from_json(blob)
    assert c.map_for(2).reshape(-1)[0].real == pytest.approx(1.0)
    for n in (1, 3, 4, 5, 6):
        assert np.abs(c.map_for(n)).max() < 1e-12


def test_outputs_byte_identical(tmp_path):
    src = _arcsine_file(tmp_path)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["cumulants", "--in", src, "--species", "free",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_convolve_matches_power(tmp_path):
    src = _arcsine_file(tmp_path)
    conv, pow2 = tmp_path / "conv.json", tmp_path / "pow.json"
    assert main(["convolve", "--in", src, src, "--species", "monotone",
                 "--out", str(conv)]) == 0
    assert main(["power", "--in", src, "--k", "2", "--out",
                 str(pow2)]) == 0
    m1 = tensor_from_json(json.loads(conv.read_text()))
    m2 = tensor_from_json(json.loads(pow2.read_text()))
    assert m1.distance(m2) < 1e-12


def test_power_with_eta_matrix(tmp_path):
    src = _arcsine_file(tmp_path)
    eta = _write(tmp_path, "eta.json",
                 matrix_to_json(3.0 * np.eye(1)))
    o1, o2 = tmp_path / "o1.json", tmp_path / "o2.json"
    assert main(["power", "--in", src, "--eta", eta, "--out", str(o1)]) == 0
    assert main(["power", "--in", src, "--k", "3", "--out", str(o2)]) == 0
    m1 = tensor_from_json(json.loads(o1.read_text()))
    m2 = tensor_from_json(json.loads(o2.read_text()))
    assert m1.distance(m2) == 0.0


def test_flow_trajectory(tmp_path):
    rng = np.random.default_rng(41)
    gen = _cp_file(tmp_path, rng)
    point = _write(tmp_path, "b.json", matrix_to_json(2j * np.eye(2)))
    rk, pc = tmp_path / "rk.json", tmp_path / "pc.json"
    assert main(["flow", "--generator", gen, "--point", point,
                 "--t-max", "1.0", "--dt", "0.00390625",
                 "--out", str(rk)]) == 0
    assert main(["flow", "--generator", gen, "--point", point,
                 "--method", "picard", "--grid-steps", "512",
                 "--out", str(pc)]) == 0
    t1 = json.loads(rk.read_text())
    t2 = json.loads(pc.read_text())
    assert t1["method"] == "rk4" and t2["method"] == "picard"
    assert t1["t_grid"][0] == 0.0 and t1["t_grid"][-1] == 1.0
    last1 = np.asarray(t1["values"][-1]["re"]) \
        + 1j * np.asarray(t1["values"][-1]["im"])
    last2 = np.asarray(t2["values"][-1]["re"]) \
        + 1j * np.asarray(t2["values"][-1]["im"])
    assert np.abs(last1 - last2).max() < 1e-5


def test_missing_file_exits_2(tmp_path, capsys):
    rc = main(["cumulants", "--in", str(tmp_path / "nope.json"),
               "--species", "free"])
    assert rc == 2
    assert "no such file" in capsys.readouterr().err


def test_schema_violation_exits_2_with_path(tmp_path, capsys):
    bad = _write(tmp_path, "bad.json",
                 {"type": "moments", "d": 1})     # maps/N missing
    rc = main(["cumulants", "--in", bad, "--species", "free"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "bad.json" in err and "$" in err


def test_malformed_json_exits_2_with_line(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"type": "moments",,}')
    rc = main(["cumulants", "--in", str(p), "--species", "free"])
    assert rc == 2
    assert "line 1" in capsys.readouterr().err


def test_flow_numerical_failure_exits_3(tmp_path, capsys):
    gen = _write(tmp_path, "g1.json", {
        "type": "cp", "d": 1, "k": 1,
        "A": _nested_complex(np.zeros((1, 1))),
        "V": _nested_complex(np.ones((1, 1))),
        "gamma": _nested_complex(np.zeros((1, 1)))})
    point = _write(tmp_path, "pt.json",
                   matrix_to_json(0.3j * np.eye(1)))
    report = tmp_path / "fail.json"
    rc = main(["flow", "--generator", gen, "--point", point,
               "--t-max", "1.0", "--dt", "0.5", "--out", str(report)])
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err
    blob = json.loads(report.read_text())
    assert "error" in blob and blob["header"]["command"] == "flow"


def test_bp_scalar_clt(tmp_path):
    out, csv_path = tmp_path / "bp.json", tmp_path / "bp.csv"
    rc = main(["bp", "--scalar-seed", "clt",
               "--schedule", "2,4,8,16,32,64",
               "--out", str(out), "--csv", str(csv_path)])
    assert rc == 0
    blob = json.loads(out.read_text())
    for s in ("classical", "free", "monotone"):
        assert -1.2 < blob["species"][s]["slope"] < -0.8
    assert blob["species"]["boolean"]["exact"]
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "species,k,order,distance,slope"
    assert len(lines) == 1 + 4 * 6 * 6


def test_bp_matrix_scalar_sigma(tmp_path):
    out = tmp_path / "bp2.json"
    rc = main(["bp", "--gamma", "0.3", "--sigma", "unit",
               "--schedule", "2,4,8,16,32,64", "--out", str(out)])
    assert rc == 0
    blob = json.loads(out.read_text())
    for s in ("free", "monotone"):
        assert -1.2 < blob["species"][s]["slope"] < -0.8
    assert blob["species"]["boolean"]["exact"]
    assert blob["header"]["options"]["gamma"] == "0.3"


def test_bp_rejects_bad_seed(capsys):
    assert main(["bp", "--scalar-seed", "cauchy"]) == 2


def test_recover_sigma_command(tmp_path):
    rng = np.random.default_rng(55)
    gen = _cp_file(tmp_path, rng, with_gamma=False, name="sig.json")
    w1 = _write(tmp_path, "w1.json",
                matrix_to_json(random_hermitian(rng, 2)))
    w2 = _write(tmp_path, "w2.json",
                matrix_to_json(random_hermitian(rng, 2)))
    out = tmp_path / "rec.json"
    rc = main(["recover-sigma", "--sigma", gen, "--word", w1, w2,
               "--out", str(out)])
    assert rc == 0
    blob = json.loads(out.read_text())
    assert blob["max_error"] < 1e-8


def test_evolution_check_command(tmp_path):
    src = _arcsine_file(tmp_path)
    out = tmp_path / "ev.json"
    rc = main(["evolution-check", "--in", src, "--t-grid", "0.3,1,2",
               "--out", str(out)])
    assert rc == 0
    blob = json.loads(out.read_text())
    assert blob["residual"] < 1e-10
    assert blob["t_grid"] == [0.3, 1.0, 2.0]


def test_cumulants_rejects_cp_input(tmp_path, capsys):
    rng = np.random.default_rng(66)
    gen = _cp_file(tmp_path, rng)
    rc = main(["cumulants", "--in", gen, "--species", "free"])
    assert rc == 2
    assert "expected a law" in capsys.readouterr().err


def test_seed_recorded_in_header(tmp_path):
    src = _arcsine_file(tmp_path)
    out = tmp_path / "c.json"
    assert main(["--seed", "7", "cumulants", "--in", src,
                 "--species", "free", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["header"]["seed"] == 7


def test_module_entry_point(tmp_path):
    src = _arcsine_file(tmp_path)
    out = tmp_path / "m.json"
    res = subprocess.run(
        [sys.executable, "-m", "ncprob.cli", "cumulants", "--in", src,
         "--species", "boolean", "--out", str(out)],
        capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(out.read_text())["species"] == "boolean"


def test_usage_error_nonzero(capsys):
    assert main(["frobnicate"]) != 0
