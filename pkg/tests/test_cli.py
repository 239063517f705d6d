import json
import subprocess
import sys

import pytest

from fcmono.cli import dumps, main
from fcmono.params import generic_params
from fcmono.relations import gauss_params


@pytest.fixture
def params_file(tmp_path):
    def write(P, name="p.json"):
        path = tmp_path / name
        path.write_text(json.dumps(P.to_json()))
        return str(path)

    return write


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


def test_locus(capsys):
    code, doc = _run(["locus", "--p", "2", "--m", "2"], capsys)
    assert code == 0
    assert doc["n_terms"] == 6 and all(isinstance(v, int) for v in doc["polynomial"].values())
    assert doc["manifest"]["convention"]["product_ordering"] == "ascending"


def test_emit_poly(tmp_path, capsys):
    out = tmp_path / "R.json"
    assert main(["locus", "--p", "3", "--m", "2", "--emit-poly", str(out)]) == 0
    assert json.loads(out.read_text())["0,0"] == 1


def test_unknown_flag_is_usage_error(capsys):
    assert main(["locus", "--p", "2", "--m", "2", "--frobnicate"]) == 2
    assert main(["nonsense"]) == 2


def test_bad_point_is_usage_error(params_file, capsys):
    f = params_file(gauss_params())
    assert main(["series", "--params", f, "--x", "0.1"]) == 2
    assert "RE,IM" in capsys.readouterr().err


def test_series_and_complex_pairs(params_file, capsys):
    code, doc = _run(["series", "--params", params_file(gauss_params()), "--x", "0.1,0.0"], capsys)
    assert code == 0
    assert len(doc["value"]) == 2 and doc["N_used"] > 0
    assert len(doc["manifest"]["params_sha256"]) == 64


def test_operators_table(params_file, capsys):
    code, doc = _run(["operators", "--params", params_file(generic_params(2, 2)), "--check-annihilation"], capsys)
    assert code == 0
    assert len(doc["annihilation"]["table"]) == 2 * 4
    assert doc["annihilation"]["max_residual"] < 1e-12


def test_loops_dump(capsys):
    code, doc = _run(["loops", "--p", "2", "--m", "2", "--emit", "r0 r1^-1", "--samples", "8"], capsys)
    assert code == 0
    assert len(doc["t"]) == len(doc["point"]) == len(doc["distance"])
    assert min(doc["distance"]) > 0


def test_pfaffian(params_file, capsys):
    code, doc = _run(["pfaffian", "--params", params_file(generic_params(2, 2)), "--x", "0.02,0.01;0.01,0"], capsys)
    assert code == 0
    assert len(doc["C"]) == 2 and len(doc["C"][0]) == 4
    assert doc["integrability_residual"] < 1e-6


def test_monodromy_cached(params_file, capsys):
    code, doc = _run(["monodromy", "--params", params_file(gauss_params()), "--word", "r0 r1", "--cache-generators"], capsys)
    assert code == 0 and doc["mode"] == "product"
    assert set(doc["generators"]) == {"M0", "M1"}


def test_verify_gauss_exit_zero(params_file, tmp_path, capsys):
    out = tmp_path / "rep.json"
    assert main(["verify", "--params", params_file(gauss_params()), "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and doc["manifest"]["command"] == "verify"


def test_verify_invalid_params_exit_two(params_file, capsys):
    from fcmono.params import Params

    bad = Params.from_arrays([0.2, 0.3], [[2.0], [1.0]])
    assert main(["verify", "--params", params_file(bad)]) == 2


def test_unknown_check_is_usage_error(params_file, capsys):
    assert main(["verify", "--params", params_file(gauss_params()), "--checks", "braid"]) == 2


def test_output_is_byte_identical(params_file):
    f = params_file(generic_params(2, 1))
    cmd = [sys.executable, "-m", "fcmono", "monodromy", "--params", f, "--word", "r0 r1^-1"]
    outs = [subprocess.run(cmd, capture_output=True, check=True, env={"FC_THREADS": "2"}).stdout for _ in range(2)]
    assert outs[0] == outs[1] and outs[0]


def test_float_format():
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(1.0) == "1.0"
    assert dumps(complex(1, -2)) == "[1.0, -2.0]"
    assert dumps({"b": 1, "a": [float("nan")]}) == '{\n  "b": 1,\n  "a": [null]\n}'
