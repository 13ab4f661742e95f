import io as _io
import json
import math

import pytest

from privchan.cli import run_command

from conftest import FIXTURES

RR25 = str(FIXTURES / "example1_rr25.json")
QUERY = str(FIXTURES / "example1_query.json")
ORDINAL = str(FIXTURES / "ordinal_query.json")


def run(*argv):
    out, err = _io.StringIO(), _io.StringIO()
    code = run_command(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run(*argv)
    assert code == 0, err
    return json.loads(out)


def test_calibrate_rr_bits():
    doc = run_json("calibrate", "rr", "--epsilon", "0.5", "--unit", "bits")
    assert doc["p_star"] == pytest.approx(0.110028, abs=1e-5)


def test_calibrate_exp_and_gauss():
    doc = run_json("calibrate", "exp", "--k", "4", "--epsilon", "0.5")
    assert doc["bound_at_lambda_star"] == pytest.approx(0.5, abs=1e-9)
    doc = run_json("calibrate", "gauss", "--epsilon", "0.5", "--T", "1")
    assert doc["N"] == pytest.approx(0.581977, abs=1e-6)


def test_capacity_example1():
    doc = run_json("capacity", RR25, "--unit", "bits")
    assert doc["value"] == pytest.approx(0.188722, abs=1e-6)
    assert doc["argmax_individual"] == 0
    assert doc["selections_evaluated"] == [8, 9]


def test_capacity_with_oracle():
    doc = run_json("capacity", RR25, "--oracle", "--samples", "20", "--seed", "3")
    assert max(doc["oracle"]["per_individual"]) <= doc["value"] + 1e-9


def test_audit_dp():
    doc = run_json("audit", "dp", RR25, "--epsilon", "1.1")
    assert doc["pass"] is True
    assert doc["epsilon_star"] == pytest.approx(1.098612, abs=1e-6)
    fail = run_json("audit", "dp", RR25, "--epsilon", "1.0")
    assert fail["pass"] is False
    assert fail["witness"]["individual"] == 0


def test_audit_ip():
    assert run_json("audit", "ip", RR25, "--epsilon", "0.2", "--unit", "bits")["pass"] is True
    assert run_json("audit", "ip", RR25, "--epsilon", "0.1", "--unit", "bits")["pass"] is False


def test_balance():
    doc = run_json("balance", RR25, "--b-grid", "0,0.5,1,1.5", "--restarts", "2")
    assert doc["points"][0]["delta_upper_estimate"] == 0
    env = [pt["delta_envelope"] for pt in doc["points"]]
    assert env == sorted(env)


def test_compare_noise():
    doc = run_json(
        "compare-noise", "--epsilon-dp", "1", "--delta-prime", "1e-5", "--delta-f", "1",
        "--T", "1", "--epsilon-ip", "1",
    )
    scales = doc["scales"]
    assert scales["laplace_mechanism"]["scale"] == 1.0
    assert scales["gaussian_mechanism"]["scale"] == pytest.approx(4.8448, abs=1e-3)
    assert scales["gaussian_privacy_channel"]["scale"] == pytest.approx(
        1 / math.sqrt(math.expm1(2)), abs=1e-12
    )


def test_mech_rr_reproduces_fixture(tmp_path):
    out = tmp_path / "rr.json"
    code, _, err = run("mech", "rr", QUERY, "--p", "0.25", "--name", "example1-rr25", "--out", str(out))
    assert code == 0, err
    assert out.read_bytes() == (FIXTURES / "example1_rr25.json").read_bytes()


def test_mech_exp_lambda_and_N_agree():
    a = run("mech", "exp", ORDINAL, "--N", "2")[1]
    b = run("mech", "exp", ORDINAL, "--lambda", "0.5")[1]
    assert a == b


def test_mech_gauss():
    doc = run_json("mech", "gauss", QUERY, "--N", "0.58", "--T", "1", "--grid=-7,7,0.1")
    assert doc["output_size"] == 140


def test_mech_gauss_needs_values():
    code, _, err = run("mech", "gauss", ORDINAL, "--N", "1", "--T", "1", "--grid=-7,7,0.1")
    assert code == 3
    assert "/values" in err


def test_table_format_has_no_color_when_not_tty():
    code, out, _ = run("capacity", RR25, "--format", "table")
    assert code == 0
    assert "\033[" not in out
    assert out.splitlines()[-1].startswith("value")


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["capacity"],
        ["capacity", RR25, "--frobnicate"],
        ["capacity", RR25, "--seed", "-1"],
        ["capacity", RR25, "--seed", str(2**64)],
        ["mech", "exp", ORDINAL, "--N", "1", "--lambda", "1"],
    ],
)
def test_usage_errors(argv):
    code, out, err = run(*argv)
    assert code == 2
    assert out == ""
    assert err


@pytest.mark.parametrize(
    "name",
    [
        "bad_sum.json",
        "negative_entry.json",
        "empty_universes.json",
        "wrong_row_length.json",
        "not_json.json",
        "unknown_key.json",
    ],
)
def test_malformed_fixtures_exit_3(name):
    code, out, err = run("capacity", str(FIXTURES / name))
    assert code == 3
    assert out == ""
    assert err.startswith("error: /")


def test_domain_error_exit_3():
    assert run("calibrate", "rr", "--epsilon", "-1")[0] == 3
    assert run("mech", "rr", QUERY, "--p", "1.5")[0] == 3


def test_enumeration_cap_exit_5():
    code, _, err = run("capacity", RR25, "--enum-cap", "4")
    assert code == 5
    assert "exceeds cap" in err


def test_convergence_exit_4(tmp_path):
    path = tmp_path / "slow.json"
    path.write_text(
        '{"universes": [3], "output_size": 2, "matrix": [[0.9, 0.5, 0.1], [0.1, 0.5, 0.9]]}'
    )
    code, _, err = run("capacity", str(path), "--tol", "1e-14", "--max-iter", "3")
    assert code == 4
    assert "did not converge" in err or "after 3 iterations" in err


def test_missing_file_exit_3(tmp_path):
    assert run("capacity", str(tmp_path / "nope.json"))[0] == 3


def test_main_entry_point(monkeypatch, capsys):
    from privchan import cli

    monkeypatch.setattr("sys.argv", ["privchan", "calibrate", "gauss", "--epsilon", "0.5", "--T", "1"])
    with pytest.raises(SystemExit) as info:
        cli.main()
    assert info.value.code == 0
    assert json.loads(capsys.readouterr().out)["mechanism"] == "gauss"
