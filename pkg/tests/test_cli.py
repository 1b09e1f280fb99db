import csv
import io
import json
from unittest.mock import patch

import pytest

from scaffolds import cli

pytestmark = pytest.mark.unit

B37_TOWER = {
    "p": 2,
    "n": 2,
    "beta": {"terms": [[-3, [1]]]},
    "omegas": [{"terms": [[0, [1]]]}, {"terms": [[-1, [1]]]}],
}

B33_TOWER = {
    "p": 2,
    "d": 2,
    "n": 2,
    "beta": {"terms": [[-3, [1, 0]]]},
    "omegas": [{"terms": [[0, [1, 0]]]}, {"terms": [[0, [0, 1]]]}],
}


def _write_json(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_analyze_writes_report(tmp_path, capsys):
    src = _write_json(
        tmp_path, "profile.json", {"p": 2, "n": 2, "lower": [3, 7], "char_mode": "char_0", "v0p": 4}
    )
    out = tmp_path / "report.json"
    assert cli.run_command(["analyze", src, "-o", str(out)]) == cli.EXIT_OK
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["assumptions"]["tolerance"] == 3
    assert report["breaks"]["breaks_upper"] == [3, 5]
    assert "[analyze]" in capsys.readouterr().out


def test_summary_goes_to_stderr_without_output_file(tmp_path, capsys):
    src = _write_json(tmp_path, "profile.json", {"p": 2, "n": 1, "lower": [3]})
    assert cli.run_command(["analyze", src]) == cli.EXIT_OK
    captured = capsys.readouterr()
    assert json.loads(captured.out)["breaks"]["breaks_lower"] == [3]
    assert "[analyze]" in captured.err


def test_scaffold_exact(tmp_path, capsys):
    src = _write_json(tmp_path, "tower.json", B37_TOWER)
    assert cli.run_command(["scaffold", src, "--mode", "exact"]) == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["cases_failed"] == 0


def test_build(tmp_path, capsys):
    src = _write_json(tmp_path, "tower.json", B37_TOWER)
    assert cli.run_command(["build", src]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["bruteforce_breaks"] == [3, 7]


def test_reports_name_their_criteria(tmp_path, capsys):
    tower_src = _write_json(tmp_path, "tower.json", B37_TOWER)
    assert cli.run_command(["build", tower_src]) == cli.EXIT_OK
    built = json.loads(capsys.readouterr().out)
    assert built["criteria"]["path_sum_bound"] == "path-sum-bound"
    assert built["criteria"]["omega_inverse"] == "omega-inverse-identity"
    assert set(built["checks"]) <= set(built["criteria"])

    assert cli.run_command(["scaffold", tower_src, "--gap", "2"]) == cli.EXIT_OK
    verified = json.loads(capsys.readouterr().out)
    assert verified["criterion"] == "scaffold-theorem"
    assert verified["perturbed"]["criterion"] == "perturbation-bound"

    hopf_src = _write_json(tmp_path, "hopf.json", {"tower": B33_TOWER})
    assert cli.run_command(["hopf", hopf_src]) == cli.EXIT_OK
    criteria = json.loads(capsys.readouterr().out)["verification"]["criteria"]
    assert criteria == {"stabilization": "hopf-stabilization", "freeness": "hopf-freeness"}


def test_freeness_out_of_scope_is_not_an_error(tmp_path, capsys):
    src = _write_json(
        tmp_path,
        "family.json",
        {
            "family": "abrashkin",
            "params": {"p": 2, "n": 2, "u": 2, "v0p": 4, "char_mode": "char_0"},
        },
    )
    assert cli.run_command(["freeness", src]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["status"] == "OutOfScope"


def test_freeness_family_flag_overrides(tmp_path, capsys):
    src = _write_json(tmp_path, "family.json", {"params": {"b1": 1, "b2": 1, "v0p": 1}})
    assert cli.run_command(["freeness", src, "--family", "martel"]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["status"] == "Free"


def test_hopf_failure_exit_code(tmp_path):
    src = _write_json(tmp_path, "hopf.json", {"tower": B33_TOWER, "M": [3, 1]})
    out = tmp_path / "hopf-report.json"
    assert cli.run_command(["hopf", src, "-o", str(out)]) == cli.EXIT_CHECK_FAILED
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["verification"]["stabilization"] is False


def test_hopf_parameters(tmp_path, capsys):
    src = _write_json(tmp_path, "hopf.json", {"p": 2, "n": 3, "M": [4, 2, 1]})
    assert cli.run_command(["hopf", src]) == cli.EXIT_INPUT_ERROR
    assert "p_divides_M3" in capsys.readouterr().err
    assert cli.run_command(["hopf", src, "--no-strict"]) == cli.EXIT_OK


def test_sweep_biquadratic_csv(tmp_path):
    out = tmp_path / "table.csv"
    assert cli.run_command(["sweep", "--family", "biquadratic", "-o", str(out)]) == cli.EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text(encoding="utf-8"))))
    table = [r for r in rows if r["kind"] == "table"]
    assert [(r["b"], r["h"], r["L1"], r["L2"]) for r in table][:2] == [
        ("1", "1", "4", "1"),
        ("1", "0", "5", "1"),
    ]
    assert len(table) == 8


def test_sweep_martel_agreement(tmp_path):
    out = tmp_path / "agreement.csv"
    assert cli.run_command(["sweep", "--family", "martel_agreement", "-o", str(out)]) == 0


def test_sweep_reports_disagreement(tmp_path):
    rows = [
        {
            "b1": 1,
            "b2": 1,
            "v0p": 1,
            "martel": "Free",
            "biquadratic": "NotFree",
            "agree": False,
            "exception": False,
        }
    ]
    with patch.dict(cli.numeric.NUMERIC_SWEEPS, {"martel_agreement": lambda: rows}):
        code = cli.run_command(
            ["sweep", "--family", "martel_agreement", "-o", str(tmp_path / "x.csv")]
        )
    assert code == cli.EXIT_CHECK_FAILED


def test_missing_file_is_input_error(tmp_path, capsys):
    assert cli.run_command(["analyze", str(tmp_path / "nope.json")]) == cli.EXIT_INPUT_ERROR
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["status"] == "error"


def test_bad_json_is_input_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2", encoding="utf-8")
    assert cli.run_command(["analyze", str(path)]) == cli.EXIT_INPUT_ERROR


def test_non_object_json_is_input_error(tmp_path):
    src = _write_json(tmp_path, "list.json", [1, 2])
    assert cli.run_command(["build", src]) == cli.EXIT_INPUT_ERROR


def test_invariant_violation_is_input_error(tmp_path):
    tower = dict(B37_TOWER, beta={"terms": [[-2, [1]]]})
    src = _write_json(tmp_path, "tower.json", tower)
    assert cli.run_command(["build", src]) == cli.EXIT_INPUT_ERROR


def test_out_of_range_coefficient_is_input_error(tmp_path, capsys):
    tower = dict(B37_TOWER, beta={"terms": [[-3, 3]]})
    src = _write_json(tmp_path, "tower.json", tower)
    assert cli.run_command(["build", src]) == cli.EXIT_INPUT_ERROR
    assert "outside" in capsys.readouterr().err


def test_computation_error_exit_code(tmp_path):
    src = _write_json(tmp_path, "tower.json", B37_TOWER)
    with patch("scaffolds.cli.scaffold.handle_request", side_effect=RuntimeError("boom")):
        assert cli.run_command(["scaffold", src]) == cli.EXIT_CHECK_FAILED


def test_usage_errors():
    assert cli.run_command([]) == cli.EXIT_INPUT_ERROR
    assert cli.run_command(["scaffold", "x.json", "--mode", "fuzzy"]) == cli.EXIT_INPUT_ERROR
    assert cli.run_command(["--help"]) == cli.EXIT_OK


def test_tower_case_is_deterministic():
    a = cli.tower_case(2, 2, 2, seed=5, index=0, prec=None)
    b = cli.tower_case(2, 2, 2, seed=5, index=0, prec=None)
    assert a == b
    assert a["ok"]
