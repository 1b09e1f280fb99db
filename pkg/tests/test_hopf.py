from fractions import Fraction

import pytest
from conftest import make_tower

from scaffolds import hopf
from scaffolds.errors import (
    NotMinusOneResidue,
    PreconditionViolation,
    StabilizationFailure,
    ValidationFailed,
)
from scaffolds.hopf import HopfParams, hopf_generators, validate_M, verify_hopf
from scaffolds.scaffold import theta_psi_build

pytestmark = pytest.mark.unit


# --------------------------------------------------------------------------------------------
# parameters


def test_validate_valid_pair():
    report = validate_M(HopfParams(2, 2, (2, 1), char_mode="char_0", vkp=3))
    assert report["valid"]
    assert report["derived_b"] == [3, 3]
    assert report["constraints"]["vkp_bound"]
    assert report["vkp_bound"] == {
        "M_form": "3",
        "m_form": "3",
        "agree": True,
        "slack": "0",
        "within_slack": True,
    }
    assert report["m"] == ["1", "0"]


@pytest.mark.parametrize(
    ("p", "n", "M"), [(2, 2, (4, 3)), (2, 3, (4, 2, 1)), (3, 2, (3, 1)), (3, 3, (9, 3, 2))]
)
def test_vkp_bound_forms_report_slack(p, n, M):
    bound = validate_M(HopfParams(p, n, M, char_mode="char_0", vkp=100))["vkp_bound"]
    assert bound["M_form"] == str((p - 1) * sum(M))
    assert bound["slack"] == "0"
    assert bound["agree"]
    assert bound["within_slack"]


def test_validate_vkp_too_small():
    report = validate_M(HopfParams(2, 2, (2, 1), char_mode="char_0", vkp=2))
    assert report["constraints"]["vkp_bound"] is False
    assert not report["valid"]


def test_validate_unordered():
    report = validate_M(HopfParams(2, 2, (3, 1)))
    assert report["constraints"]["ordered"] is False
    assert not report["valid"]


def test_validate_char_p_skips_vkp():
    assert validate_M(HopfParams(2, 2, (2, 1)))["constraints"]["vkp_bound"] is None


def test_strict_condition_for_three_steps():
    strict = validate_M(HopfParams(2, 3, (4, 2, 1), strict=True))
    loose = validate_M(HopfParams(2, 3, (4, 2, 1), strict=False))
    assert strict["constraints"]["p_divides_M3"] is False
    assert not strict["valid"]
    assert loose["valid"]
    assert loose["strict_conditions"] == {"p_divides_M3": False}


def test_wrong_length():
    report = validate_M(HopfParams(2, 2, (2,)))
    assert report["constraints"]["length"] is False
    assert not report["valid"]


@pytest.mark.parametrize("M", [(2, 1), (4, 2), (4, 3), (6, 3)])
def test_smaller_M_keeps_vkp_bound(M):
    vkp = sum(M)
    assert validate_M(HopfParams(2, 2, M, "char_0", vkp))["constraints"]["vkp_bound"]
    for i in range(2):
        smaller = tuple(m - (k == i) for k, m in enumerate(M))
        report = validate_M(HopfParams(2, 2, smaller, "char_0", vkp))
        assert report["constraints"]["vkp_bound"]


def test_mu_valuations_from_M():
    assert hopf.mu_valuations(2, (2, 1)) == {"1,2": 0}
    assert hopf.mu_valuations(2, (4, 4, 4)) == {"1,2": -2, "1,3": -3, "2,3": -2}
    assert hopf.mu_valuations(3, (3, 2)) == {"1,2": Fraction(-1)}


def test_symbolic_generators():
    desc = hopf_generators(HopfParams(2, 2, (2, 1)))
    assert desc.generators == ["(s2 - 1)/pi^1", "(s1*s2^[-mu_1,2] - 1)/pi^2"]
    assert desc.scaffold is None
    thetas = hopf.symbolic_theta(3)
    assert thetas[2] == "s2*s3^[-mu_2,3]"
    assert thetas[1] == "s1*s3^[-mu_1,3]*Theta2^[-mu_1,2]"


def test_invalid_parameters_raise():
    with pytest.raises(ValidationFailed, match="ordered"):
        hopf_generators(HopfParams(2, 2, (3, 1)))


def test_breaks_must_be_minus_one(tower_weak):
    with pytest.raises(NotMinusOneResidue):
        hopf_generators(tower_weak)


# --------------------------------------------------------------------------------------------
# towers


def test_b33_passes(tower_b33):
    desc = hopf_generators(tower_b33)
    assert desc.M == (2, 1)
    assert desc.validation["mu_valuations_match"]
    report = verify_hopf(desc)
    assert report["stabilization"]
    assert report["freeness"]
    assert report["valuations"] == [0, 1, 2, 3]


@pytest.mark.parametrize("M", [(3, 1), (2, 2)])
def test_over_division_breaks_stabilization(tower_b33, M):
    desc = hopf_generators(tower_b33, M=M)
    with pytest.raises(StabilizationFailure) as exc:
        verify_hopf(desc)
    assert exc.value.witness["coefficient_valuation"] < 0
    report = verify_hopf(desc, raise_on_failure=False)
    assert not report["stabilization"]


def test_degree_p_minimal_case():
    tower = make_tower(2, 1, {-1: 1})
    desc = hopf_generators(tower)
    assert desc.M == (1,)
    report = verify_hopf(desc)
    assert report["stabilization"] and report["freeness"]


@pytest.mark.slow
def test_three_steps(tower_n3):
    desc = hopf_generators(tower_n3)
    assert desc.M == (4, 4, 4)
    assert desc.intertwining is True
    assert desc.validation["mu_valuations_match"]
    report = verify_hopf(desc)
    assert report["stabilization"] and report["freeness"]


@pytest.mark.slow
def test_three_steps_sharpness(tower_n3):
    for i in range(3):
        M = tuple(m + (k == i) for k, m in enumerate((4, 4, 4)))
        with pytest.raises(StabilizationFailure):
            verify_hopf(hopf_generators(tower_n3, M=M))


def test_intertwining_needs_three_steps(tower_b33):
    with pytest.raises(PreconditionViolation, match="n = 3"):
        hopf.intertwining_check(tower_b33)


def test_parameters_only_cannot_be_verified():
    with pytest.raises(PreconditionViolation, match="concrete generators"):
        verify_hopf(hopf_generators(HopfParams(2, 2, (2, 1))))


def test_weakly_ramified_structure(tower_weak):
    scaffold = theta_psi_build(tower_weak)
    report = hopf.verify_weakly_ramified_structure(scaffold)
    assert report["ok"]
    assert report["ideal"]["valuations"] == [1, 2, 3, 4]
    assert report["ring"]["valuations"] == [0, 1, 2, 3]


def test_weakly_ramified_any_generator(tower_weak):
    scaffold = theta_psi_build(tower_weak)
    other = scaffold.lam(1) + scaffold.lam(2)
    assert hopf.verify_weakly_ramified_structure(scaffold, other)["ok"]


def test_weakly_ramified_requires_unit_breaks(tower_b33):
    with pytest.raises(PreconditionViolation, match="all breaks equal 1"):
        hopf.verify_weakly_ramified_structure(theta_psi_build(tower_b33))


# --------------------------------------------------------------------------------------------
# entry point


def test_handle_request_parameters():
    result = hopf.handle_request({"p": 2, "n": 2, "M": [2, 1]})["result"]
    assert result["ok"]
    assert result["verification"] is None
    assert result["derived_b"] == [3, 3]


def test_handle_request_tower():
    payload = {
        "tower": {
            "p": 2,
            "d": 2,
            "n": 2,
            "beta": {"terms": [[-3, [1, 0]]]},
            "omegas": [{"terms": [[0, [1, 0]]]}, {"terms": [[0, [0, 1]]]}],
        }
    }
    result = hopf.handle_request(payload)["result"]
    assert result["ok"]
    assert result["M"] == [2, 1]


def test_handle_request_schema_errors():
    with pytest.raises(ValueError, match="either a tower"):
        hopf.handle_request({"p": 2, "n": 2})
    with pytest.raises(ValueError, match="exactly n = 2"):
        hopf.handle_request({"p": 2, "n": 2, "M": [1]})
