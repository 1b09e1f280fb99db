"""Randomized suites over generated towers and the numeric grids."""

import pytest

from scaffolds import cli, numeric
from scaffolds.localfield import Series, residue_field_make
from scaffolds.numeric import Status
from scaffolds.scaffold import theta_psi_build, verify_scaffold
from scaffolds.tower import abrashkin_splitting, abrashkin_tower

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SEED = 20240601


@pytest.fixture(scope="module")
def tower_cases():
    return cli.sweep_towers(25, SEED, jobs=1, prec=64)


def test_every_random_tower_passes(tower_cases):
    assert len(tower_cases) == 75
    failed = [(c["p"], c["n"], c["index"]) for c in tower_cases if not c["ok"]]
    assert failed == []


def test_scaffold_identity_is_exact(tower_cases):
    assert all(c["scaffold_failures"] == 0 for c in tower_cases)


def test_bruteforce_matches_predicted_breaks(tower_cases):
    assert all(c["bruteforce_breaks"] == c["breaks_lower"] for c in tower_cases)


def test_omega_identities(tower_cases):
    for c in tower_cases:
        checks = c["checks"]
        assert checks["omega_valuations"]
        assert checks["omega_inverse"]
        assert checks["omega_p_inverse"]


def test_lambda_basis_everywhere(tower_cases):
    assert all(all(c["lambda_basis"].values()) for c in tower_cases)


def test_parallel_sweep_keeps_order():
    serial = cli.sweep_towers(2, SEED, jobs=1, configs=((2, 2, 2),))
    parallel = cli.sweep_towers(2, SEED, jobs=2, configs=((2, 2, 2),))
    assert serial == parallel


def test_biquadratic_grid_matches_the_proven_bounds():
    for row in numeric.sweep_biquadratic():
        if row["kind"] != "verdict":
            continue
        s = 2 * row["b1"] + row["b2"]
        v = row["v0p"]
        if row["status"] == "Free":
            assert s <= 4 * v - row["L2"]
        elif row["status"] == "NotFree":
            assert s <= 4 * v - row["L1"]


def test_weak_ideal_grid():
    for row in numeric.sweep_weak_ideal():
        q = row["p"] ** row["n"]
        assert row["tolerance"] == q * row["v0p"] - (q - 1)
        h = row["h"]
        expected = "Free" if h in (0, 1) or 2 * h > q + 1 else "NotFree"
        assert row["status"] == expected


def test_abrashkin_grid():
    verdicts = {(r["p"], r["n"], r["b"]): r["status"] for r in numeric.sweep_abrashkin()}
    assert verdicts[(2, 2, 1)] == verdicts[(2, 2, 3)] == str(Status.FREE)
    assert {b for (p, n, b), s in verdicts.items() if (p, n) == (3, 2) and s == "Free"} == {
        1,
        2,
        4,
        8,
    }


def test_abrashkin_tower_scaffold():
    fld = residue_field_make(2, 2)
    tau = Series.from_terms(fld, {-5: 1, -1: 2})
    built, basis = abrashkin_tower(2, 2, 2, tau)
    split = abrashkin_splitting(built, basis)
    assert split["x_equation"] and all(split["components"])
    assert verify_scaffold(theta_psi_build(built), "exact")["cases_failed"] == 0
