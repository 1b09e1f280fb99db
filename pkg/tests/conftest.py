import sys
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).parent.parent.resolve()))

from scaffolds.localfield import Series, residue_field_make  # noqa: E402
from scaffolds.tower import Tower, TowerSpec, tower_build  # noqa: E402


def make_tower(
    p: int, d: int, beta: dict, omegas: list[dict] | None = None, prec: int | None = None
) -> Tower:
    """Tower from exponent->coefficient dicts; omega_1 = 1 is prepended."""
    fld = residue_field_make(p, d)
    oms = [Series.one(fld)] + [Series.from_terms(fld, o) for o in omegas or []]
    n = len(oms)
    spec = TowerSpec(
        p=p,
        d=d,
        n=n,
        beta=Series.from_terms(fld, beta),
        omegas=tuple(oms),
        epsilons=(Series.zero(fld),) * n,
        prec=prec,
    )
    return tower_build(spec)


@pytest.fixture(scope="session")
def tower_b37() -> Tower:
    """p=2, d=1, beta=t^-3, omega_2=t^-1: breaks (3, 7)."""
    return make_tower(2, 1, {-3: 1}, [{-1: 1}])


@pytest.fixture(scope="session")
def tower_b33() -> Tower:
    """p=2, d=2, beta=t^-3, omega_2=w: breaks (3, 3)."""
    return make_tower(2, 2, {-3: 1}, [{0: 2}])


@pytest.fixture(scope="session")
def tower_weak() -> Tower:
    """p=2, d=2, beta=t^-1, omega_2=w: breaks (1, 1)."""
    return make_tower(2, 2, {-1: 1}, [{0: 2}])


@pytest.fixture(scope="session")
def tower_n3() -> Tower:
    """p=2, beta=t^-7, omega_2=t^-1, omega_3=t^-2: breaks (7, 15, 31)."""
    return make_tower(2, 1, {-7: 1}, [{-1: 1}, {-2: 1}], prec=64)


@pytest.fixture(scope="session")
def tower_p3() -> Tower:
    """p=3, n=1, beta=t^-1 + 1."""
    return make_tower(3, 1, {-1: 1, 0: 1})
