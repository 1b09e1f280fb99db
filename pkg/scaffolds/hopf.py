"""Hopf orders from scaffolds.

When every lower break is -1 mod p^n the associated order of the valuation ring
is O_0[(Theta_n - 1)/pi^{M_n}, ..., (Theta_1 - 1)/pi^{M_1}] with p^i M_i = b_i + 1.
This module validates such parameters and checks stabilization and freeness on
concrete characteristic-p towers.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from scaffolds.errors import (
    FreenessFailure,
    NotMinusOneResidue,
    PreconditionViolation,
    StabilizationFailure,
    ValidationFailed,
)
from scaffolds.localfield import INF, Series, wp_map
from scaffolds.scaffold import (
    GroupAlgebraElem,
    Scaffold,
    ga_apply,
    lambda_coordinates,
    min_coordinate_valuation,
    theta_psi_build,
    trace_element,
)
from scaffolds.tower import Tower, TowerElem, tower_from_payload

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HopfParams:
    p: int
    n: int
    M: tuple[int, ...]
    char_mode: str = "char_p"
    vkp: int | float = INF
    strict: bool = True


@dataclass
class HopfOrderDescription:
    M: tuple[int, ...]
    generators: list[str]
    mu_valuations: dict[str, Fraction]
    validation: dict[str, Any]
    operators: list[tuple[GroupAlgebraElem, int]] = field(default_factory=list)
    scaffold: Scaffold | None = None
    intertwining: bool | None = None


# --------------------------------------------------------------------------------------------
# parameters


def _m_values(p: int, n: int, M: Sequence[int]) -> list[Fraction]:
    ms = [Fraction(M[0], p ** (n - 1))]
    for i in range(2, n + 1):
        ms.append(Fraction(p**i * M[i - 1] - p ** (i - 1) * M[i - 2], p ** (n + i - 2)))
    return ms


def mu_valuations(p: int, M: Sequence[int]) -> dict[str, Fraction]:
    """v_0(mu_ij) = p^{i-j} M_i - M_j for i < j."""
    n = len(M)
    return {
        f"{i},{j}": Fraction(M[i - 1], p ** (j - i)) - M[j - 1]
        for i in range(1, n + 1)
        for j in range(i + 1, n + 1)
    }


def validate_M(params: HopfParams) -> dict[str, Any]:
    """Per-constraint report; never raises."""
    p, n, M = params.p, params.n, params.M
    q = p**n
    constraints: dict[str, bool | None] = {
        "length": len(M) == n,
        "positive": len(M) == n and M[0] >= 1 and all(m >= 0 for m in M),
    }
    if not constraints["length"]:
        return {"M": list(M), "constraints": constraints, "valid": False}

    constraints["ordered"] = all(p**r * M[r - 1] <= p ** (r + 1) * M[r] for r in range(1, n))
    constraints["divisible"] = all(M[i - 1] % p ** (n - i) == 0 for i in range(1, n + 1))
    b = [p**i * M[i - 1] - 1 for i in range(1, n + 1)]
    constraints["minus_one_residue"] = all(x % q == q - 1 for x in b)

    ms = _m_values(p, n, M)
    m_form = ms[0] * (q - 1) + sum(
        (p ** (n - 1) - p ** (k - 2)) * ms[k - 1] for k in range(2, n + 1)
    )
    M_form = (p - 1) * sum(M)
    if params.char_mode == "char_0":
        constraints["vkp_bound"] = params.vkp >= M_form
    else:
        constraints["vkp_bound"] = None

    strict: dict[str, bool] = {}
    if n == 2:
        strict["p_divides_M1"] = M[0] % p == 0
    if n == 3:
        strict["p_divides_M3"] = M[2] % p == 0
    if params.strict:
        constraints.update(strict)

    valid = all(v is not False for v in constraints.values())
    return {
        "M": list(M),
        "derived_b": b,
        "m": [str(x) for x in ms],
        "m_integral": all(x.denominator == 1 for x in ms),
        "constraints": constraints,
        "strict": params.strict,
        "strict_conditions": strict,
        "vkp_bound": {
            "M_form": str(M_form),
            "m_form": str(m_form),
            "agree": m_form == M_form,
            "slack": str(M_form - m_form),
            "within_slack": abs(M_form - m_form) <= q - 1,
        },
        "mu_valuations": {k: str(v) for k, v in mu_valuations(p, M).items()},
        "valid": valid,
    }


def symbolic_theta(n: int) -> dict[int, str]:
    """Theta_i as strings, descending: Theta_n = s_n, Theta_i = s_i * Theta_j^[-mu_i,j] ..."""
    out: dict[int, str] = {n: f"s{n}"}
    for i in range(n - 1, 0, -1):
        parts = [f"s{i}"]
        for j in range(n, i, -1):
            base = f"s{n}" if j == n else f"Theta{j}"
            parts.append(f"{base}^[-mu_{i},{j}]")
        out[i] = "*".join(parts)
    return out


def _generator_strings(n: int, M: Sequence[int]) -> list[str]:
    thetas = symbolic_theta(n)
    return [f"({thetas[i]} - 1)/pi^{M[i - 1]}" for i in range(n, 0, -1)]


# --------------------------------------------------------------------------------------------
# generators


def intertwining_check(tower: Tower) -> bool:
    """n = 3: mu_12 = -w_2^p, mu_23 = -wp(w_3)/wp(w_2), mu_13 = -(w_3 w_2^p - w_2 w_3^p)/wp(w_2)."""
    if tower.n != 3:
        raise PreconditionViolation("n = 3", f"tower has n = {tower.n}")
    w2, w3 = tower.spec.omegas[1], tower.spec.omegas[2]
    den = wp_map(w2)
    rel = tower.rel_prec
    mu = tower.mu
    return bool(
        mu[(1, 2)] == -w2.frobenius()
        and mu[(2, 3)] == -wp_map(w3).divide(den, rel)
        and mu[(1, 3)] == -(w3 * w2.frobenius() - w2 * w3.frobenius()).divide(den, rel)
    )


def hopf_generators(
    source: Tower | HopfParams, M: Sequence[int] | None = None, strict: bool = True
) -> HopfOrderDescription:
    """Generators of the associated order.

    A tower gives concrete operators (Theta_i - 1, M_i); ``M`` overrides the derived
    exponents. Parameters give the symbolic description only.

    Raises:
        NotMinusOneResidue: a tower break is not -1 mod p^n.
        ValidationFailed: parameters fail ``validate_M``.
    """
    if isinstance(source, HopfParams):
        report = validate_M(source)
        if not report["valid"]:
            raise ValidationFailed(report)
        return HopfOrderDescription(
            M=source.M,
            generators=_generator_strings(source.n, source.M),
            mu_valuations=mu_valuations(source.p, source.M),
            validation=report,
        )

    tower = source
    p, n, q = tower.p, tower.n, tower.degree
    bad = [i for i, b in enumerate(tower.lower, start=1) if b % q != q - 1]
    if bad:
        raise NotMinusOneResidue(f"breaks {list(tower.lower)} are not -1 mod {q} at {bad}")
    derived = tuple((b + 1) // p**i for i, b in enumerate(tower.lower, start=1))
    exps = tuple(M) if M is not None else derived
    report = validate_M(HopfParams(p, n, derived, strict=strict))
    scaffold = theta_psi_build(tower)
    operators = [(scaffold.psi(i), exps[i - 1]) for i in range(n, 0, -1)]

    observed = {f"{i},{j}": s.valuation() for (i, j), s in tower.mu.items() if i < j}
    expected = mu_valuations(p, derived)
    report["mu_valuations_match"] = all(observed[k] == v for k, v in expected.items())
    desc = HopfOrderDescription(
        M=exps,
        generators=_generator_strings(n, exps),
        mu_valuations=expected,
        validation=report,
        operators=operators,
        scaffold=scaffold,
        intertwining=intertwining_check(tower) if n == 3 else None,
    )
    logger.debug("hopf generators for M=%s", exps)
    return desc


# --------------------------------------------------------------------------------------------
# verification


HOPF_CRITERIA = {"stabilization": "hopf-stabilization", "freeness": "hopf-freeness"}


def check_associated_order(
    scaffold: Scaffold,
    generators: Sequence[tuple[GroupAlgebraElem, int]],
    h: int,
    rho: TowerElem,
) -> dict[str, Any]:
    """Stabilization of P_n^h by each generator/pi^M and freeness on ``rho``.

    Freeness asks that the products prod gen_i^{j_i} rho, 0 <= j_i < p, have
    valuations exactly h, ..., h + p^n - 1.
    """
    tower = scaffold.tower
    q = tower.degree
    witnesses: list[dict[str, Any]] = []
    stabilizes = True
    for k, (op, m) in enumerate(generators):
        scale = Series.monomial(tower.field, -m)
        for t in range(h, h + q):
            image = ga_apply(op, scaffold.lam(t)) * scale
            v = min_coordinate_valuation(lambda_coordinates(scaffold, image, start=h))
            if v < 0:
                stabilizes = False
                witnesses.append({"generator": k, "t": t, "coefficient_valuation": v})
                break

    valuations = []
    for js in itertools.product(range(tower.p), repeat=len(generators)):
        x = rho
        for (op, m), j in zip(generators, js):
            scale = Series.monomial(tower.field, -m)
            for _ in range(j):
                x = ga_apply(op, x) * scale
        valuations.append(tower.valuation(x))
    free = sorted(valuations) == list(range(h, h + q))
    if not free:
        witnesses.append({"valuations": sorted(valuations)})
    logger.info("associated order h=%d: stabilization=%s freeness=%s", h, stabilizes, free)
    return {
        "criteria": dict(HOPF_CRITERIA),
        "h": h,
        "stabilization": stabilizes,
        "freeness": free,
        "valuations": sorted(valuations),
        "witnesses": witnesses,
    }


def verify_hopf(desc: HopfOrderDescription, raise_on_failure: bool = True) -> dict[str, Any]:
    """Check the divided generators on O_n with witness rho = lambda_{p^n - 1}.

    Raises:
        StabilizationFailure: a generator leaves O_n (when ``raise_on_failure``).
        FreenessFailure: the generator products do not span O_n.
    """
    if desc.scaffold is None:
        raise PreconditionViolation("concrete generators", "built from parameters only")
    scaffold = desc.scaffold
    rho = scaffold.lam(scaffold.tower.degree - 1)
    report = check_associated_order(scaffold, desc.operators, 0, rho)
    if raise_on_failure:
        if not report["stabilization"]:
            w = report["witnesses"][0]
            raise StabilizationFailure({**w, "generator": desc.generators[w["generator"]]})
        if not report["freeness"]:
            raise FreenessFailure(report["witnesses"][-1])
    return report


def verify_weakly_ramified_structure(
    scaffold: Scaffold, generator: TowerElem | None = None
) -> dict[str, Any]:
    """Group-ring structure of P_n (h = 1) and O_n (h = 0) when every break is 1.

    ``generator`` must have valuation 1 (default lambda_1).
    """
    tower = scaffold.tower
    if any(b != 1 for b in tower.lower):
        raise PreconditionViolation("all breaks equal 1", f"breaks are {list(tower.lower)}")
    rho = generator if generator is not None else scaffold.lam(1)
    if tower.valuation(rho) != 1:
        raise PreconditionViolation("generator of valuation 1")
    n, q = tower.n, tower.degree
    psis = [(scaffold.psi(i), 0) for i in range(n, 0, -1)]
    ideal = check_associated_order(scaffold, psis, 1, rho)

    trace = trace_element(tower, 0)
    with_trace = [*psis, (trace, 1)]
    stabilizes = True
    witnesses: list[dict[str, Any]] = []
    for k, (op, m) in enumerate(with_trace):
        scale = Series.monomial(tower.field, -m)
        for t in range(q):
            image = ga_apply(op, scaffold.lam(t)) * scale
            v = min_coordinate_valuation(lambda_coordinates(scaffold, image))
            if v < 0:
                stabilizes = False
                witnesses.append({"generator": k, "t": t, "coefficient_valuation": v})
                break
    spanning = []
    top = (tower.p - 1,) * n
    for js in itertools.product(range(tower.p), repeat=n):
        if js == top:
            continue
        x = rho
        for (op, _), j in zip(psis, js):
            for _ in range(j):
                x = ga_apply(op, x)
        spanning.append(tower.valuation(x))
    spanning.append(tower.valuation(ga_apply(trace, rho) * Series.monomial(tower.field, -1)))
    ring_free = sorted(spanning) == list(range(q))
    return {
        "ideal": ideal,
        "ring": {
            "criteria": dict(HOPF_CRITERIA),
            "h": 0,
            "stabilization": stabilizes,
            "freeness": ring_free,
            "valuations": sorted(spanning),
            "witnesses": witnesses,
        },
        "ok": ideal["stabilization"] and ideal["freeness"] and stabilizes and ring_free,
    }


# --------------------------------------------------------------------------------------------
# entry point


def _desc_report(desc: HopfOrderDescription) -> dict[str, Any]:
    return {
        "M": list(desc.M),
        "derived_b": desc.validation.get("derived_b"),
        "constraints": desc.validation.get("constraints"),
        "validation": desc.validation,
        "generators": desc.generators,
        "mu_valuations": {k: str(v) for k, v in desc.mu_valuations.items()},
        "intertwining": desc.intertwining,
    }


def handle_request(payload: dict[str, Any]) -> dict[str, Any]:
    from scaffolds.schemas import HopfModel

    model = HopfModel.model_validate(payload)
    try:
        if model.tower is not None:
            tower = tower_from_payload(model.tower.model_dump())
            desc = hopf_generators(tower, model.M, strict=model.strict)
            report = _desc_report(desc)
            verification = verify_hopf(desc, raise_on_failure=False)
            report["verification"] = verification
            report["ok"] = (
                verification["stabilization"]
                and verification["freeness"]
                and desc.intertwining is not False
            )
        else:
            assert model.p is not None and model.n is not None and model.M is not None
            params = HopfParams(
                p=model.p,
                n=model.n,
                M=tuple(model.M),
                char_mode=model.char_mode,
                vkp=model.vkp_value(),
                strict=model.strict,
            )
            report = _desc_report(hopf_generators(params))
            report["verification"] = None
            report["ok"] = True
    except ValueError:
        raise
    except Exception:
        logger.exception("hopf verification failed")
        raise
    return {"status": "ok", "result": report}
