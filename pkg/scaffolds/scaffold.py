"""Galois scaffolds on Artin-Schreier towers.

The group algebra K_0[G] acts on K_n through ``ga_apply``. The scaffold consists of
the valuation basis lambda_t = t^{f_t} rho_{a(t)} together with operators
Psi_i = Theta_i - 1, where Theta_i is sigma_i corrected by truncated powers of the
later Theta_j.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from scaffolds import numeric
from scaffolds.errors import AssumptionViolation, PreconditionViolation, TowerMismatch
from scaffolds.localfield import INF, Series, binomial
from scaffolds.tower import (
    GroupElem,
    Tower,
    TowerElem,
    digit_index,
    digit_vector,
    tower_from_payload,
)

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------------------------
# digit maps


def _residue(breaks: Sequence[int], p: int, n: int) -> int:
    q = p**n
    b = breaks[0] % q
    if any(x % q != b for x in breaks):
        raise AssumptionViolation(f"breaks {list(breaks)} do not share one residue mod {q}")
    if b % p == 0:
        raise AssumptionViolation(f"p divides the common residue {b}")
    return b


def bfrak(a: int | Sequence[int], breaks: Sequence[int], p: int, n: int) -> int:
    """Sum of a_(n-i) p^{n-i} b_i; ``a`` is an integer or its MSB-first digit vector."""
    e = digit_vector(a, p, n) if isinstance(a, int) else tuple(a)
    return sum(k * p ** (n - 1 - i) * breaks[i] for i, k in enumerate(e))


def afrak(t: int, breaks: Sequence[int], p: int, n: int) -> int:
    """The unique a in [0, p^n) with a = -b^{-1} t mod p^n."""
    q = p**n
    b = _residue(breaks, p, n)
    return (-pow(b, -1, q) * t) % q


def digit_maps(t: int, breaks: Sequence[int], p: int, n: int) -> tuple[int, int]:
    """(a(t), f_t) with t = -bfrak(a(t)) + p^n f_t."""
    a = afrak(t, breaks, p, n)
    f, r = divmod(t + bfrak(a, breaks, p, n), p**n)
    if r:
        raise AssumptionViolation(f"t={t} does not decompose over breaks {list(breaks)}")
    return a, f


def lambda_elem(tower: Tower, t: int) -> TowerElem:
    """lambda_t = t^{f_t} rho_{a(t)}, of valuation t."""
    a, f = digit_maps(t, tower.lower, tower.p, tower.n)
    return tower.rho[a] * Series.monomial(tower.field, f)


# --------------------------------------------------------------------------------------------
# group algebra


class GroupAlgebraElem:
    """Finitely supported element sum c_g g of K_0[G]."""

    __slots__ = ("tower", "table")

    def __init__(self, tower: Tower, table: Mapping[GroupElem, Series]) -> None:
        self.tower = tower
        self.table = {g: c for g, c in table.items() if not c.zero_flag}

    @classmethod
    def identity(cls, tower: Tower) -> GroupAlgebraElem:
        return cls.group(tower, GroupElem.identity(tower.p, tower.n))

    @classmethod
    def group(cls, tower: Tower, g: GroupElem) -> GroupAlgebraElem:
        return cls(tower, {g: Series.one(tower.field)})

    def _same(self, other: GroupAlgebraElem) -> None:
        if other.tower is not self.tower:
            raise TowerMismatch("group algebra elements over different towers")

    def __add__(self, other: GroupAlgebraElem) -> GroupAlgebraElem:
        self._same(other)
        out = dict(self.table)
        for g, c in other.table.items():
            out[g] = out[g] + c if g in out else c
        return GroupAlgebraElem(self.tower, out)

    def __neg__(self) -> GroupAlgebraElem:
        return GroupAlgebraElem(self.tower, {g: -c for g, c in self.table.items()})

    def __sub__(self, other: GroupAlgebraElem) -> GroupAlgebraElem:
        return self + (-other)

    def __mul__(self, other: GroupAlgebraElem | Series) -> GroupAlgebraElem:
        if isinstance(other, Series):
            return GroupAlgebraElem(self.tower, {g: c * other for g, c in self.table.items()})
        self._same(other)
        out: dict[GroupElem, Series] = {}
        for g, a in self.table.items():
            for h, b in other.table.items():
                k = g + h
                prod = a * b
                out[k] = out[k] + prod if k in out else prod
        return GroupAlgebraElem(self.tower, out)

    def __pow__(self, k: int) -> GroupAlgebraElem:
        if k < 0:
            raise ValueError("negative powers are not supported in the group algebra")
        out = GroupAlgebraElem.identity(self.tower)
        for _ in range(k):
            out = out * self
        return out

    def is_zero_to_precision(self) -> bool:
        return all(c.is_zero_to_precision() for c in self.table.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupAlgebraElem):
            return NotImplemented
        return other.tower is self.tower and (self - other).is_zero_to_precision()

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        parts = [f"({c!r})*{g}" for g, c in sorted(self.table.items(), key=lambda kv: kv[0].c)]
        return "GroupAlgebraElem(" + (" + ".join(parts) or "0") + ")"


def trunc_exp(a: GroupAlgebraElem, mu: Series) -> GroupAlgebraElem:
    """a^{[mu]} = sum_{i<p} binom(mu, i) (a - 1)^i."""
    one = GroupAlgebraElem.identity(a.tower)
    diff = a - one
    out = one
    power = one
    for i in range(1, a.tower.p):
        power = power * diff
        out = out + power * binomial(mu, i)
    return out


def ga_apply(a: GroupAlgebraElem, x: TowerElem) -> TowerElem:
    tower = a.tower
    if x.tower is not tower:
        raise TowerMismatch("operator and element belong to different towers")
    out = tower.zero()
    for g, c in a.table.items():
        out = out + tower.galois_apply(g, x) * c
    return out


def trace_element(tower: Tower, j: int = 0) -> GroupAlgebraElem:
    """Sum of the elements of H_j = <sigma_{j+1}, ..., sigma_n>."""
    if not 0 <= j <= tower.n:
        raise ValueError(f"j must lie in [0, {tower.n}]")
    one = Series.one(tower.field)
    return GroupAlgebraElem(
        tower, {g: one for g in tower.group() if not any(g.c[:j])}
    )


# --------------------------------------------------------------------------------------------
# scaffold


@dataclass(eq=False)
class Scaffold:
    tower: Tower
    residue: int
    thetas: dict[int, GroupAlgebraElem]
    mu: dict[tuple[int, int], Series]
    tolerance: int | float = INF
    _lambdas: dict[int, TowerElem] = field(default_factory=dict, repr=False)

    @property
    def breaks(self) -> tuple[int, ...]:
        return self.tower.lower

    @property
    def psis(self) -> dict[int, GroupAlgebraElem]:
        one = GroupAlgebraElem.identity(self.tower)
        return {i: theta - one for i, theta in self.thetas.items()}

    def psi(self, i: int) -> GroupAlgebraElem:
        return self.thetas[i] - GroupAlgebraElem.identity(self.tower)

    def lam(self, t: int) -> TowerElem:
        if t not in self._lambdas:
            self._lambdas[t] = lambda_elem(self.tower, t)
        return self._lambdas[t]


def theta_psi_build(
    tower: Tower,
    mu: Mapping[tuple[int, int], Series] | None = None,
    ascending: bool = False,
) -> Scaffold:
    """Theta_n = sigma_n, Theta_i = sigma_i Theta_n^{[-mu_in]} ... Theta_{i+1}^{[-mu_i,i+1]}.

    ``ascending`` multiplies the truncated factors in the opposite order.
    """
    mu = dict(mu if mu is not None else tower.mu)
    p, n = tower.p, tower.n
    residue = _residue(tower.lower, p, n)
    thetas: dict[int, GroupAlgebraElem] = {}
    for i in range(n, 0, -1):
        theta = GroupAlgebraElem.group(tower, GroupElem.generator(p, n, i))
        later = range(i + 1, n + 1) if ascending else range(n, i, -1)
        for j in later:
            theta = theta * trunc_exp(thetas[j], -mu[(i, j)])
        thetas[i] = theta
    logger.debug("built Theta_1..Theta_%d", n)
    return Scaffold(tower=tower, residue=residue, thetas=thetas, mu=mu)


def lambda_coordinates(scaffold: Scaffold, x: TowerElem, start: int = 0) -> dict[int, Series]:
    """Coefficients d_t with x = sum d_t lambda_t over the window start <= t < start + p^n."""
    tower = scaffold.tower
    q = tower.degree
    out: dict[int, Series] = {}
    for a, c in enumerate(tower.rho_coordinates(x)):
        t = start + (-tower.bfrak(a) - start) % q
        f = (t + tower.bfrak(a)) // q
        out[t] = c.shift(-f)
    return out


def min_coordinate_valuation(coords: Mapping[int, Series]) -> int | float:
    return min((c.lower_bound() for c in coords.values()), default=INF)


def check_lambda_basis(scaffold: Scaffold) -> dict[str, bool]:
    """v_n(lambda_t) = t and lambda_{t+p^n} = t lambda_t for 0 <= t < 2p^n."""
    tower = scaffold.tower
    q = tower.degree
    pi0 = Series.monomial(tower.field, 1)
    valuations = all(tower.valuation(scaffold.lam(t)) == t for t in range(2 * q))
    periodic = all(scaffold.lam(t + q) == scaffold.lam(t) * pi0 for t in range(q))
    return {"valuations": valuations, "periodicity": periodic}


def verify_scaffold(
    scaffold: Scaffold, mode: str = "exact", tolerance: int | float | None = None
) -> dict[str, Any]:
    """Check the scaffold identities.

    exact: Psi_i rho_a = rho_{a - e_i} for every digit vector a, zero when the digit
    of a at i is 0. tolerance: Psi_i lambda_j agrees with lambda_{j + p^{n-i} b_i}
    (or 0) modulo elements of valuation j + p^{n-i} b_i + T, for 0 <= j < p^n.
    """
    if mode not in ("exact", "tolerance"):
        raise ValueError(f"unknown verification mode '{mode}'")
    tower = scaffold.tower
    p, n, q = tower.p, tower.n, tower.degree
    tol = scaffold.tolerance if tolerance is None else tolerance
    failures: list[dict[str, Any]] = []
    total = 0
    for i in range(1, n + 1):
        psi = scaffold.psi(i)
        for j in range(q):
            total += 1
            if mode == "exact":
                a = j
                e = digit_vector(a, p, n)
                image = ga_apply(psi, tower.rho[a])
                if e[i - 1]:
                    shifted = list(e)
                    shifted[i - 1] -= 1
                    b = digit_index(shifted, p)
                    expected = tower.rho[b]
                    expected_v: int | float = -tower.bfrak(b)
                else:
                    expected = tower.zero()
                    expected_v = INF
                if not (image - expected).is_zero_to_precision():
                    failures.append(
                        {
                            "i": i,
                            "j": None,
                            "a": a,
                            "expected_valuation": expected_v,
                            "observed_valuation": tower.valuation_lower_bound(image),
                        }
                    )
                continue

            a = afrak(j, tower.lower, p, n)
            shift = p ** (n - i) * tower.lower[i - 1]
            if digit_vector(a, p, n)[i - 1]:
                expected = scaffold.lam(j + shift)
            else:
                expected = tower.zero()
            diff = ga_apply(psi, scaffold.lam(j)) - expected
            target = j + shift + tol
            if tol == INF:
                ok = diff.is_zero_to_precision()
            else:
                ok = tower.valuation_at_least(diff, target)
            if not ok:
                failures.append(
                    {
                        "i": i,
                        "j": j,
                        "a": a,
                        "expected_valuation": target,
                        "observed_valuation": tower.valuation_lower_bound(diff),
                    }
                )
    level = logging.INFO if not failures else logging.WARNING
    logger.log(level, "scaffold %s check: %d/%d cases failed", mode, len(failures), total)
    return {
        "criterion": "scaffold-theorem",
        "mode": mode,
        "tolerance": "inf" if tol == INF else tol,
        "cases_total": total,
        "cases_failed": len(failures),
        "failures": failures,
    }


def perturb_and_verify(scaffold: Scaffold, gap: int) -> dict[str, Any]:
    """Replace mu_ij by mu_ij (1 + t^e) at the smallest e allowed with tolerance ``gap``.

    The valuation gap v_n(mu_ij eta) - v_n(mu_ij) = p^n e is the least multiple of p^n
    reaching p^{n-1} u_i - p^{n-j} b_i + gap.
    """
    if gap < 1:
        raise ValueError("gap must be at least 1")
    tower = scaffold.tower
    p, n, q = tower.p, tower.n, tower.degree
    profile = numeric.break_conversions(p, n, lower=list(tower.lower))
    mu = dict(tower.mu)
    shifts = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            need = numeric.assumption3_gap(profile, i, j, gap)
            e = -(-need // q)
            eta = Series.monomial(tower.field, e)
            mu[(i, j)] = mu[(i, j)] * (eta + 1)
            shifts.append({"i": i, "j": j, "required_gap": need, "eta_exponent": e})
    perturbed = theta_psi_build(tower, mu=mu)
    perturbed.tolerance = gap
    report = verify_scaffold(perturbed, "tolerance", tolerance=gap)
    report["criterion"] = "perturbation-bound"
    report["perturbation"] = shifts
    return report


def up_bound_check(scaffold: Scaffold, j: int, rho: TowerElem) -> dict[str, Any]:
    """Compare v_n(Psi_j rho) with the bound v_n(rho) + p^{n-j} b_j.

    Raises:
        PreconditionViolation: v_n(rho) fails one of the residue conditions.
    """
    tower = scaffold.tower
    p, n = tower.p, tower.n
    if not 1 <= j <= n:
        raise ValueError(f"j must lie in [1, {n}]")
    v = tower.valuation(rho)
    bn = tower.lower[-1]
    m1, m2 = p ** (n - j), p ** (n - j + 1)
    if (v - bn) % m1:
        raise PreconditionViolation(f"v(rho) = b_n mod {m1}", f"v(rho) = {v}, b_n = {bn}")
    if (v - bn * (1 - m1)) % m2 == 0:
        raise PreconditionViolation(
            f"v(rho) != b_n(1 - p^(n-j)) mod {m2}", f"v(rho) = {v}, b_n = {bn}"
        )
    image = ga_apply(scaffold.psi(j), rho)
    w = tower.valuation(image)
    bound = v + m1 * tower.lower[j - 1]
    return {
        "j": j,
        "valuation": v,
        "image_valuation": w,
        "bound": bound,
        "holds": w <= bound,
        "equality": w == bound,
    }


def check_factor_order(scaffold: Scaffold) -> bool:
    """Reversing the truncated factors of each Theta_i leaves its action on lambda_t unchanged."""
    tower = scaffold.tower
    other = theta_psi_build(tower, mu=scaffold.mu, ascending=True)
    for i in range(1, tower.n + 1):
        for t in range(tower.degree):
            x = scaffold.lam(t)
            if not ga_apply(scaffold.thetas[i], x) == ga_apply(other.thetas[i], x):
                return False
    return True


# --------------------------------------------------------------------------------------------
# entry point


def handle_request(payload: dict[str, Any]) -> dict[str, Any]:
    """payload: {"tower": spec, "mode": "exact"|"tolerance", "tolerance": int, "gap": int}."""
    mode = payload.get("mode", "exact")
    try:
        tower = tower_from_payload(payload["tower"] if "tower" in payload else payload)
        scaffold = theta_psi_build(tower)
        tol = payload.get("tolerance")
        report = verify_scaffold(scaffold, mode, None if tol is None else int(tol))
        report["lambda_basis"] = check_lambda_basis(scaffold)
        gap = payload.get("gap")
        if gap is not None:
            report["perturbed"] = perturb_and_verify(scaffold, int(gap))
    except ValueError:
        raise
    except Exception:
        logger.exception("scaffold verification failed")
        raise
    report["ok"] = (
        report["cases_failed"] == 0
        and all(report["lambda_basis"].values())
        and report.get("perturbed", {}).get("cases_failed", 0) == 0
    )
    return {"status": "ok", "result": report}
