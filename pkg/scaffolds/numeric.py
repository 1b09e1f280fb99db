"""Ramification calculus on valuation data.

Everything here is integer or ``Fraction`` arithmetic and works for both
characteristics: in characteristic p the valuation of p is ``INF``.
"""

from __future__ import annotations

import logging
import math
import sys
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from scaffolds.errors import (
    FamilyPreconditionViolation,
    NonIntegralUpperBreaks,
    OrderViolation,
)

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - same str/format behaviour as the 3.11 stdlib class
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

logger = logging.getLogger(__name__)

INF = math.inf

CHAR_P = "char_p"
CHAR_0 = "char_0"

Valuation = int | float


def _frac_str(x: Fraction | int | float) -> str | int | float:
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


# --------------------------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class RamProfile:
    p: int
    n: int
    char_mode: str
    v0p: Valuation
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    jumps: tuple[int, ...] | None
    residue: int | None
    c_values: tuple[Fraction, ...] = field(default=())

    @property
    def b_max(self) -> int:
        return self.lower[-1]

    def as_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "n": self.n,
            "char_mode": self.char_mode,
            "v0p": _frac_str(self.v0p),
            "breaks_lower": list(self.lower),
            "breaks_upper": list(self.upper),
            "jumps": list(self.jumps) if self.jumps is not None else None,
            "residue": self.residue,
            "C": [_frac_str(c) for c in self.c_values],
        }


def upper_from_lower(p: int, lower: Sequence[int]) -> list[Fraction]:
    """u_i = b_1 + (b_2-b_1)/p + ... + (b_i-b_{i-1})/p^{i-1}."""
    out: list[Fraction] = []
    for i, b in enumerate(lower):
        if i == 0:
            out.append(Fraction(b))
        else:
            out.append(out[-1] + Fraction(b - lower[i - 1], p**i))
    return out


def lower_from_upper(p: int, upper: Sequence[int]) -> list[int]:
    out: list[int] = []
    for i, u in enumerate(upper):
        out.append(u if i == 0 else out[-1] + p**i * (u - upper[i - 1]))
    return out


def breaks_from_jumps(p: int, n: int, b1: int, ms: Sequence[int]) -> tuple[list[int], list[int]]:
    """Lower and upper breaks from (b_1, m_2..m_n)."""
    lower, upper = [b1], [b1]
    acc_u = 0
    acc_b = 0
    for k, m in enumerate(ms, start=2):
        acc_u += m
        acc_b += p ** (k - 2) * m
        upper.append(b1 + p ** (n - 1) * acc_u)
        lower.append(b1 + p**n * acc_b)
    return lower, upper


def jumps_from_lower(p: int, n: int, lower: Sequence[int]) -> tuple[int, ...] | None:
    """(b_1, m_2..m_n) when every m_k is a nonnegative integer, else None."""
    ms: list[int] = []
    for i in range(1, len(lower)):
        q, r = divmod(lower[i] - lower[i - 1], p ** (n + i - 1))
        if r or q < 0:
            return None
        ms.append(q)
    return (lower[0], *ms)


def c_values(p: int, lower: Sequence[int], upper: Sequence[int]) -> tuple[Fraction, ...]:
    """C_0 = 0 and C_i = u_i - b_i/p^i."""
    return (Fraction(0),) + tuple(
        Fraction(u) - Fraction(b, p ** (i + 1)) for i, (b, u) in enumerate(zip(lower, upper))
    )


def _check_order(name: str, values: Sequence[int]) -> None:
    if not values:
        raise OrderViolation(f"{name} must not be empty")
    if any(v < 1 for v in values):
        raise OrderViolation(f"{name} must be positive: {list(values)}")
    for i in range(1, len(values)):
        if values[i] < values[i - 1]:
            raise OrderViolation(f"{name} must be nondecreasing; index {i + 1} drops")


def break_conversions(
    p: int,
    n: int,
    *,
    lower: Sequence[int] | None = None,
    upper: Sequence[int] | None = None,
    jumps: Sequence[int] | None = None,
    char_mode: str = CHAR_P,
    v0p: Valuation | None = None,
) -> RamProfile:
    """Complete a profile given exactly one of lower breaks, upper breaks or jump data.

    Raises:
        OrderViolation: breaks not positive and nondecreasing, or wrong length.
        NonIntegralUpperBreaks: an upper break computed from lower breaks is fractional.
    """
    given = [x for x in (lower, upper, jumps) if x is not None]
    if len(given) != 1:
        raise ValueError("give exactly one of lower, upper or jumps")
    if char_mode not in (CHAR_P, CHAR_0):
        raise ValueError(f"unknown characteristic mode '{char_mode}'")
    if char_mode == CHAR_P:
        v0p = INF
    elif v0p is None or v0p < 1:
        raise ValueError("characteristic 0 profiles need a positive v0(p)")
    assert v0p is not None

    if lower is not None:
        lower = [int(b) for b in lower]
        _check_order("lower breaks", lower)
        ups = upper_from_lower(p, lower)
        for i, u in enumerate(ups, start=1):
            if u.denominator != 1:
                raise NonIntegralUpperBreaks(i, u)
        upper = [int(u) for u in ups]
    elif upper is not None:
        upper = [int(u) for u in upper]
        _check_order("upper breaks", upper)
        lower = lower_from_upper(p, upper)
    else:
        assert jumps is not None
        jumps = [int(x) for x in jumps]
        if len(jumps) != n:
            raise OrderViolation(f"jump data needs b_1 and {n - 1} jumps")
        if jumps[0] < 1 or any(m < 0 for m in jumps[1:]):
            raise OrderViolation("jump data needs b_1 >= 1 and m_k >= 0")
        lower, upper = breaks_from_jumps(p, n, jumps[0], jumps[1:])
    if len(lower) != n:
        raise OrderViolation(f"expected {n} breaks, got {len(lower)}")

    modulus = p**n
    residue = lower[0] % modulus if all(b % modulus == lower[0] % modulus for b in lower) else None
    return RamProfile(
        p=p,
        n=n,
        char_mode=char_mode,
        v0p=v0p,
        lower=tuple(lower),
        upper=tuple(upper),
        jumps=jumps_from_lower(p, n, lower),
        residue=residue,
        c_values=c_values(p, lower, upper),
    )


# --------------------------------------------------------------------------------------------
# assumptions


def assumption3_gap(profile: RamProfile, i: int, j: int, tolerance: int) -> int:
    """Required v_n(eps_ij) - v_n(mu_ij), 1 <= i <= j <= n."""
    p, n = profile.p, profile.n
    return p ** (n - 1) * profile.upper[i - 1] - p ** (n - j) * profile.lower[i - 1] + tolerance


def assumption3_display(profile: RamProfile, i: int, j: int, tolerance: int) -> int:
    """The same bound written as (p-1) sum_{k<i} p^{n-k-1} b_k + (p^{n-i}-p^{n-j}) b_i + T."""
    p, n, b = profile.p, profile.n, profile.lower
    head = (p - 1) * sum(p ** (n - k - 1) * b[k - 1] for k in range(1, i))
    return head + (p ** (n - i) - p ** (n - j)) * b[i - 1] + tolerance


def check_assumptions(
    profile: RamProfile,
    tolerance: int = 1,
    eps_valuations: Sequence[Valuation] | None = None,
    a3_differences: Mapping[tuple[int, int], Valuation] | None = None,
) -> dict[str, Any]:
    """Evaluate assumptions 1-6 on a completed profile.

    ``eps_valuations`` are v_0(eps_i) for i = 1..n (INF for zero); ``a3_differences``
    are observed v_n(eps_ij) - v_n(mu_ij) keyed by (i, j). Entries that need data
    that was not supplied report ``holds: None``.
    """
    p, n = profile.p, profile.n
    b, u, c = profile.lower, profile.upper, profile.c_values

    gaps = []
    a3_holds: bool | None = None if a3_differences is None else True
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            g = assumption3_gap(profile, i, j, tolerance)
            entry: dict[str, Any] = {"i": i, "j": j, "gap": g}
            if a3_differences is not None and (i, j) in a3_differences:
                observed = a3_differences[(i, j)]
                entry["observed"] = _frac_str(observed)
                ok = observed >= g
                entry["holds"] = ok
                a3_holds = bool(a3_holds and ok)
            gaps.append(entry)

    a5: dict[str, Any] = {"criterion": "assumption-5", "holds": None}
    if eps_valuations is not None:
        if len(eps_valuations) != n:
            raise ValueError(f"expected {n} epsilon valuations")
        c_prev = c[n - 1]
        bounds = [Fraction(-u[i]) + c_prev for i in range(n)]
        a5["bounds"] = [_frac_str(x) for x in bounds]
        a5["holds"] = all(ev > bd for ev, bd in zip(eps_valuations, bounds))

    required_v0p = c[n] + Fraction(tolerance, p**n)
    report = {
        "tolerance": tolerance,
        "a1": {"criterion": "assumption-1", "holds": b[0] % p != 0},
        "a2": {"criterion": "assumption-2", "holds": profile.residue is not None},
        "a3": {"criterion": "assumption-3-gap", "holds": a3_holds, "gap_table": gaps},
        "a4": {
            "criterion": "assumption-4",
            "holds": u[0] % p != 0 and all((x - u[0]) % p ** (n - 1) == 0 for x in u),
        },
        "a5": a5,
        "a6": {
            "criterion": "assumption-6",
            "required_v0p": _frac_str(required_v0p),
            "holds": profile.v0p >= required_v0p,
        },
    }
    return report


# --------------------------------------------------------------------------------------------
# tolerances


@dataclass(frozen=True)
class ToleranceResult:
    family: str
    value: int | float | None
    criterion: str
    reason: str = ""

    def as_dict(self) -> dict[str, Any]:
        value = self.value
        return {
            "family": self.family,
            "value": "inf" if value == INF else value,
            "criterion": self.criterion,
            "reason": self.reason,
        }


TOLERANCE_FAMILIES = ("degree_p", "elem_ab_general", "biquadratic", "weakly_ramified", "abrashkin")


def _finish_tolerance(family: str, criterion: str, value: Any) -> ToleranceResult:
    if value == INF:
        return ToleranceResult(family, INF, criterion, "characteristic p")
    value = int(math.floor(value))
    if value < 1:
        return ToleranceResult(family, None, criterion, f"tolerance {value} < 1; no scaffold")
    return ToleranceResult(family, value, criterion)


def _need(params: Mapping[str, Any], *names: str) -> list[Any]:
    missing = [x for x in names if params.get(x) is None]
    if missing:
        raise FamilyPreconditionViolation(f"missing parameters: {', '.join(missing)}")
    return [params[x] for x in names]


def _v0p(params: Mapping[str, Any]) -> Valuation:
    if params.get("char_mode", CHAR_0) == CHAR_P or params.get("v0p") in (None, "inf", INF):
        if params.get("char_mode") == CHAR_0:
            raise FamilyPreconditionViolation("characteristic 0 needs v0p")
        return INF
    v = params["v0p"]
    if not isinstance(v, int) or v < 1:
        raise FamilyPreconditionViolation("v0p must be a positive integer")
    return v


def tolerance(family: str, params: Mapping[str, Any]) -> ToleranceResult:
    """The tolerance guaranteed for ``family``.

    Returns ``value=None`` with a reason when the formula gives less than 1.
    """
    v = _v0p(params)
    if family == "degree_p":
        p, u = _need(params, "p", "u")
        if u < 1 or u % p == 0:
            raise FamilyPreconditionViolation(f"degree p tolerance needs p not dividing u={u}")
        return _finish_tolerance(family, "degree-p", v if v == INF else p * v - (p - 1) * u)
    if family == "elem_ab_general":
        prof = params.get("profile")
        if not isinstance(prof, RamProfile):
            raise FamilyPreconditionViolation("elem_ab_general needs a completed profile")
        if v == INF:
            return _finish_tolerance(family, "assumption-6", INF)
        return _finish_tolerance(
            family, "assumption-6", math.floor(prof.p**prof.n * (v - prof.c_values[prof.n]))
        )
    if family == "biquadratic":
        b1, b2 = _need(params, "b1", "b2")
        _biquadratic_pre(b1, b2)
        value = v if v == INF else 4 * v - 2 * b1 - b2
        return _finish_tolerance(family, "biquadratic-tolerance", value)
    if family == "weakly_ramified":
        p, n = _need(params, "p", "n")
        q = p**n
        return _finish_tolerance(family, "weakly-ramified", v if v == INF else q * v - (q - 1))
    if family == "abrashkin":
        p, n, u = _need(params, "p", "n", "u")
        if u < 1 or math.gcd(u, p) != 1:
            raise FamilyPreconditionViolation("abrashkin tolerance needs u coprime to p")
        q = p**n
        value = v if v == INF else q * v - (q - 1) * u
        return _finish_tolerance(family, "abrashkin-tolerance", value)
    raise FamilyPreconditionViolation(f"unknown tolerance family '{family}'")


# --------------------------------------------------------------------------------------------
# freeness verdicts


class Status(StrEnum):
    FREE = "Free"
    NOT_FREE = "NotFree"
    UNDETERMINED = "Undetermined"
    OUT_OF_SCOPE = "OutOfScope"


@dataclass(frozen=True)
class Verdict:
    status: Status
    criterion: str
    reason: str
    params: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "status": str(self.status),
            "criterion": self.criterion,
            "reason": self.reason,
            "params": {k: _frac_str(v) for k, v in self.params.items()},
        }


# (b, h, L1, L2, free_row)
TABLE1: tuple[tuple[int, int, int, int, bool], ...] = tuple(
    (b, h, 4 + b - h, max(1, b - h), (b, h) not in ((1, -2), (3, 1)))
    for b in (1, 3)
    for h in range(b, b - 4, -1)
)


def table1_rows() -> list[dict[str, int | bool]]:
    return [{"b": b, "h": h, "L1": l1, "L2": l2, "free": free} for b, h, l1, l2, free in TABLE1]


def _biquadratic_pre(b1: int, b2: int) -> None:
    if b1 < 1 or b1 % 2 == 0:
        raise FamilyPreconditionViolation(f"b1={b1} must be odd and positive")
    if b2 < b1 or (b2 - b1) % 4:
        raise FamilyPreconditionViolation(f"need b1 <= b2 and b1 = b2 mod 4, got ({b1}, {b2})")


def _table1_row(b1: int, h: int) -> tuple[int, int, int, int, bool]:
    b = b1 % 4
    for row in TABLE1:
        if row[0] == b and (h - row[1]) % 4 == 0:
            return row
    raise AssertionError("every residue of h appears in the table")  # pragma: no cover


def martel(b1: int, b2: int, v0p: Valuation) -> Verdict:
    s = 2 * b1 + b2
    params = {"b1": b1, "b2": b2, "v0p": v0p}
    _biquadratic_pre(b1, b2)
    if v0p != INF and s > 6 * v0p - 3:
        return Verdict(Status.OUT_OF_SCOPE, "martel-inequality", "2b1+b2 > 6v0(2)-3", params)
    if v0p == INF:
        return Verdict(Status.FREE, "martel-inequality", "characteristic p", params)
    bound = 4 * v0p + 3 * (-1) ** ((b1 - 1) // 2)
    if s <= bound:
        return Verdict(Status.FREE, "martel-inequality", f"2b1+b2={s} <= {bound}", params)
    return Verdict(Status.NOT_FREE, "martel-inequality", f"2b1+b2={s} > {bound}", params)


def biquadratic_ideal(b1: int, b2: int, h: int, v0p: Valuation) -> Verdict:
    """Freeness of P^h over its associated order in a biquadratic extension.

    The table row for (b1 mod 4, h mod 4) gives gates L1 and L2: free rows are
    Free when 2b1+b2 <= 4v0(2) - L2, the two remaining rows are NotFree when
    2b1+b2 <= 4v0(2) - L1. Anything else is left undetermined.
    """
    _biquadratic_pre(b1, b2)
    s = 2 * b1 + b2
    b, row_h, l1, l2, free_row = _table1_row(b1, h)
    params = {"b1": b1, "b2": b2, "h": h, "v0p": v0p, "L1": l1, "L2": l2}
    if v0p == INF:
        status = Status.FREE if free_row else Status.NOT_FREE
        return Verdict(status, "biquadratic-table", "characteristic p", params)
    if free_row and s <= 4 * v0p - l2:
        return Verdict(Status.FREE, "biquadratic-table", f"2b1+b2={s} <= 4v-{l2}", params)
    if not free_row and s <= 4 * v0p - l1:
        return Verdict(Status.NOT_FREE, "biquadratic-table", f"2b1+b2={s} <= 4v-{l1}", params)
    logger.warning("biquadratic verdict undetermined for b=(%d,%d) h=%d v=%s", b1, b2, h, v0p)
    return Verdict(Status.UNDETERMINED, "biquadratic-table", "outside the proven bounds", params)


def weak_ideal(p: int, n: int, v0p: Valuation, h: int) -> Verdict:
    if v0p != INF and v0p < 3:
        raise FamilyPreconditionViolation("weak_ideal needs v0(p) >= 3")
    q = p**n
    hr = h % q
    params = {"p": p, "n": n, "h": h, "h_reduced": hr, "v0p": v0p}
    if hr in (0, 1) or Fraction(q + 1, 2) < hr < q:
        return Verdict(Status.FREE, "weak-ideal-residues", f"h' = {hr}", params)
    return Verdict(Status.NOT_FREE, "weak-ideal-residues", f"h' = {hr}", params)


def abrashkin(p: int, n: int, u: int, v0p: Valuation) -> Verdict:
    if u < 1 or math.gcd(u, p) != 1:
        raise FamilyPreconditionViolation(f"u={u} must be positive and coprime to p")
    q = p**n
    if v0p != INF and not u < Fraction(q * v0p, q - 1) - 2:
        raise FamilyPreconditionViolation(f"u={u} too large for v0(p)={v0p}")
    b = u % q
    params = {"p": p, "n": n, "u": u, "b": b, "v0p": v0p}
    if n == 1:
        reason = "no divisor criterion for degree p"
        return Verdict(Status.UNDETERMINED, "abrashkin-divisor", reason, params)
    divides =[m for m in range(1, n + 1) if (p**m - 1) % b == 0]
    if n == 2:
        if (p * p - 1) % b == 0:
            return Verdict(Status.FREE, "abrashkin-divisor", f"{b} | {p * p - 1}", params)
        reason = f"{b} does not divide {p * p - 1}"
        return Verdict(Status.NOT_FREE, "abrashkin-divisor", reason, params)
    if divides:
        m = divides[0]
        return Verdict(Status.FREE, "abrashkin-divisor", f"{b} | p^{m}-1", params)
    logger.warning("abrashkin verdict undetermined for p=%d n=%d b=%d", p, n, b)
    return Verdict(Status.UNDETERMINED, "abrashkin-divisor", "sufficient condition only", params)


FREENESS_FAMILIES = ("martel", "biquadratic_ideal", "weak_ideal", "abrashkin")


def freeness(family: str, params: Mapping[str, Any]) -> Verdict:
    v = _v0p(params)
    if family == "martel":
        b1, b2 = _need(params, "b1", "b2")
        return martel(b1, b2, v)
    if family == "biquadratic_ideal":
        b1, b2 = _need(params, "b1", "b2")
        return biquadratic_ideal(b1, b2, int(params.get("h", 0)), v)
    if family == "weak_ideal":
        p, n, h = _need(params, "p", "n", "h")
        return weak_ideal(p, n, v, h)
    if family == "abrashkin":
        p, n, u = _need(params, "p", "n", "u")
        return abrashkin(p, n, u, v)
    raise FamilyPreconditionViolation(f"unknown freeness family '{family}'")


# --------------------------------------------------------------------------------------------
# different and trace


def different_and_trace(p: int, breaks: Sequence[int], j: int, r: int) -> dict[str, Any]:
    """Different exponent of K_n/K_j (Hilbert's formula) and the valuation of Tr(P_n^r).

    ``breaks`` are the lower breaks b_1..b_n of K_n/K_0; the breaks of K_n/K_j are
    b_{j+1}..b_n.
    """
    b = [int(x) for x in breaks]
    _check_order("breaks", b)
    n = len(b)
    if not 0 <= j < n:
        raise ValueError(f"j must lie in [0, {n - 1}]")
    m = (b[j] + 1) * (p ** (n - j) - 1) + sum(
        (b[i] - b[i - 1]) * (p ** (n - i) - 1) for i in range(j + 1, n)
    )
    s_r = (m + r) // p ** (n - j)
    out: dict[str, Any] = {"m": m, "s_r": s_r, "simplified": None}
    if all((b[i] - b[i - 1]) % p ** (i + 1) == 0 for i in range(j + 1, n)):
        simplified = (
            b[j]
            + 1
            + sum((b[i] - b[i - 1]) // p ** (i - j) for i in range(j + 1, n))
            + (-1 - b[-1] + r) // p ** (n - j)
        )
        out["simplified"] = simplified
        out["simplified_agrees"] = simplified == s_r
    return out


# --------------------------------------------------------------------------------------------
# sweeps


def _status(verdict: Verdict) -> str:
    return str(verdict.status)


def sweep_biquadratic(max_v0p: int = 4) -> list[dict[str, Any]]:
    """The eight gate rows followed by a verdict grid over b1, b2, h and v0(2)."""
    rows: list[dict[str, Any]] = [{"kind": "table", **r} for r in table1_rows()]
    for v in range(1, max_v0p + 1):
        for b1 in range(1, 6 * v - 2, 2):
            for b2 in range(b1, 6 * v - 2 - 2 * b1 + 1, 4):
                for h in range(-2, 4):
                    verdict = biquadratic_ideal(b1, b2, h, v)
                    rows.append(
                        {
                            "kind": "verdict",
                            "b1": b1,
                            "b2": b2,
                            "h": h,
                            "v0p": v,
                            "L1": verdict.params["L1"],
                            "L2": verdict.params["L2"],
                            "status": _status(verdict),
                        }
                    )
    return rows


def is_documented_exception(b1: int, b2: int, v0p: int) -> bool:
    return b1 % 4 == 1 and 2 * b1 + b2 == 4 * v0p + 3


def sweep_martel_agreement(max_v0p: int = 6) -> list[dict[str, Any]]:
    """Martel's inequality against the h = 0 table verdict on Martel's domain."""
    rows = []
    for v in range(1, max_v0p + 1):
        for b1 in range(1, 6 * v - 2, 2):
            for b2 in range(b1, 6 * v - 3 - 2 * b1 + 1, 4):
                m = martel(b1, b2, v)
                q = biquadratic_ideal(b1, b2, 0, v)
                decided = Status.UNDETERMINED not in (m.status, q.status)
                rows.append(
                    {
                        "b1": b1,
                        "b2": b2,
                        "v0p": v,
                        "martel": _status(m),
                        "biquadratic": _status(q),
                        "agree": (m.status == q.status) if decided else None,
                        "exception": is_documented_exception(b1, b2, v),
                    }
                )
    return rows


def sweep_weak_ideal(
    primes: Sequence[int] = (2, 3, 5), degrees: Sequence[int] = (1, 2), v0ps: Sequence[int] = (3, 4)
) -> list[dict[str, Any]]:
    rows = []
    for p in primes:
        for n in degrees:
            for v in v0ps:
                tol = tolerance("weakly_ramified", {"p": p, "n": n, "char_mode": CHAR_0, "v0p": v})
                for h in range(p**n):
                    verdict = weak_ideal(p, n, v, h)
                    rows.append(
                        {
                            "p": p,
                            "n": n,
                            "v0p": v,
                            "tolerance": tol.value,
                            "h": h,
                            "status": _status(verdict),
                        }
                    )
    return rows


def sweep_abrashkin(
    configs: Sequence[tuple[int, int]] = ((2, 2), (3, 2), (2, 3)), v0p: int = 12
) -> list[dict[str, Any]]:
    rows = []
    for p, n in configs:
        q = p**n
        for u in range(1, q):
            if math.gcd(u, p) != 1:
                continue
            verdict = abrashkin(p, n, u, v0p)
            tol = tolerance("abrashkin", {"p": p, "n": n, "u": u, "char_mode": CHAR_0, "v0p": v0p})
            rows.append(
                {
                    "p": p,
                    "n": n,
                    "u": u,
                    "b": verdict.params["b"],
                    "v0p": v0p,
                    "tolerance": tol.value,
                    "status": _status(verdict),
                }
            )
    return rows


NUMERIC_SWEEPS = {
    "biquadratic": sweep_biquadratic,
    "martel_agreement": sweep_martel_agreement,
    "weak_ideal": sweep_weak_ideal,
    "abrashkin": sweep_abrashkin,
}


# --------------------------------------------------------------------------------------------
# entry point


def analyze(payload: Mapping[str, Any]) -> dict[str, Any]:
    """Profile in, breaks/assumptions/tolerances/verdicts out."""
    from scaffolds.schemas import ProfileModel

    model = ProfileModel.model_validate(dict(payload))
    profile = break_conversions(
        model.p,
        model.n,
        lower=model.lower,
        upper=model.upper,
        jumps=model.jumps,
        char_mode=model.char_mode,
        v0p=model.v0p_value(),
    )
    base = {"p": profile.p, "n": profile.n, "char_mode": profile.char_mode, "v0p": profile.v0p}

    tolerances = [tolerance("elem_ab_general", {**base, "profile": profile})]
    if profile.n == 1 and profile.upper[0] % profile.p:
        tolerances.append(tolerance("degree_p", {**base, "u": profile.upper[0]}))
    if profile.p == 2 and profile.n == 2:
        try:
            tolerances.append(
                tolerance("biquadratic", {**base, "b1": profile.lower[0], "b2": profile.lower[1]})
            )
        except FamilyPreconditionViolation as exc:
            logger.info("biquadratic tolerance not applicable: %s", exc)
    if all(x == 1 for x in profile.lower):
        tolerances.append(tolerance("weakly_ramified", base))
    if len(set(profile.upper)) == 1 and math.gcd(profile.upper[0], profile.p) == 1:
        tolerances.append(tolerance("abrashkin", {**base, "u": profile.upper[0]}))

    chosen = model.tolerance
    if chosen is None:
        finite = [t.value for t in tolerances if isinstance(t.value, int)]
        chosen = max(finite) if finite else 1

    assumptions = check_assumptions(profile, chosen, model.eps_valuations_values())

    verdicts: list[dict[str, Any]] = []
    for family in model.families or _default_families(profile):
        params = {**base, "h": model.h}
        if family in ("martel", "biquadratic_ideal") and profile.n == 2:
            params.update(b1=profile.lower[0], b2=profile.lower[1])
        if family == "abrashkin":
            params["u"] = profile.upper[0]
        try:
            verdicts.append({"family": family, **freeness(family, params).as_dict()})
        except FamilyPreconditionViolation as exc:
            verdicts.append(
                {"family": family, "status": str(Status.OUT_OF_SCOPE), "reason": str(exc)}
            )

    return {
        "breaks": profile.as_dict(),
        "assumptions": assumptions,
        "tolerance": [t.as_dict() for t in tolerances],
        "verdicts": verdicts,
    }


def _default_families(profile: RamProfile) -> list[str]:
    out: list[str] = []
    if profile.p == 2 and profile.n == 2:
        out += ["martel", "biquadratic_ideal"]
    if all(x == 1 for x in profile.lower):
        out.append("weak_ideal")
    if len(set(profile.upper)) == 1 and math.gcd(profile.upper[0], profile.p) == 1:
        out.append("abrashkin")
    return out


def handle_request(payload: dict[str, Any]) -> dict[str, Any]:
    try:
        result = analyze(payload)
    except ValueError:
        raise
    except Exception:
        logger.exception("profile analysis failed")
        raise
    return {"status": "ok", "result": result}
