"""Residue fields F_q and the local field K_0 = F_q((t)).

Series carry their precision explicitly: ``prec is None`` means the element is
finitely supported and known exactly, otherwise every coefficient below ``prec``
is known. Exact cancellation therefore produces a true zero, while running out
of precision is reported as an error instead of being mistaken for zero.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import galois
import numpy as np
from cachetools import LRUCache, cached

from scaffolds.errors import (
    DegreeTooLarge,
    DivideByZero,
    FieldMismatch,
    IndeterminatePrecision,
    IndeterminateValuation,
    NotPrime,
)

logger = logging.getLogger(__name__)

INF = math.inf

DEFAULT_MAX_FIELD_ORDER = 1 << 20
DEFAULT_SERIES_PREC = 64


def _max_field_order() -> int:
    return int(os.getenv("SCAFFOLDS_MAX_FIELD_ORDER", str(DEFAULT_MAX_FIELD_ORDER)))


def default_series_prec() -> int:
    return int(os.getenv("SCAFFOLDS_SERIES_PREC", str(DEFAULT_SERIES_PREC)))


# --------------------------------------------------------------------------------------------
# residue field


@dataclass(frozen=True)
class ResidueField:
    """F_q with q = p^d, modulus stored as ascending coefficients (monic)."""

    p: int
    d: int
    modulus: tuple[int, ...]
    gf: Any = field(compare=False, repr=False, hash=False)

    @property
    def q(self) -> int:
        return int(self.p**self.d)

    def __call__(self, value: int | Sequence[int]) -> ResidueElem:
        return self.element(value)

    def element(self, value: int | Sequence[int] | ResidueElem) -> ResidueElem:
        """Build an element from its integer encoding or its ascending coefficient vector."""
        if isinstance(value, ResidueElem):
            self.check_same(value.field)
            return value
        if isinstance(value, (int, np.integer)):
            if not 0 <= int(value) < self.q:
                raise ValueError(f"integer encoding {value} outside [0, {self.q})")
            return ResidueElem(self, int(value))
        coeffs = [int(c) for c in value]
        if len(coeffs) != self.d:
            raise ValueError(f"residue coefficient vector must have length {self.d}")
        if any(not 0 <= c < self.p for c in coeffs):
            raise ValueError(f"residue coefficients must lie in [0, {self.p})")
        return ResidueElem(self, sum(c * self.p**i for i, c in enumerate(coeffs)))

    @property
    def zero(self) -> ResidueElem:
        return ResidueElem(self, 0)

    @property
    def one(self) -> ResidueElem:
        return ResidueElem(self, 1)

    def generator(self) -> ResidueElem:
        """The class of x modulo the modulus; 1 for a prime field."""
        return ResidueElem(self, self.p if self.d > 1 else 1)

    def elements(self) -> list[ResidueElem]:
        return [ResidueElem(self, v) for v in range(self.q)]

    def check_same(self, other: ResidueField) -> None:
        if other != self:
            raise FieldMismatch(f"F_{self.q} and F_{other.q} elements cannot be combined")


def canonical_modulus(p: int, d: int) -> tuple[int, ...]:
    """Least monic irreducible of degree d over F_p, comparing coefficients low degree first."""
    if d == 1:
        return (0, 1)
    prime_field = galois.GF(p)
    for low in itertools.product(range(p), repeat=d):
        poly = galois.Poly([1, *reversed(low)], field=prime_field)
        if poly.is_irreducible():
            return (*low, 1)
    raise RuntimeError(f"no irreducible polynomial of degree {d} over F_{p}")  # pragma: no cover


@cached(cache=LRUCache(maxsize=64))
def residue_field_make(p: int, d: int) -> ResidueField:
    """Return the canonical F_{p^d}; equal (p, d) always give the same object.

    Raises:
        NotPrime: if p is not prime.
        DegreeTooLarge: if d < 1 or p^d exceeds the desk-scale cap.
    """
    if not isinstance(p, int) or p < 2 or not galois.is_prime(p):
        raise NotPrime(f"{p} is not prime")
    if d < 1:
        raise DegreeTooLarge(f"residue degree must be at least 1, got {d}")
    cap = _max_field_order()
    if p**d > cap:
        raise DegreeTooLarge(f"field order {p}^{d} exceeds the cap {cap}")
    modulus = canonical_modulus(p, d)
    if d == 1:
        gf = galois.GF(p)
    else:
        poly = galois.Poly(list(reversed(modulus)), field=galois.GF(p))
        gf = galois.GF(p**d, irreducible_poly=poly)
    logger.debug("built residue field F_%d^%d with modulus %s", p, d, modulus)
    return ResidueField(p=p, d=d, modulus=modulus, gf=gf)


@dataclass(frozen=True)
class ResidueElem:
    field: ResidueField
    value: int

    @property
    def coeffs(self) -> list[int]:
        p, v = self.field.p, self.value
        out = []
        for _ in range(self.field.d):
            v, r = divmod(v, p)
            out.append(r)
        return out

    def _gf(self) -> Any:
        return self.field.gf(self.value)

    def _wrap(self, x: Any) -> ResidueElem:
        return ResidueElem(self.field, int(x))

    def _other(self, other: ResidueElem | int) -> Any:
        if isinstance(other, ResidueElem):
            self.field.check_same(other.field)
            return other._gf()
        return self.field.gf(int(other) % self.field.p)

    def __add__(self, other: ResidueElem | int) -> ResidueElem:
        return self._wrap(self._gf() + self._other(other))

    __radd__ = __add__

    def __sub__(self, other: ResidueElem | int) -> ResidueElem:
        return self._wrap(self._gf() - self._other(other))

    def __neg__(self) -> ResidueElem:
        return self._wrap(-self._gf())

    def __mul__(self, other: ResidueElem | int) -> ResidueElem:
        return self._wrap(self._gf() * self._other(other))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> ResidueElem:
        if k < 0:
            return self.inverse() ** (-k)
        return self._wrap(self._gf() ** k)

    def inverse(self) -> ResidueElem:
        if self.value == 0:
            raise DivideByZero("zero residue has no inverse")
        return self._wrap(np.reciprocal(self._gf()))

    def frobenius(self) -> ResidueElem:
        return self ** self.field.p

    def is_zero(self) -> bool:
        return self.value == 0

    def in_prime_field(self) -> bool:
        return self.value < self.field.p

    def __repr__(self) -> str:
        return f"ResidueElem(F_{self.field.q}, {self.coeffs})"


def fp_independent(elems: Sequence[ResidueElem]) -> bool:
    """True iff the residues are linearly independent over the prime field."""
    if not elems:
        return True
    fld = elems[0].field
    for e in elems[1:]:
        fld.check_same(e.field)
    if len(elems) > fld.d:
        return False
    prime_field = galois.GF(fld.p)
    rows = prime_field(np.array([e.coeffs for e in elems], dtype=np.int64))
    return int(np.linalg.matrix_rank(rows)) == len(elems)


# --------------------------------------------------------------------------------------------
# series


def _nonzero(arr: Any) -> np.ndarray:
    return np.flatnonzero(arr.view(np.ndarray))


class Series:
    """An element of F_q((t)): coefficients for exponents val, val+1, ...

    ``prec is None`` marks a finitely supported, exactly known element; otherwise
    coefficients are known for exponents below ``prec``.
    """

    __slots__ = ("field", "val", "coeffs", "prec")

    def __init__(self, fld: ResidueField, val: int, coeffs: Any, prec: int | None) -> None:
        gf = fld.gf
        if not isinstance(coeffs, gf):
            coeffs = gf(np.asarray(coeffs, dtype=np.int64) % fld.p if fld.d == 1 else coeffs)
        if prec is not None:
            coeffs = coeffs[: max(0, prec - val)]
        nz = _nonzero(coeffs)
        if nz.size == 0:
            coeffs = gf.Zeros(0)
            val = prec if prec is not None else 0
        else:
            first, last = int(nz[0]), int(nz[-1])
            coeffs = coeffs[first : last + 1]
            val += first
        self.field = fld
        self.val = int(val)
        self.coeffs = coeffs
        self.prec = None if prec is None else int(prec)

    # construction ---------------------------------------------------------------------------

    @classmethod
    def zero(cls, fld: ResidueField) -> Series:
        return cls(fld, 0, fld.gf.Zeros(0), None)

    @classmethod
    def one(cls, fld: ResidueField) -> Series:
        return cls.monomial(fld, 0)

    @classmethod
    def monomial(cls, fld: ResidueField, k: int, coeff: int | ResidueElem = 1) -> Series:
        c = fld.element(coeff) if isinstance(coeff, ResidueElem) else fld.element(coeff % fld.p)
        return cls(fld, k, fld.gf([c.value]), None)

    @classmethod
    def constant(cls, fld: ResidueField, c: int | ResidueElem) -> Series:
        return cls.monomial(fld, 0, c)

    @classmethod
    def from_terms(
        cls,
        fld: ResidueField,
        terms: Mapping[int, int | ResidueElem | Sequence[int]] | Iterable[tuple[int, Any]],
        prec: int | None = None,
    ) -> Series:
        items = list(terms.items()) if isinstance(terms, Mapping) else list(terms)
        if not items:
            return cls(fld, prec or 0, fld.gf.Zeros(0), prec)
        lo = min(int(e) for e, _ in items)
        hi = max(int(e) for e, _ in items)
        out = fld.gf.Zeros(hi - lo + 1)
        for e, c in items:
            if isinstance(c, ResidueElem):
                elem = fld.element(c)
            elif isinstance(c, (int, np.integer)):
                elem = fld.element(int(c) % fld.p) if fld.d == 1 else fld.element(int(c))
            else:
                elem = fld.element(c)
            out[int(e) - lo] = out[int(e) - lo] + fld.gf(elem.value)
        return cls(fld, lo, out, prec)

    def to_literal(self) -> dict[str, Any]:
        raw = self.coeffs.view(np.ndarray)
        terms = [
            [self.val + i, ResidueElem(self.field, int(c)).coeffs]
            for i, c in enumerate(raw)
            if int(c) != 0
        ]
        return {"terms": terms, "prec": self.prec}

    # inspection -----------------------------------------------------------------------------

    @property
    def zero_flag(self) -> bool:
        return self.prec is None and self.coeffs.size == 0

    @property
    def exact(self) -> bool:
        return self.prec is None

    def is_zero(self) -> bool:
        return self.zero_flag

    def is_zero_to_precision(self) -> bool:
        return self.coeffs.size == 0

    def valuation(self) -> int | float:
        if self.zero_flag:
            return INF
        if self.coeffs.size == 0:
            raise IndeterminateValuation(
                f"all coefficients below t^{self.prec} vanish; valuation undetermined"
            )
        return self.val

    def lower_bound(self) -> int | float:
        """Valuation if determinate, else the precision (a valid lower bound)."""
        if self.zero_flag:
            return INF
        return self.val

    def coefficient(self, k: int) -> ResidueElem:
        if self.prec is not None and k >= self.prec:
            raise IndeterminatePrecision(f"coefficient of t^{k} is beyond precision {self.prec}")
        i = k - self.val
        if self.coeffs.size == 0 or i < 0 or i >= self.coeffs.size:
            return self.field.zero
        return ResidueElem(self.field, int(self.coeffs[i]))

    def leading_coefficient(self) -> ResidueElem:
        self.valuation()
        return ResidueElem(self.field, int(self.coeffs[0]))

    def relative_precision(self) -> int | None:
        return None if self.prec is None else self.prec - self.val

    # arithmetic -----------------------------------------------------------------------------

    def _coerce(self, other: Series | ResidueElem | int) -> Series:
        if isinstance(other, Series):
            self.field.check_same(other.field)
            return other
        if isinstance(other, ResidueElem):
            self.field.check_same(other.field)
            return Series.constant(self.field, other)
        return Series.constant(self.field, int(other) % self.field.p)

    def __add__(self, other: Series | ResidueElem | int) -> Series:
        b = self._coerce(other)
        if b.zero_flag:
            return self
        if self.zero_flag:
            return b
        prec = _min_prec(self.prec, b.prec)
        lo = min(self.val, b.val)
        hi = max(self.val + self.coeffs.size, b.val + b.coeffs.size)
        if prec is not None:
            hi = min(hi, prec)
        if hi <= lo:
            return Series(self.field, lo, self.field.gf.Zeros(0), prec)
        out = self.field.gf.Zeros(hi - lo)
        for s in (self, b):
            n = min(s.coeffs.size, hi - s.val)
            if n > 0:
                out[s.val - lo : s.val - lo + n] = out[s.val - lo : s.val - lo + n] + s.coeffs[:n]
        return Series(self.field, lo, out, prec)

    __radd__ = __add__

    def __neg__(self) -> Series:
        return Series(self.field, self.val, -self.coeffs, self.prec)

    def __sub__(self, other: Series | ResidueElem | int) -> Series:
        return self + (-self._coerce(other))

    def __rsub__(self, other: Series | ResidueElem | int) -> Series:
        return self._coerce(other) + (-self)

    def __mul__(self, other: Series | ResidueElem | int) -> Series:
        if isinstance(other, (ResidueElem, int, np.integer)):
            return self.scale(other)
        b = self._coerce(other)
        if self.zero_flag or b.zero_flag:
            return Series.zero(self.field)
        prec: int | None = None
        if self.prec is not None:
            prec = self.prec + b.val
        if b.prec is not None:
            prec = _min_prec(prec, b.prec + self.val)
        val = self.val + b.val
        if self.coeffs.size == 0 or b.coeffs.size == 0:
            return Series(self.field, val, self.field.gf.Zeros(0), prec)
        a_c, b_c = self.coeffs, b.coeffs
        if prec is not None:
            keep = prec - val
            a_c, b_c = a_c[:keep], b_c[:keep]
        return Series(self.field, val, np.convolve(a_c, b_c), prec)

    __rmul__ = __mul__

    def scale(self, c: ResidueElem | int) -> Series:
        if isinstance(c, ResidueElem):
            elem = self.field.element(c)
        else:
            elem = self.field.element(int(c) % self.field.p)
        if elem.is_zero():
            return Series.zero(self.field)
        return Series(self.field, self.val, self.coeffs * self.field.gf(elem.value), self.prec)

    def shift(self, k: int) -> Series:
        """Multiply by t^k."""
        prec = None if self.prec is None else self.prec + k
        return Series(self.field, self.val + k, self.coeffs, prec)

    def inverse(self, rel_prec: int | None = None) -> Series:
        """Multiplicative inverse.

        Exact monomials invert exactly. Other exact series are expanded to
        ``rel_prec`` terms (default ``SCAFFOLDS_SERIES_PREC``); finite-precision
        series keep their relative precision.
        """
        if self.zero_flag:
            raise DivideByZero("inverse of exact zero")
        if self.coeffs.size == 0:
            raise IndeterminatePrecision(
                f"cannot invert an element known only to be O(t^{self.prec})"
            )
        v = self.val
        gf = self.field.gf
        if self.prec is None and self.coeffs.size == 1:
            return Series(self.field, -v, np.reciprocal(self.coeffs), None)
        if self.prec is None:
            rel = rel_prec if rel_prec is not None else default_series_prec()
        else:
            rel = self.prec - v
        unit = self.coeffs
        if unit.size < rel:
            padded = gf.Zeros(rel)
            padded[: unit.size] = unit
            unit = padded
        w = np.reciprocal(unit[:1])
        two = gf(2 % self.field.p)
        k = 1
        while k < rel:
            k = min(2 * k, rel)
            uw = np.convolve(unit[:k], w)[:k]
            e = -uw
            e[0] = e[0] + two
            w = np.convolve(w, e)[:k]
        return Series(self.field, -v, w, rel - v)

    def __truediv__(self, other: Series | ResidueElem | int) -> Series:
        b = self._coerce(other)
        return self * b.inverse()

    def divide(self, other: Series, rel_prec: int | None = None) -> Series:
        return self * self._coerce(other).inverse(rel_prec)

    def __pow__(self, k: int) -> Series:
        if k < 0:
            return self.inverse() ** (-k)
        if k == 0:
            return Series.one(self.field)
        p = self.field.p
        high, low = divmod(k, p)
        result = (self**high).frobenius() if high else Series.one(self.field)
        for _ in range(low):
            result = result * self
        return result

    def frobenius(self, times: int = 1) -> Series:
        """Coefficientwise p-th power composed with t -> t^p, applied ``times`` times."""
        out = self
        p = self.field.p
        for _ in range(times):
            if out.zero_flag:
                return out
            n = out.coeffs.size
            spread = out.field.gf.Zeros(p * (n - 1) + 1 if n else 0)
            if n:
                spread[::p] = out.coeffs if out.field.d == 1 else out.coeffs**p
            prec = None if out.prec is None else p * out.prec
            out = Series(out.field, p * out.val, spread, prec)
        return out

    # comparison -----------------------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (Series, ResidueElem, int)):
            return NotImplemented
        try:
            diff = self - other
        except ValueError:
            return False
        return diff.is_zero_to_precision()

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        if self.zero_flag:
            return "Series(0)"
        terms = " + ".join(
            f"{ResidueElem(self.field, int(c)).coeffs}*t^{self.val + i}"
            for i, c in enumerate(self.coeffs.view(np.ndarray))
            if int(c) != 0
        )
        tail = "" if self.prec is None else f" + O(t^{self.prec})"
        return f"Series({terms or '0'}{tail})"


def _min_prec(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def series_arith(kind: str, a: Series, b: Series | int | ResidueElem | None = None) -> Series:
    """Dispatch one arithmetic operation by name (add, sub, mul, inv, pow, scalar)."""
    if kind == "add":
        return a + _need(b)
    if kind == "sub":
        return a - _need(b)
    if kind == "mul":
        return a * _need(b)
    if kind == "inv":
        return a.inverse()
    if kind == "pow":
        if not isinstance(b, int):
            raise ValueError("pow needs an integer exponent")
        return a**b
    if kind == "scalar":
        if not isinstance(b, (int, ResidueElem)):
            raise ValueError("scalar needs a residue or integer")
        return a.scale(b)
    raise ValueError(f"unknown series operation '{kind}'")


def _need(b: Any) -> Any:
    if b is None:
        raise ValueError("binary operation needs a second operand")
    return b


def series_valuation(a: Series) -> int | float:
    return a.valuation()


def wp_map(a: Series) -> Series:
    """The Artin-Schreier map a^p - a."""
    return a.frobenius() - a


def binomial(mu: Series, k: int) -> Series:
    """binom(mu, k) = mu(mu-1)...(mu-k+1)/k! for 0 <= k < p."""
    fld = mu.field
    if k < 0:
        return Series.zero(fld)
    if k >= fld.p:
        raise ValueError("binomial coefficients are only defined here for k < p")
    out = Series.one(fld)
    for i in range(k):
        out = out * (mu - i)
    return out.scale(fld.element(math.factorial(k) % fld.p).inverse())
