"""Input schemas for the JSON files the CLI reads.

pydantic's ``ValidationError`` is a ``ValueError``, so schema problems surface as
input errors everywhere.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator

from scaffolds.localfield import INF, ResidueField, Series, residue_field_make

CharMode = Literal["char_p", "char_0"]
InfLiteral = Literal["inf"]


def _as_valuation(v: int | str | None) -> int | float | None:
    if v is None:
        return None
    if v == "inf":
        return INF
    return int(v)


class SeriesLiteral(BaseModel):
    """``{"terms": [[exponent, coefficient], ...], "prec": int | null}``.

    A coefficient is either an integer encoding of the residue or its ascending
    coefficient vector over F_p.
    """

    terms: list[tuple[int, int | list[int]]] = Field(default_factory=list)
    prec: int | None = None

    def to_series(self, fld: ResidueField) -> Series:
        terms = [(e, fld.element(c)) for e, c in self.terms]
        return Series.from_terms(fld, terms, self.prec)

    @classmethod
    def from_series(cls, s: Series) -> SeriesLiteral:
        return cls.model_validate(s.to_literal())


class TowerSpecModel(BaseModel):
    p: int = Field(ge=2)
    d: int = Field(default=1, ge=1)
    n: int = Field(ge=1)
    prec: int | None = Field(default=None, ge=1)
    beta: SeriesLiteral
    omegas: list[SeriesLiteral] | None = None
    epsilons: list[SeriesLiteral] | None = None

    @model_validator(mode="after")
    def _lengths(self) -> TowerSpecModel:
        for name in ("omegas", "epsilons"):
            value = getattr(self, name)
            if value is not None and len(value) != self.n:
                raise ValueError(f"{name} must have exactly n = {self.n} entries")
        if self.omegas is None and self.n > 1:
            raise ValueError("omegas are required when n > 1")
        return self

    def to_spec(self) -> Any:
        from scaffolds.tower import TowerSpec

        fld = residue_field_make(self.p, self.d)
        one = Series.one(fld)
        zero = Series.zero(fld)
        omegas = tuple(o.to_series(fld) for o in self.omegas) if self.omegas else (one,)
        epsilons = (
            tuple(e.to_series(fld) for e in self.epsilons) if self.epsilons else (zero,) * self.n
        )
        return TowerSpec(
            p=self.p,
            d=self.d,
            n=self.n,
            beta=self.beta.to_series(fld),
            omegas=omegas,
            epsilons=epsilons,
            prec=self.prec,
        )


class ProfileModel(BaseModel):
    p: int = Field(ge=2)
    n: int = Field(ge=1)
    lower: list[int] | None = None
    upper: list[int] | None = None
    jumps: list[int] | None = None
    char_mode: CharMode = "char_p"
    v0p: int | InfLiteral | None = None
    tolerance: int | None = Field(default=None, ge=1)
    eps_valuations: list[int | InfLiteral] | None = None
    families: list[str] | None = None
    h: int = 0

    @model_validator(mode="after")
    def _one_source(self) -> ProfileModel:
        given = [x for x in (self.lower, self.upper, self.jumps) if x is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of lower, upper or jumps")
        if self.char_mode == "char_0" and self.v0p in (None, "inf"):
            raise ValueError("characteristic 0 profiles need a finite v0p")
        return self

    def v0p_value(self) -> int | float | None:
        if self.char_mode == "char_p":
            return INF
        return _as_valuation(self.v0p)

    def eps_valuations_values(self) -> list[int | float] | None:
        if self.eps_valuations is None:
            return None
        return [v for v in (_as_valuation(x) for x in self.eps_valuations) if v is not None]


class HopfModel(BaseModel):
    """Either a concrete tower or bare parameters (p, n, M)."""

    tower: TowerSpecModel | None = None
    p: int | None = Field(default=None, ge=2)
    n: int | None = Field(default=None, ge=1)
    char_mode: CharMode = "char_p"
    vKp: int | InfLiteral | None = None
    M: list[int] | None = None
    strict: bool = True

    @model_validator(mode="after")
    def _source(self) -> HopfModel:
        if self.tower is None and (self.p is None or self.n is None or self.M is None):
            raise ValueError("give either a tower or p, n and M")
        if self.M is not None:
            n = self.tower.n if self.tower is not None else self.n
            if len(self.M) != n:
                raise ValueError(f"M must have exactly n = {n} entries")
            if any(m < 0 for m in self.M):
                raise ValueError("M entries must be nonnegative")
        return self

    def vkp_value(self) -> int | float:
        if self.char_mode == "char_p":
            return INF
        v = _as_valuation(self.vKp)
        if v is None:
            raise ValueError("characteristic 0 Hopf parameters need vKp")
        return v


class FamilyModel(BaseModel):
    family: Literal["martel", "biquadratic_ideal", "weak_ideal", "abrashkin"]
    params: dict[str, Any] = Field(default_factory=dict)
