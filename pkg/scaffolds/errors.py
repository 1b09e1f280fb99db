"""Exception types raised across the package.

Input problems subclass ``ValueError`` and computational problems subclass
``RuntimeError``; callers (the CLI in particular) map the two families to
different exit codes.
"""

from __future__ import annotations

from typing import Any


class NotPrime(ValueError):
    pass


class DegreeTooLarge(ValueError):
    pass


class FieldMismatch(ValueError):
    pass


class TowerMismatch(ValueError):
    pass


class SpecInvariantViolation(ValueError):
    """A tower spec failed one of its invariants.

    Attributes:
        invariant: short name of the failed invariant.
        index: 1-based index the failure refers to, if any.
    """

    def __init__(self, invariant: str, index: int | None = None, detail: str = "") -> None:
        self.invariant = invariant
        self.index = index
        where = f" at index {index}" if index is not None else ""
        msg = f"tower spec violates {invariant}{where}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class AssumptionViolation(ValueError):
    pass


class FamilyPreconditionViolation(ValueError):
    pass


class PreconditionViolation(ValueError):
    def __init__(self, condition: str, detail: str = "") -> None:
        self.condition = condition
        super().__init__(f"precondition '{condition}' failed" + (f": {detail}" if detail else ""))


class NonIntegralUpperBreaks(ValueError):
    def __init__(self, index: int, value: Any) -> None:
        self.index = index
        self.value = value
        super().__init__(f"upper break u_{index} = {value} is not an integer")


class OrderViolation(ValueError):
    pass


class NotMinusOneResidue(ValueError):
    pass


class ValidationFailed(ValueError):
    def __init__(self, report: dict[str, Any]) -> None:
        self.report = report
        failed = [k for k, v in report.get("constraints", {}).items() if v is False]
        super().__init__(f"Hopf parameters failed validation: {', '.join(failed) or 'unknown'}")


class DivideByZero(ZeroDivisionError):
    pass


class IndeterminatePrecision(RuntimeError):
    pass


class IndeterminateValuation(RuntimeError):
    pass


class PrecisionInsufficient(RuntimeError):
    pass


class WpVanishes(RuntimeError):
    def __init__(self, index: int) -> None:
        self.index = index
        super().__init__(f"wp(Omega_{{{index - 1},{index}}}) vanishes; omega data is invalid")


class StabilizationFailure(RuntimeError):
    """A generator failed to map the target ideal into itself.

    ``witness`` holds ``{"generator", "t", "coefficient_valuation"}``.
    """

    def __init__(self, witness: dict[str, Any]) -> None:
        self.witness = witness
        super().__init__(
            "generator {generator} moves lambda_{t} out of the ideal "
            "(coefficient valuation {coefficient_valuation})".format(**witness)
        )


class FreenessFailure(RuntimeError):
    def __init__(self, witness: dict[str, Any]) -> None:
        self.witness = witness
        super().__init__(f"free generator check failed: {witness}")
