"""Exception hierarchy shared by every module of the workbench."""

from __future__ import annotations

from typing import Any


class ContractLabError(Exception):
    """Base class for all workbench errors."""


class DimensionMismatch(ContractLabError, ValueError):
    pass


class DegenerateBasis(ContractLabError, ValueError):
    """A point set expected to be affinely independent is not."""


class DegenerateSupport(DegenerateBasis):
    pass


class InvalidScenario(ContractLabError, ValueError):
    pass


class NumericalFailure(ContractLabError, RuntimeError):
    pass


class NoConvergence(NumericalFailure):
    pass


class InvalidGeometry(ContractLabError, ValueError):
    pass


class RedundantSupport(ContractLabError, ValueError):
    pass


class NotFullDimension(ContractLabError, ValueError):
    pass


class OverlappingSupports(ContractLabError, ValueError):
    pass


class NotIncentiveCompatible(ContractLabError, ValueError):
    pass


class PaymentMismatch(ContractLabError, ValueError):
    pass


class WitnessedError(ContractLabError, ValueError):
    """Error carrying a structured witness of the violated inequality."""

    def __init__(self, message: str, witness: dict[str, Any] | None = None):
        super().__init__(message)
        self.witness = witness


class NotCMonotone(WitnessedError):
    pass


class NotStronglyCMonotone(WitnessedError):
    pass


class MonotonicityDiagnostic(WitnessedError):
    """A solved choice function breaks the c-monotonicity guaranteed for increasing virtual types."""
