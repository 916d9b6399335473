"""
errors.py

Every error the simulator raises on purpose. Callers that only care about
"something in the simulator refused" can catch ReconfigError.
"""

from __future__ import annotations

from typing import Optional


class ReconfigError(Exception):
    """Base class for all simulator errors."""


class AllWeightsZero(ReconfigError, ValueError):
    pass


class UnknownCharacteristic(ReconfigError, KeyError):
    def __init__(self, characteristic: str, where: str = "") -> None:
        self.characteristic = characteristic
        self.where = where
        suffix = f" in {where}" if where else ""
        super().__init__(f"no mark or value for characteristic '{characteristic}'{suffix}")

    def __str__(self) -> str:
        return str(self.args[0])


class EmptySpace(ReconfigError, ValueError):
    pass


class UnknownCulprit(ReconfigError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown culprit"


class UnknownEntity(ReconfigError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown entity"


class CyclicTopology(ReconfigError, ValueError):
    pass


class BudgetExceeded(ReconfigError, RuntimeError):
    pass


class InvalidDefaultConfiguration(ReconfigError, ValueError):
    pass


class StalePlan(ReconfigError, RuntimeError):
    pass


class UnknownName(ReconfigError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown name"


class ScenarioError(ReconfigError, ValueError):
    """Anything wrong with a scenario document."""


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ScenarioReferenceError(ScenarioError):
    def __init__(self, ref_id: str, context: str) -> None:
        self.ref_id = ref_id
        self.context = context
        super().__init__(f"{context}: unknown id '{ref_id}'")


class ScenarioConstraintError(ScenarioError):
    def __init__(self, invariant: str, detail: str) -> None:
        self.invariant = invariant
        self.detail = detail
        super().__init__(f"{invariant}: {detail}")
