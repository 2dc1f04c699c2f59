"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class DyntdError(Exception):
    """Base class; ``kind`` is the short name used in run reports."""

    kind = "Error"


class NotPresent(DyntdError, KeyError):
    kind = "NotPresent"


class NotIsolated(DyntdError, ValueError):
    kind = "NotIsolated"


class SelfLoop(DyntdError, ValueError):
    kind = "SelfLoop"


class VertexSetMismatch(DyntdError, ValueError):
    kind = "VertexSetMismatch"


# formulas

class MsoSyntaxError(DyntdError, ValueError):
    kind = "SyntaxError"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class SortError(DyntdError, ValueError):
    kind = "SortError"


class UnboundVariable(DyntdError, ValueError):
    kind = "UnboundVariable"


class UnassignedConstant(DyntdError, ValueError):
    kind = "UnassignedConstant"


class TooLarge(DyntdError, ValueError):
    kind = "TooLarge"


class InvalidDepth(DyntdError, ValueError):
    kind = "InvalidDepth"


# catalogs and budgets

class BudgetExceeded(DyntdError, RuntimeError):
    kind = "BudgetExceeded"


class CatalogBudgetExceeded(BudgetExceeded):
    kind = "CatalogBudgetExceeded"


class ValidationBudgetExceeded(BudgetExceeded):
    kind = "ValidationBudgetExceeded"


class InconsistentLabel(DyntdError, ValueError):
    kind = "InconsistentLabel"


# dynamic structure

class DepthExceeded(DyntdError, ValueError):
    kind = "DepthExceeded"


class DepthWouldExceed(DyntdError, ValueError):
    kind = "DepthWouldExceed"


class NoSuchEdge(DyntdError, KeyError):
    kind = "NoSuchEdge"


class EdgeExists(DyntdError, ValueError):
    kind = "EdgeExists"


class Infeasible(DyntdError, ValueError):
    kind = "Infeasible"


class NoRootWitness(DyntdError, ValueError):
    kind = "NoRootWitness"


class InvariantViolation(DyntdError, AssertionError):
    kind = "InvariantViolation"


class VertexExists(DyntdError, ValueError):
    kind = "VertexExists"
