"""Exception hierarchy for the acx package.

Every error raised by the public API derives from :class:`AcxError`, so
callers can catch the whole family with one clause.  Errors that carry
useful state (diagnostics, best iterates, closest feasible values) expose
it as attributes rather than burying it in the message.
"""

from __future__ import annotations


class AcxError(Exception):
    """Base class for all acx errors."""


class TieDetected(AcxError):
    """Exact score tie involving the true class under the strict tie policy.

    Attributes
    ----------
    count : int
        Number of tied comparisons found.
    """

    def __init__(self, count, message=None):
        self.count = int(count)
        super().__init__(message or f"{count} exact score tie(s) involving the true class; "
                         "use tie_policy='half' or 'random' to resolve them")


class MissingClass(AcxError):
    """A class referenced by the operation has no test points."""


class RangeError(AcxError, ValueError):
    """A requested moment order or target is outside the estimable range."""


class DomainError(AcxError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ConvergenceFailure(AcxError):
    """A constrained fit could not converge or the constraints are infeasible.

    Attributes
    ----------
    diagnostics : object or None
        Solver diagnostics for the best iterate, when one exists.
    closest_feasible_anchor : float or None
        For anchor infeasibility, the nearest attainable anchor value.
    """

    def __init__(self, message, diagnostics=None, closest_feasible_anchor=None):
        self.diagnostics = diagnostics
        self.closest_feasible_anchor = closest_feasible_anchor
        super().__init__(message)


class MaxIterations(AcxError):
    """Iteration cap reached before the convergence test was met.

    Attributes
    ----------
    result : object or None
        Best iterate found, with whatever diagnostics the solver attaches.
    """

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class InfeasibleStart(AcxError, ValueError):
    """The starting point handed to a constrained solver is not feasible."""


class ToleranceNotMet(AcxError):
    """Adaptive integration exhausted its budget above the requested tolerance.

    Attributes
    ----------
    estimate : float
        Best integral estimate obtained.
    error_estimate : float
        Estimated absolute error of ``estimate``.
    """

    def __init__(self, message, estimate, error_estimate):
        self.estimate = float(estimate)
        self.error_estimate = float(error_estimate)
        super().__init__(message)


class NoBracket(AcxError, ValueError):
    """Root finder endpoints do not bracket a sign change."""


class SingularCovariance(AcxError):
    """Sample covariance is singular and no regularization was requested."""


class ParseError(AcxError, ValueError):
    """A CSV input failed to parse.

    Attributes
    ----------
    path : str
    line : int or None
        1-based line number.
    column : str or int or None
        Column name or 1-based index.
    """

    def __init__(self, path, message, line=None, column=None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = self.path
        if line is not None:
            where += f":{line}"
        if column is not None:
            where += f" (column {column})"
        super().__init__(f"{where}: {message}")
