"""Exception hierarchy for the closure engine."""


class FeneClosureError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FeneClosureError, ValueError):
    """A configuration lies outside the domain of a force law or observable."""


class MissingMoment(FeneClosureError, ValueError):
    """FENE-P force evaluated without the ensemble mean-square length."""


class DimensionMismatch(FeneClosureError, ValueError):
    pass


class RejectionOverflow(FeneClosureError, RuntimeError):
    """Accept-reject exceeded its retry cap; the time step is too large."""


class NewtonDivergence(FeneClosureError, RuntimeError):
    pass


class SingularJacobian(FeneClosureError, RuntimeError):
    """Constraint gradients are numerically linearly dependent."""


class DomainViolation(FeneClosureError, RuntimeError):
    """A projected particle left the admissible configuration domain."""


class InfeasibleMoments(FeneClosureError, ValueError):
    """Target moments are not realizable by a quasi-equilibrium density."""


class QuadratureFailure(FeneClosureError, RuntimeError):
    pass


class SupportViolation(FeneClosureError, ValueError):
    pass


class BinMismatch(FeneClosureError, ValueError):
    pass


class TooFewBatches(FeneClosureError, ValueError):
    pass


class ParseError(FeneClosureError, ValueError):
    """Invalid experiment configuration.

    Attributes
    ----------
    field : str or None
        Offending key, when the error is attributable to one.
    line : int or None
        1-based line number in the config text.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
