"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage errors exit 2 (argparse),
DataError exits 3, NumericalError and subclasses exit 4.
"""


class SimplexSliceError(Exception):
    """Base class for all package errors."""


class DataError(SimplexSliceError):
    """Malformed or missing input data (files, schemas, shapes)."""


class NumericalError(SimplexSliceError):
    """A numerical procedure failed or refused to proceed."""


class DegenerateInput(NumericalError):
    """Input violates a general-position assumption.

    Carries a human-readable description of the offending constraint so the
    CLI can suggest a perturbation instead of silently applying one.
    """


class ContractViolation(SimplexSliceError):
    """A documented precondition was violated by the caller."""


class Infeasible(NumericalError):
    """A feasibility problem (ball placement, LP) has no solution."""


class NumericalFailure(NumericalError):
    """An iteration underflowed or otherwise lost all precision."""
