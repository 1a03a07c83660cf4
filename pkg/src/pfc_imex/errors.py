"""Exception hierarchy shared across the package."""


class PFCError(Exception):
    """Base class for all errors raised by :mod:`pfc_imex`."""


class ConfigurationError(PFCError, ValueError):
    """Invalid user configuration (grid sizes, parameter ranges, config keys)."""


class StructuralError(PFCError, ValueError):
    """A Butcher tableau or matrix with inconsistent shape or structure."""


class ContractViolation(PFCError, ValueError):
    """A documented precondition of a numerical routine was not met."""


class NumericError(PFCError, FloatingPointError):
    """Non-finite values or vanishing denominators during a computation."""

    def __init__(self, message, step=None, stage=None):
        if step is not None:
            message = f"{message} (step {step}" + (f", stage {stage})" if stage is not None else ")")
        super().__init__(message)
        self.step = step
        self.stage = stage


class CertificationError(PFCError):
    """Strict mode refused to run with an inadmissible stabilizer certificate."""


class BoundViolation(PFCError):
    """Strict mode aborted because a stage left the truncation interval."""
