"""Shared exception types.

ValidationError covers malformed inputs (bad JSON documents, out-of-range
parameters, unknown keys); the CLI maps it to exit code 2.  NumericalError
covers failures of the numerics themselves (quadrature that will not
converge, a solver step producing garbage for reasons other than blow-up);
the CLI maps it to exit code 3.  Detected blow-up is not an error.
"""


class ValidationError(ValueError):
    """Input document or parameter violates the declared contract."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to produce a trustworthy result."""
