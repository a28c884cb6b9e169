"""Error types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant.

    The message names the invariant and, where useful, the offending
    entry or eigenvalue. The CLI maps this to exit code 2.
    """


class CrossCheckError(RuntimeError):
    """Two evaluation paths that must agree exactly disagreed.

    This signals a defect in the package, never bad user input. The
    CLI maps this to exit code 3.
    """
