"""Exception hierarchy shared by the solver modules and the CLI."""


class ValidationError(ValueError):
    """Bad parameters or configuration, detected before any computation."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class NumericalError(RuntimeError):
    """A solver could not produce a trustworthy result."""


class IntegrationError(NumericalError):
    pass


class StepSizeUnderflow(IntegrationError):
    def __init__(self, t, h):
        self.t = t
        self.h = h
        super().__init__(f"step size underflow at t={t!r} (h={h:.3e})")


class NonFiniteDerivative(IntegrationError):
    def __init__(self, t, index):
        self.t = t
        self.index = index
        super().__init__(f"non-finite derivative in component {index} at t={t!r}")


class WeiNormanSingularity(NumericalError):
    """Wei-Norman coordinates left their chart (|beta_+| too large)."""

    def __init__(self, t, magnitude):
        self.t = t
        self.magnitude = magnitude
        super().__init__(
            f"|beta_+| = {magnitude:.3e} at t={t!r}: the product-of-exponentials "
            "factorization is singular here (atom close to full inversion)"
        )


class TruncationError(ValidationError):
    """Fock truncation too small for the requested coherent amplitude."""

    def __init__(self, message, required):
        self.required = required
        super().__init__(f"{message}; need nmax >= {required}")


class NoSignChange(NumericalError):
    def __init__(self, lo, hi, w_min, w_max, grid=None, values=None):
        self.w_range = (w_min, w_max)
        self.grid = grid
        self.values = values
        super().__init__(
            f"W(T) does not change sign on [{lo:.6g}, {hi:.6g}]; "
            f"observed range [{w_min:.6g}, {w_max:.6g}]"
        )
