"""Exception hierarchy shared by every module."""


class MracError(Exception):
    """Base class for all errors raised by mracflyer."""


class DomainError(MracError, ValueError):
    """An input lies outside the domain of an operation (NaN, Inf, negative mass...)."""


class ShapeError(MracError, ValueError):
    """Array dimensions do not agree."""


class ConfigError(MracError, ValueError):
    """A configuration document is incomplete or violates a parameter invariant."""


class CertificationError(MracError):
    """The closed-loop matrix is not Hurwitz, so no Lyapunov certificate exists.

    ``eigenvalues`` holds the offending spectrum so callers can report it.
    """

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class DivergenceError(MracError, ArithmeticError):
    """The simulation produced a non-finite value.

    ``t`` is the simulation time (s) at the start of the failing step.
    """

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t = {t:.6g} s)")
        self.t = t
