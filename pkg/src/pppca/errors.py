"""Exception types shared across the package.

User-facing input problems (``ParseError``, ``ShapeError`` and the
``Degenerate*`` family) map to CLI exit code 1, numerical breakdowns to 2.
"""


class PPPCAError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ParseError(PPPCAError):
    pass


class ShapeError(PPPCAError):
    pass


class DegenerateFeature(PPPCAError):
    pass


class DegenerateBound(PPPCAError):
    pass


class DegenerateSpectrum(PPPCAError):
    pass


class EmptyTally(PPPCAError):
    pass


class InfeasibleScenario(PPPCAError):
    pass


class DomainError(PPPCAError, ValueError):
    """Likelihood requested where a needed eigenvalue or variance is zero."""


class RangeError(PPPCAError, ValueError):
    """Argument outside its admissible range (k, delta_tilde, alpha...)."""


class NumericalError(PPPCAError):
    exit_code = 2
