"""Exception hierarchy.

Input-validation problems derive from :class:`ValueError` so callers that
only care about bad arguments can catch that. Failures of a numerical
procedure derive from :class:`NumericalError`; the CLI maps those to exit
code 3.
"""


class ConslabError(Exception):
    pass


class InfeasibleError(ConslabError, ValueError):
    """Parameters admit no valid object (e.g. odd ``n*d`` for a regular graph)."""


class TooLargeError(ConslabError, ValueError):
    pass


class NotSymmetricError(ConslabError, ValueError):
    pass


class GroundingSetError(ConslabError, ValueError):
    pass


class ConfigError(ConslabError, ValueError):
    pass


class NumericalError(ConslabError):
    pass


class GenerationError(NumericalError):
    """Random generation gave up after its retry budget."""


class NoConvergenceError(NumericalError):
    pass


class StabilizationError(NumericalError):
    """A designed gain failed its closed-loop Schur verification."""


class UnconsensusableError(NumericalError):
    """The unstable part of the dynamics exceeds the network's eigenratio margin."""


class NotSchurError(NumericalError):
    pass
