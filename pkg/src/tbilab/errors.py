"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`TbiError`,
so the command line front end can map physics/numerics failures to exit
code 1 and configuration problems to exit code 2.
"""


class TbiError(Exception):
    """Base class for computational and physical failures."""


class ImpossibleBranchError(TbiError):
    """A projector was applied to a state with zero norm."""


class UnsupportedInequalityError(TbiError, ValueError):
    """The requested inequality family cannot be evaluated."""


class NoViolationError(TbiError):
    """The inequality is not violated anywhere on the time grid."""


class NoDoubleWellError(TbiError):
    """Circuit parameters outside the bistable window."""


class DomainTruncationError(TbiError):
    """Eigenfunctions do not decay before the edge of the flux grid."""


class TwoLevelRegimeError(TbiError):
    """The lowest doublet does not form well-localized flux states."""


class BasisTruncationError(TbiError):
    """A half-line projection leaks too much weight out of the mode basis."""


class ConfigError(ValueError):
    """Invalid run configuration. ``key`` is the dotted path at fault."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class DegenerateSpectrumError(TbiError):
    """Eigenvalues that should be distinct coincide at machine precision."""
