"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation problems exit 2,
guard / infeasibility problems exit 3, internal invariant violations exit 4.
"""


class UcrlabError(Exception):
    """Base class for all package errors."""


class ValidationError(UcrlabError):
    """Malformed input: bad pmf, bad parameter range, unparsable spec file."""


class DimensionError(ValidationError):
    """Shapes or alphabets of two objects do not line up."""


class UndefinedDensityError(ValidationError):
    """Information density requested at a point of zero likelihood or output mass."""


class GuardError(UcrlabError):
    """A resource or feasibility guard tripped: the request is well-formed but
    outside what this implementation will attempt."""


class InternalInvariantError(UcrlabError):
    """A postcondition the library promises was violated. Always a bug."""
