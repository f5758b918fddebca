"""Exception taxonomy.

Every anticipated failure raises one of these so the CLI can map it to an
exit code and a machine-readable diagnostic.  Anything else escaping is a bug.
"""


class ApwError(Exception):
    """Base class for all anticipated failures.

    Parameters beyond the message are kept in ``context`` so callers can emit
    structured diagnostics without parsing strings.
    """

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class ConfigError(ApwError):
    """Malformed or inconsistent configuration input."""


class FormatError(ApwError):
    """Malformed on-disk point-set or operator file."""


class EmptyWindow(ApwError):
    """A window (or its erosion) contains no room for the requested probe."""


class DensityViolated(ApwError):
    """A point set breaks its declared packing or covering bound."""


class NoBijection(ApwError):
    """Endpoint sets cannot be matched point-to-point within the hard-core radius."""


class EmptyIntersection(ApwError):
    """A comparison region contains no points of one of the sets."""


class BasisMismatch(ApwError):
    """Two operators or vectors live on different site bases."""


class NonHermitian(ApwError):
    """A kernel expected to be self-adjoint is not."""


class PotentialNotCompact(ApwError):
    """A potential was supplied without a declared support radius."""


class PitchTooCoarse(ApwError):
    """Grid pitch too coarse to resolve the point pattern (needs pitch <= r/4)."""


class RealShift(ApwError):
    """A resolvent-continuity check was requested at a real energy."""


class WidthTooLarge(ApwError):
    """A seed width exceeds half the hard-core radius, so translates overlap."""


class EndpointInSpectrum(ApwError):
    """A spectral-window endpoint sits on (or too close to) an eigenvalue."""


class GaplessBand(ApwError):
    """No spectral gap matching the request was found."""


class GramSingular(ApwError):
    """A frame Gram matrix is singular to working precision."""
