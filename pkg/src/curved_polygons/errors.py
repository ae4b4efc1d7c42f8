"""Exception hierarchy shared by all modules.

The CLI reports ``type(err).__name__`` verbatim, so class names are part of
the public interface.
"""


class CurvedNBodyError(Exception):
    """Base class for domain errors raised by this package."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class SingularConfiguration(CurvedNBodyError):
    """A pair of bodies is (numerically) coincident or antipodal."""


class AntipodalOrCoincident(SingularConfiguration):
    """Geodesic distance requested between two points with |a.b| ~ 1."""


class PoleSingularity(CurvedNBodyError):
    """A colatitude is too close to 0 or pi for the spherical chart."""


class PoleLatitude(PoleSingularity):
    """Latitude-circle family evaluated at a coordinate pole."""


class EvenN(CurvedNBodyError, ValueError):
    """Regular polygon requested with an even number of vertices."""


class KernelDimensionError(CurvedNBodyError):
    """The numerical kernel of the mass system is not one-dimensional."""


class NonPositiveMasses(CurvedNBodyError):
    """The mass vector spanning the kernel has a non-positive component."""


class NotAnEquilibrium(CurvedNBodyError):
    """The supplied configuration and masses do not form an equilibrium."""


class SingularityApproach(CurvedNBodyError):
    """A trajectory came closer to the singular set than the abort floor."""
