"""Regular polygonal equilibria of the curved n-body problem on the sphere.

Construction and verification of equilibrium configurations under the
cotangent potential, closed-form circulant spectra, Jacobi-coordinate
reduction and linear stability of the associated relative equilibria,
and direct constrained simulation.
"""

from curved_polygons.errors import (
    AntipodalOrCoincident,
    CurvedNBodyError,
    EvenN,
    KernelDimensionError,
    NonPositiveMasses,
    NotAnEquilibrium,
    PoleLatitude,
    PoleSingularity,
    SingularConfiguration,
    SingularityApproach,
)

__version__ = "0.1.0"

__all__ = [
    "AntipodalOrCoincident",
    "CurvedNBodyError",
    "EvenN",
    "KernelDimensionError",
    "NonPositiveMasses",
    "NotAnEquilibrium",
    "PoleLatitude",
    "PoleSingularity",
    "SingularConfiguration",
    "SingularityApproach",
]
