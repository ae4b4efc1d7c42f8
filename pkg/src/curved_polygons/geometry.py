"""Charts, distances and rotations on the unit sphere S^3 in R^4.

Points are stored as rows of an ``(n, 4)`` array ``(x, y, z, w)``.  The
great two-sphere S^2 is ``w = 0`` and its equator S^1 is ``z = w = 0``.
The spherical chart on S^2 is ``(x, y, z) = (sin t cos f, sin t sin f, cos t)``
with ``f`` the longitude ``phi`` and ``t`` the colatitude ``theta``.
"""

from dataclasses import dataclass, field

import numpy as np

from curved_polygons.errors import AntipodalOrCoincident, EvenN, PoleSingularity

POLE_MARGIN = 1e-8
ANTIPODAL_TOL = 1e-14
UNIT_TOL = 1e-12

CHARTS = ("S1", "S2", "S3")


def as_masses(masses):
    """Return ``masses`` as a float array after checking positivity."""
    m = np.asarray(masses, dtype=float)
    if m.ndim != 1 or m.size < 2:
        raise ValueError(f"need at least two masses, got shape {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise ValueError(f"masses must be finite and positive, got {m.tolist()}")
    return m


@dataclass(frozen=True)
class SphericalConfig:
    """Longitudes ``phi`` and colatitudes ``theta`` of n bodies on S^2."""

    phi: np.ndarray
    theta: np.ndarray
    pole_margin: float = field(default=POLE_MARGIN, repr=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).copy()
        theta = np.asarray(self.theta, dtype=float).copy()
        if phi.shape != theta.shape or phi.ndim != 1:
            raise ValueError("phi and theta must be 1-d arrays of equal length")
        bad = (theta < self.pole_margin) | (theta > np.pi - self.pole_margin)
        if np.any(bad):
            raise PoleSingularity(
                f"colatitude within {self.pole_margin:g} of a pole",
                indices=np.flatnonzero(bad).tolist(),
                theta=theta[bad].tolist(),
            )
        phi.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self):
        return self.phi.size

    def cartesian(self):
        return spherical_to_cartesian(self.phi, self.theta)


@dataclass(frozen=True)
class CartesianConfig:
    """n unit vectors in R^4 tagged with the smallest sphere containing them."""

    points: np.ndarray
    chart: str = "S3"

    def __post_init__(self):
        q = np.array(self.points, dtype=float)
        if q.ndim != 2 or q.shape[1] != 4:
            raise ValueError(f"points must have shape (n, 4), got {q.shape}")
        if self.chart not in CHARTS:
            raise ValueError(f"chart must be one of {CHARTS}")
        norms = np.linalg.norm(q, axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_TOL:
            raise ValueError("points must be unit vectors")
        if self.chart in ("S1", "S2") and np.max(np.abs(q[:, 3])) > UNIT_TOL:
            raise ValueError(f"chart {self.chart} requires w = 0")
        if self.chart == "S1" and np.max(np.abs(q[:, 2])) > UNIT_TOL:
            raise ValueError("chart S1 requires z = 0")
        q.setflags(write=False)
        object.__setattr__(self, "points", q)

    @property
    def n(self):
        return self.points.shape[0]


def spherical_to_cartesian(phi, theta=None):
    """Embed spherical coordinates in R^4 (``w = 0``).

    Accepts either a :class:`SphericalConfig` or raw ``phi, theta`` arrays; the
    raw form performs no pole check.
    """
    if isinstance(phi, SphericalConfig):
        phi, theta = phi.phi, phi.theta
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    # the float pi/2 stands for the equator: cos(pi/2) would leave z ~ 6e-17,
    # which the unstable colatitude dynamics amplifies off the invariant circle
    on_equator = theta == np.pi / 2
    st = np.where(on_equator, 1.0, np.sin(theta))
    ct = np.where(on_equator, 0.0, np.cos(theta))
    return np.stack([st * np.cos(phi), st * np.sin(phi), ct, np.zeros_like(phi)], axis=-1)


def cartesian_to_spherical(points):
    """Inverse of :func:`spherical_to_cartesian` for points with ``w = 0``.

    Returns ``(phi, theta)`` with ``phi`` in ``[0, 2 pi)``.
    """
    q = np.asarray(points, dtype=float)
    phi = np.mod(np.arctan2(q[..., 1], q[..., 0]), 2 * np.pi)
    rho = np.hypot(q[..., 0], q[..., 1])
    theta = np.arctan2(rho, q[..., 2])
    return phi, theta


def geodesic_distance(a, b, tol=ANTIPODAL_TOL):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(np.dot(a, b))
    if abs(c) >= 1.0 - tol:
        raise AntipodalOrCoincident(
            "points are coincident or antipodal", dot=c
        )
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def rotation_matrix(alpha, beta, t):
    """The block rotation A_{alpha,beta}(t) of R^4."""
    ca, sa = np.cos(alpha * t), np.sin(alpha * t)
    cb, sb = np.cos(beta * t), np.sin(beta * t)
    return np.array(
        [
            [ca, -sa, 0.0, 0.0],
            [sa, ca, 0.0, 0.0],
            [0.0, 0.0, cb, -sb],
            [0.0, 0.0, sb, cb],
        ]
    )


def rotation_matrix_dot(alpha, beta, t, order=1):
    """Time derivative of :func:`rotation_matrix` (``order`` 1 or 2)."""
    ca, sa = np.cos(alpha * t), np.sin(alpha * t)
    cb, sb = np.cos(beta * t), np.sin(beta * t)
    if order == 1:
        return np.array(
            [
                [-alpha * sa, -alpha * ca, 0.0, 0.0],
                [alpha * ca, -alpha * sa, 0.0, 0.0],
                [0.0, 0.0, -beta * sb, -beta * cb],
                [0.0, 0.0, beta * cb, -beta * sb],
            ]
        )
    if order == 2:
        a2, b2 = alpha * alpha, beta * beta
        return np.array(
            [
                [-a2 * ca, a2 * sa, 0.0, 0.0],
                [-a2 * sa, -a2 * ca, 0.0, 0.0],
                [0.0, 0.0, -b2 * cb, b2 * sb],
                [0.0, 0.0, -b2 * sb, -b2 * cb],
            ]
        )
    raise ValueError("order must be 1 or 2")


def apply_rotation(points, alpha, beta, t):
    """Rotate every point by A_{alpha,beta}(t).

    ``points`` may be an ``(n, 4)`` array or a :class:`CartesianConfig`; the
    return type follows the input.
    """
    A = rotation_matrix(alpha, beta, t)
    if isinstance(points, CartesianConfig):
        rotated = points.points @ A.T
        # beta mixes z and w, which can lift S1/S2 configurations into S3
        chart = points.chart
        if chart == "S2" and np.max(np.abs(rotated[:, 3])) > UNIT_TOL:
            chart = "S3"
        elif chart == "S1" and np.max(np.abs(rotated[:, 2:])) > UNIT_TOL:
            chart = "S3"
        return CartesianConfig(rotated, chart=chart)
    return np.asarray(points, dtype=float) @ A.T


def regular_polygon(n):
    """Regular n-gon on the equator: ``phi_k = 2 k pi / n`` for ``k = 1..n``."""
    n = int(n)
    if n < 3:
        raise ValueError(f"polygon needs n >= 3, got {n}")
    if n % 2 == 0:
        raise EvenN(
            f"regular {n}-gon has antipodal vertex pairs", n=n
        )
    k = np.arange(1, n + 1)
    return SphericalConfig(2 * np.pi * k / n, np.full(n, np.pi / 2))


def cosine_matrix(points):
    """Gram matrix ``q_i . q_j`` of the rows of ``points``."""
    q = np.asarray(points, dtype=float)
    return q @ q.T


def min_separation(points):
    """Smallest ``min(d_ij, pi - d_ij)`` over pairs; 0 on the singular set."""
    q = np.asarray(points.points if isinstance(points, CartesianConfig) else points)
    n = q.shape[0]
    if n < 2:
        return np.pi / 2
    iu = np.triu_indices(n, 1)
    d = np.arccos(np.clip(cosine_matrix(q)[iu], -1.0, 1.0))
    return float(np.min(np.minimum(d, np.pi - d)))


def pairwise_distances(points):
    """Upper-triangular geodesic distances ``d_ij`` (i < j) as a flat array."""
    q = np.asarray(points, dtype=float)
    iu = np.triu_indices(q.shape[0], 1)
    return np.arccos(np.clip(cosine_matrix(q)[iu], -1.0, 1.0))
