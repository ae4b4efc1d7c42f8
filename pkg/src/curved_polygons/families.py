"""Equilibria near the regular polygon and the latitude-circle family.

* :func:`solve_masses` finds the masses that turn a slightly deformed polygon
  on the equator into an equilibrium (right kernel of the skew matrix ``B``).
* :func:`near_polygon_threshold` gives the critical ``alpha^2`` separating
  unstable from stable rigid rotation of such an equilibrium on S^2.
* :func:`second_family_alpha_sq` and :func:`bifurcation_scan` describe the
  regular n-gon rotating on a non-equatorial latitude circle.
"""

from dataclasses import dataclass

import numpy as np

from curved_polygons.errors import (
    KernelDimensionError,
    NonPositiveMasses,
    NotAnEquilibrium,
    PoleLatitude,
)
from curved_polygons.geometry import POLE_MARGIN, as_masses, regular_polygon
from curved_polygons.potential import equilibrium_residual_s1, hessian_theta_theta
from curved_polygons.spectra import _check_odd, build_skew_B, critical_alpha_sq

KERNEL_GAP = 1e6
THRESHOLD_EQ_TOL = 1e-9


@dataclass(frozen=True)
class MassSolveResult:
    masses: np.ndarray
    nullspace_dim: int
    residual: float
    singular_values: np.ndarray
    positive: bool = True

    @property
    def kernel_gap(self):
        s = self.singular_values
        return float(s[-2] / s[-1]) if s[-1] > 0 else np.inf

    def as_dict(self):
        return {
            "masses": self.masses.tolist(),
            "nullspace_dim": self.nullspace_dim,
            "residual": self.residual,
            "kernel_gap": self.kernel_gap,
            "positive": self.positive,
        }


def polygon_offset(phi):
    """Largest angular offset from the regular polygon, up to a common rotation."""
    phi = np.asarray(phi, dtype=float)
    base = regular_polygon(phi.size).phi
    d = np.angle(np.exp(1j * (phi - base)))
    d = np.angle(np.exp(1j * (d - d[0]))) + d[0]  # unwrap relative to body 1
    shift = 0.5 * (d.max() + d.min())
    return float(np.max(np.abs(d - shift)))


def solve_masses(phi, max_perturbation=0.05, gap=KERNEL_GAP):
    """Masses making ``phi`` (on the equator) an equilibrium, normalised to ``sum m = n``.

    The mass vector spans the right kernel of ``build_skew_B(phi)``; it is
    taken from the smallest singular vector and accepted only when the ratio
    of the two smallest singular values is at least ``gap``.  Pass
    ``max_perturbation=None`` to skip the closeness-to-polygon precondition.
    """
    phi = np.asarray(phi, dtype=float)
    n = _check_odd(phi.size)
    if max_perturbation is not None:
        off = polygon_offset(phi)
        if off > max_perturbation:
            raise ValueError(
                f"configuration is {off:.3g} rad from the regular polygon "
                f"(bound {max_perturbation:g})"
            )
    B = build_skew_B(phi)
    _, s, vt = np.linalg.svd(B)
    ratio = s[-2] / s[-1] if s[-1] > 0 else np.inf
    dim = 1 if ratio >= gap else int(np.sum(s <= s[0] / gap))
    if dim != 1:
        raise KernelDimensionError(
            f"numerical kernel has dimension {dim}", singular_values=s.tolist()
        )
    m = vt[-1]
    m = m * np.sign(np.sum(m))
    if np.any(m <= 0):
        raise NonPositiveMasses("kernel vector has non-positive entries", masses=m.tolist())
    m = m * n / np.sum(m)
    residual = float(np.max(np.abs(equilibrium_residual_s1(m, phi))))
    return MassSolveResult(masses=m, nullspace_dim=1, residual=residual, singular_values=s)


def mass_weighted_theta_block(phi, masses):
    m = as_masses(masses)
    H = hessian_theta_theta(m, phi, np.full(m.size, np.pi / 2))
    r = 1.0 / np.sqrt(m)
    return r[:, None] * H * r[None, :]


def near_polygon_threshold(phi, masses, tol=THRESHOLD_EQ_TOL):
    """Critical ``alpha^2`` for rigid rotation of an equatorial equilibrium.

    Rotating with ``p_phi_i = m_i alpha`` the colatitude perturbations obey
    ``m theta'' = (H_thth - alpha^2 m) theta``, so the rotation is linearly
    unstable exactly when ``alpha^2`` is below the largest eigenvalue of
    ``m^{-1/2} H_thth m^{-1/2}``.  For unit masses this is the ordinary
    theta-block maximum.
    """
    phi = np.asarray(phi, dtype=float)
    m = as_masses(masses)
    res = float(np.max(np.abs(equilibrium_residual_s1(m, phi))))
    if res > tol:
        raise NotAnEquilibrium(f"S^1 equilibrium residual {res:.3e} exceeds {tol:g}", residual=res)
    return float(np.linalg.eigvalsh(mass_weighted_theta_block(phi, m))[-1])


@dataclass(frozen=True)
class FamilyPoint:
    theta: float
    alpha_sq: float
    d1j: np.ndarray

    @property
    def alpha(self):
        return float(np.sqrt(self.alpha_sq))


def second_family_alpha_sq(n, theta, margin=POLE_MARGIN):
    """``alpha^2`` at which the regular n-gon on colatitude ``theta`` rotates rigidly.

    ``alpha^2 = sum_{j>=2} (1 - cos((j-1) 2pi/n)) / sin^3 d_1j`` with
    ``cos d_1j = cos^2 theta + sin^2 theta cos((j-1) 2pi/n)``.  The sum is
    regular at the equator, where it reduces to the critical value of the
    equatorial family.
    """
    n = _check_odd(n)
    theta = float(theta)
    if not (margin < theta < np.pi - margin):
        raise PoleLatitude(f"colatitude {theta!r} is at a coordinate pole", theta=theta)
    ang = np.arange(1, n) * 2 * np.pi / n
    st, ct = np.sin(theta), np.cos(theta)
    cd = ct * ct + st * st * np.cos(ang)
    sd = np.sqrt(1.0 - cd * cd)
    return FamilyPoint(
        theta=theta,
        alpha_sq=float(np.sum((1.0 - np.cos(ang)) / sd**3)),
        d1j=np.arctan2(sd, cd),
    )


@dataclass(frozen=True)
class BifurcationScan:
    n: int
    points: list
    critical_alpha_sq: float
    equator_alpha_sq: float

    @property
    def gap(self):
        return abs(self.equator_alpha_sq - self.critical_alpha_sq)

    def rows(self):
        return [(p.theta, p.alpha_sq) for p in self.points]


def bifurcation_scan(n, theta_grid):
    n = _check_odd(n)
    grid = np.asarray(theta_grid, dtype=float)
    points = [second_family_alpha_sq(n, t) for t in grid]
    return BifurcationScan(
        n=n,
        points=points,
        critical_alpha_sq=critical_alpha_sq(n),
        equator_alpha_sq=second_family_alpha_sq(n, np.pi / 2).alpha_sq,
    )
