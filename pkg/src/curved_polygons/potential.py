"""Cotangent potential, its derivatives in both charts, and equilibrium residuals.

``U = sum_{i<j} m_i m_j cot d_ij`` with ``cos d_ij = q_i . q_j``.  Sines are
always formed as ``sqrt(1 - cos^2)`` from dot products rather than through
``arccos``; that keeps the powers ``sin^3`` and ``sin^5`` well conditioned
near ``d = pi/2``.
"""

from dataclasses import dataclass

import numpy as np

from curved_polygons.errors import SingularConfiguration
from curved_polygons.geometry import (
    ANTIPODAL_TOL,
    CartesianConfig,
    SphericalConfig,
    as_masses,
    spherical_to_cartesian,
)

EQUILIBRIUM_TOL = 1e-10
FD_STEP = 1e-5


def _points(cfg):
    if isinstance(cfg, CartesianConfig):
        return cfg.points
    if isinstance(cfg, SphericalConfig):
        return cfg.cartesian()
    return np.asarray(cfg, dtype=float)


def _angles(cfg, theta=None):
    if isinstance(cfg, SphericalConfig):
        return cfg.phi, cfg.theta
    return np.asarray(cfg, dtype=float), np.asarray(theta, dtype=float)


def pair_geometry(q, tol=ANTIPODAL_TOL):
    """Cosines and sines of all mutual distances, diagonal set to ``(0, 1)``.

    Raises :class:`SingularConfiguration` when a pair is within ``tol`` of
    coincidence or antipodality.
    """
    c = q @ q.T
    n = c.shape[0]
    np.fill_diagonal(c, 0.0)
    off = ~np.eye(n, dtype=bool)
    worst = np.max(np.abs(c[off])) if n > 1 else 0.0
    if worst >= 1.0 - tol:
        i, j = np.unravel_index(np.argmax(np.where(off, np.abs(c), -1.0)), c.shape)
        raise SingularConfiguration(
            f"bodies {i} and {j} are coincident or antipodal",
            pair=(int(i), int(j)),
            cos_d=float(c[i, j]),
        )
    s = np.sqrt(1.0 - c * c)
    np.fill_diagonal(s, 1.0)
    return c, s


def potential_U(masses, cfg):
    m = as_masses(masses)
    c, s = pair_geometry(_points(cfg))
    mm = np.outer(m, m)
    iu = np.triu_indices(m.size, 1)
    return float(np.sum((mm * c / s)[iu]))


def grad_cartesian(masses, cfg):
    """Tangential gradients ``grad_{q_i} U`` as an ``(n, 4)`` array."""
    m = as_masses(masses)
    q = _points(cfg)
    c, s = pair_geometry(q)
    w = np.outer(m, m) / s**3
    np.fill_diagonal(w, 0.0)
    return w @ q - np.sum(w * c, axis=1)[:, None] * q


def _spherical_pairs(phi, theta):
    st, ct = np.sin(theta), np.cos(theta)
    dphi = phi[:, None] - phi[None, :]
    cd = np.outer(ct, ct) + np.outer(st, st) * np.cos(dphi)
    n = phi.size
    np.fill_diagonal(cd, 0.0)
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.max(np.abs(cd[off])) >= 1.0 - ANTIPODAL_TOL:
        i, j = np.unravel_index(np.argmax(np.where(off, np.abs(cd), -1.0)), cd.shape)
        raise SingularConfiguration(
            f"bodies {i} and {j} are coincident or antipodal",
            pair=(int(i), int(j)),
            cos_d=float(cd[i, j]),
        )
    sd = np.sqrt(1.0 - cd * cd)
    np.fill_diagonal(sd, 1.0)
    return st, ct, dphi, cd, sd


def grad_spherical(masses, cfg, theta=None):
    """Partial derivatives ``(dU/dphi_i, dU/dtheta_i)``.

    ``cfg`` is a :class:`SphericalConfig` or a ``phi`` array with ``theta``
    passed separately (no pole check in that case).
    """
    m = as_masses(masses)
    phi, theta = _angles(cfg, theta)
    st, ct, dphi, cd, sd = _spherical_pairs(phi, theta)
    w = np.outer(m, m) / sd**3
    np.fill_diagonal(w, 0.0)
    dc_dphi = -np.outer(st, st) * np.sin(dphi)
    dc_dtheta = -np.outer(st, ct) + np.outer(ct, st) * np.cos(dphi)
    return np.sum(w * dc_dphi, axis=1), np.sum(w * dc_dtheta, axis=1)


@dataclass(frozen=True)
class SphericalHessian:
    phi_block: np.ndarray
    theta_block: np.ndarray
    # mixed_block[i, j] = d^2 U / dphi_i dtheta_j
    mixed_block: np.ndarray
    evaluation_point: SphericalConfig

    def full(self):
        """Assembled ``2n x 2n`` Hessian in ``(phi, theta)`` ordering."""
        return np.block(
            [[self.phi_block, self.mixed_block], [self.mixed_block.T, self.theta_block]]
        )


def hessian_phi_phi(masses, phi, theta):
    m = as_masses(masses)
    st, ct, dphi, cd, sd = _spherical_pairs(np.asarray(phi, float), np.asarray(theta, float))
    sisj = np.outer(st, st)
    num = -3.0 * cd * sisj**2 * np.sin(dphi) ** 2 + sd**2 * sisj * np.cos(dphi)
    H = np.outer(m, m) * num / sd**5
    np.fill_diagonal(H, 0.0)
    np.fill_diagonal(H, -np.sum(H, axis=1))
    return H


def hessian_theta_theta(masses, phi, theta):
    m = as_masses(masses)
    st, ct, dphi, cd, sd = _spherical_pairs(np.asarray(phi, float), np.asarray(theta, float))
    cosd = np.cos(dphi)
    # a[i, j] = d cos d_ij / d theta_i,  a.T[i, j] = d cos d_ij / d theta_j
    a = -np.outer(st, ct) + np.outer(ct, st) * cosd
    mm = np.outer(m, m)
    off = mm * (3.0 * cd * a * a.T + sd**2 * (np.outer(st, st) + np.outer(ct, ct) * cosd)) / sd**5
    diag_terms = mm * (3.0 * cd * a * a - sd**2 * cd) / sd**5
    np.fill_diagonal(off, 0.0)
    np.fill_diagonal(diag_terms, 0.0)
    return off + np.diag(np.sum(diag_terms, axis=1))


def hessian_spherical(masses, cfg, theta=None, step=FD_STEP):
    """Hessian of U in the ``(phi, theta)`` chart.

    The ``phi phi`` and ``theta theta`` blocks are analytic; the mixed block is
    a central difference of the analytic gradient with the given step.
    """
    phi, theta = _angles(cfg, theta)
    m = as_masses(masses)
    point = cfg if isinstance(cfg, SphericalConfig) else SphericalConfig(phi, theta)
    n = phi.size
    mixed = np.empty((n, n))
    for j in range(n):
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += step
        tm[j] -= step
        gp, _ = grad_spherical(m, phi, tp)
        gm, _ = grad_spherical(m, phi, tm)
        mixed[:, j] = (gp - gm) / (2 * step)
    return SphericalHessian(
        phi_block=hessian_phi_phi(m, phi, theta),
        theta_block=hessian_theta_theta(m, phi, theta),
        mixed_block=mixed,
        evaluation_point=point,
    )


@dataclass(frozen=True)
class EquilibriumResidual:
    residual_vectors: np.ndarray
    lam: np.ndarray
    max_norm: float
    tol: float = EQUILIBRIUM_TOL

    @property
    def is_equilibrium(self):
        return self.max_norm <= self.tol


def equilibrium_residual_cartesian(masses, cfg, tol=EQUILIBRIUM_TOL):
    """Residuals ``sum_j m_j q_j / sin^3 d_ij - lambda_i q_i``.

    ``lambda_i = sum_j m_j cos d_ij / sin^3 d_ij`` so the residual is the
    tangential force per unit mass: ``m_i * residual_i == grad_{q_i} U``.
    """
    m = as_masses(masses)
    q = _points(cfg)
    c, s = pair_geometry(q)
    w = m[None, :] / s**3
    np.fill_diagonal(w, 0.0)
    lam = np.sum(w * c, axis=1)
    res = w @ q - lam[:, None] * q
    return EquilibriumResidual(
        residual_vectors=res,
        lam=lam,
        max_norm=float(np.max(np.linalg.norm(res, axis=1))),
        tol=tol,
    )


def equilibrium_residual_s1(masses, phi):
    """Left-hand sides ``sum_j m_j sin(phi_j - phi_i) / sin^3 d_ij`` on the circle."""
    m = as_masses(masses)
    phi = np.asarray(phi, dtype=float)
    q = spherical_to_cartesian(phi, np.full_like(phi, np.pi / 2))
    pair_geometry(q)
    sij = np.sin(phi[None, :] - phi[:, None])
    np.fill_diagonal(sij, 0.0)
    s3 = np.abs(sij) ** 3
    np.fill_diagonal(s3, 1.0)
    return np.sum(m[None, :] * sij / s3, axis=1)
