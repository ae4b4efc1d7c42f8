"""Jacobi-coordinate reduction by the longitude rotation SO(2).

On the circle the canonical change of variables ``u = A phi``,
``p_phi = A^T v`` separates the cyclic pair ``(g_n, G_n)`` (centre of mass
angle and total angular momentum) from the shape variables
``u_2..u_n, v_2..v_n``.  On S^2 the same change is applied to the longitudes
only, which gives the partial reduction with kinetic matrix
``P = A S M S A^T``.

Vectors ``u`` and ``v`` below always have length n with the cyclic
coordinate in the last slot: ``u = (u_2, ..., u_n, g_n)`` and
``v = (v_2, ..., v_n, G_n)``.
"""

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from curved_polygons.errors import PoleSingularity
from curved_polygons.geometry import (
    POLE_MARGIN,
    as_masses,
    regular_polygon,
    spherical_to_cartesian,
)
from curved_polygons.potential import (
    grad_spherical,
    hessian_phi_phi,
    hessian_theta_theta,
    potential_U,
)
from curved_polygons.spectra import _check_odd, critical_alpha_sq

ZERO_TOL = 1e-9
CRITICAL_BAND = 1e-9


@dataclass(frozen=True, eq=False)
class JacobiChart:
    masses: np.ndarray
    A: np.ndarray
    mu: np.ndarray  # partial sums mu_1..mu_n
    bigM: np.ndarray  # reduced masses M_2..M_n
    total_mass: float

    @property
    def n(self):
        return self.masses.size

    @cached_property
    def A_inv(self):
        return np.linalg.inv(self.A)

    @property
    def W(self):
        """Columns of ``A^{-1}`` along the shape directions ``u_2..u_n``."""
        return self.A_inv[:, :-1]

    @property
    def mtilde(self):
        """Diagonal of ``A M A^T``: ``(1/M_2, ..., 1/M_n, 1/mu_n)``."""
        return np.append(1.0 / self.bigM, 1.0 / self.total_mass)


def jacobi_chart(masses):
    m = as_masses(masses)
    n = m.size
    mu = np.cumsum(m)
    A = np.zeros((n, n))
    for k in range(1, n):
        A[k - 1, :k] = -m[:k] / mu[k - 1]
        A[k - 1, k] = 1.0
    A[n - 1, :] = m / mu[-1]
    bigM = m[1:] * mu[:-1] / mu[1:]
    return JacobiChart(masses=m, A=A, mu=mu, bigM=bigM, total_mass=float(mu[-1]))


def to_jacobi(chart, phi, p_phi):
    """``(phi, p_phi) -> (u, v)`` with ``u = A phi`` and ``p_phi = A^T v``."""
    u = chart.A @ np.asarray(phi, dtype=float)
    v = np.linalg.solve(chart.A.T, np.asarray(p_phi, dtype=float))
    return u, v


def from_jacobi(chart, u, v):
    phi = chart.A_inv @ np.asarray(u, dtype=float)
    p_phi = chart.A.T @ np.asarray(v, dtype=float)
    return phi, p_phi


@dataclass(frozen=True)
class ReducedStateS1:
    u: np.ndarray  # u_2..u_n
    v: np.ndarray  # v_2..v_n
    G_n: float
    g_n: float = 0.0

    def full(self):
        return np.append(self.u, self.g_n), np.append(self.v, self.G_n)


@dataclass(frozen=True)
class ReducedStateS2:
    u: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    p_theta: np.ndarray
    G_n: float
    g_n: float = 0.0

    def full(self):
        return np.append(self.u, self.g_n), np.append(self.v, self.G_n)

    def vector(self):
        """Phase point ``(u, theta, v, p_theta)`` of length ``4n - 2``."""
        return np.concatenate([self.u, self.theta, self.v, self.p_theta])

    @classmethod
    def from_vector(cls, x, n, G_n, g_n=0.0):
        x = np.asarray(x, dtype=float)
        return cls(
            u=x[: n - 1],
            theta=x[n - 1 : 2 * n - 1],
            v=x[2 * n - 1 : 3 * n - 2],
            p_theta=x[3 * n - 2 :],
            G_n=G_n,
            g_n=g_n,
        )


def _equator_potential(masses, phi):
    phi = np.asarray(phi, dtype=float)
    return potential_U(masses, spherical_to_cartesian(phi, np.full_like(phi, np.pi / 2)))


def unreduced_h_s1(masses, phi, p_phi):
    m = as_masses(masses)
    return float(np.sum(np.asarray(p_phi) ** 2 / (2 * m)) - _equator_potential(m, phi))


def unreduced_h_s2(masses, phi, theta, p_phi, p_theta):
    m = as_masses(masses)
    st = np.sin(theta)
    kinetic = np.sum(np.asarray(p_phi) ** 2 / (2 * m * st**2) + np.asarray(p_theta) ** 2 / (2 * m))
    return float(kinetic - potential_U(m, spherical_to_cartesian(phi, theta)))


def reduced_h1(chart, state, masses=None):
    """``sum v_i^2 / 2 M_i - U`` on the leaf ``G_n = const`` (constant dropped)."""
    if masses is not None and not np.allclose(masses, chart.masses):
        raise ValueError("masses do not match the chart")
    u, v = state.full()
    phi, _ = from_jacobi(chart, u, v)
    return float(np.sum(np.asarray(state.v) ** 2 / (2 * chart.bigM)) - _equator_potential(chart.masses, phi))


def _check_theta(theta, margin=POLE_MARGIN):
    theta = np.asarray(theta, dtype=float)
    bad = (theta < margin) | (theta > np.pi - margin)
    if np.any(bad):
        raise PoleSingularity(
            "colatitude too close to a pole", indices=np.flatnonzero(bad).tolist()
        )
    return theta


def p_matrix(chart, theta):
    """Kinetic matrix ``P = A S M S A^T`` with ``S = diag(1 / sin theta)``."""
    theta = _check_theta(theta)
    d = 1.0 / (chart.masses * np.sin(theta) ** 2)
    return (chart.A * d[None, :]) @ chart.A.T


def reduced_h2(chart, state, masses=None):
    """``v^T P v / 2 + sum p_theta^2 / 2m - U`` with ``v`` including ``G_n``."""
    if masses is not None and not np.allclose(masses, chart.masses):
        raise ValueError("masses do not match the chart")
    u, v = state.full()
    phi, _ = from_jacobi(chart, u, v)
    P = p_matrix(chart, state.theta)
    kinetic = 0.5 * v @ P @ v + np.sum(np.asarray(state.p_theta) ** 2 / (2 * chart.masses))
    return float(kinetic - potential_U(chart.masses, spherical_to_cartesian(phi, state.theta)))


def reduced_vector_field_s1(chart, state):
    """Hamilton's equations of ``H_1``: returns ``(du/dt, dv/dt)``."""
    u, v = state.full()
    phi, _ = from_jacobi(chart, u, v)
    dU_dphi, _ = grad_spherical(chart.masses, phi, np.full_like(phi, np.pi / 2))
    return np.asarray(state.v) / chart.bigM, chart.W.T @ dU_dphi


def reduced_vector_field_s2(chart, state):
    """Hamilton's equations of ``H_2`` as a flat ``(4n - 2)`` vector."""
    m = chart.masses
    u, v = state.full()
    theta = _check_theta(state.theta)
    phi, p_phi = from_jacobi(chart, u, v)
    P = p_matrix(chart, theta)
    dU_dphi, dU_dtheta = grad_spherical(m, phi, theta)
    st, ct = np.sin(theta), np.cos(theta)
    du = (P @ v)[:-1]
    dtheta = np.asarray(state.p_theta) / m
    dv = chart.W.T @ dU_dphi
    # -dF/dtheta_i with F = p_phi^T S M S p_phi / 2
    dptheta = p_phi**2 * ct / (m * st**3) + dU_dtheta
    return np.concatenate([du, dtheta, dv, dptheta])


def reduced_equilibrium(n, alpha, manifold="S2"):
    """Reduced image of the uniformly rotating unit-mass polygon.

    ``u`` holds the Jacobi shape coordinates of the polygon, ``v = 0`` and
    ``G_n = n alpha``; on S^2 additionally ``theta = pi/2`` and
    ``p_theta = 0``.
    """
    n = _check_odd(n)
    poly = regular_polygon(n)
    chart = jacobi_chart(np.ones(n))
    u = (chart.A @ poly.phi)[:-1]
    zeros = np.zeros(n - 1)
    if manifold == "S1":
        return ReducedStateS1(u=u, v=zeros, G_n=n * alpha)
    if manifold == "S2":
        return ReducedStateS2(
            u=u, theta=poly.theta.copy(), v=zeros, p_theta=np.zeros(n), G_n=n * alpha
        )
    raise ValueError(f"manifold must be 'S1' or 'S2', got {manifold!r}")


def u_hessian(chart, phi, theta=None):
    """``d^2 U / du du = W^T [d^2 U / dphi dphi] W`` (exact by linearity of the chart)."""
    phi = np.asarray(phi, dtype=float)
    if theta is None:
        theta = np.full_like(phi, np.pi / 2)
    return chart.W.T @ hessian_phi_phi(chart.masses, phi, theta) @ chart.W


class Verdict(str, enum.Enum):
    LyapunovStable = "LyapunovStable"
    LinearlyUnstable = "LinearlyUnstable"
    Critical = "Critical"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EigenClass:
    part: str  # "u" or "theta"
    lam: float  # eigenvalue of K D (u part) or Q E (theta part)
    kind: str  # "elliptic", "hyperbolic" or "nilpotent"
    eigenvalues: tuple  # the pair contributed to the spectrum of L
    basis: np.ndarray  # (4n - 2, 2) invariant-subspace basis


@dataclass(frozen=True, eq=False)
class LinearizationReport:
    n: int
    alpha: float
    L: np.ndarray
    u_hessian: np.ndarray
    theta_matrix: np.ndarray
    mass_block: np.ndarray
    eigen_classes: tuple
    verdict: Verdict
    theta1: float = field(default=np.nan)

    @property
    def eigenvalues(self):
        """Spectrum of L assembled from the block products."""
        vals = [z for ec in self.eigen_classes for z in ec.eigenvalues]
        return np.array(vals, dtype=complex)

    def full_spectrum(self):
        """Generic (LAPACK) eigenvalues of the assembled matrix L."""
        return np.linalg.eigvals(self.L)

    def hessian_h2(self):
        """``D^2 H_2`` at ``Y_alpha`` in ``(u, theta, v, p_theta)`` ordering."""
        n = self.n
        out = np.zeros((4 * n - 2, 4 * n - 2))
        iu, it = slice(0, n - 1), slice(n - 1, 2 * n - 1)
        iv, ip = slice(2 * n - 1, 3 * n - 2), slice(3 * n - 2, 4 * n - 2)
        out[iu, iu] = -self.u_hessian
        out[it, it] = -self.theta_matrix
        out[iv, iv] = self.mass_block
        out[ip, ip] = np.eye(n)
        return out

    def hyperbolic_classes(self):
        return [ec for ec in self.eigen_classes if ec.kind == "hyperbolic"]

    def unstable_direction(self):
        """Real basis vector of the fastest growing mode, or ``None``."""
        hyp = self.hyperbolic_classes()
        if not hyp:
            return None
        lead = max(hyp, key=lambda ec: ec.lam)
        return np.real(lead.basis[:, 0]), float(np.sqrt(lead.lam))

    def as_dict(self):
        return {
            "n": self.n,
            "alpha": self.alpha,
            "alpha_sq": self.alpha**2,
            "theta1": self.theta1,
            "verdict": str(self.verdict),
            "eigen_classes": [
                {
                    "part": ec.part,
                    "lambda": ec.lam,
                    "kind": ec.kind,
                    "eigenvalues": [[z.real, z.imag] for z in ec.eigenvalues],
                }
                for ec in self.eigen_classes
            ],
        }


def _classify_product(K, d, part, offsets, dim, tol_scale):
    """Eigen-classes of ``[[0, diag(d)], [K, 0]]`` per two-dimensional block.

    ``offsets = (position, momentum)`` index offsets in the full phase vector.
    """
    sq = np.sqrt(d)
    w, Y = np.linalg.eigh(sq[:, None] * K * sq[None, :])
    X = Y / sq[:, None]  # eigenvectors of K diag(d)
    tol = ZERO_TOL * (1.0 + tol_scale)
    classes = []
    pos, mom = offsets
    k = K.shape[0]
    for lam, x in zip(w, X.T):
        B = np.zeros((dim, 2), dtype=complex)
        Dx = d * x
        if abs(lam) <= tol:
            B[pos : pos + k, 0] = Dx
            B[mom : mom + k, 1] = x
            classes.append(EigenClass(part, float(lam), "nilpotent", (0j, 0j), B))
            continue
        r = np.sqrt(complex(lam))
        B[pos : pos + k, 0] = Dx / r
        B[mom : mom + k, 0] = x
        B[pos : pos + k, 1] = -Dx / r
        B[mom : mom + k, 1] = x
        kind = "hyperbolic" if lam > 0 else "elliptic"
        classes.append(EigenClass(part, float(lam), kind, (r, -r), B))
    return classes


def linearize_at_Y(n, alpha):
    """Linearized reduced flow at ``Y_alpha`` for the unit-mass n-gon.

    Phase ordering is ``(u_2..u_n, theta, v_2..v_n, p_theta)``.  The mass
    block is the ``v v`` block of ``P`` at the equator, i.e.
    ``diag(1/M_2, ..., 1/M_n)``.
    """
    n = _check_odd(n)
    poly = regular_polygon(n)
    chart = jacobi_chart(np.ones(n))
    Uuu = u_hessian(chart, poly.phi, poly.theta)
    Htt = hessian_theta_theta(chart.masses, poly.phi, poly.theta)
    Q = Htt - alpha**2 * np.eye(n)
    D = np.diag(p_matrix(chart, poly.theta))[:-1]

    dim = 4 * n - 2
    iu, it = slice(0, n - 1), slice(n - 1, 2 * n - 1)
    iv, ip = slice(2 * n - 1, 3 * n - 2), slice(3 * n - 2, 4 * n - 2)
    L = np.zeros((dim, dim))
    L[iu, iv] = np.diag(D)
    L[it, ip] = np.eye(n)
    L[iv, iu] = Uuu
    L[ip, it] = Q

    scale = max(np.abs(Uuu).max(), np.abs(Q).max())
    classes = _classify_product(Uuu, D, "u", (0, 2 * n - 1), dim, scale)
    classes += _classify_product(Q, np.ones(n), "theta", (n - 1, 3 * n - 2), dim, scale)
    return LinearizationReport(
        n=n,
        alpha=float(alpha),
        L=L,
        u_hessian=Uuu,
        theta_matrix=Q,
        mass_block=np.diag(D),
        eigen_classes=tuple(classes),
        verdict=classify_stability(n, alpha),
        theta1=critical_alpha_sq(n),
    )


def classify_stability(n, alpha, manifold="S2"):
    """Stability verdict for the reduced equilibrium ``X_alpha`` / ``Y_alpha``.

    On S^1 the verdict is always Lyapunov stable.  On S^2 it is linearly
    unstable below the threshold ``alpha^2 = Theta_1``, Lyapunov stable above
    it, and ``Critical`` within a relative band of ``1e-9`` around it.  Stable
    verdicts are certified by positive definiteness of the reduced Hessian.
    """
    n = _check_odd(n)
    poly = regular_polygon(n)
    chart = jacobi_chart(np.ones(n))
    Uuu = u_hessian(chart, poly.phi, poly.theta)
    if manifold == "S1":
        _certify_positive(np.concatenate([-np.linalg.eigvalsh(Uuu), 1.0 / chart.bigM]), "H_1")
        return Verdict.LyapunovStable
    if manifold != "S2":
        raise ValueError(f"manifold must be 'S1' or 'S2', got {manifold!r}")

    theta1 = critical_alpha_sq(n)
    a2 = float(alpha) ** 2
    if abs(a2 - theta1) <= CRITICAL_BAND * (1.0 + theta1):
        return Verdict.Critical
    if a2 < theta1:
        return Verdict.LinearlyUnstable
    Htt = hessian_theta_theta(chart.masses, poly.phi, poly.theta)
    D = np.diag(p_matrix(chart, poly.theta))[:-1]
    _certify_positive(
        np.concatenate(
            [-np.linalg.eigvalsh(Uuu), np.linalg.eigvalsh(a2 * np.eye(n) - Htt), D, np.ones(n)]
        ),
        "H_2",
    )
    return Verdict.LyapunovStable


def _certify_positive(eigs, name):
    if np.min(eigs) <= 0:
        raise ArithmeticError(
            f"D^2 {name} is not positive definite (min eigenvalue {np.min(eigs):.3e})"
        )
