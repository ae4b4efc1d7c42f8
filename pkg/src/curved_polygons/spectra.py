"""Closed-form circulant spectra of the regular n-gon on the equator.

For ``n = 2p + 1`` and ``phi = 2 pi / n`` three sequences (k = 1..n) describe
the polygon completely:

``gamma``  eigenvalues ``i * Gamma_k`` of the skew matrix ``B`` whose kernel
           holds the equilibrium masses,
``phi``    eigenvalues ``Phi_k`` of the longitude block of the Hessian of U,
``theta``  eigenvalues ``Theta_k`` of the colatitude block.

All sequences are returned as arrays indexed ``0..n-1`` for ``k = 1..n``.
The closed forms are also evaluated at arbitrary integer ``k``; they are
periodic with period n, which is how indices such as ``2p + 2`` (= 1) are read.
"""

from dataclasses import dataclass, field

import numpy as np

from curved_polygons.errors import EvenN, SingularConfiguration
from curved_polygons.geometry import regular_polygon
from curved_polygons.linalg import signature

CERTIFY_MARGIN = 1e-9
IDENTITY_TOL = 1e-9
ZERO_TOL = 1e-9


def _check_odd(n):
    n = int(n)
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if n % 2 == 0:
        raise EvenN(f"n = {n} is even", n=n)
    return n


def circulant_matrix(row):
    """Matrix with ``C[k, j] = row[(j - k) mod n]``."""
    row = np.asarray(row)
    n = row.size
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return row[idx]


def circulant_eigen(row):
    """Eigenpairs of the circulant matrix with first row ``row``.

    ``lambda_k = sum_j c_j rho_{k-1}^{j-1}`` with eigenvector
    ``v_k = (1, rho_{k-1}, ..., rho_{k-1}^{n-1})``, ``rho_k = exp(2 pi i k / n)``.
    Returns ``(values, vectors)`` with ``vectors[:, k-1] = v_k``.
    """
    row = np.asarray(row)
    n = row.size
    k = np.arange(n)
    rho = np.exp(2j * np.pi * k / n)
    powers = rho[None, :] ** k[:, None]  # powers[j, k] = rho_k ** j
    return row @ powers, powers


def build_skew_B(phi):
    """Skew matrix ``b_kj = sin(phi_j - phi_k) / |sin(phi_j - phi_k)|^3``.

    ``B @ m = 0`` is the circle equilibrium condition for the mass vector ``m``.
    """
    phi = np.asarray(phi, dtype=float)
    n = phi.size
    s = np.sin(phi[None, :] - phi[:, None])
    np.fill_diagonal(s, 0.0)
    a = np.abs(s)
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.min(a[off]) <= np.sqrt(2 * 1e-14):
        i, j = np.unravel_index(np.argmin(np.where(off, a, np.inf)), a.shape)
        raise SingularConfiguration(
            f"angles {i} and {j} coincide modulo pi", pair=(int(i), int(j))
        )
    np.fill_diagonal(a, 1.0)
    B = s / a**3
    # exact skew-symmetry regardless of rounding in sin(-x)
    return 0.5 * (B - B.T)


def _kgrid(n, k):
    if k is None:
        k = np.arange(1, n + 1)
    return np.atleast_1d(np.asarray(k, dtype=float))


def gamma_sequence(n, k=None):
    """``Gamma_k = 2 sum_{j=1}^p sin(j (k-1) phi) / sin^2(j phi)``."""
    n = _check_odd(n)
    p, ang = (n - 1) // 2, 2 * np.pi / n
    j = np.arange(1, p + 1)[None, :]
    k = _kgrid(n, k)[:, None]
    return 2.0 * np.sum(np.sin(j * (k - 1) * ang) / np.sin(j * ang) ** 2, axis=1)


def phi_sequence(n, k=None):
    """``Phi_k = 4 sum_{j=1}^p cos(j phi) / sin^3(j phi) (1 - cos((k-1) j phi))``."""
    n = _check_odd(n)
    p, ang = (n - 1) // 2, 2 * np.pi / n
    j = np.arange(1, p + 1)[None, :]
    k = _kgrid(n, k)[:, None]
    w = np.cos(j * ang) / np.sin(j * ang) ** 3
    return 4.0 * np.sum(w * (1.0 - np.cos((k - 1) * j * ang)), axis=1)


def theta_sequence(n, k=None):
    """``Theta_k = 2 sum_{j=1}^p (cos(j (k-1) phi) - cos(j phi)) / sin^3(j phi)``."""
    n = _check_odd(n)
    p, ang = (n - 1) // 2, 2 * np.pi / n
    j = np.arange(1, p + 1)[None, :]
    k = _kgrid(n, k)[:, None]
    num = np.cos(j * (k - 1) * ang) - np.cos(j * ang)
    return 2.0 * np.sum(num / np.sin(j * ang) ** 3, axis=1)


def critical_alpha_sq(n):
    """Squared critical angular velocity ``2 sum (1 - cos j phi) / sin^3 j phi``."""
    n = _check_odd(n)
    p, ang = (n - 1) // 2, 2 * np.pi / n
    j = np.arange(1, p + 1)
    return float(2.0 * np.sum((1.0 - np.cos(j * ang)) / np.sin(j * ang) ** 3))


# -- explicit matrices for the oracle side -----------------------------------


def polygon_B(n):
    return build_skew_B(regular_polygon(n).phi)


def polygon_phi_block(n):
    """Longitude Hessian block at the unit-mass polygon from the entrywise formula."""
    n = _check_odd(n)
    ang = 2 * np.pi / n
    d = np.arange(n)[None, :] - np.arange(n)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        H = -2.0 * np.cos(d * ang) / np.abs(np.sin(d * ang)) ** 3
    np.fill_diagonal(H, 0.0)
    np.fill_diagonal(H, -np.sum(H, axis=1))
    return H


def polygon_theta_block(n):
    """Colatitude Hessian block at the unit-mass polygon from the entrywise formula."""
    n = _check_odd(n)
    ang = 2 * np.pi / n
    d = np.arange(n)[None, :] - np.arange(n)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        s3 = np.abs(np.sin(d * ang)) ** 3
        H = 1.0 / s3
        diag = -np.cos(d * ang) / s3
    np.fill_diagonal(H, 0.0)
    np.fill_diagonal(diag, 0.0)
    return H + np.diag(np.sum(diag, axis=1))


def eigenvector_residuals(matrix, values):
    """``||C v_k - lambda_k v_k|| / ||v_k||`` for the Fourier vectors ``v_k``.

    An index-faithful check: each closed-form value must belong to its own
    roots-of-unity eigenvector, not just appear somewhere in the spectrum.
    """
    C = np.asarray(matrix)
    n = C.shape[0]
    _, V = circulant_eigen(np.zeros(n))
    R = C @ V - V * np.asarray(values)[None, :]
    return np.linalg.norm(R, axis=0) / np.sqrt(n)


@dataclass(frozen=True)
class SpectrumReport:
    n: int
    phi_angle: float
    gamma: np.ndarray
    phi_evals: np.ndarray
    theta_evals: np.ndarray
    theta1: float
    critical_alpha: float
    # (zero, negative, positive) counts for the phi and theta blocks
    signatures: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "n": self.n,
            "phi_angle": self.phi_angle,
            "gamma": self.gamma.tolist(),
            "phi_evals": self.phi_evals.tolist(),
            "theta_evals": self.theta_evals.tolist(),
            "theta1": self.theta1,
            "critical_alpha": self.critical_alpha,
            "signatures": {k: list(v) for k, v in self.signatures.items()},
        }


def spectrum_report(n):
    n = _check_odd(n)
    gam = gamma_sequence(n)
    ph = phi_sequence(n)
    th = theta_sequence(n)
    t1 = critical_alpha_sq(n)
    return SpectrumReport(
        n=n,
        phi_angle=2 * np.pi / n,
        gamma=gam,
        phi_evals=ph,
        theta_evals=th,
        theta1=t1,
        critical_alpha=float(np.sqrt(t1)),
        signatures={
            "phi": signature(ph, ZERO_TOL * (1 + np.max(np.abs(ph)))),
            "theta": signature(th, ZERO_TOL * (1 + np.max(np.abs(th)))),
        },
    )


# -- certification of the sequence inequalities -----------------------------


def sine_sum(a, m):
    """Direct ``sum_{j=1}^m sin(2 j a)``."""
    j = np.arange(1, int(m) + 1)
    return float(np.sum(np.sin(2 * j * a)))


def sine_sum_closed(a, m):
    """Closed form ``sin(a (m+1)) sin(a m) / sin a`` of :func:`sine_sum`."""
    return float(np.sin(a * (m + 1)) * np.sin(a * m) / np.sin(a))


@dataclass(frozen=True)
class Chain:
    """A family of inequalities ``value < -margin`` (or ``> margin``)."""

    name: str
    values: np.ndarray
    sign: int  # -1: all values must be negative, +1: positive

    @property
    def worst_margin(self):
        if self.values.size == 0:
            return np.inf
        return float(np.min(self.sign * self.values))

    def holds(self, margin=CERTIFY_MARGIN):
        return bool(self.values.size == 0 or self.worst_margin > margin)


@dataclass(frozen=True)
class Certification:
    n: int
    chains: tuple
    # residuals of closed-form identities used in the argument
    identities: dict
    margin: float = CERTIFY_MARGIN

    @property
    def passed(self):
        return all(c.holds(self.margin) for c in self.chains) and all(
            v <= IDENTITY_TOL for v in self.identities.values()
        )

    @property
    def worst_margin(self):
        return min((c.worst_margin for c in self.chains), default=np.inf)

    def as_dict(self):
        return {
            "n": self.n,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "chains": {
                c.name: {"holds": c.holds(self.margin), "worst_margin": c.worst_margin,
                         "count": int(c.values.size)}
                for c in self.chains
            },
            "identities": dict(self.identities),
        }


def _rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / (1.0 + np.max(np.abs(b))))


def certify_sequences(n, margin=CERTIFY_MARGIN):
    """Numerically certify the inequality chains behind the signature claims.

    For ``n = 2p + 1`` this checks, with strict margin ``margin``:

    * ``Gamma_2 > 0``, ``Gamma_2p > 0`` and concavity of
      ``Gamma_2, Gamma_4, ..., Gamma_2p`` (second differences negative),
    * the cotangent form ``Gamma_2p = -2 sum[cot j phi - cot (j - 1/2) phi]``
      with every bracket negative,
    * concavity of the first differences of ``Phi_2, Phi_4, ..., Phi_2p+2``
      and of ``Theta_2, ..., Theta_2p+2`` (third differences negative),
    * ``Phi_2 < Phi_4 < ... < Phi_2p < Phi_1 = 0`` and
      ``0 = Theta_2 < Theta_4 < ... < Theta_2p < Theta_1``,
    * the closed-form difference identities at every even ``k`` they use.

    For ``n = 3`` the concavity chains are empty and pass vacuously.
    """
    n = _check_odd(n)
    p = (n - 1) // 2
    ang = 2 * np.pi / n
    j = np.arange(1, p + 1)
    even = np.arange(2, 2 * p + 3, 2)  # 2, 4, ..., 2p + 2

    G = lambda k: gamma_sequence(n, k)  # noqa: E731
    F = lambda k: phi_sequence(n, k)  # noqa: E731
    T = lambda k: theta_sequence(n, k)  # noqa: E731

    chains = []
    ident = {}

    # Gamma: ends positive, concave over k even in [2, 2p-2]
    g_even = G(even[:-1])
    chains.append(Chain("gamma_ends_positive", np.array([g_even[0], g_even[-1]]), +1))
    kg = np.arange(2, 2 * p - 1, 2)
    g2 = G(kg + 4) - 2 * G(kg + 2) + G(kg)
    chains.append(Chain("gamma_concave", g2, -1))
    chains.append(Chain("gamma_nonzero", np.abs(gamma_sequence(n)[1:]), +1))
    brackets = 1 / np.tan(j * ang) - 1 / np.tan((j - 0.5) * ang)
    chains.append(Chain("gamma_2p_cot_brackets", brackets, -1))
    # the closed form carries an overall factor 2: Gamma_2p = -4 sum cot(j phi)
    ident["gamma_2p_cot_form"] = _rel(G(2 * p), -4 * np.sum(1 / np.tan(j * ang)))
    ident["gamma_2p_bracket_form"] = _rel(G(2 * p), -2 * np.sum(brackets))
    if kg.size:
        closed = 4 * ((-1.0) ** (kg - 1) - np.cos((kg + 1) * ang / 2)) / np.sin((kg + 1) * ang / 2)
        ident["gamma_second_difference"] = _rel(g2, closed)
    kd = np.arange(2, 2 * p + 1, 2)
    first = 4 * np.array([np.sum(np.cos(k * j * ang) / np.sin(j * ang)) for k in kd])
    ident["gamma_first_difference"] = _rel(G(kd + 2) - G(kd), first)

    # Phi: third differences negative over k even in [2, 2p-4]
    kf = np.arange(2, 2 * p - 3, 2)
    f3 = F(kf + 6) - 3 * F(kf + 4) + 3 * F(kf + 2) - F(kf)
    chains.append(Chain("phi_difference_concave", f3, -1))
    f_even = F(even)
    df = np.diff(f_even)
    chains.append(Chain("phi_increasing_to_zero", df, +1))
    ident["phi_2p2_is_phi_1"] = abs(float(f_even[-1] - F(1)[0]))
    ident["phi_first_end"] = _rel(df[0], 16 * np.sum(np.cos(j * ang) ** 2 / np.sin(j * ang)))
    ident["phi_last_end"] = _rel(df[-1], -8 * np.sum(1 / np.tan(j * ang)))
    if kf.size:
        closed = 8 * (
            ((-1.0) ** (kf + 1) - np.cos((kf + 3) * ang / 2)) / np.sin((kf + 3) * np.pi / n)
            + ((-1.0) ** (kf + 1) - np.cos((kf + 1) * ang / 2)) / np.sin((kf + 1) * np.pi / n)
        )
        ident["phi_third_difference"] = _rel(f3, closed)

    # Theta: third differences negative over k even in [2, 2p-2]
    kt = np.arange(2, 2 * p - 1, 2)
    t3 = T(kt + 6) - 3 * T(kt + 4) + 3 * T(kt + 2) - T(kt)
    chains.append(Chain("theta_difference_concave", t3, -1))
    t_even = T(even)
    dt = np.diff(t_even)
    chains.append(Chain("theta_increasing_to_theta1", dt, +1))
    ident["theta_2_is_zero"] = abs(float(T(2)[0]))
    ident["theta_2p2_is_theta_1"] = abs(float(t_even[-1] - T(1)[0]))
    ident["theta_last_end"] = _rel(dt[-1], 2 * np.sum((1 - np.cos(2 * j * ang)) / np.sin(j * ang) ** 3))
    ident["theta_first_end"] = _rel(dt[0], -8 * np.sum(1 / np.tan(j * ang)))
    if kt.size:
        closed = -8 * ((-1.0) ** kt - np.cos((kt + 2) * ang / 2)) / np.sin((kt + 2) * np.pi / n)
        ident["theta_third_difference"] = _rel(t3, closed)

    return Certification(n=n, chains=tuple(chains), identities=ident, margin=margin)
