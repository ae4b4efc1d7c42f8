"""Constrained equations of motion on S^3, integration and stability probes.

The Cartesian flow is integrated with classical RK4 followed by projection
back onto the constraint ``|q_i| = 1, q_i . p_i = 0``.  Stability is judged by
*shape* deviation (mutual distances and colatitude offsets) because reduced
stability allows free drift along the rotation orbit.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from curved_polygons.errors import SingularityApproach
from curved_polygons.geometry import (
    as_masses,
    cartesian_to_spherical,
    min_separation,
    pairwise_distances,
    regular_polygon,
    rotation_matrix,
    rotation_matrix_dot,
    spherical_to_cartesian,
)
from curved_polygons.potential import grad_spherical, pair_geometry, potential_U
from curved_polygons.reduction import jacobi_chart, linearize_at_Y
from curved_polygons.spectra import _check_odd

log = logging.getLogger(__name__)

SINGULARITY_FLOOR = 1e-3


@dataclass(frozen=True)
class PhaseState:
    q: np.ndarray  # (n, 4) unit vectors
    p: np.ndarray  # (n, 4) momenta m_i dq_i/dt
    time: float = 0.0

    def constraint_violation(self):
        return float(
            max(
                np.max(np.abs(np.sum(self.q * self.q, axis=1) - 1.0)),
                np.max(np.abs(np.sum(self.q * self.p, axis=1))),
            )
        )


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    T: float = 100.0
    sample_stride: int = 10
    scheme: str = "RK4-projected"

    def __post_init__(self):
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if int(self.sample_stride) < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.scheme != "RK4-projected":
            raise ValueError(f"unknown scheme {self.scheme!r}")


def energy(masses, q, p):
    m = as_masses(masses)
    return float(np.sum(np.sum(p * p, axis=1) / (2 * m)) - potential_U(m, q))


def angular_momentum_z(q, p):
    """``J_2 = sum p_phi_i``, the momentum conjugate to a common longitude shift."""
    return float(np.sum(q[:, 0] * p[:, 1] - q[:, 1] * p[:, 0]))


def eom_cartesian(masses, q, p=None):
    """Right-hand side ``(dq/dt, dp/dt)`` of the constrained equations.

    ``q`` may also be a :class:`PhaseState`, in which case ``p`` is taken from it.
    """
    if isinstance(q, PhaseState):
        q, p = q.q, q.p
    m = as_masses(masses)
    c, s = pair_geometry(q)
    w = np.outer(m, m) / s**3
    np.fill_diagonal(w, 0.0)
    force = w @ q - np.sum(w * c, axis=1)[:, None] * q
    pp = np.sum(p * p, axis=1)
    return p / m[:, None], force - (pp / m)[:, None] * q


def eom_spherical(masses, phi, theta, p_phi, p_theta):
    """Canonical equations of ``sum p_phi^2 / 2 m sin^2 + p_theta^2 / 2 m - U``."""
    m = as_masses(masses)
    phi, theta = np.asarray(phi, dtype=float), np.asarray(theta, dtype=float)
    p_phi, p_theta = np.asarray(p_phi, dtype=float), np.asarray(p_theta, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    dU_dphi, dU_dtheta = grad_spherical(m, phi, theta)
    return (
        p_phi / (m * st**2),
        p_theta / m,
        dU_dphi,
        p_phi**2 * ct / (m * st**3) + dU_dtheta,
    )


def spherical_to_phase(masses, phi, theta, p_phi, p_theta, time=0.0):
    """Lift a spherical-chart phase point to Cartesian ``(q, p)``."""
    m = as_masses(masses)
    phi, theta = np.asarray(phi, float), np.asarray(theta, float)
    q = spherical_to_cartesian(phi, theta)
    st, ct = np.sin(theta), np.cos(theta)
    e_phi = np.stack([-st * np.sin(phi), st * np.cos(phi), 0 * phi, 0 * phi], axis=-1)
    e_theta = np.stack([ct * np.cos(phi), ct * np.sin(phi), -st, 0 * phi], axis=-1)
    p = (np.asarray(p_phi) / st**2)[:, None] * e_phi + np.asarray(p_theta)[:, None] * e_theta
    return PhaseState(q=q, p=p, time=time)


def phase_to_spherical(state):
    """Inverse of :func:`spherical_to_phase` for states with ``w = 0``."""
    q, p = state.q, state.p
    phi, theta = cartesian_to_spherical(q)
    st, ct = np.sin(theta), np.cos(theta)
    e_phi = np.stack([-st * np.sin(phi), st * np.cos(phi), 0 * phi, 0 * phi], axis=-1)
    e_theta = np.stack([ct * np.cos(phi), ct * np.sin(phi), -st, 0 * phi], axis=-1)
    return phi, theta, np.sum(p * e_phi, axis=1), np.sum(p * e_theta, axis=1)


def _project(q, p):
    q = q / np.linalg.norm(q, axis=1)[:, None]
    p = p - np.sum(p * q, axis=1)[:, None] * q
    return q, p


def _field(mm, m_col, q, p):
    # unchecked right-hand side for the inner loop; singularity is policed per sample
    c = q @ q.T
    np.fill_diagonal(c, 0.0)
    w = mm / (1.0 - c * c) ** 1.5
    force = w @ q - (w * c).sum(axis=1)[:, None] * q
    return p / m_col, force - (p * p).sum(axis=1)[:, None] / m_col * q


def rk4_step(masses, q, p, dt):
    m = as_masses(masses)
    mm = np.outer(m, m)
    np.fill_diagonal(mm, 0.0)
    m_col = m[:, None]
    k1q, k1p = _field(mm, m_col, q, p)
    k2q, k2p = _field(mm, m_col, q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
    k3q, k3p = _field(mm, m_col, q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
    k4q, k4p = _field(mm, m_col, q + dt * k3q, p + dt * k3p)
    q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
    p = p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return _project(q, p)


@dataclass(eq=False)
class TrajectoryRecord:
    masses: np.ndarray
    times: np.ndarray
    q: np.ndarray  # (k, n, 4)
    p: np.ndarray
    energy: np.ndarray
    j2: np.ndarray
    distance_deviation: np.ndarray
    theta_deviation: np.ndarray
    constraint_violation: float
    aborted: bool = False
    abort_reason: str = ""
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def samples(self):
        return [
            (float(t), PhaseState(q=self.q[k], p=self.p[k], time=float(t)))
            for k, t in enumerate(self.times)
        ]

    @property
    def shape_deviation(self):
        return np.maximum(self.distance_deviation, self.theta_deviation)

    @property
    def energy_drift(self):
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / max(abs(e0), 1e-300))

    @property
    def momentum_drift(self):
        return float(np.max(np.abs(self.j2 - self.j2[0])))

    def spherical_rows(self):
        """Rows ``t, (phi_i, theta_i, p_phi_i, p_theta_i) per body, H, J2, shape``."""
        rows = []
        shape = self.shape_deviation
        for k, t in enumerate(self.times):
            phi, theta, pphi, pth = phase_to_spherical(PhaseState(self.q[k], self.p[k]))
            body = np.stack([phi, theta, pphi, pth], axis=1).ravel()
            rows.append([float(t), *body.tolist(), float(self.energy[k]), float(self.j2[k]), float(shape[k])])
        return rows

    def csv_header(self):
        n = self.q.shape[1]
        cols = ["t"]
        for i in range(1, n + 1):
            cols += [f"phi_{i}", f"theta_{i}", f"p_phi_{i}", f"p_theta_{i}"]
        return cols + ["H", "J2", "shape_deviation"]

    def summary(self):
        return {
            "samples": int(self.times.size),
            "t_final": float(self.times[-1]),
            "energy_drift": self.energy_drift,
            "momentum_drift": self.momentum_drift,
            "constraint_violation": self.constraint_violation,
            "max_shape_deviation": float(np.max(self.shape_deviation)),
            "max_theta_deviation": float(np.max(self.theta_deviation)),
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
        }


def _theta_offset(q):
    # colatitude offset from the equator, |theta - pi/2| = arcsin|z|
    return float(np.max(np.arcsin(np.clip(np.abs(q[:, 2]), 0.0, 1.0))))


def integrate(masses, state0, cfg=None, reference=None, stop_when=None, floor=SINGULARITY_FLOOR):
    """Integrate from ``state0`` with projected RK4.

    ``reference`` is an ``(n, 4)`` configuration whose mutual distances define
    zero shape deviation (default: the initial configuration).  ``stop_when``
    receives the current shape deviation at each sample and ends the run early
    when it returns true.  Approaching the singular set closer than ``floor``
    ends the run with ``aborted`` set rather than raising.
    """
    cfg = cfg or IntegratorConfig()
    m = as_masses(masses)
    q, p = _project(np.array(state0.q, dtype=float), np.array(state0.p, dtype=float))
    d_ref = pairwise_distances(state0.q if reference is None else reference)
    nsteps = int(round(cfg.T / cfg.dt))
    stride = int(cfg.sample_stride)

    times, qs, ps, es, js, dd, td = [], [], [], [], [], [], []
    worst_constraint = 0.0

    def record(t):
        nonlocal worst_constraint
        times.append(t)
        qs.append(q.copy())
        ps.append(p.copy())
        es.append(energy(m, q, p))
        js.append(angular_momentum_z(q, p))
        dd.append(float(np.max(np.abs(pairwise_distances(q) - d_ref))))
        td.append(_theta_offset(q))
        worst_constraint = max(
            worst_constraint,
            float(np.max(np.abs(np.sum(q * q, axis=1) - 1.0))),
            float(np.max(np.abs(np.sum(q * p, axis=1)))),
        )

    t0 = float(state0.time)
    record(t0)
    aborted, reason, stopped = False, "", False
    # |cos d_ij| above this means min(d_ij, pi - d_ij) < floor
    cos_floor = np.cos(floor)
    for step in range(1, nsteps + 1):
        # unnormalised RK stages can overshoot |cos d| = 1 right at a collision;
        # the resulting non-finite state is caught below and ends the run
        with np.errstate(invalid="ignore", divide="ignore"):
            q, p = rk4_step(m, q, p, cfg.dt)
        c = q @ q.T
        np.fill_diagonal(c, 0.0)
        finite = bool(np.all(np.isfinite(q)) and np.all(np.isfinite(p)))
        if not finite or np.max(np.abs(c)) > cos_floor:
            aborted = True
            if finite:
                reason = f"min_separation {min_separation(q):.3e} below floor {floor:g}"
                record(t0 + step * cfg.dt)
            else:
                reason = f"non-finite state within one step of a collision (floor {floor:g})"
            log.warning("integration aborted at t=%.6g: %s", t0 + step * cfg.dt, reason)
            break
        if step % stride == 0 or step == nsteps:
            record(t0 + step * cfg.dt)
            if stop_when is not None and stop_when(max(dd[-1], td[-1])):
                stopped = True
                break

    return TrajectoryRecord(
        masses=m,
        times=np.array(times),
        q=np.array(qs),
        p=np.array(ps),
        energy=np.array(es),
        j2=np.array(js),
        distance_deviation=np.array(dd),
        theta_deviation=np.array(td),
        constraint_violation=worst_constraint,
        aborted=aborted,
        abort_reason=reason,
        stopped_early=stopped,
    )


def integrate_spherical(masses, phi, theta, p_phi, p_theta, dt, T):
    """Plain RK4 in the spherical chart; returns the final ``(phi, theta, p_phi, p_theta)``."""
    m = as_masses(masses)
    y = np.concatenate([phi, theta, p_phi, p_theta]).astype(float)
    n = m.size

    def f(y):
        return np.concatenate(eom_spherical(m, y[:n], y[n : 2 * n], y[2 * n : 3 * n], y[3 * n :]))

    for _ in range(int(round(T / dt))):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y[:n], y[n : 2 * n], y[2 * n : 3 * n], y[3 * n :]


def _latitude_polygon(n, colatitude):
    phi = regular_polygon(n).phi
    return spherical_to_cartesian(phi, np.full(n, float(colatitude)))


def relative_equilibrium_trajectory(n, alpha, beta=0.0, t=0.0, colatitude=np.pi / 2):
    """Exact state ``A_{alpha,beta}(t) q0`` of unit masses on a latitude circle.

    ``q0`` is the regular n-gon at the given colatitude (the equator by
    default).  Off the equator this is a solution only for ``beta = 0`` and
    the angular velocity of :func:`curved_polygons.families.second_family_alpha_sq`.
    """
    n = _check_odd(n)
    q0 = _latitude_polygon(n, colatitude)
    return PhaseState(
        q=q0 @ rotation_matrix(alpha, beta, t).T,
        p=q0 @ rotation_matrix_dot(alpha, beta, t, 1).T,
        time=float(t),
    )


def orbit_residual(n, alpha, beta=0.0, times=(0.0,), colatitude=np.pi / 2):
    """Largest defect of the equations of motion along the exact rigid rotation."""
    n = _check_odd(n)
    m = np.ones(n)
    q0 = _latitude_polygon(n, colatitude)
    worst = 0.0
    for t in np.atleast_1d(times):
        st = relative_equilibrium_trajectory(n, alpha, beta, t, colatitude)
        pdot_exact = q0 @ rotation_matrix_dot(alpha, beta, t, 2).T
        qdot, pdot = eom_cartesian(m, st.q, st.p)
        worst = max(worst, float(np.max(np.abs(pdot - pdot_exact))), float(np.max(np.abs(qdot - st.p))))
    return worst


@dataclass(frozen=True)
class ProbeReport:
    n: int
    alpha: float
    epsilon: float
    direction: str
    fitted_rate: float
    expected_rate: float
    verdict: str  # "grows" or "bounded"
    max_shape_deviation: float
    fit_points: int
    record: TrajectoryRecord = field(repr=False, compare=False)

    def as_dict(self):
        return {
            "n": self.n,
            "alpha": self.alpha,
            "alpha_sq": self.alpha**2,
            "epsilon": self.epsilon,
            "direction": self.direction,
            "fitted_rate": self.fitted_rate,
            "expected_rate": self.expected_rate,
            "verdict": self.verdict,
            "max_shape_deviation": self.max_shape_deviation,
            "fit_points": self.fit_points,
            **{f"run_{k}": v for k, v in self.record.summary().items()},
        }


def perturbed_Y_state(n, alpha, epsilon, direction="unstable-mode", seed=None):
    """Unit-mass rotating polygon on S^2 displaced by ``epsilon`` along a direction.

    ``unstable-mode`` uses the leading hyperbolic eigenvector of the reduced
    linearization, lifted back through the Jacobi chart and scaled so that its
    largest coordinate displacement is ``epsilon``.  ``random-shape`` draws a
    Gaussian displacement of all ``(phi, theta, p_phi, p_theta)`` with the same
    max-norm.
    """
    n = _check_odd(n)
    m = np.ones(n)
    poly = regular_polygon(n)
    phi, theta = poly.phi.copy(), poly.theta.copy()
    p_phi, p_theta = np.full(n, float(alpha)), np.zeros(n)

    if direction == "unstable-mode":
        lead = linearize_at_Y(n, alpha).unstable_direction()
        if lead is None:
            raise ValueError(f"no hyperbolic mode at alpha = {alpha}")
        x, _ = lead
        chart = jacobi_chart(m)
        du, dth = x[: n - 1], x[n - 1 : 2 * n - 1]
        dv, dpth = x[2 * n - 1 : 3 * n - 2], x[3 * n - 2 :]
        dphi = chart.W @ du
        dpphi = chart.A.T @ np.append(dv, 0.0)
        scale = epsilon / np.max(np.abs(np.concatenate([dphi, dth])))
    elif direction == "random-shape":
        rng = np.random.default_rng(seed)
        dphi, dth, dpphi, dpth = rng.standard_normal((4, n))
        scale = epsilon / np.max(np.abs(np.concatenate([dphi, dth, dpphi, dpth])))
    else:
        raise ValueError(f"unknown direction {direction!r}")

    return spherical_to_phase(
        m, phi + scale * dphi, theta + scale * dth, p_phi + scale * dpphi, p_theta + scale * dpth
    )


def fit_growth_rate(times, deviation, lo, hi):
    """Least-squares slope of ``log(deviation)`` over samples inside ``[lo, hi]``."""
    times, deviation = np.asarray(times), np.asarray(deviation)
    inside = (deviation >= lo) & (deviation <= hi)
    if np.sum(inside) < 3:
        return np.nan, int(np.sum(inside))
    # keep only the first contiguous pass through the window
    idx = np.flatnonzero(inside)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    if breaks.size:
        idx = idx[: breaks[0] + 1]
    slope, _ = np.polyfit(times[idx], np.log(deviation[idx]), 1)
    return float(slope), int(idx.size)


def stability_probe(
    n, alpha, epsilon=1e-6, direction="unstable-mode", cfg=None, seed=None, window=(None, 1e-3)
):
    """Perturb the relative equilibrium and measure shape-deviation growth.

    The run stops once the deviation passes ten times the top of the fit
    window.  Verdict ``grows`` when the deviation exceeds ``100 epsilon``.
    """
    n = _check_odd(n)
    cfg = cfg or IntegratorConfig()
    lo = 10 * epsilon if window[0] is None else window[0]
    hi = window[1]
    state = perturbed_Y_state(n, alpha, epsilon, direction, seed)
    reference = _latitude_polygon(n, np.pi / 2)
    record = integrate(
        np.ones(n), state, cfg, reference=reference, stop_when=lambda d: d > 10 * hi
    )
    shape = record.shape_deviation
    rate, npts = fit_growth_rate(record.times, shape, lo, hi)
    if record.aborted and npts < 3:
        raise SingularityApproach(record.abort_reason, t=float(record.times[-1]))

    from curved_polygons.spectra import critical_alpha_sq

    gap = critical_alpha_sq(n) - alpha**2
    return ProbeReport(
        n=n,
        alpha=float(alpha),
        epsilon=float(epsilon),
        direction=direction,
        fitted_rate=rate,
        expected_rate=float(np.sqrt(gap)) if gap > 0 else 0.0,
        verdict="grows" if np.max(shape) > 100 * epsilon else "bounded",
        max_shape_deviation=float(np.max(shape)),
        fit_points=npts,
        record=record,
    )
