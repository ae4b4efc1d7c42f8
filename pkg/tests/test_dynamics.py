import numpy as np
import pytest

from curved_polygons.dynamics import (
    IntegratorConfig,
    PhaseState,
    angular_momentum_z,
    energy,
    eom_cartesian,
    eom_spherical,
    fit_growth_rate,
    integrate,
    integrate_spherical,
    orbit_residual,
    perturbed_Y_state,
    phase_to_spherical,
    relative_equilibrium_trajectory,
    spherical_to_phase,
    stability_probe,
)
from curved_polygons.errors import EvenN, SingularConfiguration
from curved_polygons.geometry import (
    min_separation,
    pairwise_distances,
    regular_polygon,
    spherical_to_cartesian,
)
from curved_polygons.spectra import critical_alpha_sq


def _random_state(rng, n, margin=0.4):
    m = rng.uniform(0.5, 2, n)
    while True:
        phi = rng.uniform(0, 2 * np.pi, n)
        theta = rng.uniform(margin, np.pi - margin, n)
        if min_separation(spherical_to_cartesian(phi, theta)) > 0.1:
            break
    p_phi, p_theta = rng.standard_normal((2, n))
    return m, phi, theta, p_phi, p_theta


def _spherical_rates(state, qdot, pdot):
    """Time derivatives of (phi, theta, p_phi, p_theta) transported from Cartesian rates."""
    q, p = state.q, state.p
    phi, theta, _, _ = phase_to_spherical(state)
    st, ct = np.sin(theta), np.cos(theta)
    e_phi = np.stack([-q[:, 1], q[:, 0], 0 * phi, 0 * phi], axis=1)
    e_theta = np.stack([ct * np.cos(phi), ct * np.sin(phi), -st, 0 * phi], axis=1)
    phi_dot = np.sum(qdot * e_phi, axis=1) / st**2
    theta_dot = np.sum(qdot * e_theta, axis=1)
    e_phi_dot = np.stack([-qdot[:, 1], qdot[:, 0], 0 * phi, 0 * phi], axis=1)
    e_theta_dot = -q * theta_dot[:, None] + np.stack(
        [-ct * np.sin(phi), ct * np.cos(phi), 0 * phi, 0 * phi], axis=1
    ) * phi_dot[:, None]
    return (
        phi_dot,
        theta_dot,
        np.sum(pdot * e_phi + p * e_phi_dot, axis=1),
        np.sum(pdot * e_theta + p * e_theta_dot, axis=1),
    )


def test_eom_at_equilibrium_and_kinematics(rng):
    q = regular_polygon(3).cartesian()
    qd, pd = eom_cartesian(np.ones(3), PhaseState(q, np.zeros_like(q)))
    assert np.abs(qd).max() == 0 and np.abs(pd).max() < 1e-12
    m, phi, theta, p_phi, p_theta = _random_state(rng, 4)
    st = spherical_to_phase(m, phi, theta, p_phi, p_theta)
    qd, pd = eom_cartesian(m, st)
    np.testing.assert_array_equal(qd, st.p / m[:, None])
    np.testing.assert_allclose(np.sum(st.q * qd, axis=1), 0, atol=1e-14)
    # the field keeps q . p = 0: d/dt (q . p) = qdot . p + q . pdot = 0
    np.testing.assert_allclose(np.sum(qd * st.p + st.q * pd, axis=1), 0, atol=1e-12 * (1 + np.abs(pd).max()))
    with pytest.raises(SingularConfiguration):
        eom_cartesian([1, 1], np.array([[1.0, 0, 0, 0], [-1.0, 0, 0, 0]]), np.zeros((2, 4)))


def test_chart_transport_round_trip(rng):
    m, phi, theta, p_phi, p_theta = _random_state(rng, 5)
    st = spherical_to_phase(m, phi, theta, p_phi, p_theta)
    assert st.constraint_violation() < 1e-14
    back = phase_to_spherical(st)
    for a, b in zip(back, (np.mod(phi, 2 * np.pi), theta, p_phi, p_theta)):
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_eom_spherical_agrees_with_cartesian(rng):
    for _ in range(20):
        n = rng.integers(2, 6)
        m, phi, theta, p_phi, p_theta = _random_state(rng, n)
        st = spherical_to_phase(m, phi, theta, p_phi, p_theta)
        qd, pd = eom_cartesian(m, st)
        got = eom_spherical(m, phi, theta, p_phi, p_theta)
        for a, b in zip(got, _spherical_rates(st, qd, pd)):
            np.testing.assert_allclose(a, b, atol=1e-10 * (1 + np.abs(b).max()))


def test_eom_spherical_examples():
    poly = regular_polygon(5)
    phid, thd, pphid, pthd = eom_spherical(np.ones(5), poly.phi, poly.theta, np.full(5, 0.7), np.zeros(5))
    np.testing.assert_allclose(phid, 0.7)
    np.testing.assert_allclose(pphid, 0, atol=1e-12)
    assert np.abs(thd).max() == 0 and np.abs(pthd).max() < 1e-12
    phi = np.array([0.1, 1.7, 4.0])
    _, thd, _, pthd = eom_spherical([1, 2, 3], phi, np.full(3, np.pi / 2), [0.3, -0.2, 1.0], np.zeros(3))
    assert np.abs(thd).max() == 0 and np.abs(pthd).max() < 1e-12


def test_relative_equilibrium_trajectory():
    st = relative_equilibrium_trajectory(3, 1.3, 0.0, 0.0)
    np.testing.assert_allclose(st.q, regular_polygon(3).cartesian(), atol=1e-15)
    np.testing.assert_allclose(np.sum(st.q * st.p, axis=1), 0, atol=1e-15)
    for t in (0.5, 2.0, 7.3):
        q = relative_equilibrium_trajectory(5, 0.9, 0.0, t).q
        np.testing.assert_allclose(q[:, 2:], 0, atol=1e-15)
    assert orbit_residual(3, 1.0, 0.0, np.linspace(0, 5, 6)) <= 1e-10
    assert orbit_residual(5, 1.7, 1.7, np.linspace(0, 5, 6)) <= 1e-10
    assert orbit_residual(3, 0.8, 0.8, np.linspace(0, 5, 6)) <= 1e-10
    # off the equator only the matching angular velocity gives a solution
    assert orbit_residual(3, 1.0, 0.0, [1.0], colatitude=np.pi / 3) > 1e-3
    with pytest.raises(EvenN):
        relative_equilibrium_trajectory(4, 1.0)


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0)
    with pytest.raises(ValueError):
        IntegratorConfig(T=-1)
    with pytest.raises(ValueError):
        IntegratorConfig(sample_stride=0)
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="leapfrog")


def test_relative_equilibrium_is_invariant():
    st = relative_equilibrium_trajectory(3, 1.0)
    rec = integrate(np.ones(3), st, IntegratorConfig(dt=1e-3, T=50, sample_stride=100))
    assert np.max(rec.shape_deviation) <= 1e-8
    assert rec.energy_drift <= 1e-8
    assert rec.momentum_drift <= 1e-10
    assert rec.constraint_violation <= 1e-10
    assert np.all(np.diff(rec.times) > 0)
    assert rec.energy_drift >= 0 and rec.momentum_drift >= 0
    # rotation angle after T = 50 at alpha = 1
    phi, _, _, _ = phase_to_spherical(PhaseState(rec.q[-1], rec.p[-1]))
    assert np.angle(np.exp(1j * (phi[0] - regular_polygon(3).phi[0] - 50.0))) == pytest.approx(0, abs=1e-8)


def test_equilibrium_stays_put():
    q = regular_polygon(5).cartesian()
    rec = integrate(np.ones(5), PhaseState(q, np.zeros_like(q)), IntegratorConfig(dt=1e-3, T=10, sample_stride=500))
    assert np.abs(rec.q - q).max() <= 1e-10
    assert np.abs(rec.p).max() <= 1e-10


def test_fourth_order_energy_convergence():
    # a smooth, well-separated stretch of a generic three-body motion
    rng = np.random.default_rng(2)
    m = np.array([1.0, 1.3, 0.8])
    phi = regular_polygon(3).phi + rng.uniform(-0.2, 0.2, 3)
    theta = np.pi / 2 + rng.uniform(-0.3, 0.3, 3)
    st = spherical_to_phase(m, phi, theta, 1 + rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.3, 0.3, 3))
    drift = [integrate(m, st, IntegratorConfig(dt=dt, T=2, sample_stride=1)).energy_drift for dt in (0.02, 0.01)]
    assert 10 < drift[0] / drift[1] < 25


def test_equator_invariance_and_conservation(rng):
    m = rng.uniform(0.5, 2, 3)
    phi = np.array([0.3, 2.4, 4.3])
    st = spherical_to_phase(m, phi, np.full(3, np.pi / 2), 0.3 * rng.standard_normal(3), np.zeros(3))
    rec = integrate(m, st, IntegratorConfig(dt=1e-3, T=10, sample_stride=50))
    assert not rec.aborted
    assert np.max(rec.theta_deviation) <= 1e-10
    assert rec.energy_drift <= 1e-8
    assert rec.momentum_drift <= 1e-10
    assert rec.constraint_violation <= 1e-10


def test_chart_agreement():
    st = perturbed_Y_state(3, np.sqrt(2.25 * critical_alpha_sq(3)), 5e-2, "random-shape", seed=4)
    m = np.ones(3)
    rec = integrate(m, st, IntegratorConfig(dt=1e-3, T=10, sample_stride=10000))
    phi, theta, _, _ = integrate_spherical(m, *phase_to_spherical(st), dt=1e-3, T=10)
    assert np.max(rec.theta_deviation) > 1e-2  # genuinely off the equator
    d_cart = pairwise_distances(rec.q[-1])
    d_sph = pairwise_distances(spherical_to_cartesian(phi, theta))
    assert np.abs(d_cart - d_sph).max() <= 1e-7


def test_abort_near_collision():
    st = spherical_to_phase(np.ones(3), np.array([0, 0.05, 2]), np.full(3, np.pi / 2), np.array([1.0, -1, 0]), np.zeros(3))
    rec = integrate(np.ones(3), st, IntegratorConfig(dt=1e-4, T=1, sample_stride=10))
    assert rec.aborted and "floor" in rec.abort_reason
    assert rec.times[-1] < 0.05
    assert np.all(np.isfinite(rec.q))


def test_trajectory_rows_layout():
    rec = integrate(np.ones(3), relative_equilibrium_trajectory(3, 1.0), IntegratorConfig(dt=1e-2, T=0.1, sample_stride=5))
    header = rec.csv_header()
    assert header[:5] == ["t", "phi_1", "theta_1", "p_phi_1", "p_theta_1"]
    assert header[-3:] == ["H", "J2", "shape_deviation"]
    rows = rec.spherical_rows()
    assert len(rows) == rec.times.size == 3
    assert all(len(r) == len(header) for r in rows)
    assert rows[0][3] == pytest.approx(1.0)  # p_phi = alpha on the equator
    assert rows[0][-2] == pytest.approx(3.0)  # J2 = n alpha
    assert len(rec.samples) == 3 and rec.samples[1][0] == pytest.approx(0.05)


def test_energy_and_momentum_helpers():
    st = relative_equilibrium_trajectory(3, 2.0)
    assert energy(np.ones(3), st.q, st.p) == pytest.approx(3 * 4 / 2 + np.sqrt(3))
    assert angular_momentum_z(st.q, st.p) == pytest.approx(6.0)


def test_fit_growth_rate_synthetic():
    t = np.linspace(0, 10, 1001)
    d = 1e-6 * np.exp(1.7 * t)
    rate, npts = fit_growth_rate(t, d, 1e-5, 1e-3)
    assert rate == pytest.approx(1.7, rel=1e-10) and npts > 3
    rate, npts = fit_growth_rate(t, np.full_like(t, 1e-6), 1e-5, 1e-3)
    assert np.isnan(rate) and npts == 0


def test_perturbed_state_scaling():
    eps = 1e-6
    for direction in ("unstable-mode", "random-shape"):
        st = perturbed_Y_state(3, 0.5, eps, direction, seed=1)
        phi, theta, pphi, pth = phase_to_spherical(st)
        dphi = np.angle(np.exp(1j * (phi - regular_polygon(3).phi)))
        dev = np.abs(np.concatenate([dphi, theta - np.pi / 2]))
        assert dev.max() == pytest.approx(eps, rel=1e-6)
    with pytest.raises(ValueError):
        perturbed_Y_state(3, 3.0, eps, "unstable-mode")
    with pytest.raises(ValueError):
        perturbed_Y_state(3, 0.5, eps, "sideways")


@pytest.mark.parametrize("n", [3, 5])
@pytest.mark.parametrize("frac", [0.0, 0.5])
def test_probe_growth_rate(n, frac):
    alpha = np.sqrt(frac * critical_alpha_sq(n))
    rep = stability_probe(n, alpha, epsilon=1e-6, cfg=IntegratorConfig(dt=1e-3, T=30))
    assert rep.verdict == "grows"
    assert rep.fitted_rate == pytest.approx(rep.expected_rate, rel=0.05)
    assert rep.record.stopped_early
    d = rep.as_dict()
    assert d["verdict"] == "grows" and d["run_aborted"] is False


def test_probe_stable_regime_short():
    alpha = np.sqrt(2.25 * critical_alpha_sq(3))
    rep = stability_probe(3, alpha, epsilon=1e-6, direction="random-shape", seed=0, cfg=IntegratorConfig(dt=1e-3, T=10))
    assert rep.verdict == "bounded"
    assert rep.max_shape_deviation <= 100 * 1e-6
    assert rep.expected_rate == 0.0
