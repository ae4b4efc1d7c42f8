import numpy as np
import pytest
from hypothesis import given, strategies as st

from curved_polygons.dynamics import orbit_residual, relative_equilibrium_trajectory
from curved_polygons.errors import (
    EvenN,
    KernelDimensionError,
    NonPositiveMasses,
    NotAnEquilibrium,
    PoleLatitude,
)
from curved_polygons.families import (
    bifurcation_scan,
    near_polygon_threshold,
    polygon_offset,
    second_family_alpha_sq,
    solve_masses,
)
from curved_polygons.geometry import regular_polygon, spherical_to_cartesian
from curved_polygons.potential import (
    equilibrium_residual_cartesian,
    equilibrium_residual_s1,
    grad_cartesian,
    grad_spherical,
)
from curved_polygons.spectra import critical_alpha_sq


@pytest.mark.parametrize("n", [3, 5, 7, 9, 11])
def test_polygon_gives_uniform_masses(n):
    r = solve_masses(regular_polygon(n).phi)
    np.testing.assert_allclose(r.masses, 1.0, atol=1e-12)
    assert r.nullspace_dim == 1 and r.residual <= 1e-12


def test_solve_masses_examples():
    phi = regular_polygon(3).phi + np.array([0.03, -0.02, 0.0])
    r = solve_masses(phi)
    assert np.all(r.masses > 0) and r.masses.sum() == pytest.approx(3)
    assert r.residual <= 1e-10
    q = spherical_to_cartesian(phi, np.full(3, np.pi / 2))
    assert equilibrium_residual_cartesian(r.masses, q).max_norm <= 1e-10
    rng = np.random.default_rng(11)
    phi = regular_polygon(5).phi + rng.uniform(-0.04, 0.04, 5)
    r = solve_masses(phi)
    assert r.nullspace_dim == 1 and np.all(r.masses > 0)
    assert r.kernel_gap >= 1e6
    assert r.as_dict()["positive"] is True


@given(st.sampled_from([3, 5, 7]), st.integers(0, 2**31), st.floats(-3, 3))
def test_solved_masses_are_equilibria(n, seed, shift):
    rng = np.random.default_rng(seed)
    phi = regular_polygon(n).phi + shift + rng.uniform(-0.05, 0.05, n)
    r = solve_masses(phi)
    assert np.all(r.masses > 0)
    assert np.max(np.abs(equilibrium_residual_s1(r.masses, phi))) <= 1e-10
    q = spherical_to_cartesian(phi, np.full(n, np.pi / 2))
    assert np.linalg.norm(grad_cartesian(r.masses, q), axis=1).max() <= 1e-9


def test_solve_masses_errors():
    with pytest.raises(ValueError):
        solve_masses(regular_polygon(5).phi + np.array([0.3, 0, 0, 0, 0]))
    with pytest.raises(EvenN):
        solve_masses(np.linspace(0, 5, 4), max_perturbation=None)
    # three points crowded on a short arc: the kernel vector changes sign
    with pytest.raises(NonPositiveMasses):
        solve_masses(np.array([0.0, 0.3, 1.0]), max_perturbation=None)
    # a tiny gap threshold cannot be met by a rank-deficient skew matrix with a
    # two-dimensional numerical kernel
    with pytest.raises(KernelDimensionError):
        solve_masses(regular_polygon(5).phi, gap=1e300)


def test_polygon_offset_is_rotation_invariant():
    phi = regular_polygon(7).phi
    assert polygon_offset(phi) < 1e-12
    assert polygon_offset(phi + 2.5) < 1e-12
    bumped = phi.copy()
    bumped[2] += 0.01
    assert polygon_offset(bumped) == pytest.approx(0.005, abs=1e-12)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_threshold_polygon_and_continuity(n):
    poly = regular_polygon(n)
    assert near_polygon_threshold(poly.phi, np.ones(n)) == pytest.approx(critical_alpha_sq(n), rel=1e-12)
    rng = np.random.default_rng(n)
    phi = poly.phi + rng.uniform(-1e-4, 1e-4, n)
    r = solve_masses(phi)
    t = near_polygon_threshold(phi, r.masses)
    assert abs(t - critical_alpha_sq(n)) <= 1e-2
    phi = poly.phi + rng.uniform(-0.05, 0.05, n)
    assert near_polygon_threshold(phi, solve_masses(phi).masses) > 0


def test_threshold_is_instability_boundary():
    # rotating with p_phi_i = m_i alpha the colatitude modes grow exactly below the threshold
    rng = np.random.default_rng(4)
    n = 5
    phi = regular_polygon(n).phi + rng.uniform(-0.04, 0.04, n)
    m = solve_masses(phi).masses
    t = near_polygon_threshold(phi, m)
    from curved_polygons.potential import hessian_theta_theta

    H = hessian_theta_theta(m, phi, np.full(n, np.pi / 2))
    for a2, unstable in ((0.99 * t, True), (1.01 * t, False)):
        # generalised problem H x = lambda m x with lambda - alpha^2 the growth^2
        lam = np.linalg.eigvals(np.linalg.solve(np.diag(m), H)).real.max()
        assert (lam - a2 > 0) == unstable


def test_threshold_rejects_non_equilibria():
    with pytest.raises(NotAnEquilibrium):
        near_polygon_threshold(regular_polygon(3).phi, [1.0, 2.0, 3.0])


def test_second_family_values():
    for n in (3, 5, 7):
        assert abs(second_family_alpha_sq(n, np.pi / 2).alpha_sq - critical_alpha_sq(n)) <= 1e-12
    assert second_family_alpha_sq(3, np.pi / 2).alpha_sq == pytest.approx(4.618802, abs=1e-6)
    fp = second_family_alpha_sq(5, 1.1)
    n = 5
    ang = np.arange(1, n) * 2 * np.pi / n
    np.testing.assert_allclose(np.cos(fp.d1j), np.cos(1.1) ** 2 + np.sin(1.1) ** 2 * np.cos(ang), atol=1e-14)
    assert fp.alpha_sq > 0 and fp.alpha == pytest.approx(np.sqrt(fp.alpha_sq))
    with pytest.raises(PoleLatitude):
        second_family_alpha_sq(3, 0.0)
    with pytest.raises(PoleLatitude):
        second_family_alpha_sq(3, np.pi - 1e-9)
    with pytest.raises(EvenN):
        second_family_alpha_sq(4, 1.0)


@given(st.sampled_from([3, 5, 7, 9]), st.floats(0.05, np.pi / 2))
def test_second_family_mirror_symmetry(n, theta):
    a = second_family_alpha_sq(n, theta).alpha_sq
    b = second_family_alpha_sq(n, np.pi - theta).alpha_sq
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("n", [3, 5, 7])
@pytest.mark.parametrize("theta", [np.pi / 3, 2 * np.pi / 5, 2.0])
def test_second_family_is_relative_equilibrium(n, theta):
    fp = second_family_alpha_sq(n, theta)
    assert orbit_residual(n, fp.alpha, 0.0, np.linspace(0, 3, 7), colatitude=theta) <= 1e-9
    # fixed point of the rotating-frame colatitude equation
    phi = regular_polygon(n).phi
    th = np.full(n, theta)
    _, dU = grad_spherical(np.ones(n), phi, th)
    p_phi = fp.alpha * np.sin(theta) ** 2
    assert np.abs(p_phi**2 * np.cos(theta) / np.sin(theta) ** 3 + dU).max() <= 1e-9
    st_ = relative_equilibrium_trajectory(n, fp.alpha, 0.0, 1.0, colatitude=theta)
    np.testing.assert_allclose(st_.q[:, 2], np.cos(theta), atol=1e-14)


@pytest.mark.parametrize("n", [3, 5])
def test_bifurcation_scan(n):
    grid = np.linspace(0, np.pi, 101)[1:-1]
    scan = bifurcation_scan(n, grid)
    assert len(scan.points) == len(grid) == 99
    assert scan.gap <= 1e-10
    alpha_sq = np.array([a for _, a in scan.rows()])
    mid = len(grid) // 2
    assert grid[mid] == pytest.approx(np.pi / 2, abs=1e-15)
    assert alpha_sq[mid] == pytest.approx(critical_alpha_sq(n), rel=1e-12)
    # mirror symmetric; the bodies crowd together near the poles so alpha^2 blows
    # up there, dips, then climbs to a local maximum Theta_1 at the equator
    np.testing.assert_allclose(alpha_sq, alpha_sq[::-1], rtol=1e-10)
    assert alpha_sq[0] > 10 * alpha_sq[mid]
    assert alpha_sq[mid - 1] < alpha_sq[mid] > alpha_sq[mid + 1]
