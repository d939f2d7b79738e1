import numpy as np
import pytest

from mixedqgt import (
    AngleOutOfRangeError,
    DensityMatrix,
    GeodesicSolution,
    NotQubitError,
    RankDeficientError,
    ValidationError,
    bloch_ellipse_check,
    bures_angle,
    fidelity,
    geodesic_point,
    geodesic_purification,
    geodesic_samples,
    geodesic_tangent,
    path_length,
    purify,
    solve_geodesic,
    verify_geodesic_ode,
)
from conftest import rand_bloch_density, rand_density

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def test_solution_reproduces_endpoints_and_angle():
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, b = rand_bloch_density(rng), rand_bloch_density(rng)
        sol = solve_geodesic(a, b)
        assert np.isclose(sol.theta, bures_angle(a, b), atol=1e-12)
        assert np.max(np.abs(geodesic_point(sol, 0.0).mat - a.mat)) < 1e-10
        assert np.max(np.abs(geodesic_point(sol, sol.theta).mat - b.mat)) < 1e-10
        assert sol.orthogonality_residual < 1e-12
        assert sol.horizontality_residual < 1e-10


def test_qutrit_geodesic_works_too():
    rng = np.random.default_rng(1)
    a, b = rand_density(rng, 3), rand_density(rng, 3)
    sol = solve_geodesic(a, b)
    assert np.max(np.abs(geodesic_point(sol, sol.theta).mat - b.mat)) < 1e-10


def test_path_length_equals_opening_angle():
    rng = np.random.default_rng(2)
    a, b = rand_bloch_density(rng), rand_bloch_density(rng)
    sol = solve_geodesic(a, b)
    times = np.linspace(0.0, sol.theta, 41)
    assert np.isclose(path_length(geodesic_samples(sol, times), times),
                      sol.theta, atol=1e-12)


def test_geodesic_satisfies_second_order_equation():
    rng = np.random.default_rng(3)
    a, b = rand_density(rng, 3), rand_density(rng, 3)
    sol = solve_geodesic(a, b)
    report = verify_geodesic_ode(sol, np.linspace(0.0, sol.theta, 17))
    assert report.max_accel_residual < 1e-6
    assert report.max_speed_error < 1e-10
    assert report.max_connection_entry < 1e-10


def test_tangent_matches_difference_quotient():
    rng = np.random.default_rng(4)
    a, b = rand_bloch_density(rng), rand_bloch_density(rng)
    sol = solve_geodesic(a, b)
    t0, h = 0.2, 1e-6
    fd = (geodesic_purification(sol, t0 + h).amplitudes
          - geodesic_purification(sol, t0 - h).amplitudes) / (2 * h)
    assert np.allclose(geodesic_tangent(sol, t0).components, fd, atol=1e-8)


def test_identical_states_are_rejected():
    rho = DensityMatrix(np.diag([0.6, 0.4]))
    with pytest.raises(AngleOutOfRangeError):
        solve_geodesic(rho, rho)


def test_rank_deficient_needs_explicit_consent():
    pure = DensityMatrix(np.diag([1.0, 0.0]))
    mixed = DensityMatrix(np.diag([0.7, 0.3]))
    with pytest.raises(RankDeficientError):
        solve_geodesic(pure, mixed)
    sol = solve_geodesic(pure, mixed, require_full_rank=False)
    assert np.max(np.abs(geodesic_point(sol, sol.theta).mat - mixed.mat)) < 1e-8


def test_solution_constructor_rejects_non_orthogonal_pair():
    psi = purify(DensityMatrix(np.diag([0.6, 0.4])))
    with pytest.raises(ValidationError):
        GeodesicSolution(psi, psi, 0.5)


def _ellipse_family(r):
    def rho(t):
        return DensityMatrix(0.5 * (np.eye(2) + np.sin(2 * t) * SX
                                    + r * np.cos(2 * t) * SZ))
    return rho


def test_bloch_trace_is_an_ellipse_with_axes_one_and_r():
    for r in (0.3, 0.6):
        fam = _ellipse_family(r)
        sol = solve_geodesic(fam(0.0), fam(0.55))
        rep = bloch_ellipse_check(sol)
        assert np.isclose(rep.semi_major, 1.0, atol=1e-9)
        assert np.isclose(rep.semi_minor, r, atol=1e-9)
        assert rep.max_deviation < 1e-9
        assert rep.out_of_plane < 1e-9
        assert rep.fit_residual < 1e-12


def test_pure_state_trace_is_a_great_circle():
    fam = _ellipse_family(1.0)
    sol = solve_geodesic(fam(0.0), fam(0.55), require_full_rank=False)
    rep = bloch_ellipse_check(sol)
    assert np.isclose(rep.semi_major, 1.0, atol=1e-9)
    assert np.isclose(rep.semi_minor, 1.0, atol=1e-9)
    assert rep.max_deviation < 1e-9


def test_diameter_trace_degenerates_cleanly():
    def fam(t):
        return DensityMatrix(0.5 * (np.eye(2) + 0.9 * np.cos(2 * t) * SZ))

    sol = solve_geodesic(fam(0.0), fam(0.5))
    rep = bloch_ellipse_check(sol)
    assert rep.semi_minor < 1e-10
    assert rep.max_deviation < 1e-9


def test_ellipse_check_refuses_non_qubits():
    rng = np.random.default_rng(5)
    sol = solve_geodesic(rand_density(rng, 3), rand_density(rng, 3))
    with pytest.raises(NotQubitError):
        bloch_ellipse_check(sol)
