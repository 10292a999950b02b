import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lagrangian_enkf.advection_diffusion import (Model1DParams, StabilityError, eulerian_fd_step,
                                                 forecast_grid_1d, forecast_particles_1d,
                                                 ground_truth_1d, lagrangian_step_1d,
                                                 observe_points_1d, periodic_heat_kernel,
                                                 pse_rates_1d)
from lagrangian_enkf.kernels import SmoothingKernel
from lagrangian_enkf.particles import Domain, init_from_function
from lagrangian_enkf.remeshing import UniformGrid

TWO_PI = 2 * np.pi


def particles(n=100, f=None, eps_ratio=1.3):
    dp = TWO_PI / n
    f = f or (lambda x: ground_truth_1d(x, 0.0, 2.0, 0.7, 0.0, 1.0))
    k = SmoothingKernel(eps_ratio * dp, 1, period=TWO_PI)
    return init_from_function(f, (np.arange(n) + 0.5) * dp, dp, k, Domain.periodic_1d())


def test_heat_kernel_unit_mass_and_periodic():
    x = np.linspace(0, TWO_PI, 2049)[:-1]
    for t in (0.05, 0.5, 3.0):
        assert abs(periodic_heat_kernel(x, t).sum() * TWO_PI / 2048 - 1.0) < 1e-12
    assert periodic_heat_kernel(np.array([0.3]), 0.4)[0] == pytest.approx(
        periodic_heat_kernel(np.array([0.3 + TWO_PI]), 0.4)[0], rel=1e-14)


def test_heat_kernel_value_frozen():
    # single dominant image: (4 pi t)^-1/2 at the centre
    assert periodic_heat_kernel(np.array([0.0]), 0.25)[0] == pytest.approx(1 / np.sqrt(np.pi), rel=1e-14)


def test_ground_truth_satisfies_pde():
    x = np.linspace(0, TWO_PI, 41)
    v, D, t, h, k = 1.0, 0.05, 1.3, 1e-4, 1e-4
    u = lambda x, t: ground_truth_1d(x, t, 0.02, np.sqrt(0.5), v, D)
    ut = (u(x, t + k) - u(x, t - k)) / (2 * k)
    ux = (u(x + h, t) - u(x - h, t)) / (2 * h)
    uxx = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / h**2
    assert np.max(np.abs(ut + v * ux - D * uxx)) < 1e-5


def test_pse_conserves_total_intensity():
    ps = particles()
    assert abs(pse_rates_1d(ps).sum()) < 1e-13


def test_pse_approximates_laplacian():
    ps = particles(200, f=np.sin, eps_ratio=2.0)
    lap = pse_rates_1d(ps) / ps.volumes
    assert np.max(np.abs(lap + np.sin(ps.positions[:, 0]))) < 0.02


def test_fd_step_conserves_mass():
    g = UniformGrid.periodic_1d(100, values=ground_truth_1d(np.arange(100) * TWO_PI / 100, 0, 1.0, 0.7, 0, 1))
    g2 = eulerian_fd_step(g, Model1DParams(0.7, 0.05, 0.01))
    assert abs(g2.total() - g.total()) < 1e-14


@pytest.mark.parametrize("v,D,dt", [(10.0, 0.05, 0.01), (1.0, 1.0, 0.01)])
def test_unstable_step_rejected(v, D, dt):
    with pytest.raises(StabilityError):
        Model1DParams(v, D, dt)


def test_nonpositive_diffusion_rejected():
    with pytest.raises(ValueError):
        Model1DParams(1.0, 0.0, 0.01)


@settings(max_examples=25, deadline=None)
@given(st.floats(-4, 4), st.floats(1e-4, 0.3), st.floats(0.05, 2.0))
def test_substeps_respect_limits(v, D, duration):
    h = TWO_PI / 100
    n = Model1DParams.stable_substeps(v, D, duration, 0.01, h)
    dt = duration / n
    assert dt <= 0.01 + 1e-12
    Model1DParams(v, D, dt, h=h)


def test_particle_forecast_tracks_exact_solution():
    x0, s0, v, D, T = 2.0, 0.7, 1.0, 0.05, 1.0
    ps = particles(f=lambda x: ground_truth_1d(x, 0.0, x0, s0, v, D))
    out = forecast_particles_1d(ps, v, D, T, 0.01, TWO_PI / 100)
    x = np.linspace(0, TWO_PI, 300)
    ref = ground_truth_1d(x, T, x0, s0, v, D)
    assert np.max(np.abs(out(x) - ref)) < 0.02 * ref.max()


def test_grid_forecast_conserves_mass():
    n = 100
    xs = np.arange(n) * TWO_PI / n
    g = UniformGrid.periodic_1d(n, values=ground_truth_1d(xs, 0, 1.0, 0.7, 0, 1))
    out = forecast_grid_1d(g, -2.3, 0.08, 1.0, 0.01)
    assert abs(out.total() - g.total()) < 1e-12


def test_heat_kernel_tends_to_uniform():
    x = np.linspace(0, TWO_PI, 101)
    assert np.max(np.abs(periodic_heat_kernel(x, 100.0) - 1 / TWO_PI)) < 1e-6


@given(st.floats(-20, 20), st.floats(0.01, 10))
def test_heat_kernel_symmetric(x, t):
    a, b = periodic_heat_kernel(np.array([x]), t)[0], periodic_heat_kernel(np.array([-x]), t)[0]
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_heat_kernel_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        periodic_heat_kernel(np.array([0.0]), 0.0)


def test_ground_truth_peak_mass_and_location():
    x0, s0, v, D = 1.1, 0.9, 1.0, 0.05
    x = np.linspace(0, TWO_PI, 4097)[:-1]
    u0 = ground_truth_1d(x, 0.0, x0, s0, v, D)
    assert abs(x[np.argmax(u0)] - x0) <= TWO_PI / 4096
    for t in (0.0, np.pi / v, TWO_PI / v):
        assert abs(ground_truth_1d(x, t, x0, s0, v, D).sum() * TWO_PI / 4096 - 1) < 1e-12
    peaks = [ground_truth_1d(x, t, x0, s0, v, D).max() for t in np.linspace(0, 10, 11)]
    assert np.all(np.diff(peaks) < 0)


def test_lagrangian_step_without_diffusion_only_moves():
    ps = particles()
    out = lagrangian_step_1d(ps, Model1DParams(0.8, 1e-300, 0.01))
    assert np.allclose(out.intensities, ps.intensities, rtol=0, atol=1e-250)
    shift = (out.positions[:, 0] - ps.positions[:, 0]) % TWO_PI
    assert np.allclose(shift, 0.008, rtol=0, atol=1e-12)


def test_lagrangian_mass_drift_over_many_steps():
    ps = particles()
    prm = Model1DParams(1.0, 0.05, 0.01)
    m0 = ps.intensities.sum()
    for _ in range(1000):
        ps = lagrangian_step_1d(ps, prm)
    assert abs(ps.intensities.sum() - m0) / abs(m0) < 1e-10


def test_translation_equivariance_without_diffusion():
    ps = particles()
    v, dt = 0.7, 0.01
    out = lagrangian_step_1d(ps, Model1DParams(v, 1e-300, dt))
    x = np.linspace(0, TWO_PI, 57)
    assert np.max(np.abs(out(x) - ps(x - v * dt))) < 1e-12


def test_fd_constant_field_unchanged():
    g = UniformGrid.periodic_1d(100, values=np.full(100, 0.37))
    out = eulerian_fd_step(g, Model1DParams(-0.9, 0.05, 0.01))
    assert np.max(np.abs(out.values - 0.37)) < 1e-15


def test_observe_truth_zero_and_linearity():
    x0, s0 = 2.0, 0.7
    loc = np.array([x0, 0.5, 4.0])
    exact = ground_truth_1d(loc, 0.0, x0, s0, 0.0, 1.0)
    ps = particles(400, f=lambda x: ground_truth_1d(x, 0.0, x0, s0, 0.0, 1.0))
    assert observe_points_1d(ps, loc)[0] == pytest.approx(periodic_heat_kernel(np.array([0.0]), s0**2 / 2)[0], rel=1e-3)
    assert np.allclose(observe_points_1d(ps, loc), exact, rtol=0, atol=1e-3 * exact.max())
    zero = ps.with_intensities(np.zeros(len(ps)))
    assert np.all(observe_points_1d(zero, loc) == 0)
    a, b = 1.7, -0.4
    other = ps.with_intensities(np.cos(ps.positions[:, 0]) * ps.volumes)
    comb = ps.with_intensities(a * ps.intensities + b * other.intensities)
    assert np.allclose(observe_points_1d(comb, loc),
                       a * observe_points_1d(ps, loc) + b * observe_points_1d(other, loc), atol=1e-14)
