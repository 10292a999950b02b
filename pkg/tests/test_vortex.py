import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st

from lagrangian_enkf.kernels import SmoothingKernel
from lagrangian_enkf.particles import ParticleSet, kernel_matrix
from lagrangian_enkf.vortex import (J1_ZERO, DipoleParams, VicSolver, VortexState, box_domain,
                                    ensemble_error_omega, forecast_remesh, lamb_chaplygin_init,
                                    lamb_chaplygin_vorticity, observation_points, pse_rates_2d,
                                    remesh_steps, rk3_advect, trapezoid_weights)

DP = np.pi / 64
KERNEL = SmoothingKernel(2 * DP, 2)


def j_series(nu, x, terms=40):
    k = np.arange(terms)
    c = (-1.0) ** k / (scipy.special.factorial(k) * scipy.special.factorial(k + nu))
    return np.sum(c[:, None] * (np.asarray(x)[None, :] / 2) ** (2 * k[:, None] + nu), axis=0)


def test_bessel_values_match_power_series():
    x = np.linspace(0, 6, 25)
    assert np.allclose(scipy.special.j1(x), j_series(1, x), atol=1e-13)
    assert np.allclose(scipy.special.j0(x), j_series(0, x), atol=1e-13)


def test_first_j1_zero_frozen():
    assert J1_ZERO == pytest.approx(3.8317059702075125, rel=1e-15)
    assert abs(j_series(1, np.array([J1_ZERO]))[0]) < 1e-13


def test_dipole_is_antisymmetric_and_compact():
    p = DipoleParams(U=0.3, R=0.5, alpha=0.4, center=(1.5, 1.6))
    rng = np.random.default_rng(0)
    d = rng.uniform(-0.6, 0.6, (200, 2))
    e = np.array([np.cos(p.alpha), np.sin(p.alpha)])
    mirror = 2 * (d @ e)[:, None] * e - d
    w = lamb_chaplygin_vorticity(np.asarray(p.center) + d, p)
    wm = lamb_chaplygin_vorticity(np.asarray(p.center) + mirror, p)
    assert np.allclose(w, -wm, atol=1e-13)
    far = np.asarray(p.center) + np.array([[0.51, 0.0], [0.0, -0.7]])
    assert np.all(lamb_chaplygin_vorticity(far, p) == 0.0)


def test_dipole_lattice_has_zero_circulation():
    s = lamb_chaplygin_init(DipoleParams(), DP, 1e-4, KERNEL)
    assert abs(s.particles.total()) < 1e-12
    assert len(s.particles) > 100


def test_dipole_outside_box_rejected():
    with pytest.raises(ValueError):
        lamb_chaplygin_init(DipoleParams(center=(0.2, 1.5)), DP, 1e-4, KERNEL)


def test_poisson_manufactured_solution_exact():
    s = VicSolver(64)
    x = s.grid.nodes()
    psi = (np.sin(x[:, 0]) * np.sin(2 * x[:, 1])).reshape(s.grid.shape)
    assert np.max(np.abs(s.stream_function(5.0 * psi) - psi)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_laplacian_inverts_stream_function(seed):
    s = VicSolver(24)
    om = np.zeros(s.grid.shape)
    om[1:-1, 1:-1] = np.random.default_rng(seed).standard_normal((23, 23))
    psi = s.stream_function(om)
    assert np.allclose(-s.laplacian(psi), om[1:-1, 1:-1], atol=1e-10)
    assert np.all(psi[0] == 0) and np.all(psi[:, -1] == 0)


def test_normal_velocity_vanishes_on_walls():
    s = VicSolver(32)
    st_ = lamb_chaplygin_init(DipoleParams(center=(1.0, 1.2)), np.pi / 64, 1e-4, KERNEL)
    f = s.field(st_.particles)
    t = np.linspace(0, np.pi, 17)
    z, L = np.zeros_like(t), np.full_like(t, np.pi)
    assert np.max(np.abs(f(np.stack([z, t], 1))[:, 0])) < 1e-13
    assert np.max(np.abs(f(np.stack([L, t], 1))[:, 0])) < 1e-13
    assert np.max(np.abs(f(np.stack([t, z], 1))[:, 1])) < 1e-13
    assert np.max(np.abs(f(np.stack([t, L], 1))[:, 1])) < 1e-13


def test_velocity_second_order_in_grid_spacing():
    # psi = sin x sin y gives u = sin x cos y, v = -cos x sin y
    errs = []
    for n in (32, 64):
        s = VicSolver(n)
        x = s.grid.nodes()
        om = (2 * np.sin(x[:, 0]) * np.sin(x[:, 1])).reshape(s.grid.shape)
        psi = s.stream_function(om)
        ext = np.pad(psi, 3, mode="reflect", reflect_type="odd")
        ux = (ext[3:-3, 4:-2] - ext[3:-3, 2:-4]) / (2 * s.h)
        errs.append(np.max(np.abs(ux.ravel() - np.sin(x[:, 0]) * np.cos(x[:, 1]))))
    assert errs[0] / errs[1] > 3.8


def test_rk3_third_order_on_rotation():
    dom = box_domain()
    c = np.array([np.pi / 2, np.pi / 2])
    rot = lambda ps: np.stack([-(ps.positions[:, 1] - c[1]), ps.positions[:, 0] - c[0]], axis=1)
    ps = ParticleSet([[2.0, 1.5], [1.2, 1.9]], [1.0, -1.0], [1.0, 1.0], KERNEL, dom)
    T = 0.8
    ends = []
    for n in (8, 16, 32):
        s = VortexState(ps, 1e-3)
        for _ in range(n):
            s = rk3_advect(s, T / n, rot)
        ends.append(s.particles.positions)
    order = np.log2(np.max(np.abs(ends[0] - ends[1])) / np.max(np.abs(ends[1] - ends[2])))
    assert order > 2.8


def test_pse_2d_conserves_circulation_and_matches_dense():
    s = lamb_chaplygin_init(DipoleParams(), DP, 1e-4, KERNEL)
    ps = s.particles
    rates = pse_rates_2d(ps)
    assert abs(rates.sum()) < 1e-12 * np.abs(rates).sum()
    eps = KERNEL.eps
    d = ps.positions[:, None, :] - ps.positions[None, :, :]
    near = np.sqrt(np.sum(d**2, axis=-1)) < KERNEL.cutoff_radius
    W = 2.0 * KERNEL(d)
    U, V = ps.intensities, ps.volumes
    pair = (V[:, None] * U[None, :] - V[None, :] * U[:, None]) * W / eps**2
    assert np.allclose(rates, (pair * near).sum(axis=1), rtol=0, atol=1e-13)
    # the truncated tail is small against the full exchange
    assert np.abs((pair * ~near).sum(axis=1)).max() < 5e-5 * np.abs(pair.sum(axis=1)).max()


def test_forecast_remesh_conserves_circulation():
    s = lamb_chaplygin_init(DipoleParams(), DP, 0.0, KERNEL)
    moved = s.with_particles(s.particles.with_positions(s.particles.positions + 0.013))
    out = forecast_remesh(moved, DP, 0.0, VicSolver(32))
    assert abs(out.particles.total() - moved.particles.total()) < 1e-12


def test_remesh_schedule_is_mid_interval():
    assert remesh_steps(200, 2) == {50, 150}
    assert remesh_steps(100, 2) == {25, 75}
    assert remesh_steps(100, 0) == set()


def test_observation_points_cell_centred():
    pts = observation_points(8)
    assert pts.shape == (64, 2)
    assert np.allclose(np.unique(pts[:, 0]), (np.arange(8) + 0.5) * np.pi / 8)


def test_trapezoid_weights_integrate_area():
    g = VicSolver(16).grid
    assert trapezoid_weights(g).sum() == pytest.approx(np.pi**2, rel=1e-14)


def test_error_of_truth_against_itself_is_zero():
    s = lamb_chaplygin_init(DipoleParams(), DP, 1e-4, KERNEL)
    q = VicSolver(32).grid
    assert ensemble_error_omega([s, s], s, q) == 0.0


def test_small_vic_grid_rejected():
    with pytest.raises(ValueError):
        VicSolver(8)
