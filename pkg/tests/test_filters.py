import numpy as np
import pytest

from lagrangian_enkf.enkf import ObservationSpec, analysis_update
from lagrangian_enkf.filters import (FilterConfig, LagrangianEnsemble, assimilate, grid_analysis,
                                     part_analysis, remesh_analysis)
from lagrangian_enkf.kernels import RedistributionKernel, SmoothingKernel
from lagrangian_enkf.particles import Domain, eval_field, init_from_function
from lagrangian_enkf.remeshing import (UniformGrid, grid_interp_field, lattice_positions,
                                       project_to_grid)

TWO_PI = 2 * np.pi
N_P = 64
DP = TWO_PI / N_P
KERNEL = SmoothingKernel(1.3 * DP, 1, period=TWO_PI)
GRID = UniformGrid.periodic_1d(N_P // 2)
M4 = RedistributionKernel("m4prime", 1)
XQ = np.linspace(0, TWO_PI, 200, endpoint=False)


def bump(c, w=0.8):
    return lambda x: np.exp(-0.5 * ((x - c + np.pi) % TWO_PI - np.pi) ** 2 / w**2)


def ensemble(centers=(2.5, 3.0, 3.4, 3.9), shift=0.0):
    pos = lattice_positions(GRID) + shift
    members = [init_from_function(bump(c), pos, DP, KERNEL, Domain.periodic_1d()) for c in centers]
    return LagrangianEnsemble(members, np.array(centers)[:, None], ("c",))


def config(kind, **kw):
    return FilterConfig(kind=kind, grid=GRID, dp=DP, redistribution=M4,
                        observe=lambda m: eval_field(m, np.array([1.0, 3.0, 5.0])), **kw)


def test_zero_correction_is_identity_for_part():
    ens = ensemble()
    out = part_analysis(ens, np.zeros((4, 4)), config("part"))
    for a, b in zip(ens.members, out.members):
        assert np.array_equal(a.positions, b.positions)
        assert np.allclose(eval_field(a, a.positions), b.intensities / b.volumes, rtol=1e-14)


def test_zero_correction_remesh_keeps_field():
    ens = ensemble(shift=0.013)
    out = remesh_analysis(ens, np.zeros((4, 4)), config("remesh"))
    for a, b in zip(ens.members, out.members):
        assert abs(b.total() - a.total()) < 1e-12
        assert np.max(np.abs(eval_field(a, XQ) - eval_field(b, XQ))) < 5e-3
        assert np.allclose(b.positions[:, 0], lattice_positions(GRID)[:, 0])


def test_remesh_analysis_is_linear_combination_of_nodal_values():
    ens = ensemble(shift=0.021)
    F = np.random.default_rng(0).standard_normal((4, 4)) * 0.1
    out = remesh_analysis(ens, F, config("remesh"))
    Z = np.stack([project_to_grid(m, GRID, M4, dp=DP).values for m in ens.members], axis=1)
    Za = analysis_update(Z, F)
    lat = lattice_positions(GRID)
    for i, m in enumerate(out.members):
        expected = grid_interp_field(GRID.with_values(Za[:, i]), M4, lat) * DP
        assert np.allclose(m.intensities, expected, rtol=1e-13, atol=1e-16)
    assert np.allclose(out.params, ens.params + F.T @ ens.params)


def test_part_analysis_targets_combination_at_own_particles():
    ens = ensemble(shift=0.0)
    F = np.random.default_rng(1).standard_normal((4, 4)) * 0.2
    out = part_analysis(ens, F, config("part"))
    Zq = np.stack([eval_field(m, ens.members[2].positions) for m in ens.members], axis=1)
    target = analysis_update(Zq, F)[:, 2]
    got = out.members[2].intensities / out.members[2].volumes
    assert np.allclose(got, target, rtol=1e-13, atol=1e-15)


@pytest.mark.filterwarnings("ignore:Beale iteration stopped")
def test_beale_and_ridge_constructions_fit_target():
    ens = ensemble()
    F = np.random.default_rng(2).standard_normal((4, 4)) * 0.2
    for construction in ("beale", "ridge"):
        out = part_analysis(ens, F, config("part", construction=construction, beale_iters=80))
        Zq = np.stack([eval_field(m, ens.members[0].positions) for m in ens.members], axis=1)
        target = analysis_update(Zq, F)[:, 0]
        resid = eval_field(out.members[0], out.members[0].positions) - target
        assert np.max(np.abs(resid)) < 1e-5


def test_grid_analysis_matches_matrix_update():
    rng = np.random.default_rng(3)
    grids = [UniformGrid.periodic_1d(10, values=rng.standard_normal(10)) for _ in range(3)]
    ens = LagrangianEnsemble(grids)
    F = rng.standard_normal((3, 3))
    out = grid_analysis(ens, F)
    Z = np.stack([g.values for g in grids], axis=1)
    assert np.allclose(np.stack([g.values for g in out.members], axis=1), Z + Z @ F)


def test_grid_geometry_mismatch_rejected():
    ens = LagrangianEnsemble([UniformGrid.periodic_1d(10), UniformGrid.periodic_1d(12)])
    with pytest.raises(ValueError):
        grid_analysis(ens, np.zeros((2, 2)))


def test_assimilation_pulls_ensemble_towards_observations():
    ens = ensemble(centers=(2.0, 2.6, 3.4, 4.0))
    truth = bump(3.0)
    xo = np.linspace(0.3, 6.0, 12)
    obs = ObservationSpec(truth(xo), 1e-4)
    for kind in ("remesh", "part"):
        cfg = FilterConfig(kind=kind, grid=GRID, dp=DP, redistribution=M4,
                           observe=lambda m: eval_field(m, xo), rng=np.random.default_rng(9))
        out = assimilate(ens, obs, cfg)
        err = lambda e: np.mean([np.sum((eval_field(m, XQ) - truth(XQ)) ** 2) for m in e.members])
        assert err(out) < 0.5 * err(ens)
        assert abs(out.params.mean() - 3.0) < abs(ens.params.mean() - 3.0) + 0.2


def test_empty_member_reseeded_with_zero_particle():
    ens = ensemble()
    cfg = config("remesh", eps_cut=10.0)
    out = remesh_analysis(ens, np.zeros((4, 4)), cfg)
    assert all(len(m) == 1 and m.intensities[0] == 0.0 for m in out.members)


def test_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(kind="kalman")
    with pytest.raises(ValueError):
        FilterConfig(construction="lsq")
    with pytest.raises(ValueError):
        FilterConfig(grid=GRID, dp=DP / 2)
    with pytest.raises(ValueError):
        LagrangianEnsemble([ensemble().members[0]])
