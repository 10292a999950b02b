"""Assimilation steps for particle ensembles: Remesh-EnKF, Part-EnKF and Grid-EnKF."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .enkf import (ObservationSpec, analysis_update, apply_correction_rows,
                   ensemble_correction)
from .kernels import RedistributionKernel
from .particles import (ParticleSet, SingularSystemError, beale_correct, eval_field,
                        ridge_fit)
from .remeshing import UniformGrid, project_to_grid, regenerate_particles

FILTER_KINDS = ("remesh", "part", "grid")
CONSTRUCTIONS = ("direct", "beale", "ridge")


@dataclass
class FilterConfig:
    kind: str = "remesh"
    construction: str = "direct"
    eps_cut: float = 0.0
    # remesh grid template (spacing 2 * dp) for the Remesh-EnKF
    grid: UniformGrid | None = None
    dp: float | None = None
    redistribution: RedistributionKernel | None = None
    # member state -> predicted observation vector
    observe: Callable | None = None
    rng: np.random.Generator | Sequence[np.random.Generator] | None = None
    beale_iters: int = 20
    beale_tol: float = 1e-10
    ridge_lambda: float | None = None

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.construction not in CONSTRUCTIONS:
            raise ValueError(f"unknown intensity construction {self.construction!r}")
        if self.eps_cut < 0:
            raise ValueError("eps_cut must be non-negative")
        if self.grid is not None and self.dp is not None and \
                not np.isclose(self.grid.spacing, 2 * self.dp, rtol=1e-12):
            raise ValueError("remesh grid spacing must be 2 * dp")


@dataclass
class LagrangianEnsemble:
    members: list
    params: np.ndarray | None = None  # (N, k) per-member model parameters
    param_names: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least two members")
        if self.params is not None:
            self.params = np.asarray(self.params, dtype=float).reshape(len(self.members), -1)
        first = self.members[0]
        if isinstance(first, ParticleSet):
            for m in self.members[1:]:
                if m.kernel != first.kernel:
                    raise ValueError("members must share kernel family and smoothing length")

    @property
    def size(self) -> int:
        return len(self.members)

    def replace_members(self, members, params=None) -> "LagrangianEnsemble":
        return replace(self, members=list(members),
                       params=self.params if params is None else params)


def predict(ens: LagrangianEnsemble, observe: Callable) -> np.ndarray:
    return np.stack([np.asarray(observe(m), dtype=float) for m in ens.members], axis=1)


def _correction(ens, obs: ObservationSpec, cfg: FilterConfig) -> np.ndarray:
    if cfg.observe is None:
        raise ValueError("filter configuration has no observation operator")
    return ensemble_correction(predict(ens, cfg.observe), obs, cfg.rng)


def _updated_params(ens, F):
    return None if ens.params is None else apply_correction_rows(ens.params, F)


def _reseed_if_empty(ps: ParticleSet, volume: float) -> ParticleSet:
    if len(ps) > 0:
        return ps
    V = np.array([volume])
    return ParticleSet(ps.domain.center[None, :], np.zeros(1), V, ps.kernel, ps.domain)


def remesh_analysis(ens: LagrangianEnsemble, F: np.ndarray, cfg: FilterConfig) -> LagrangianEnsemble:
    """Project every member on the common grid, combine nodal values with ``F``, regenerate."""
    if cfg.grid is None or cfg.dp is None:
        raise ValueError("Remesh-EnKF needs a grid template and a particle spacing")
    grids = [project_to_grid(m, cfg.grid, cfg.redistribution, dp=cfg.dp) for m in ens.members]
    Z = np.stack([g.values.ravel() for g in grids], axis=1)
    Za = analysis_update(Z, F)
    new = []
    for i, m in enumerate(ens.members):
        g = cfg.grid.with_values(Za[:, i])
        ps = regenerate_particles(g, cfg.redistribution, cfg.dp, cfg.eps_cut, m.kernel, m.domain)
        new.append(_reseed_if_empty(ps, cfg.dp ** ps.dim))
    return ens.replace_members(new, _updated_params(ens, F))


def remesh_enkf_step(ens: LagrangianEnsemble, obs: ObservationSpec,
                     cfg: FilterConfig) -> LagrangianEnsemble:
    # predictions use the particle states before projection
    return remesh_analysis(ens, _correction(ens, obs, cfg), cfg)


def cross_member_values(ens: LagrangianEnsemble) -> list[np.ndarray]:
    """For each member ``i``, the ``(N, N_i)`` array of every member field at ``i``'s particles."""
    return [np.stack([eval_field(mj, mi.positions) for mj in ens.members])
            for mi in ens.members]


def part_analysis(ens: LagrangianEnsemble, F: np.ndarray, cfg: FilterConfig) -> LagrangianEnsemble:
    """Fit each member's own particles to ``u_i + sum_j F_ji u_j``; positions never move."""
    vals = cross_member_values(ens)
    new = []
    for i, m in enumerate(ens.members):
        target = vals[i][i] + F[:, i] @ vals[i]
        if cfg.construction == "direct":
            new.append(m.with_intensities(target * m.volumes))
        elif cfg.construction == "beale":
            new.append(beale_correct(m, target, cfg.beale_iters, cfg.beale_tol).particles)
        else:
            try:
                new.append(ridge_fit(m, target, cfg.ridge_lambda))
            except SingularSystemError as exc:
                raise SingularSystemError(f"member {i}: {exc}") from exc
    return ens.replace_members(new, _updated_params(ens, F))


def part_enkf_step(ens: LagrangianEnsemble, obs: ObservationSpec,
                   cfg: FilterConfig) -> LagrangianEnsemble:
    return part_analysis(ens, _correction(ens, obs, cfg), cfg)


def grid_analysis(ens: LagrangianEnsemble, F: np.ndarray) -> LagrangianEnsemble:
    grids = ens.members
    for g in grids[1:]:
        if not g.same_geometry(grids[0]):
            raise ValueError("all member grids must share the same geometry")
    Za = analysis_update(np.stack([g.values.ravel() for g in grids], axis=1), F)
    return ens.replace_members([g.with_values(Za[:, i]) for i, g in enumerate(grids)],
                               _updated_params(ens, F))


def grid_enkf_step(ens: LagrangianEnsemble, obs: ObservationSpec,
                   cfg: FilterConfig) -> LagrangianEnsemble:
    return grid_analysis(ens, _correction(ens, obs, cfg))


STEPS = {"remesh": remesh_enkf_step, "part": part_enkf_step, "grid": grid_enkf_step}
ANALYSES = {"remesh": remesh_analysis, "part": part_analysis,
            "grid": lambda ens, F, cfg: grid_analysis(ens, F)}


def assimilate(ens: LagrangianEnsemble, obs: ObservationSpec, cfg: FilterConfig) -> LagrangianEnsemble:
    return STEPS[cfg.kind](ens, obs, cfg)
