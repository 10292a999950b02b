"""Experiment configuration: dataclasses, presets and JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Dist:
    """Sampling distribution; ``normal`` takes (mean, variance), ``uniform`` takes (low, high)."""

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in ("normal", "uniform", "fixed"):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.kind == "normal" and self.b < 0:
            raise ValueError("normal variance must be non-negative")

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "normal":
            return float(self.a + np.sqrt(self.b) * rng.standard_normal())
        if self.kind == "uniform":
            return float(self.a + (self.b - self.a) * rng.random())
        return float(self.a)

    @classmethod
    def from_obj(cls, obj) -> "Dist":
        if isinstance(obj, Dist):
            return obj
        if isinstance(obj, (int, float)):
            return cls("fixed", float(obj), 0.0)
        return cls(obj["kind"], float(obj["a"]), float(obj.get("b", 0.0)))


def normal(mean, var) -> Dist:
    return Dist("normal", mean, var)


def uniform(low, high) -> Dist:
    return Dist("uniform", low, high)


@dataclass(frozen=True)
class Experiment1DConfig:
    filter: str = "remesh"
    construction: str = "direct"
    n_members: int = 25
    n_assim: int = 30
    # t_f = 2 pi / v_truth when None
    final_time: float | None = None
    seed: int = 2024
    # truth
    x0: float = 0.02
    sigma0_sq: float = 0.5
    v: float = 1.0
    D: float = 0.05
    # ensemble sampling (normal second argument is the variance)
    x0_dist: Dist = normal(np.pi / 2 + 0.6, 0.5)
    sigma0_dist: Dist = uniform(0.8, 1.2)
    v_dist: Dist = normal(0.9, 1.2)
    D_dist: Dist = uniform(0.02, 0.08)
    D_min: float = 1e-4
    # observations
    obs_var: float = 0.05
    obs_locations: tuple[float, ...] | None = None
    n_obs: int = 6
    # numerics
    n_particles: int = 100
    eps_ratio: float = 1.3
    n_grid: int = 100
    dt_max: float = 0.01
    eps_cut: float = 0.0
    n_quad: int = 1024
    testbed: str = "adv1d"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("x0_dist", "sigma0_dist", "v_dist", "D_dist"):
            object.__setattr__(self, name, Dist.from_obj(getattr(self, name)))
        if self.obs_locations is not None:
            object.__setattr__(self, "obs_locations", tuple(float(x) for x in self.obs_locations))
        if self.n_members < 2:
            raise ValueError("ensemble needs N >= 2")
        if self.n_assim < 0:
            raise ValueError("n_assim must be non-negative")
        if not self.obs_var > 0:
            raise ValueError("observation variance must be positive")
        if self.filter not in ("remesh", "part", "grid"):
            raise ValueError(f"unknown filter {self.filter!r}")

    @property
    def t_final(self) -> float:
        return self.final_time if self.final_time is not None else 2 * np.pi / self.v

    @property
    def dp(self) -> float:
        return 2 * np.pi / self.n_particles

    @property
    def locations(self) -> np.ndarray:
        if self.obs_locations is not None:
            return np.asarray(self.obs_locations)
        return np.arange(self.n_obs) * 2 * np.pi / self.n_obs


@dataclass(frozen=True)
class Experiment2DConfig:
    filter: str = "remesh"
    construction: str = "direct"
    n_members: int = 32
    n_assim: int = 10
    assim_interval: float = 1.0
    seed: int = 2024
    # truth dipole
    U: float = 0.25
    R: float = 0.5
    alpha: float = 7 * np.pi / 8
    center: tuple[float, float] = (np.pi / 2, np.pi / 2)
    nu: float = 0.0015
    # ensemble sampling
    R_dist: Dist = normal(0.5, 0.05**2)
    alpha_dist: Dist = uniform(np.pi / 2, np.pi)
    center_dist: Dist = normal(np.pi / 2, 0.1**2)
    U_dist: Dist = uniform(0.25, 0.5)
    nu_dist: Dist = normal(0.0015, 0.0005**2)
    nu_min: float = 1e-5
    # observations
    sigma_obs: float = 0.05
    n_obs_per_axis: int = 12
    # numerics
    dt: float = 0.005
    n_grid: int = 128
    eps_ratio: float = 2.0
    eps_omega: float = 1e-4
    n_remesh: int = 2
    # truth runs at this multiple of the member resolution
    truth_refinement: int = 2
    testbed: str = "vortex2d"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("R_dist", "alpha_dist", "center_dist", "U_dist", "nu_dist"):
            object.__setattr__(self, name, Dist.from_obj(getattr(self, name)))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.n_members < 2:
            raise ValueError("ensemble needs N >= 2")
        if self.n_assim < 0:
            raise ValueError("n_assim must be non-negative")
        if not self.sigma_obs > 0:
            raise ValueError("observation noise must be positive")
        if self.filter not in ("remesh", "part"):
            raise ValueError(f"filter {self.filter!r} is not available for the vortex testbed")

    @property
    def dp(self) -> float:
        # remesh grid spacing is twice the particle spacing
        return np.pi / (2 * self.n_grid)

    @property
    def steps_per_window(self) -> int:
        return int(round(self.assim_interval / self.dt))


PRESETS = {
    ("adv1d", "paper"): Experiment1DConfig(),
    ("adv1d", "desk"): Experiment1DConfig(),
    ("vortex2d", "paper"): Experiment2DConfig(),
    ("vortex2d", "desk"): Experiment2DConfig(n_members=8, n_assim=5, n_obs_per_axis=8,
                                             n_grid=64, dt=0.01),
}


def preset(testbed: str, name: str = "paper", **overrides):
    try:
        base = PRESETS[(testbed, name)]
    except KeyError:
        raise ValueError(f"no preset {name!r} for testbed {testbed!r}") from None
    return replace(base, **overrides)


def to_dict(cfg) -> dict:
    d = asdict(cfg)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    return d


def from_dict(d: dict, base=None):
    d = dict(d)
    version = d.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema version {version}")
    testbed = d.get("testbed") or (base.testbed if base is not None else "adv1d")
    cls = Experiment1DConfig if testbed == "adv1d" else Experiment2DConfig
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for k, v in d.items():
        if isinstance(v, dict):
            d[k] = Dist.from_obj(v)
        elif isinstance(v, list):
            d[k] = tuple(v)
    if base is not None:
        return replace(base, **d)
    return cls(**d)


def save_config(cfg, path) -> None:
    Path(path).write_text(json.dumps(to_dict(cfg), indent=2))


def load_config(path, base=None):
    return from_dict(json.loads(Path(path).read_text()), base)
