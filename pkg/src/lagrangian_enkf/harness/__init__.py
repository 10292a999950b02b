"""Twin-experiment orchestration for the 1D and 2D testbeds."""

from .config import (Dist, Experiment1DConfig, Experiment2DConfig, load_config, preset,
                     save_config)
from .metrics import compute_rrmse, member_rel_errors, rrmse_param
from .streams import RngStreams
from .twin import (ExperimentError, TwinResult, generate_ensemble_1d, generate_ensemble_2d,
                   resolve_threads, run_1d, run_2d, run_twin_experiment, truth_trajectory_2d)


def generate_ensemble(cfg, streams):
    if isinstance(cfg, Experiment1DConfig):
        return generate_ensemble_1d(cfg, streams)
    return generate_ensemble_2d(cfg, streams)
