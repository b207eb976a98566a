"""Regularized real phase retrieval with Bregman proximal gradient solvers.

The package splits into measurement (sensing model), gauges (regularizers
and their prox maps), bpg (the solver), theory (recovery-condition checks),
and harness/cli (experiments and the command line).
"""

from .bpg import SolverConfig, SolverTrace, solve
from .gauges import (GaugeSpec, ModelDescriptor, analysis_l1, bregman_prox,
                     euclidean_prox, gauge_value, group_lasso, haar_frame,
                     lasso, model_descriptor, tv_1d)
from .harness import CODE_VERSION as __version__
from .measurement import (dist_to_signclass, forward_intensity, make_ensemble,
                          make_observation, sample_gaussian_map)
from .theory import (gaussian_width_mc, min_norm_certificate, oracle_exact_solve,
                     restricted_injectivity, sample_bound, smin_mc,
                     width_upper_bound)

__all__ = [
    "__version__",
    "SolverConfig", "SolverTrace", "solve",
    "GaugeSpec", "ModelDescriptor", "analysis_l1", "bregman_prox",
    "euclidean_prox", "gauge_value", "group_lasso", "haar_frame", "lasso",
    "model_descriptor", "tv_1d",
    "dist_to_signclass", "forward_intensity", "make_ensemble",
    "make_observation", "sample_gaussian_map",
    "gaussian_width_mc", "min_norm_certificate", "oracle_exact_solve",
    "restricted_injectivity", "sample_bound", "smin_mc", "width_upper_bound",
]
