"""Numerical laboratory for collapsing model manifolds.

Thin python layer over the C++ core: model construction from JSON
descriptors, curvature/geodesic/volume diagnostics, and the experiment
drivers behind the collapse-lab CLI.
"""

import json as _json

from _collapselab import (  # noqa: F401
    LabError,
    Model,
    __version__,
    ball_volume,
    continued_fraction,
    curvature_derivative_norm,
    curvature_norm,
    decay_fit,
    exp_map,
    experiment_names,
    fiber_average_defect,
    flat_inj,
    geodesic_loops,
    holonomy_defect,
    log_map,
    loop_length,
    make_model,
    pigeonhole_k,
    pseudo_group_dump,
    ricci_norm,
    screw_apply,
    set_threads,
    taub_nut_profile_rows,
    volume_density,
)
from _collapselab import run_experiment as _run_experiment_raw


def model(descriptor):
    """Build a model from a dict or JSON string descriptor."""
    if isinstance(descriptor, str):
        return make_model(descriptor)
    return make_model(_json.dumps(descriptor))


def run_experiment(subcommand, config):
    """Run an experiment driver; config is a dict (seed mandatory)."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _json.loads(_run_experiment_raw(subcommand, config))
