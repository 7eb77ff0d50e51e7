"""Power allocation for cell-free massive MIMO with non-linear amplifiers."""

import json

import numpy as np

from . import _core
from ._core import CovarianceError, Problem

__all__ = [
    "CovarianceError",
    "Problem",
    "load_problem",
    "build_problem",
    "config_hash",
    "generate_scenario",
    "grid_search",
    "max_min",
    "single_link_closed_form",
    "solve",
    "sparsity",
    "sweep_runtime",
    "sweep_savings",
]


def _dump(d):
    return json.dumps(d or {})


def generate_scenario(config=None):
    return json.loads(_core.generate_scenario(_dump(config)))


def build_problem(config=None, se_targets=(), normalize_noise=True):
    """Draw a scenario, estimate its statistics and return (Problem, inputs dict)."""
    text = _core.build_problem_inputs(_dump(config), list(se_targets))
    return Problem(text, normalize_noise), json.loads(text)


def load_problem(inputs, normalize_noise=True):
    if not isinstance(inputs, str):
        inputs = json.dumps(inputs)
    return Problem(inputs, normalize_noise)


def solve(problem, options=None):
    """Run the penalty method. Returns (result dict, x as a numpy array)."""
    text, x = _core.solve(problem, _dump(options))
    return json.loads(text), np.asarray(x)


def max_min(problem, options=None, bisection_tol=0.01):
    return json.loads(_core.max_min(problem, _dump(options), bisection_tol))


def grid_search(problem, resolution, model="non-linear"):
    return json.loads(_core.grid_search(problem, resolution, model))


def single_link_closed_form(problem, model="non-linear"):
    return json.loads(_core.single_link_closed_form(problem, model))


def config_hash(kind, spec=None):
    return _core.config_hash(kind, _dump(spec))


def sweep_runtime(spec=None):
    return _core.sweep_runtime(_dump(spec))


def sweep_savings(spec=None):
    return _core.sweep_savings(_dump(spec))


def sparsity(spec=None):
    """Returns (per-AP CSV, per-seed count CSV)."""
    return _core.sparsity(_dump(spec))
