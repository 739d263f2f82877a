"""Mean-field Langevin numerics: bounds, proximal Gibbs solver, samplers, transport maps."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_experiment as _run_experiment


def run(config, out):
    """Run an experiment from a config dict; returns (all_pass, manifest dict)."""
    ok, manifest = _run_experiment(_json.dumps(config), str(out))
    return ok, _json.loads(manifest)
