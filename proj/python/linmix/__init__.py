"""Python front end of the linmix workbench.

The compiled extension exchanges JSON text; these wrappers decode it.
"""

import json

from . import _linmix

prior_free_bound = _linmix.prior_free_bound
theorem1_bound = _linmix.theorem1_bound


def default_config():
    return json.loads(_linmix.default_config())


def make_env(states, actions, horizon, dim, seed):
    """Random simplex-mixture environment as a dict (environment file schema)."""
    return json.loads(_linmix.make_env(states, actions, horizon, dim, seed))


def check_assumption1(env):
    return json.loads(_linmix.check_assumption1(json.dumps(env)))


def plan(env):
    """Optimal policy, value table and optimal value of an environment dict."""
    return json.loads(_linmix.plan(json.dumps(env)))


def run(config):
    """Runs replications; returns (regret CSV text, summary dict)."""
    csv, meta = _linmix.run(json.dumps(config))
    return csv, json.loads(meta)


def verify(config=None):
    return json.loads(_linmix.verify(json.dumps(config or {})))


__all__ = [
    "check_assumption1",
    "default_config",
    "make_env",
    "plan",
    "prior_free_bound",
    "run",
    "theorem1_bound",
    "verify",
]
