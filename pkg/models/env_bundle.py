#!/usr/bin/python3
"""
Contains class EnvBundle
"""

import logging

import numpy as np

from models.base_model import BaseModel, time
from models.mdp import (FeatureMap, FiniteMdp, Policy, gen_baird,
                        gen_random_chain, gen_random_mdp, gen_random_walk_100,
                        importance_ratios, policy_matrices, policy_values)

logger = logging.getLogger(__name__)

_mdp_keys = ("transitions", "rewards", "gamma", "absorbing")


class EnvBundle(BaseModel):
    """An MDP together with its policies, features and start distribution"""

    def __init__(self, *args, mdp=None, behavior=None, target=None,
                 features=None, start=None, theta0=None, horizon=None,
                 name="custom", **kwargs):
        """builds a bundle from model objects or from their plain form"""
        if mdp is None:
            missing = [key for key in _mdp_keys[:3] if key not in kwargs]
            if missing:
                raise ValueError("environment is missing: {}".format(
                    ", ".join(missing)))
            mdp = FiniteMdp(kwargs.pop("transitions"), kwargs.pop("rewards"),
                            kwargs.pop("gamma"),
                            tuple(kwargs.pop("absorbing", ())))
        if behavior is None:
            raise ValueError("environment is missing: behavior")
        if not isinstance(behavior, Policy):
            behavior = Policy(behavior)
        if target is not None and not isinstance(target, Policy):
            target = Policy(target)
        if features is None or (isinstance(features, str) and
                                features == "tabular"):
            features = FeatureMap.tabular(mdp.n_states)
        elif not isinstance(features, FeatureMap):
            features = FeatureMap(features, require_full_rank=False)
            if not features.full_rank:
                logger.warning("features have rank %d < d = %d",
                               features.rank, features.dim)
        self.name = name
        self.mdp = mdp
        self.behavior = behavior
        self.target = target
        self.features = features
        self.start = self._distribution(start, mdp.n_states)
        self.theta0 = None if theta0 is None else \
            np.array(theta0, dtype=float)
        self.horizon = None if horizon is None else int(horizon)
        self._validate()
        super().__init__(*args, **kwargs)

    @staticmethod
    def _distribution(start, n):
        """validates the start distribution (uniform when omitted)"""
        if start is None:
            return np.full(n, 1.0 / n)
        start = np.array(start, dtype=float)
        if start.shape != (n,) or np.any(start < 0) or \
                abs(start.sum() - 1.0) > 1e-12:
            raise ValueError("start must be a distribution over {} states"
                             .format(n))
        return start

    def _validate(self):
        """checks that the parts describe the same state and action sets"""
        n, actions = self.mdp.n_states, self.mdp.n_actions
        for what, policy in (("behavior", self.behavior),
                             ("target", self.target)):
            if policy is not None and policy.probs.shape != (n, actions):
                raise ValueError("{} policy has shape {}, expected {}".format(
                    what, policy.probs.shape, (n, actions)))
        if self.features.phi.shape[0] != n:
            raise ValueError("features have {} rows for {} states".format(
                self.features.phi.shape[0], n))
        if self.theta0 is not None and self.theta0.shape != \
                (self.features.dim,):
            raise ValueError("theta0 must have length {}".format(
                self.features.dim))
        if self.target is not None:
            importance_ratios(self.behavior, self.target)
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive")

    @property
    def on_policy(self):
        """True when there is no separate target policy"""
        return self.target is None

    @property
    def evaluation_policy(self):
        """the policy whose value function is estimated"""
        return self.behavior if self.target is None else self.target

    @property
    def gamma(self):
        """discount of the underlying MDP"""
        return self.mdp.gamma

    @property
    def dim(self):
        """feature dimension"""
        return self.features.dim

    def ratios(self):
        """ρ(s, a) table; all ones on-policy"""
        if self.target is None:
            return np.ones_like(self.behavior.probs)
        return importance_ratios(self.behavior, self.target)

    def initial_theta(self):
        """θ0 for a run: the stored one or zeros"""
        if self.theta0 is None:
            return np.zeros(self.dim)
        return self.theta0.copy()

    def policy_for(self, mode):
        """behavior policy for "on" mode, evaluation policy for "off" mode"""
        if mode not in ("on", "off"):
            raise ValueError("mode must be 'on' or 'off'")
        if mode == "off" and self.target is None:
            raise ValueError("{} has no target policy".format(self.name))
        return self.behavior if mode == "on" else self.target

    def continuing_matrix(self, policy):
        """P under policy with absorbing rows sent back to the start"""
        return policy_matrices(self.mdp, policy, self.start)[0]

    def terminating_matrix(self, policy):
        """P under policy with absorbing rows zeroed"""
        return policy_matrices(self.mdp, policy, self.start)[1]

    def true_values(self, mode=None):
        """V of the evaluated policy; absorbing states are worth 0"""
        policy = self.evaluation_policy if mode is None else \
            self.policy_for(mode)
        _, Pterm, rbar = policy_matrices(self.mdp, policy, self.start)
        return policy_values(Pterm, rbar, self.gamma)

    def to_dict(self):
        """plain form written by FileStorage"""
        phi = self.features.phi
        tabular = phi.shape[0] == phi.shape[1] and \
            np.array_equal(phi, np.eye(phi.shape[0]))
        new_dict = {
            "__class__": self.__class__.__name__,
            "id": self.id,
            "created_at": self.created_at.strftime(time),
            "updated_at": self.updated_at.strftime(time),
            "name": self.name,
            "transitions": self.mdp.transitions.tolist(),
            "rewards": self.mdp.rewards.tolist(),
            "gamma": self.mdp.gamma,
            "absorbing": list(self.mdp.absorbing),
            "behavior": self.behavior.probs.tolist(),
            "target": None if self.target is None else
            self.target.probs.tolist(),
            "features": "tabular" if tabular else phi.tolist(),
            "start": self.start.tolist(),
            "theta0": None if self.theta0 is None else self.theta0.tolist(),
            "horizon": self.horizon,
        }
        return new_dict


def bundle_random_walk_100(seed=0):
    """the 100-state random walk, truncated at 100-step episodes"""
    mdp, policy, features, start = gen_random_walk_100(seed)
    return EnvBundle(mdp=mdp, behavior=policy, features=features,
                     start=start, horizon=100, name="random_walk_100")


def bundle_random_chain(seed=0):
    """the episodic random chain with its off-policy pair"""
    mdp, behavior, target, features, start = gen_random_chain()
    return EnvBundle(mdp=mdp, behavior=behavior, target=target,
                     features=features, start=start, name="random_chain")


def bundle_baird(seed=0):
    """Baird's counterexample with its standard θ0"""
    mdp, behavior, target, features, start, theta0 = gen_baird()
    return EnvBundle(mdp=mdp, behavior=behavior, target=target,
                     features=features, start=start, theta0=theta0,
                     name="baird")


def bundle_random_mdp(seed=0):
    """a 5-state, 2-action random MDP with 3 random features"""
    mdp, policy, features, start = gen_random_mdp(5, 2, 3, seed)
    return EnvBundle(mdp=mdp, behavior=policy, features=features,
                     start=start, name="random_mdp")


generators = {
    "random_walk_100": bundle_random_walk_100,
    "random_chain": bundle_random_chain,
    "baird": bundle_baird,
    "random_mdp": bundle_random_mdp,
}


def load_env(name_or_path, seed=0):
    """
    Resolve an environment by generator name or from a saved file.

    Args:
        name_or_path (str): a key of `generators` or a FileStorage path.
        seed (int): seed for the randomly generated environments.

    Returns:
        EnvBundle: the first bundle stored in the file, or a new one.

    Raises:
        ValueError: for unknown names and files holding no environment.
    """
    if name_or_path in generators:
        return generators[name_or_path](seed)
    from models.engine.file_storage import FileStorage
    storage = FileStorage(name_or_path)
    storage.reload(strict=True)
    bundle = storage.first(EnvBundle)
    if bundle is None:
        raise ValueError("no environment found in {}".format(name_or_path))
    return bundle
