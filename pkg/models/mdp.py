#!/usr/bin/python3
"""
Contains the finite MDP model classes, the exact chain quantities derived
from them (stationary distribution, true values) and the generators for the
benchmark environments: the 100-state random walk, the random chain and
Baird's counterexample.

Rewards follow the r(s, s') convention. Episodic environments keep their
absorbing states as zero-reward self-loops; analytic quantities use the
restart-augmented chain in which an absorbing state jumps back to the start
distribution.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10
RANK_TOL = 1e-10
RANDOM_WALK_EPSILON = 0.01


class ChainError(ValueError):
    """raised when a chain has no unique positive stationary distribution"""


def _frozen(array):
    """returns a read-only float copy of array"""
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _check_stochastic(matrix, what):
    """validates that the last axis of matrix holds distributions"""
    if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
        raise ValueError("{} has negative or non-finite entries".format(what))
    if np.any(np.abs(matrix.sum(axis=-1) - 1.0) > STOCHASTIC_TOL):
        raise ValueError("{} rows do not sum to 1".format(what))


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """Transition tensor P[a][s][s'], reward table r(s, s') and discount"""
    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float
    absorbing: tuple = ()

    def __post_init__(self):
        """validates and freezes the tables"""
        transitions = _frozen(self.transitions)
        rewards = _frozen(self.rewards)
        if transitions.ndim != 3 or transitions.shape[1] != \
                transitions.shape[2]:
            raise ValueError("transitions must have shape (A, n, n)")
        if rewards.shape != transitions.shape[1:]:
            raise ValueError("rewards must have shape (n, n)")
        if not np.all(np.isfinite(rewards)):
            raise ValueError("rewards must be finite")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        _check_stochastic(transitions, "transitions")
        absorbing = tuple(sorted(int(s) for s in self.absorbing))
        for s in absorbing:
            if not 0 <= s < transitions.shape[1]:
                raise ValueError("absorbing state {} out of range".format(s))
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "absorbing", absorbing)

    @property
    def n_states(self):
        """number of states"""
        return self.transitions.shape[1]

    @property
    def n_actions(self):
        """number of actions"""
        return self.transitions.shape[0]

    def is_absorbing(self, s):
        """True for terminal states"""
        return s in self.absorbing


@dataclass(frozen=True, eq=False)
class Policy:
    """Action probabilities π(a|s), one row per state"""
    probs: np.ndarray

    def __post_init__(self):
        """validates and freezes the table"""
        probs = _frozen(self.probs)
        if probs.ndim != 2:
            raise ValueError("policy must be a (n, A) matrix")
        _check_stochastic(probs, "policy")
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Feature matrix Φ (n x d); row s is φ(s)"""
    phi: np.ndarray
    require_full_rank: bool = True
    rank: int = field(init=False)

    def __post_init__(self):
        """checks the column rank with a rank-revealing SVD"""
        phi = _frozen(self.phi)
        if phi.ndim != 2:
            raise ValueError("features must be a (n, d) matrix")
        singular = np.linalg.svd(phi, compute_uv=False)
        cutoff = RANK_TOL * (singular[0] if singular.size else 0.0)
        rank = int(np.sum(singular > cutoff))
        if self.require_full_rank and rank < phi.shape[1]:
            raise ValueError("features have rank {} < d = {}".format(
                rank, phi.shape[1]))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "rank", rank)

    @classmethod
    def tabular(cls, n):
        """identity features"""
        return cls(np.eye(n))

    @property
    def dim(self):
        """feature dimension d"""
        return self.phi.shape[1]

    @property
    def full_rank(self):
        """True when Φ has full column rank"""
        return self.rank == self.dim

    def span_basis(self):
        """orthonormal basis (d x rank) of the row space of Φ"""
        _, _, vt = np.linalg.svd(self.phi)
        return vt[:self.rank].T

    def __call__(self, s):
        """φ(s)"""
        return self.phi[s]


@dataclass(frozen=True, eq=False)
class InducedChain:
    """Chain induced by a policy: Ppi, expected rewards and stationary d"""
    Ppi: np.ndarray
    rbar: np.ndarray
    d: np.ndarray
    Pterm: np.ndarray = None

    def __post_init__(self):
        """validates d against Ppi"""
        Ppi = _frozen(self.Ppi)
        d = _frozen(self.d)
        Pterm = Ppi if self.Pterm is None else _frozen(self.Pterm)
        if abs(d.sum() - 1.0) > STATIONARY_TOL or np.any(d <= 0):
            raise ChainError("stationary distribution must be positive")
        if np.max(np.abs(d @ Ppi - d)) > STATIONARY_TOL:
            raise ChainError("d is not stationary for Ppi")
        object.__setattr__(self, "Ppi", Ppi)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "rbar", _frozen(self.rbar))
        object.__setattr__(self, "Pterm", Pterm)

    @property
    def D(self):
        """diagonal matrix of d"""
        return np.diag(self.d)


def policy_matrices(mdp, policy, start=None):
    """
    Build the policy-induced matrices of an MDP.

    Args:
        mdp (FiniteMdp): the model.
        policy (Policy): action probabilities.
        start (ndarray): restart distribution used for absorbing states.

    Returns:
        tuple: (Pcont, Pterm, rbar). Pterm has the absorbing rows zeroed,
        Pcont sends absorbing states back to `start` (or keeps the
        self-loop when no start is given), rbar is the expected one-step
        reward under Pterm.
    """
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError("policy shape {} does not match the MDP".format(
            policy.probs.shape))
    Ppi = np.einsum("sa,ast->st", policy.probs, mdp.transitions)
    Pterm = Ppi.copy()
    Pcont = Ppi.copy()
    for s in mdp.absorbing:
        Pterm[s] = 0.0
        if start is not None:
            Pcont[s] = start
    rbar = (Pterm * mdp.rewards).sum(axis=1)
    return Pcont, Pterm, rbar


def stationary_distribution(P):
    """
    Solve d^T P = d^T with sum(d) = 1.

    A direct solve on (P^T - I) with one row swapped for the normalisation
    is used up to 1000 states, power iteration beyond. Reducible chains
    (singular system or zero mass) and periodic chains (more than one
    eigenvalue on the unit circle) raise ChainError.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if n > 1000:
        d = np.full(n, 1.0 / n)
        for _ in range(100000):
            nxt = d @ P
            if np.max(np.abs(nxt - d)) < STATIONARY_TOL * 1e-2:
                d = nxt
                break
            d = nxt
        else:
            raise ChainError("power iteration did not converge")
    else:
        system = P.T - np.eye(n)
        system[-1] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            d = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            raise ChainError("chain is reducible: no unique stationary "
                             "distribution")
        moduli = np.abs(np.linalg.eigvals(P))
        if np.sum(moduli > 1.0 - 1e-9) > 1:
            raise ChainError("chain is reducible or periodic")
    if np.any(d <= STATIONARY_TOL * 1e-3) or \
            np.max(np.abs(d @ P - d)) > STATIONARY_TOL:
        raise ChainError("chain has no positive stationary distribution")
    return d / d.sum()


def induced_chain(mdp, policy, start=None):
    """the policy-induced chain with its stationary distribution"""
    Pcont, Pterm, rbar = policy_matrices(mdp, policy, start)
    if mdp.absorbing and start is None:
        raise ChainError("episodic MDP needs a restart distribution")
    d = stationary_distribution(Pcont)
    return InducedChain(Ppi=Pcont, rbar=rbar, d=d, Pterm=Pterm)


def policy_values(Pterm, rbar, gamma):
    """solves V = rbar + γ Pterm V"""
    n = len(rbar)
    return np.linalg.solve(np.eye(n) - gamma * np.asarray(Pterm), rbar)


def true_values(chain, gamma):
    """V^π = (I - γ Ppi)^-1 rbar, with absorbing states worth 0"""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return policy_values(chain.Pterm, chain.rbar, gamma)


def importance_ratios(behavior, target):
    """
    Table ρ(s, a) = π(a|s) / μ(a|s).

    Raises ValueError when π puts mass on an action μ never takes.
    """
    mu, pi = behavior.probs, target.probs
    if mu.shape != pi.shape:
        raise ValueError("behavior and target policies differ in shape")
    if np.any((mu == 0) & (pi > 0)):
        raise ValueError("target policy is not covered by the behavior "
                         "policy")
    ratios = np.zeros_like(pi)
    covered = mu > 0
    ratios[covered] = pi[covered] / mu[covered]
    return ratios


def _draw(cdf, rng):
    """index drawn from a cumulative distribution row"""
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def sample_state(distribution, rng):
    """draws a state from a distribution vector"""
    return _draw(np.cumsum(distribution), rng)


def sample_step(mdp, policy, s, rng):
    """draws (action, next state, reward) from state s"""
    if mdp.is_absorbing(s):
        raise ValueError("cannot step from absorbing state {}".format(s))
    action = _draw(np.cumsum(policy.probs[s]), rng)
    nxt = _draw(np.cumsum(mdp.transitions[action, s]), rng)
    return action, nxt, float(mdp.rewards[s, nxt])


def _normalized(array):
    """normalizes the last axis to sum to one"""
    return array / array.sum(axis=-1, keepdims=True)


def gen_random_walk_100(seed):
    """
    The randomly generated 100-state, 5-action MDP.

    Transition rows, the policy and the start distribution are uniform[0,1]
    draws plus RANDOM_WALK_EPSILON, normalized; rewards are uniform[0,1];
    γ = 0.95 and features are tabular.

    Returns:
        tuple: (FiniteMdp, Policy, FeatureMap, start distribution).
    """
    rng = np.random.default_rng(seed)
    n, actions = 100, 5
    transitions = _normalized(rng.uniform(0.0, 1.0, (actions, n, n)) +
                              RANDOM_WALK_EPSILON)
    rewards = rng.uniform(0.0, 1.0, (n, n))
    policy = _normalized(rng.uniform(0.0, 1.0, (n, actions)) +
                         RANDOM_WALK_EPSILON)
    start = _normalized(rng.uniform(0.0, 1.0, n) + RANDOM_WALK_EPSILON)
    logger.debug("generated random walk with seed %s", seed)
    mdp = FiniteMdp(transitions, rewards, gamma=0.95)
    return mdp, Policy(policy), FeatureMap.tabular(n), start


def gen_random_chain():
    """
    The 15-state random chain with absorbing ends (states 0 and 16).

    Action L (0) moves left w.p. 0.9 and right w.p. 0.1, action R (1) the
    opposite. Entering interior states 5 or 10 pays 1 from either side.
    μ picks L/R w.p. 0.5/0.5, π w.p. 0.6/0.4, γ = 0.9. Features are
    tabular on the interior and zero on the absorbing states.

    Returns:
        tuple: (FiniteMdp, behavior, target, FeatureMap, start).
    """
    n = 17
    left, right = 0, n - 1
    transitions = np.zeros((2, n, n))
    rewards = np.zeros((n, n))
    for s in range(1, n - 1):
        transitions[0, s, s - 1] = 0.9
        transitions[0, s, s + 1] = 0.1
        transitions[1, s, s - 1] = 0.1
        transitions[1, s, s + 1] = 0.9
    for s in (left, right):
        transitions[:, s, s] = 1.0
    for goal in (5, 10):
        rewards[goal - 1, goal] = 1.0
        rewards[goal + 1, goal] = 1.0
    behavior = np.tile([0.5, 0.5], (n, 1))
    target = np.tile([0.6, 0.4], (n, 1))
    phi = np.zeros((n, n - 2))
    phi[1:n - 1] = np.eye(n - 2)
    start = np.zeros(n)
    start[1:n - 1] = 1.0 / (n - 2)
    mdp = FiniteMdp(transitions, rewards, gamma=0.9,
                    absorbing=(left, right))
    return mdp, Policy(behavior), Policy(target), FeatureMap(phi), start


def gen_baird():
    """
    Baird's seven-state star counterexample.

    Action 0 (dashed) goes uniformly to states 0..5, action 1 (solid) to
    state 6. μ takes dashed w.p. 6/7, π always takes solid. Rewards are
    zero and γ = 0.99. φ(i) = 2e_i + e_7 for i < 6 and φ(6) = e_6 + 2e_7,
    a rank-7 map into R^8. θ0 is all ones except θ0[6] = 10.

    Returns:
        tuple: (FiniteMdp, behavior, target, FeatureMap, start, theta0).
    """
    n, d = 7, 8
    transitions = np.zeros((2, n, n))
    transitions[0, :, :6] = 1.0 / 6.0
    transitions[1, :, 6] = 1.0
    rewards = np.zeros((n, n))
    behavior = np.tile([6.0 / 7.0, 1.0 / 7.0], (n, 1))
    target = np.tile([0.0, 1.0], (n, 1))
    phi = np.zeros((n, d))
    for i in range(6):
        phi[i, i] = 2.0
        phi[i, 7] = 1.0
    phi[6, 6] = 1.0
    phi[6, 7] = 2.0
    theta0 = np.ones(d)
    theta0[6] = 10.0
    start = np.full(n, 1.0 / n)
    mdp = FiniteMdp(transitions, rewards, gamma=0.99)
    features = FeatureMap(phi, require_full_rank=False)
    return mdp, Policy(behavior), Policy(target), features, start, theta0


def gen_random_mdp(n, actions, d, seed, gamma=0.9):
    """
    A small random ergodic MDP with random full-rank features.

    Returns:
        tuple: (FiniteMdp, Policy, FeatureMap, start).
    """
    if d > n:
        raise ValueError("feature dimension cannot exceed the state count")
    rng = np.random.default_rng(seed)
    transitions = _normalized(rng.uniform(0.0, 1.0, (actions, n, n)) +
                              RANDOM_WALK_EPSILON)
    rewards = rng.uniform(-1.0, 1.0, (n, n))
    policy = _normalized(rng.uniform(0.0, 1.0, (n, actions)) +
                         RANDOM_WALK_EPSILON)
    while True:
        phi = rng.normal(size=(n, d))
        if np.linalg.matrix_rank(phi) == d:
            break
    start = np.full(n, 1.0 / n)
    mdp = FiniteMdp(transitions, rewards, gamma=gamma)
    return mdp, Policy(policy), FeatureMap(phi), start
