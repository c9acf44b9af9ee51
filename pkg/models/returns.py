#!/usr/bin/python3
"""
Forward-view λ-schedule returns and TD errors.

These are the exact oracles the incremental learners are checked against:
the recursive λ-schedule return, its telescoped sum of TD errors, the
importance-weighted off-policy version and the Λ-weighted mixture of
n-step returns. A terminated trajectory has zero features on its final
state, so every value past termination is 0.
"""

from dataclasses import dataclass
import logging

import numpy as np

from models.mdp import sample_state, sample_step
from models.schedule import weight_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """k transitions: k+1 states and features, k actions, rewards, ratios"""
    states: tuple
    actions: tuple
    rewards: np.ndarray
    features: np.ndarray
    rhos: np.ndarray = None
    terminated: bool = False

    def __post_init__(self):
        """checks lengths and ratios; zeroes the terminal features"""
        rewards = np.array(self.rewards, dtype=float)
        features = np.array(self.features, dtype=float)
        k = len(rewards)
        if len(self.states) != k + 1 or len(self.actions) != k:
            raise ValueError("a trajectory of {} transitions needs {} states "
                             "and {} actions".format(k, k + 1, k))
        if features.ndim != 2 or features.shape[0] != k + 1:
            raise ValueError("features must have one row per state")
        if self.terminated:
            features[-1] = 0.0
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "features", features)
        if self.rhos is not None:
            rhos = np.array(self.rhos, dtype=float)
            if rhos.shape != (k,):
                raise ValueError("one importance ratio per transition")
            if np.any(rhos < 0) or not np.all(np.isfinite(rhos)):
                raise ValueError("importance ratios must be finite and >= 0")
            object.__setattr__(self, "rhos", rhos)

    @classmethod
    def from_rollout(cls, states, actions, rewards, feature_map,
                     terminated=False, ratios=None):
        """builds a trajectory, looking up φ(s) and ρ(s, a) tables"""
        features = feature_map.phi[list(states)]
        rhos = None
        if ratios is not None:
            rhos = [ratios[s, a] for s, a in zip(states, actions)]
        return cls(states, actions, rewards, features, rhos, terminated)

    @property
    def length(self):
        """number of transitions"""
        return len(self.rewards)

    def value(self, theta, i):
        """θᵀφ(s_i)"""
        return float(self.features[i] @ theta)


def rollout(bundle, length, rng, state=None):
    """
    Sample up to `length` behavior-policy transitions.

    Sampling stops early when an absorbing state is reached. The ratios
    are attached when the bundle has a target policy.
    """
    mdp = bundle.mdp
    if state is None:
        state = sample_state(bundle.start, rng)
    states, actions, rewards = [state], [], []
    for _ in range(length):
        action, state, reward = sample_step(mdp, bundle.behavior, state, rng)
        states.append(state)
        actions.append(action)
        rewards.append(reward)
        if mdp.is_absorbing(state):
            break
    ratios = None if bundle.on_policy else bundle.ratios()
    return Trajectory.from_rollout(states, actions, rewards, bundle.features,
                                   mdp.is_absorbing(states[-1]), ratios)


def td_error(theta, phi_t, phi_next, reward, gamma):
    """δ = R + γ θᵀφ_next − θᵀφ_t"""
    theta = np.asarray(theta, dtype=float)
    if np.shape(phi_t) != theta.shape or np.shape(phi_next) != theta.shape:
        raise ValueError("feature and parameter dimensions disagree")
    return float(reward + gamma * (phi_next @ theta) - phi_t @ theta)


def _window(traj, t, schedule):
    """index of the last transition the return at t depends on"""
    if not 0 <= t < traj.length:
        raise ValueError("t = {} is outside the trajectory".format(t))
    available = traj.length - t
    needed = schedule.truncation + 1
    if available < needed and not traj.terminated:
        raise ValueError("trajectory needs {} transitions past t = {}, has "
                         "{}".format(needed, t, available))
    return t + min(needed, available) - 1


def _deltas(traj, theta, gamma, start, stop):
    """TD errors δ_start..δ_stop"""
    phi = traj.features
    values = phi[start:stop + 2] @ theta
    return traj.rewards[start:stop + 1] + gamma * values[1:] - values[:-1]


def lambda_schedule_return(traj, t, theta, schedule, gamma):
    """
    G_t by the backward recursion
    G_i = R_{i+1} + γ[(1 − λ_j) V(s_{i+1}) + λ_j G_{i+1}], j = i − t + 1.

    The recursion stops at λ_{L+1} = 0 or at termination.
    """
    theta = np.asarray(theta, dtype=float)
    last = _window(traj, t, schedule)
    tail = 0.0
    for i in range(last, t - 1, -1):
        lam = float(schedule.lam(i - t + 1))
        tail = traj.rewards[i] + gamma * (
            (1.0 - lam) * traj.value(theta, i + 1) + lam * tail)
    return float(tail)


def telescoped_return_gap(traj, t, theta, schedule, gamma):
    """Σ_k (Π_{j<=k} γλ_j) δ_{t+k}"""
    theta = np.asarray(theta, dtype=float)
    last = _window(traj, t, schedule)
    coeffs = schedule.coefficients(gamma)[:last - t + 1]
    return float(coeffs @ _deltas(traj, theta, gamma, t, last))


def off_policy_return_gap(traj, t, theta, schedule, gamma):
    """Σ_k (Π_{j<=k} γλ_j)(ρ_t..ρ_{t+k}) δ_{t+k}"""
    if traj.rhos is None:
        raise ValueError("trajectory has no importance ratios")
    theta = np.asarray(theta, dtype=float)
    last = _window(traj, t, schedule)
    coeffs = schedule.coefficients(gamma)[:last - t + 1]
    weights = coeffs * np.cumprod(traj.rhos[t:last + 1])
    return float(weights @ _deltas(traj, theta, gamma, t, last))


def off_policy_lambda_return(traj, t, theta, schedule, gamma):
    """
    The importance-weighted λ-schedule return.

    G_i = ρ_i(R_{i+1} + γ[(1 − λ_j)V(s_{i+1}) + λ_j G_{i+1}])
          + (1 − ρ_i)V(s_i), so that G_t − V(s_t) is the off-policy gap.
    """
    if traj.rhos is None:
        raise ValueError("trajectory has no importance ratios")
    theta = np.asarray(theta, dtype=float)
    last = _window(traj, t, schedule)
    tail = 0.0
    for i in range(last, t - 1, -1):
        lam = float(schedule.lam(i - t + 1))
        rho = traj.rhos[i]
        target = traj.rewards[i] + gamma * (
            (1.0 - lam) * traj.value(theta, i + 1) + lam * tail)
        tail = rho * target + (1.0 - rho) * traj.value(theta, i)
    return float(tail)


def n_step_return(traj, t, theta, n, gamma):
    """R_{t+1} + ... + γ^{n-1}R_{t+n} + γ^n V(s_{t+n}), flat past the end"""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= t < traj.length:
        raise ValueError("t = {} is outside the trajectory".format(t))
    steps = min(n, traj.length - t)
    if steps < n and not traj.terminated:
        raise ValueError("trajectory too short for a {}-step return"
                         .format(n))
    discounts = gamma ** np.arange(steps)
    total = discounts @ traj.rewards[t:t + steps]
    return float(total + gamma ** steps * traj.value(np.asarray(theta),
                                                     t + steps))


def weighted_nstep_return(traj, t, theta, schedule, gamma):
    """
    The λ-schedule return as a Λ-weighted mixture of n-step returns.

    With m = min(L + 1, steps left) the weights are row m of the weight
    matrix; for an episode ending inside the window the m-step return is
    the flat return.
    """
    last = _window(traj, t, schedule)
    m = last - t + 1
    row = weight_matrix(schedule, m).row(m)
    return float(sum(float(w) * n_step_return(traj, t, theta, j, gamma)
                     for j, w in enumerate(row, start=1) if w != 0))
