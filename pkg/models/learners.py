#!/usr/bin/python3
"""
Incremental λ-schedule learners.

The trace z_t cannot be written recursively in terms of z_{t-1} for an
arbitrary schedule, so it is rebuilt each step from a buffer holding the
last L + 1 feature vectors (and importance ratios off-policy).

Four learners share one driver loop:

  td_schedule            θ += α δ z
  offpolicy_td_schedule  θ += α δ z with the ρ-weighted trace
  gtd_schedule           θ += α (φ − γφ')(zᵀw);  w += β(δz − φφᵀw)
  tdc_schedule           θ += α δ z − α((γφ' − φ)(zᵀw) + φφᵀw);  w as above

Gradient learners update θ and w from the same pre-update values.
"""

from collections import deque, namedtuple
from dataclasses import dataclass, replace
import logging
import re

import numpy as np

from models.mdp import sample_state, sample_step
from models.returns import td_error
from models.run_result import RunResult, RunSeries

logger = logging.getLogger(__name__)

Transition = namedtuple("Transition", ["phi", "phi_next", "reward"])
LearnerKind = namedtuple("LearnerKind", ["step", "off_policy", "gradient"])

_STEPSIZE = re.compile(r"^\s*([a-z]+)\s*\((.*)\)\s*$")
_SAMPLE_STEPS = (0, 10, 1000, 1000000)


class TraceBuffer:
    """Ring of the last L + 1 feature vectors and importance ratios"""

    def __init__(self, truncation, off_policy=False):
        """creates an empty buffer for a schedule truncated at L"""
        if truncation < 1:
            raise ValueError("truncation must be at least 1")
        self.capacity = truncation + 1
        self.off_policy = off_policy
        self.features = deque(maxlen=self.capacity)
        self.rhos = deque(maxlen=self.capacity)

    def __len__(self):
        """fill count"""
        return len(self.features)

    def push(self, phi, rho=None):
        """appends φ(s_t) (and ρ_t), evicting the oldest entry when full"""
        if self.off_policy:
            if rho is None:
                raise ValueError("off-policy buffer needs an importance ratio")
            self.rhos.append(float(rho))
        self.features.append(np.asarray(phi, dtype=float))

    def clear(self):
        """drops everything at an episode boundary"""
        self.features.clear()
        self.rhos.clear()


def compute_trace(buffer, schedule, gamma, mode="on"):
    """
    Rebuild z_t from the buffer.

    On-policy z_t = Σ_k c_k φ(s_{t-k}) with c_k = Π_{j<=k} γλ_j.
    Off-policy each term also carries ρ_t ρ_{t-1} .. ρ_{t-k}.

    Raises:
        ValueError: on an empty buffer, or when off-policy mode meets a
        buffer without ratios.
    """
    if len(buffer) == 0:
        raise ValueError("cannot build a trace from an empty buffer")
    if mode not in ("on", "off"):
        raise ValueError("mode must be 'on' or 'off'")
    fill = len(buffer)
    coeffs = schedule.coefficients(gamma)[:fill]
    if mode == "off":
        if not buffer.off_policy or len(buffer.rhos) != fill:
            raise ValueError("off-policy trace needs importance ratios")
        coeffs = coeffs * np.cumprod(np.array(buffer.rhos)[::-1])
    z = np.zeros_like(buffer.features[-1])
    for k, coef in enumerate(coeffs):
        if coef == 0.0:
            continue
        z += coef * buffer.features[fill - 1 - k]
    return z


@dataclass(frozen=True)
class StepSizeSchedule:
    """α_t as a function of the step t: const, harmonic or power"""
    kind: str
    params: tuple

    def __post_init__(self):
        """checks that the schedule stays positive"""
        arity = {"const": 1, "harmonic": 2, "power": 3}
        if self.kind not in arity:
            raise ValueError("unknown step-size kind: {}".format(self.kind))
        if len(self.params) != arity[self.kind]:
            raise ValueError("{} takes {} parameter(s)".format(
                self.kind, arity[self.kind]))
        if self.params[0] <= 0:
            raise ValueError("step sizes must be positive")
        if self.kind != "const" and self.params[1] <= 0:
            raise ValueError("harmonic offset must be positive")
        if self.kind == "power" and not 0 < self.params[2] <= 1:
            raise ValueError("power exponent must lie in (0, 1]")

    def __call__(self, t):
        """the step size at step t"""
        if self.kind == "const":
            return self.params[0]
        a, b = self.params[0], self.params[1]
        if self.kind == "harmonic":
            return a / (t + b)
        return a / (t + b) ** self.params[2]

    @property
    def constant(self):
        """True for const schedules"""
        return self.kind == "const"

    def __str__(self):
        """config form"""
        return "{}({})".format(self.kind, ",".join(repr(p)
                                                   for p in self.params))


def parse_stepsize(spec):
    """reads `0.01`, `const(0.01)`, `harmonic(a,b)` or `power(a,b,kappa)`"""
    if isinstance(spec, StepSizeSchedule):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return StepSizeSchedule("const", (float(spec),))
    match = _STEPSIZE.match(str(spec))
    try:
        if match is None:
            return StepSizeSchedule("const", (float(spec),))
        params = tuple(float(p) for p in match.group(2).split(",")
                       if p.strip())
    except ValueError:
        raise ValueError("bad step-size spec: {!r}".format(spec))
    return StepSizeSchedule(match.group(1), params)


@dataclass(frozen=True)
class StepSizes:
    """α_t, and β_t for the gradient learners (given or as η α_t)"""
    alpha: StepSizeSchedule
    beta: StepSizeSchedule = None
    eta: float = None

    def __post_init__(self):
        """parses string forms"""
        if self.beta is not None and self.eta is not None:
            raise ValueError("give beta or eta, not both")
        object.__setattr__(self, "alpha", parse_stepsize(self.alpha))
        if self.beta is not None:
            object.__setattr__(self, "beta", parse_stepsize(self.beta))
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")

    def beta_at(self, t):
        """β_t, or None when no fast schedule is configured"""
        if self.beta is not None:
            return self.beta(t)
        if self.eta is not None:
            return self.eta * self.alpha(t)
        return None

    def validate_for(self, kind):
        """
        Check the step-size assumptions a learner kind relies on.

        GTD needs β_t/α_t = η fixed. TDC needs α_t/β_t → 0; two constants
        are accepted for experiments and logged.
        """
        if kind not in kinds:
            raise ValueError("unknown learner: {}".format(kind))
        if not kinds[kind].gradient:
            return
        if self.beta_at(0) is None:
            raise ValueError("{} needs beta or eta".format(kind))
        ratios = [self.beta_at(t) / self.alpha(t) for t in _SAMPLE_STEPS]
        if kind == "gtd_schedule":
            if max(ratios) - min(ratios) > 1e-9 * max(ratios):
                raise ValueError("gtd_schedule needs beta/alpha constant")
            return
        beta_const = self.beta is None or self.beta.constant
        if self.alpha.constant and beta_const:
            logger.info("tdc_schedule with constant step sizes: alpha/beta "
                        "does not vanish")
            return
        if not ratios[-1] > ratios[0]:
            raise ValueError("tdc_schedule needs alpha_t/beta_t -> 0")


@dataclass(frozen=True, eq=False)
class LearnerState:
    """θ, the auxiliary w, the step counter and the step sizes"""
    theta: np.ndarray
    w: np.ndarray
    t: int
    stepsizes: StepSizes

    def __post_init__(self):
        """checks dimensions"""
        if self.w is not None and np.shape(self.w) != np.shape(self.theta):
            raise ValueError("w and theta dimensions differ")
        if self.t < 0:
            raise ValueError("step counter must be nonnegative")


def _check_rho(buffer, rho_t):
    """the newest buffered ratio must be the one passed in"""
    if not buffer.off_policy or not buffer.rhos:
        raise ValueError("buffer carries no importance ratios")
    if buffer.rhos[-1] != rho_t:
        raise ValueError("rho_t does not match the buffered ratio")


def td_schedule_step(state, buffer, transition, schedule, gamma):
    """θ ← θ + α_t δ_t z_t with the on-policy trace"""
    z = compute_trace(buffer, schedule, gamma, "on")
    delta = td_error(state.theta, transition.phi, transition.phi_next,
                     transition.reward, gamma)
    alpha = state.stepsizes.alpha(state.t)
    return replace(state, theta=state.theta + alpha * delta * z,
                   t=state.t + 1)


def off_policy_td_step(state, buffer, transition, rho_t, schedule, gamma):
    """θ ← θ + α_t δ_t z_t with the ρ-weighted trace"""
    _check_rho(buffer, rho_t)
    z = compute_trace(buffer, schedule, gamma, "off")
    delta = td_error(state.theta, transition.phi, transition.phi_next,
                     transition.reward, gamma)
    alpha = state.stepsizes.alpha(state.t)
    return replace(state, theta=state.theta + alpha * delta * z,
                   t=state.t + 1)


def _gradient_terms(state, buffer, transition, rho_t, schedule, gamma):
    """shared pieces of the GTD and TDC updates"""
    if buffer.off_policy:
        _check_rho(buffer, rho_t)
        z = compute_trace(buffer, schedule, gamma, "off")
    else:
        z = compute_trace(buffer, schedule, gamma, "on")
    delta = td_error(state.theta, transition.phi, transition.phi_next,
                     transition.reward, gamma)
    alpha = state.stepsizes.alpha(state.t)
    beta = state.stepsizes.beta_at(state.t)
    if beta is None:
        raise ValueError("gradient learners need beta or eta")
    phi = np.asarray(transition.phi, dtype=float)
    phi_w = phi @ state.w
    w_new = state.w + beta * (delta * z - phi * phi_w)
    return z, delta, alpha, phi, phi_w, w_new


def gtd_step(state, buffer, transition, rho_t, schedule, gamma):
    """θ ← θ + α(φ − γφ')(zᵀw); w ← w + β(δz − φφᵀw)"""
    z, _, alpha, phi, _, w_new = _gradient_terms(
        state, buffer, transition, rho_t, schedule, gamma)
    phi_next = np.asarray(transition.phi_next, dtype=float)
    theta = state.theta + alpha * (phi - gamma * phi_next) * (z @ state.w)
    return replace(state, theta=theta, w=w_new, t=state.t + 1)


def tdc_step(state, buffer, transition, rho_t, schedule, gamma):
    """θ ← θ + αδz − α((γφ' − φ)(zᵀw) + φφᵀw); w as in GTD"""
    z, delta, alpha, phi, phi_w, w_new = _gradient_terms(
        state, buffer, transition, rho_t, schedule, gamma)
    phi_next = np.asarray(transition.phi_next, dtype=float)
    correction = (gamma * phi_next - phi) * (z @ state.w) + phi * phi_w
    theta = state.theta + alpha * delta * z - alpha * correction
    return replace(state, theta=theta, w=w_new, t=state.t + 1)


def _on_policy_step(state, buffer, transition, rho_t, schedule, gamma):
    """adapts td_schedule_step to the common step signature"""
    return td_schedule_step(state, buffer, transition, schedule, gamma)


kinds = {
    "td_schedule": LearnerKind(_on_policy_step, False, False),
    "offpolicy_td_schedule": LearnerKind(off_policy_td_step, True, False),
    "gtd_schedule": LearnerKind(gtd_step, True, True),
    "tdc_schedule": LearnerKind(tdc_step, True, True),
}


def _evaluate(hooks, theta):
    """metric values for one θ snapshot"""
    with np.errstate(all="ignore"):
        return {name: float(hook(theta)) for name, hook in hooks.items()}


def run(kind, bundle, schedule, stepsizes, steps, seed, eval_hooks=None,
        eval_every=50, theta0=None, divergence_threshold=1e8, run_index=0):
    """
    Drive one learner over a sampled behavior-policy stream.

    The buffer is cleared at absorption and at the episode horizon, after
    which the next episode starts from the bundle's start distribution.
    θ and the hook metrics are recorded at step 0 and every `eval_every`
    steps. A non-finite θ, or one with norm above `divergence_threshold`,
    ends the run with the series flagged as diverged.

    Args:
        kind (str): a key of `kinds`.
        bundle (EnvBundle): environment, policies and features.
        schedule (LambdaSchedule): the λ-schedule.
        stepsizes (StepSizes): α (and β / η for the gradient learners).
        steps (int): number of transitions to learn from.
        seed (int): seed of the run's random stream.
        eval_hooks (dict): metric name -> callable(theta) -> float.
        eval_every (int): recording cadence.
        theta0 (ndarray): initial θ, defaults to the bundle's.

    Returns:
        RunResult: a result holding this single run.
    """
    if kind not in kinds:
        raise ValueError("unknown learner: {}".format(kind))
    learner = kinds[kind]
    if learner.off_policy and bundle.target is None:
        raise ValueError("{} needs a target policy; {} has none".format(
            kind, bundle.name))
    if steps < 0 or eval_every < 1:
        raise ValueError("steps must be >= 0 and eval_every >= 1")
    stepsizes.validate_for(kind)
    if eval_hooks is None:
        eval_hooks = {"theta_norm": np.linalg.norm}
    mdp, phi = bundle.mdp, bundle.features.phi
    theta = bundle.initial_theta() if theta0 is None else \
        np.array(theta0, dtype=float)
    if theta.shape != (bundle.dim,):
        raise ValueError("theta0 must have length {}".format(bundle.dim))
    ratios = bundle.ratios() if learner.off_policy else None
    rng = np.random.default_rng(seed)
    buffer = TraceBuffer(schedule.truncation, learner.off_policy)
    state = LearnerState(theta, np.zeros_like(theta), 0, stepsizes)
    series = RunSeries(run=run_index, seed=seed, metrics=tuple(eval_hooks))
    series.record(0, state.theta, _evaluate(eval_hooks, state.theta))
    s = sample_state(bundle.start, rng)
    episode_t = 0
    for step in range(1, steps + 1):
        action, s_next, reward = sample_step(mdp, bundle.behavior, s, rng)
        absorbed = mdp.is_absorbing(s_next)
        phi_next = np.zeros(bundle.dim) if absorbed else phi[s_next]
        rho = None if ratios is None else ratios[s, action]
        buffer.push(phi[s], rho)
        state = learner.step(state, buffer,
                             Transition(phi[s], phi_next, reward), rho,
                             schedule, bundle.gamma)
        norm = np.linalg.norm(state.theta)
        if not np.isfinite(norm) or norm > divergence_threshold:
            logger.info("run %d diverged at step %d", run_index, step)
            series.record(step, state.theta,
                          _evaluate(eval_hooks, state.theta))
            series.diverged = True
            break
        s = s_next
        episode_t += 1
        if absorbed or (bundle.horizon and episode_t >= bundle.horizon):
            buffer.clear()
            s = sample_state(bundle.start, rng)
            episode_t = 0
        if step % eval_every == 0:
            series.record(step, state.theta,
                          _evaluate(eval_hooks, state.theta))
    return RunResult(metrics=tuple(eval_hooks), series=[series])
