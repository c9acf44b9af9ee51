#!/usr/bin/python3
"""
Exact fixed-point analysis of the λ-schedule learners.

For a behavior distribution d and the evaluated policy's matrix P (rows of
absorbing states zeroed), with c_k = Π_{j<=k} γλ_j:

    M = Σ_{k=0}^{L} γ c_k (1 − λ_{k+1}) P^{k+1}
    A = ΦᵀD(M − I)Φ,   b = ΦᵀD Σ_k c_k P^k r̄,   C = ΦᵀDΦ

Off-policy, D comes from the behavior policy and P, r̄ from the target.
Features of absorbing states are taken as zero. A Monte-Carlo estimator of
the same expectations is provided as an independent check.
"""

from collections import namedtuple
from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg

from models.base_model import BaseModel
from models.learners import TraceBuffer, compute_trace
from models.mdp import FeatureMap, induced_chain, policy_matrices, \
    sample_state, sample_step
from models.schedule import parse_schedule

logger = logging.getLogger(__name__)

DEFINITE_TOL = 1e-10
SINGULAR_COND = 1e12

Certificate = namedtuple("Certificate", ["holds", "extreme"])
ChainPair = namedtuple("ChainPair", ["d", "P", "rbar"])
MonteCarloEstimate = namedtuple(
    "MonteCarloEstimate", ["A", "b", "C", "se_A", "se_b", "se_C", "steps"])


class SingularMatrixError(np.linalg.LinAlgError):
    """raised for singular or ill-conditioned systems"""


def chain_pair(bundle, mode="on"):
    """
    The (d, P, r̄) triple the expectations are taken over.

    d is the stationary distribution of the behavior chain (restarting
    from the start distribution after absorption). P and r̄ belong to the
    behavior policy on-policy and to the target policy off-policy.
    """
    behavior = induced_chain(bundle.mdp, bundle.behavior, bundle.start)
    _, P, rbar = policy_matrices(bundle.mdp, bundle.policy_for(mode),
                                 bundle.start)
    return ChainPair(d=behavior.d, P=P, rbar=rbar)


def effective_features(bundle):
    """Φ with the rows of absorbing states zeroed"""
    phi = np.array(bundle.features.phi)
    for s in bundle.mdp.absorbing:
        phi[s] = 0.0
    return phi


def _as_matrix(features):
    """accepts a FeatureMap or a plain matrix"""
    if isinstance(features, FeatureMap):
        return features.phi
    return np.asarray(features, dtype=float)


def compute_M(Ppi, gamma, schedule):
    """M = Σ_k γ^{k+1} λ_1..λ_k (1 − λ_{k+1}) P^{k+1}, λ_{L+1} = 0"""
    Ppi = np.asarray(Ppi, dtype=float)
    coeffs = schedule.coefficients(gamma)
    M = np.zeros_like(Ppi)
    power = np.eye(len(Ppi))
    for k, coef in enumerate(coeffs):
        power = power @ Ppi
        weight = gamma * coef * (1.0 - float(schedule.lam(k + 1)))
        if weight != 0.0:
            M += weight * power
    return M


def schedule_reward_vector(P, rbar, gamma, schedule):
    """Σ_{k=0}^{L} c_k P^k r̄, the expected discounted reward part"""
    total = np.zeros_like(rbar, dtype=float)
    term = np.asarray(rbar, dtype=float)
    for coef in schedule.coefficients(gamma):
        if coef == 0.0:
            break
        total += coef * term
        term = P @ term
    return total


def compute_abc(pair, features, gamma, schedule):
    """
    Assemble A, b and C in closed form.

    Args:
        pair (ChainPair): stationary d with the evaluated P and r̄.
        features (FeatureMap or ndarray): Φ, absorbing rows already zero.
        gamma (float): discount.
        schedule (LambdaSchedule): the λ-schedule.

    Returns:
        tuple: (A, b, C).
    """
    phi = _as_matrix(features)
    weighted = phi.T * pair.d
    M = compute_M(pair.P, gamma, schedule)
    A = weighted @ (M - np.eye(len(pair.d))) @ phi
    b = weighted @ schedule_reward_vector(pair.P, pair.rbar, gamma, schedule)
    C = weighted @ phi
    return A, b, C


def compute_abc_mc(bundle, schedule, gamma, steps, seed, mode="on",
                   batches=50):
    """
    Estimate A, b and C from one long behavior-policy trajectory.

    The chain starts from its stationary distribution and runs
    10 (L + 1) warm-up steps first. Every step contributes
    z_t (γφ_{t+1} − φ_t)ᵀ, z_t R_{t+1} and φ_tφ_tᵀ; a step spent in an
    absorbing state contributes zeros and restarts the episode. Standard
    errors come from `batches` contiguous batch means.

    Returns:
        MonteCarloEstimate: estimates and their standard errors.
    """
    if steps < batches or batches < 2:
        raise ValueError("need at least two batches and one step per batch")
    mdp = bundle.mdp
    off = mode == "off"
    if off and bundle.target is None:
        raise ValueError("{} has no target policy".format(bundle.name))
    phi = effective_features(bundle)
    ratios = bundle.ratios() if off else None
    d = chain_pair(bundle, mode).d
    rng = np.random.default_rng(seed)
    buffer = TraceBuffer(schedule.truncation, off)
    dim = phi.shape[1]
    per_batch = steps // batches
    sums = np.zeros((batches, dim, 2 * dim + 1))
    s = sample_state(d, rng)
    warmup = 10 * (schedule.truncation + 1)
    for t in range(-warmup, per_batch * batches):
        if mdp.is_absorbing(s):
            buffer.clear()
            s = sample_state(bundle.start, rng)
            continue
        action, s_next, reward = sample_step(mdp, bundle.behavior, s, rng)
        buffer.push(phi[s], None if ratios is None else ratios[s, action])
        if t >= 0:
            z = compute_trace(buffer, schedule, gamma, mode)
            row = sums[t // per_batch]
            row[:, :dim] += np.outer(z, gamma * phi[s_next] - phi[s])
            row[:, dim] += z * reward
            row[:, dim + 1:] += np.outer(phi[s], phi[s])
        if mdp.is_absorbing(s_next):
            buffer.clear()
        s = s_next
    means = sums / per_batch
    estimate = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / np.sqrt(batches)
    logger.debug("Monte-Carlo estimate over %d steps", per_batch * batches)
    return MonteCarloEstimate(
        A=estimate[:, :dim], b=estimate[:, dim], C=estimate[:, dim + 1:],
        se_A=se[:, :dim], se_b=se[:, dim], se_C=se[:, dim + 1:],
        steps=per_batch * batches)


def solve_fixed_point(A, b):
    """
    θ* = −A⁻¹b.

    Raises:
        SingularMatrixError: when A is singular or its condition number
        exceeds 1e12.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularMatrixError("A is singular or ill-conditioned "
                                  "(condition number {:.3g})".format(cond))
    theta = scipy.linalg.solve(A, -b)
    residual = np.linalg.norm(A @ theta + b)
    if residual > 1e-8 * max(np.linalg.norm(b), 1e-300):
        logger.warning("fixed point residual %.3g", residual)
    return theta


def check_negative_definite(Mtx, tol=DEFINITE_TOL):
    """holds iff the largest eigenvalue of (M + Mᵀ)/2 is below −tol‖M‖"""
    Mtx = np.asarray(Mtx, dtype=float)
    if Mtx.ndim != 2 or Mtx.shape[0] != Mtx.shape[1]:
        raise ValueError("definiteness needs a square matrix")
    extreme = float(np.linalg.eigvalsh((Mtx + Mtx.T) / 2.0).max())
    return Certificate(bool(extreme < -tol * np.linalg.norm(Mtx, 2)), extreme)


def check_positive_definite(Mtx, tol=DEFINITE_TOL):
    """holds iff the smallest eigenvalue of (M + Mᵀ)/2 exceeds tol‖M‖"""
    Mtx = np.asarray(Mtx, dtype=float)
    flipped = check_negative_definite(-Mtx, tol)
    return Certificate(flipped.holds, -flipped.extreme)


def neg_quadratic_certificate(A, C, tol=DEFINITE_TOL):
    """certificate for −AᵀC⁻¹A"""
    factor = scipy.linalg.cho_factor(C)
    return check_negative_definite(-A.T @ scipy.linalg.cho_solve(factor, A),
                                   tol)


@dataclass(frozen=True, eq=False)
class GtdBlockReport:
    """The GTD block matrix with its stability data and fixed point"""
    G: np.ndarray
    max_sym_eig_G: float
    spectral_abscissa: float
    holds: bool
    eta: float
    w_star: np.ndarray = None
    theta_star: np.ndarray = None

    def to_dict(self):
        """plain form used inside reports"""
        return {"eta": self.eta, "max_sym_eig_G": self.max_sym_eig_G,
                "spectral_abscissa": self.spectral_abscissa,
                "holds": bool(self.holds),
                "w_star": None if self.w_star is None else
                self.w_star.tolist(),
                "theta_star": None if self.theta_star is None else
                self.theta_star.tolist()}


def gtd_block_matrix(A, C, eta, b=None, tol=DEFINITE_TOL):
    """
    Build G = [[−√η C, A], [−Aᵀ, 0]] and certify its stability.

    The symmetric part of G has a zero block, so its largest eigenvalue
    is never strictly negative; it is reported as is. Stability is
    certified by the spectral abscissa (largest real part of an
    eigenvalue) lying below −tol‖G‖. With b given, the fixed point of
    G[w; θ] + [b; 0] = 0 is reported: w* = 0 and θ* = −A⁻¹b.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    dim = A.shape[0]
    G = np.block([[-np.sqrt(eta) * C, A], [-A.T, np.zeros((dim, dim))]])
    max_sym = float(np.linalg.eigvalsh((G + G.T) / 2.0).max())
    abscissa = float(np.linalg.eigvals(G).real.max())
    holds = abscissa < -tol * np.linalg.norm(G, 2)
    w_star = theta_star = None
    if b is not None:
        rhs = np.concatenate([np.asarray(b, dtype=float), np.zeros(dim)])
        solution = scipy.linalg.solve(G, -rhs)
        w_star, theta_star = solution[:dim], solution[dim:]
    return GtdBlockReport(G=G, max_sym_eig_G=max_sym,
                          spectral_abscissa=abscissa, holds=bool(holds),
                          eta=float(eta), w_star=w_star,
                          theta_star=theta_star)


def rmse(theta, features, V_true, d):
    """√(Σ_s d(s)(V(s) − θᵀφ(s))²)"""
    phi = _as_matrix(features)
    errors = np.asarray(V_true, dtype=float) - phi @ np.asarray(theta)
    return float(np.sqrt(np.asarray(d) @ errors ** 2))


def rmspbe(theta, A, b, C):
    """
    √((Aθ + b)ᵀ C⁻¹ (Aθ + b)).

    C is factored by Cholesky when all its eigenvalues clear the rank
    tolerance. Otherwise its pseudo-inverse is used, as long as the
    residual Aθ + b has no component in its null space, which is the case
    whenever A, b and C come from the same rank-deficient features.

    Raises:
        SingularMatrixError: when C is singular along the residual.
    """
    residual = np.asarray(A) @ np.asarray(theta, dtype=float) + b
    C = np.asarray(C, dtype=float)
    eigvals, eigvecs = scipy.linalg.eigh(C)
    cutoff = DEFINITE_TOL * max(np.abs(eigvals).max(), 1e-300)
    kept = eigvals > cutoff
    if kept.all():
        factor = scipy.linalg.cho_factor(C, check_finite=False)
        value = residual @ scipy.linalg.cho_solve(factor, residual,
                                                  check_finite=False)
    else:
        coords = eigvecs.T @ residual
        scale = np.linalg.norm(residual) + 1.0
        if np.any(np.abs(coords[~kept]) > 1e-8 * scale):
            raise SingularMatrixError("C is singular along Aθ + b")
        value = np.sum(coords[kept] ** 2 / eigvals[kept])
    return float(np.sqrt(max(value, 0.0)))


def bellman_schedule_operator(V, P, rbar, gamma, schedule):
    """T V = Σ_k c_k P^k r̄ + M V"""
    return schedule_reward_vector(P, rbar, gamma, schedule) + \
        compute_M(P, gamma, schedule) @ np.asarray(V, dtype=float)


def projection_matrix(features, d):
    """D-weighted projection Φ(ΦᵀDΦ)⁺ΦᵀD onto the feature span"""
    phi = _as_matrix(features)
    weighted = phi.T * np.asarray(d)
    gram = weighted @ phi
    return phi @ np.linalg.pinv(gram, rcond=DEFINITE_TOL, hermitian=True) \
        @ weighted


def mspbe_direct(theta, pair, features, gamma, schedule):
    """‖Π T V_θ − V_θ‖²_D computed in state space"""
    phi = _as_matrix(features)
    values = phi @ np.asarray(theta, dtype=float)
    target = bellman_schedule_operator(values, pair.P, pair.rbar, gamma,
                                       schedule)
    gap = projection_matrix(phi, pair.d) @ target - values
    return float(pair.d @ gap ** 2)


def contraction_factor(pair, gamma, schedule):
    """‖M‖_D = ‖D^½ M D^-½‖₂"""
    root = np.sqrt(pair.d)
    M = compute_M(pair.P, gamma, schedule)
    return float(np.linalg.norm(root[:, None] * M / root[None, :], 2))


def stationarity_residual(P, d):
    """max |dᵀP − dᵀ|"""
    return float(np.max(np.abs(np.asarray(d) @ P - d)))


class FixedPointReport(BaseModel):
    """Closed-form A, b, C, θ* and certificates for one configuration"""

    def __init__(self, *args, **kwargs):
        """restores matrices stored as nested lists"""
        super().__init__(*args, **kwargs)
        for key in ("A", "b", "C", "theta_star"):
            if isinstance(getattr(self, key, None), list):
                setattr(self, key, np.array(getattr(self, key)))


def row_space_basis(phi):
    """orthonormal basis of the row space of Φ, None when Φ has full rank"""
    features = FeatureMap(phi, require_full_rank=False)
    return None if features.full_rank else features.span_basis()


def minimum_norm_fixed_point(A, b, phi):
    """θ* solved on the row space of Φ (plain −A⁻¹b at full rank)"""
    Q = row_space_basis(phi)
    if Q is None:
        return solve_fixed_point(A, b)
    return Q @ solve_fixed_point(Q.T @ A @ Q, Q.T @ b)


def fixed_point_report(bundle, schedule, mode="on", eta=None):
    """
    Compute A, b, C, θ* and their certificates for a bundle.

    With rank-deficient features the matrices are reduced to the row space
    of Φ (A_r = QᵀAQ and so on) before solving and certifying; θ* is then
    the minimum-norm fixed point Qθ*_r and `reduced` is set.

    Returns:
        FixedPointReport: the unsaved report.
    """
    schedule = parse_schedule(schedule)
    gamma = bundle.gamma
    pair = chain_pair(bundle, mode)
    phi = effective_features(bundle)
    A, b, C = compute_abc(pair, phi, gamma, schedule)
    Q = row_space_basis(phi)
    if Q is None:
        A_r, b_r, C_r = A, b, C
    else:
        A_r, b_r, C_r = Q.T @ A @ Q, Q.T @ b, Q.T @ C @ Q
        logger.info("features have rank %d < %d; reducing to the row space",
                    Q.shape[1], Q.shape[0])
    theta_r = solve_fixed_point(A_r, b_r)
    theta_star = theta_r if Q is None else Q @ theta_r
    a_cert = check_negative_definite(A_r)
    c_cert = check_positive_definite(C_r)
    try:
        quad_holds = neg_quadratic_certificate(A_r, C_r).holds
    except np.linalg.LinAlgError:
        quad_holds = False
    gtd = None
    if eta is not None:
        gtd = gtd_block_matrix(A_r, C_r, eta, b_r)
        if Q is not None:
            gtd = GtdBlockReport(gtd.G, gtd.max_sym_eig_G,
                                 gtd.spectral_abscissa, gtd.holds, gtd.eta,
                                 gtd.w_star, Q @ gtd.theta_star)
        gtd = gtd.to_dict()
    zero = np.zeros(bundle.dim)
    values = bundle.true_values(mode)
    return FixedPointReport(
        env=bundle.name, mode=mode, schedule=str(schedule), A=A, b=b, C=C,
        theta_star=theta_star, reduced=Q is not None,
        rank=bundle.dim if Q is None else Q.shape[1],
        max_sym_eig_A=a_cert.extreme, min_eig_C=c_cert.extreme,
        a_negative_definite=a_cert.holds,
        c_positive_definite=c_cert.holds,
        quadratic_negative_definite=quad_holds, gtd=gtd,
        residual=float(np.linalg.norm(A @ theta_star + b)),
        rmse_zero=rmse(zero, phi, values, pair.d),
        rmspbe_zero=rmspbe(zero, A, b, C))
