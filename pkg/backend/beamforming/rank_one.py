"""
Rank-one beam recovery from relaxed covariances: principal eigenvector when
one eigenvalue dominates, Gaussian randomization otherwise.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from django.db import models
from scipy.linalg import eigh

from radio.rates import BeamformingState, evaluate_state, rates_and_wsr
from radio.channel import sensing_steering, distance3d

logger = logging.getLogger(__name__)

DOMINANCE_THRESHOLD = 0.99


class RecoveryMethod(models.TextChoices):
    EVD = 'EVD', 'Principal eigenvector'
    RANDOMIZATION = 'RANDOMIZATION', 'Gaussian randomization'


@dataclass
class Rank1Result:
    vector: np.ndarray
    ratio: float            # lambda_max / trace
    method: str


def extract_rank1(M, threshold=DOMINANCE_THRESHOLD):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError('expected a square matrix')
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if not np.allclose(M, M.conj().T, atol=1e-9 * scale):
        raise ValueError('matrix is not Hermitian')
    eigvals, eigvecs = eigh(0.5 * (M + M.conj().T))
    trace = float(np.sum(np.clip(eigvals, 0.0, None)))
    if trace <= 0:
        return Rank1Result(np.zeros(M.shape[0], dtype=complex), 1.0, RecoveryMethod.EVD)
    lam = max(float(eigvals[-1]), 0.0)
    ratio = lam / trace
    method = RecoveryMethod.EVD if ratio >= threshold else RecoveryMethod.RANDOMIZATION
    return Rank1Result(np.sqrt(lam) * eigvecs[:, -1], ratio, method)


def covariance_report(s, positions, cov, channels, layout):
    """
    Exact rates of the relaxed covariances themselves (signal and
    interference powers as traces), allocation re-optimized.
    """
    owner = np.asarray(layout.owner)
    h = channels[owner]
    Q = np.real(np.einsum('jkn,jnm,jkm->jk', h.conj(), cov.private, h))
    noise = s.noise_power
    mask = layout.interference_mask()
    gamma_p = np.diag(Q) / (np.sum(np.where(mask, Q, 0.0), axis=0) + noise)
    if layout.has_common:
        joint = channels.transpose(1, 0, 2).reshape(s.K, -1)            # (K, U*Nt)
        signal = np.real(np.einsum('kn,nm,km->k', joint.conj(), cov.common, joint))
        gamma_c = signal / (Q.sum(axis=0) + noise)
    else:
        gamma_c = np.zeros(s.K)
    report = rates_and_wsr(gamma_c, gamma_p, None, s.weights, s.bandwidth, share=layout.bandwidth_share,
                           has_common=layout.has_common, thresholds=s.rate_threshold)
    steer = sensing_steering(s, positions)
    r_sq = distance3d(np.asarray(positions, dtype=float), s.uav_altitude, s.ts_position) ** 2
    report.sensing_snr = float(s.sensing_scale * sum(
        np.real(steer[u].conj() @ cov.transmit_covariance(u) @ steer[u]) / r_sq[u] for u in range(s.U)))
    report.power_excess = float(np.max(cov.uav_powers(s.U) - s.p_max))
    report.sensing_shortfall = float(s.sensing_threshold - report.sensing_snr)
    return report


def principal_beams(s, cov):
    """EVD of every covariance; returns the state and the worst dominance ratio."""
    beams = BeamformingState.zeros(s.U, s.K, s.Nt)
    ratios = []
    if cov.common is not None:
        result = extract_rank1(cov.common)
        beams.common[:] = result.vector.reshape(s.U, s.Nt)
        ratios.append(result.ratio)
    for k in range(s.K):
        result = extract_rank1(cov.private[k])
        beams.private[cov.owner[k], k] = result.vector
        ratios.append(result.ratio)
    if cov.sensing is not None:
        for u in range(s.U):
            result = extract_rank1(cov.sensing[u])
            beams.sensing[u] = result.vector
            ratios.append(result.ratio)
    return beams, min(ratios)


def _draws(M, n_samples, rng):
    """Circular Gaussian vectors with covariance M, each rescaled to norm^2 = tr(M)."""
    eigvals, eigvecs = eigh(0.5 * (M + M.conj().T))
    factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    n = M.shape[0]
    W = (rng.standard_normal((n_samples, n)) + 1j * rng.standard_normal((n_samples, n))) / np.sqrt(2.0)
    Z = W @ factor.T
    norms = np.sum(np.abs(Z) ** 2, axis=1, keepdims=True)
    target = max(float(np.real(np.trace(M))), 0.0)
    return np.where(norms > 0, Z * np.sqrt(target / np.where(norms > 0, norms, 1.0)), 0.0)


def fit_power_budget(s, beams):
    """Scale each UAV's beams down to P_max when they exceed it."""
    powers = beams.uav_powers()
    factors = np.where(powers > s.p_max, np.sqrt(s.p_max / np.where(powers > 0, powers, 1.0)), 1.0)
    beams.common *= factors[:, None]
    beams.private *= factors[:, None, None]
    beams.sensing *= factors[:, None]
    return beams


@dataclass
class RecoveryResult:
    beams: BeamformingState
    report: object
    method: str
    status: str                     # 'ok' or 'fallback'
    dominance: float
    feasible_samples: int = 0
    notes: list = field(default_factory=list)


def gaussian_randomization(s, cov, channels, association, positions, layout, n_samples=100, seed=0,
                           objective='wsr', include_sensing=False, threshold=DOMINANCE_THRESHOLD):
    """
    Rank-one beams from relaxed covariances.

    The principal-eigenvector candidate is evaluated first; when every
    covariance is dominated by one eigenvalue and that candidate meets all
    constraints it is returned as is. Otherwise ``n_samples`` Gaussian draws
    per covariance are power-fitted per UAV and the feasible candidate with
    the best exact objective wins. Without any feasible candidate the
    eigenvector beams come back with status ``fallback``.
    """
    if n_samples < 1:
        raise ValueError('n_samples must be >= 1')

    def score(report):
        return report.wsr if objective == 'wsr' else report.sensing_snr

    def assess(beams):
        return evaluate_state(s, positions, beams, association, channels, layout, include_sensing=include_sensing)

    evd_beams, dominance = principal_beams(s, cov)
    evd_beams = fit_power_budget(s, evd_beams)
    evd_report = assess(evd_beams)
    if dominance >= threshold and evd_report.is_feasible(s):
        return RecoveryResult(evd_beams, evd_report, RecoveryMethod.EVD, 'ok', dominance)

    rng = np.random.default_rng(seed)
    common = _draws(cov.common, n_samples, rng) if cov.common is not None else None
    private = [_draws(cov.private[k], n_samples, rng) for k in range(s.K)]
    sensing = [_draws(cov.sensing[u], n_samples, rng) for u in range(s.U)] if cov.sensing is not None else None

    best = (evd_beams, evd_report) if evd_report.is_feasible(s) else None
    feasible = int(best is not None)
    for n in range(n_samples):
        beams = BeamformingState.zeros(s.U, s.K, s.Nt)
        if common is not None:
            beams.common[:] = common[n].reshape(s.U, s.Nt)
        for k in range(s.K):
            beams.private[cov.owner[k], k] = private[k][n]
        if sensing is not None:
            for u in range(s.U):
                beams.sensing[u] = sensing[u][n]
        beams = fit_power_budget(s, beams)
        report = assess(beams)
        if not report.is_feasible(s):
            continue
        feasible += 1
        if best is None or score(report) > score(best[1]):
            best = (beams, report)

    if best is None:
        logger.warning('randomization: no feasible candidate in %d draws, keeping eigenvector beams', n_samples)
        return RecoveryResult(evd_beams, evd_report, RecoveryMethod.EVD, 'fallback', dominance,
                              notes=['no feasible rank-one candidate'])
    method = RecoveryMethod.EVD if best[0] is evd_beams else RecoveryMethod.RANDOMIZATION
    return RecoveryResult(best[0], best[1], method, 'ok', dominance, feasible_samples=feasible)
