"""
Semidefinite relaxation of the beamforming and common-rate problem.

Every covariance is a real-embedded PSD block (see ``conic.embedding``).
Powers are expressed in units of P_max and channel gains are normalized by
the noise power, so the noise term is 1. Rates are in nats per channel use:
a rate R in b/s corresponds to R ln2 / B.

The common stream is a single network-wide covariance of size U*Nt whose
diagonal blocks are the per-UAV common covariances; it captures the
coherent sum of the common beams at each CS.

Slack layout for CS k (logs of received power levels):
    exp(eta_k) <= common signal + private streams + 1
    exp(rho_k) >= private streams + 1                 (linearized)
    eta_k - rho_k >= sum_i c_i
    exp(chi_k) <= own stream + interferers + 1
    exp(zeta_k) >= interferers + 1                    (linearized)
    chi_k - zeta_k >= rp_k / share
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from conic.embedding import hermitian_coefficient, block_trace_coefficient, trace_coefficient, real_to_hermitian
from conic.program import ConicProgram, Affine, affine_sum
from radio.channel import distance3d, sensing_steering
from radio.rates import LN2

logger = logging.getLogger(__name__)


@dataclass
class Linearization:
    """Expansion points of the convex-from-below exponential constraints (nats)."""
    rho: np.ndarray         # (K,) log of common-decoding interference
    zeta: np.ndarray        # (K,) log of private-decoding interference

    @classmethod
    def from_levels(cls, common, individual):
        return cls(np.log(np.asarray(common, dtype=float)), np.log(np.asarray(individual, dtype=float)))

    def extrapolated(self, previous, factor):
        """
        Expansion point pushed ``factor`` times the last move further along
        (previous -> self). Levels include the noise, so logs stay >= 0.
        """
        return Linearization(
            np.maximum(self.rho + factor * (self.rho - previous.rho), 0.0),
            np.maximum(self.zeta + factor * (self.zeta - previous.zeta), 0.0),
        )


@dataclass
class CovariancesState:
    """Relaxed solution in watts and b/s."""
    common: np.ndarray          # (U*Nt, U*Nt) joint common covariance, or None
    private: np.ndarray         # (K, Nt, Nt), CS k's covariance at its serving UAV
    sensing: np.ndarray         # (U, Nt, Nt), or None
    allocation: np.ndarray      # C_k, b/s
    private_bound: np.ndarray   # relaxed private rates, b/s
    slacks: dict = field(default_factory=dict)
    owner: np.ndarray = None

    @property
    def Nt(self):
        return self.private.shape[1]

    def common_block(self, u):
        if self.common is None:
            return np.zeros((self.Nt, self.Nt), dtype=complex)
        rows = slice(u * self.Nt, (u + 1) * self.Nt)
        return self.common[rows, rows]

    def transmit_covariance(self, u):
        R = self.common_block(u) + self.private[self.owner == u].sum(axis=0)
        if self.sensing is not None:
            R = R + self.sensing[u]
        return R

    def uav_powers(self, U):
        return np.array([np.real(np.trace(self.transmit_covariance(u))) for u in range(U)])

    def matrices(self):
        """Every covariance, for PSD checks."""
        out = [] if self.common is None else [self.common]
        out.extend(self.private)
        if self.sensing is not None:
            out.extend(self.sensing)
        return out


@dataclass
class BeamformingProgram:
    program: ConicProgram
    linearization: Linearization
    layout: object
    sensing_beam: bool
    sensing_probe: bool


def _sensing_coefficients(s, positions):
    """Per-UAV matrices whose trace against R_u sums to the sensing SNR per watt."""
    steer = sensing_steering(s, positions)
    r_sq = distance3d(np.asarray(positions, dtype=float), s.uav_altitude, s.ts_position) ** 2
    return [s.sensing_scale * np.outer(steer[u], steer[u].conj()) / r_sq[u] for u in range(s.U)]


def _joint_channel(channels, k):
    """h_{1,k}, ..., h_{U,k} stacked into one U*Nt vector."""
    return channels[:, k, :].reshape(-1)


def build_beamforming_sdp(s, channels, association, positions, linearization, layout,
                          sensing_beam=True, sensing_probe=False):
    """
    Relaxed beamforming program around ``linearization``.

    ``sensing_probe`` replaces the weighted-sum-rate objective by the sensing
    SNR itself, keeping QoS and power.
    """
    channels = np.asarray(channels)
    if channels.shape != (s.U, s.K, s.Nt):
        raise ValueError(f'channels have shape {channels.shape}, expected {(s.U, s.K, s.Nt)}')
    if len(linearization.rho) != s.K or len(linearization.zeta) != s.K:
        raise ValueError('linearization point must hold one entry per CS')

    owner = np.asarray(layout.owner)
    gain = s.p_max / s.noise_power
    g = channels * np.sqrt(gain)
    share = layout.bandwidth_share
    has_common = layout.has_common
    Nt, U, K = s.Nt, s.U, s.K

    program = ConicProgram(label=f'beamforming[{layout.scheme}]')
    Pc = program.symmetric('Pc', 2 * U * Nt) if has_common else None
    Pp = [program.symmetric(f'Pp_{k}', 2 * Nt) for k in range(K)]
    Pr = [program.symmetric(f'Pr_{u}', 2 * Nt) for u in range(U)] if sensing_beam else None
    rp = program.vector('rp', K)
    chi = program.vector('chi', K)
    zeta = program.vector('zeta', K)

    # Q[j][k]: received power of private stream j at CS k
    Q = [[Affine.inner(Pp[j], hermitian_coefficient(np.outer(g[owner[j], k], g[owner[j], k].conj())))
          for k in range(K)] for j in range(K)]

    for k in range(K):
        interference = affine_sum(Q[j][k] for j in layout.interferers[k]) + 1.0
        program.exp_leq(chi[k], Q[k][k] + interference, family='private')
        base = np.exp(-linearization.zeta[k])
        program.geq(1.0 + zeta[k] - linearization.zeta[k], base * interference, family='private_lin')
        program.geq(chi[k] - zeta[k], rp[k] * (1.0 / share), family='private')

    if has_common:
        c = program.vector('c', K)
        eta = program.vector('eta', K)
        rho = program.vector('rho', K)
        common_sum = affine_sum(c[i] for i in range(K))
        for k in range(K):
            gk = _joint_channel(g, k)
            signal = Affine.inner(Pc, hermitian_coefficient(np.outer(gk, gk.conj())))
            streams = affine_sum(Q[j][k] for j in range(K)) + 1.0
            program.exp_leq(eta[k], signal + streams, family='common')
            base = np.exp(-linearization.rho[k])
            program.geq(1.0 + rho[k] - linearization.rho[k], base * streams, family='common_lin')
            program.geq(eta[k] - rho[k], common_sum, family='common')
            program.geq(c[k], 0.0, family='common')
        rates = [c[k] + rp[k] for k in range(K)]
    else:
        rates = [rp[k] for k in range(K)]

    # Per-UAV power budget (units of P_max)
    for u in range(U):
        power = affine_sum(Affine.inner(Pp[k], trace_coefficient(Nt)) for k in range(K) if owner[k] == u)
        if has_common:
            power = power + Affine.inner(Pc, block_trace_coefficient(U, Nt, u))
        if sensing_beam:
            power = power + Affine.inner(Pr[u], trace_coefficient(Nt))
        program.leq(power, 1.0, family='power')

    # Private blocks of CSs outside a UAV's cluster do not exist as variables.
    sensing_terms = []
    for u, A in enumerate(_sensing_coefficients(s, positions)):
        A = A * s.p_max
        coef = hermitian_coefficient(A)
        sensing_terms.extend(Affine.inner(Pp[k], coef) for k in range(K) if owner[k] == u)
        if sensing_beam:
            sensing_terms.append(Affine.inner(Pr[u], coef))
        if has_common:
            joint = np.zeros((U * Nt, U * Nt), dtype=complex)
            joint[u * Nt:(u + 1) * Nt, u * Nt:(u + 1) * Nt] = A
            sensing_terms.append(Affine.inner(Pc, hermitian_coefficient(joint)))
    sensing = affine_sum(sensing_terms)
    if s.sensing_threshold > 0 and not sensing_probe:
        program.geq(sensing * (1.0 / s.sensing_threshold), 1.0, family='sensing')

    thresholds = s.rate_threshold * LN2 / s.bandwidth
    for k in range(K):
        if thresholds[k] > 0:
            program.geq(rates[k], thresholds[k], family='qos')

    if sensing_probe:
        program.maximize(sensing)
    else:
        program.maximize(affine_sum(s.weights[k] * rates[k] for k in range(K)))
    return BeamformingProgram(program, linearization, layout, sensing_beam, sensing_probe)


def read_covariances(s, solution, sdp):
    """Convert a solved program back to watts and b/s."""
    layout = sdp.layout
    unit = s.bandwidth / LN2
    values = solution.values
    private = np.stack([real_to_hermitian(values[f'Pp_{k}']) * s.p_max for k in range(s.K)])
    common = real_to_hermitian(values['Pc']) * s.p_max if layout.has_common else None
    sensing = (np.stack([real_to_hermitian(values[f'Pr_{u}']) * s.p_max for u in range(s.U)])
               if sdp.sensing_beam else None)
    allocation = np.maximum(values['c'], 0.0) * unit if layout.has_common else np.zeros(s.K)
    slacks = {name: np.array(values[name]) for name in ('eta', 'rho', 'chi', 'zeta') if name in values}
    return CovariancesState(
        common=common,
        private=private,
        sensing=sensing,
        allocation=allocation,
        private_bound=np.array(values['rp']) * unit,
        slacks=slacks,
        owner=np.asarray(layout.owner),
    )


def relaxed_objective(s, solution, sdp):
    """Program optimum in b/s (WSR) or as an SNR (sensing probe)."""
    if sdp.sensing_probe:
        return float(solution.objective)
    return float(solution.objective) * s.bandwidth / LN2
