"""
Exact performance evaluation: SINRs, rates, common-rate allocation, WSR and
the sensing SNR (closed form plus a Monte-Carlo estimate of the same ratio).
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from baselines.schemes import SchemeId, layout_for
from .channel import distance3d, sensing_steering, steering_rx, sensing_gain

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


@dataclass
class BeamformingState:
    """Per-UAV beamformers; private columns of CSs outside a UAV's cluster stay zero."""
    common: np.ndarray      # (U, Nt)
    private: np.ndarray     # (U, K, Nt)
    sensing: np.ndarray     # (U, Nt)

    @classmethod
    def zeros(cls, U, K, Nt):
        return cls(
            common=np.zeros((U, Nt), dtype=complex),
            private=np.zeros((U, K, Nt), dtype=complex),
            sensing=np.zeros((U, Nt), dtype=complex),
        )

    @property
    def shape(self):
        return self.private.shape

    def stacked(self, u):
        """P_u = [p_c, p_1, ..., p_K, p_r] as an Nt x (K+2) matrix."""
        return np.column_stack([self.common[u], self.private[u].T, self.sensing[u]])

    def transmit_covariance(self, u):
        P = self.stacked(u)
        return P @ P.conj().T

    def uav_powers(self):
        return (
            np.sum(np.abs(self.common) ** 2, axis=1)
            + np.sum(np.abs(self.private) ** 2, axis=(1, 2))
            + np.sum(np.abs(self.sensing) ** 2, axis=1)
        )

    def scaled(self, factor):
        return BeamformingState(self.common * factor, self.private * factor, self.sensing * factor)

    def copy(self):
        return BeamformingState(self.common.copy(), self.private.copy(), self.sensing.copy())


@dataclass(frozen=True)
class SymbolBlock:
    """Block of L symbols per stream (only the Monte-Carlo estimate draws them)."""
    L: int = 64

    def __post_init__(self):
        if self.L < 1:
            raise ValueError('a symbol block holds at least one symbol')


@dataclass
class RateReport:
    common_sinr: np.ndarray
    private_sinr: np.ndarray
    common_rates: np.ndarray        # R_k^c, b/s
    private_rates: np.ndarray       # R_k^p, b/s
    common_rate: float              # R^c = min_k R_k^c
    allocation: np.ndarray          # C_k, b/s
    total_rates: np.ndarray         # C_k + R_k^p
    wsr: float
    sensing_snr: float = float('nan')
    power_excess: float = 0.0       # max_u (power_u - P_max), W
    qos_shortfall: float = 0.0      # max_k (R_th - R_k^tot), b/s
    common_excess: float = 0.0      # sum C - R^c, b/s
    sensing_shortfall: float = 0.0  # gamma_bar - gamma_s
    notes: list = field(default_factory=list)
    weights: np.ndarray = field(default=None, repr=False)

    @property
    def common_ratio(self):
        """Share of the WSR carried by the common stream."""
        if self.wsr <= 0:
            return 0.0
        return float(np.dot(self.weights, self.allocation) / self.wsr)

    def is_feasible(self, scenario, rel_tol=1e-6):
        """Every P0 constraint evaluated exactly, within a relative tolerance."""
        rate_scale = max(float(np.max(scenario.rate_threshold, initial=0.0)), scenario.bandwidth)
        return (
            self.power_excess <= rel_tol * scenario.p_max
            and self.qos_shortfall <= rel_tol * rate_scale
            and self.common_excess <= rel_tol * rate_scale
            and self.sensing_shortfall <= rel_tol * max(scenario.sensing_threshold, 1.0)
        )

    def to_dict(self):
        data = {
            'common_rate': self.common_rate,
            'wsr': self.wsr,
            'sensing_snr': self.sensing_snr,
            'common_ratio': self.common_ratio,
            'power_excess': self.power_excess,
            'qos_shortfall': self.qos_shortfall,
            'common_excess': self.common_excess,
            'sensing_shortfall': self.sensing_shortfall,
        }
        for name in ('common_sinr', 'private_sinr', 'common_rates', 'private_rates', 'allocation', 'total_rates'):
            data[name] = np.asarray(getattr(self, name), dtype=float).tolist()
        return data


def default_layout(association):
    return layout_for(SchemeId.CORSMA, association)


def stream_powers(channels, beams):
    """Q[j, k] = sum_u |h_{u,k}^H p_{u,j}|^2, received power of private stream j at CS k."""
    inner = np.einsum('ukn,ujn->ujk', channels.conj(), beams.private)
    return np.sum(np.abs(inner) ** 2, axis=0)


def sensing_leakage(channels, beams):
    """sum_u |h_{u,k}^H p_{u,r}|^2 at every CS."""
    inner = np.einsum('ukn,un->uk', channels.conj(), beams.sensing)
    return np.sum(np.abs(inner) ** 2, axis=0)


def common_signal(channels, beams):
    return np.abs(np.einsum('ukn,un->k', channels.conj(), beams.common)) ** 2


def common_sinr(k, channels, beams, association, noise_power, include_sensing=False):
    Q = stream_powers(channels, beams)
    interference = Q[:, k].sum() + noise_power
    if include_sensing:
        interference += sensing_leakage(channels, beams)[k]
    return float(common_signal(channels, beams)[k] / interference)


def private_sinr(k, channels, beams, association, noise_power, layout=None, include_sensing=False):
    owner = association.owner[k]
    if owner < 0:
        raise ValueError(f'CS {k} is not associated with any UAV')
    layout = layout or default_layout(association)
    Q = stream_powers(channels, beams)
    streams = list(layout.interferers[k])
    interference = Q[streams, k].sum() + noise_power
    if include_sensing:
        interference += sensing_leakage(channels, beams)[k]
    return float(Q[k, k] / interference)


def all_sinrs(channels, beams, layout, noise_power, include_sensing=False):
    """Vectorized (common, private) SINRs of every CS under ``layout``."""
    Q = stream_powers(channels, beams)
    leak = sensing_leakage(channels, beams) if include_sensing else 0.0
    noise = noise_power + leak
    if layout.has_common:
        gamma_c = common_signal(channels, beams) / (Q.sum(axis=0) + noise)
    else:
        gamma_c = np.zeros(layout.K)
    mask = layout.interference_mask()
    interference = np.sum(np.where(mask, Q, 0.0), axis=0)
    gamma_p = np.diag(Q) / (interference + noise)
    return gamma_c, gamma_p


def allocate_common_rate(common_rate, private_rates, thresholds, weights):
    """
    Split R^c among CSs to maximize sum mu_k C_k under QoS.

    Each CS first receives its QoS deficit; the remainder goes to the
    largest weight (lowest index on ties). When the deficits do not fit,
    they are shrunk proportionally and ``feasible`` is False.
    """
    private_rates = np.asarray(private_rates, dtype=float)
    deficits = np.maximum(np.asarray(thresholds, dtype=float) - private_rates, 0.0)
    allocation = deficits.copy()
    if deficits.sum() > common_rate * (1 + 1e-12):
        return allocation * (max(common_rate, 0.0) / deficits.sum()), False
    allocation[int(np.argmax(weights))] += max(common_rate - deficits.sum(), 0.0)
    return allocation, True


def rates_and_wsr(gamma_c, gamma_p, allocation, weights, bandwidth, share=1.0, has_common=True, thresholds=None):
    gamma_c = np.asarray(gamma_c, dtype=float)
    gamma_p = np.asarray(gamma_p, dtype=float)
    common_rates = bandwidth * np.log1p(gamma_c) / LN2 if has_common else np.zeros_like(gamma_c)
    private_rates = share * bandwidth * np.log1p(gamma_p) / LN2
    common_rate = float(common_rates.min()) if has_common else 0.0
    if allocation is None:
        if thresholds is None:
            thresholds = np.zeros_like(private_rates)
        allocation, _ = allocate_common_rate(common_rate, private_rates, thresholds, weights)
    allocation = np.asarray(allocation, dtype=float)
    total = allocation + private_rates
    weights = np.asarray(weights, dtype=float)
    report = RateReport(
        common_sinr=gamma_c,
        private_sinr=gamma_p,
        common_rates=common_rates,
        private_rates=private_rates,
        common_rate=common_rate,
        allocation=allocation,
        total_rates=total,
        wsr=float(weights @ total),
        common_excess=float(allocation.sum() - common_rate),
        weights=weights,
    )
    if report.common_excess > 1e-9 * max(common_rate, 1.0):
        report.notes.append('sum of common allocations exceeds the common rate')
    if thresholds is not None:
        report.qos_shortfall = float(np.max(np.asarray(thresholds) - total))
    return report


def sensing_snr(s, positions, beams):
    """Closed-form sensing SNR: beta0/(r0^2 sigma^2) * sum_u ||a_u^H P_u||^2 / r_u^2."""
    positions = np.asarray(positions, dtype=float)
    steer = sensing_steering(s, positions)
    r_sq = distance3d(positions, s.uav_altitude, s.ts_position) ** 2
    total = 0.0
    for u in range(s.U):
        total += np.sum(np.abs(steer[u].conj() @ beams.stacked(u)) ** 2) / r_sq[u]
    return float(s.sensing_scale * total)


def sensing_snr_monte_carlo(s, positions, beams, block=SymbolBlock(), draws=20000, seed=0, chunk=500):
    """
    Empirical E||G S||_F^2 / E||N||_F^2 at the receive UAV.

    Symbols and noise are circular Gaussian with unit and sigma^2 power; each
    draw gives every UAV's reflection gain an independent uniform phase.
    Draws are processed in chunks of ``chunk``.
    """
    positions = np.asarray(positions, dtype=float)
    rng = np.random.default_rng(seed)
    L = block.L
    b = steering_rx(s.rx_uav_position, s.ts_position, s.rx_altitude, s.Nr)
    steer = sensing_steering(s, positions)
    rows = np.stack([steer[u].conj() @ beams.stacked(u) for u in range(s.U)])      # (U, K+2)
    magnitudes = np.array([sensing_gain(s, o) for o in positions])
    n_streams = rows.shape[1]

    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    signal_energy = 0.0
    noise_energy = 0.0
    remaining = draws
    while remaining > 0:
        n = min(chunk, remaining)
        remaining -= n
        phases = np.exp(2j * np.pi * rng.random((n, s.U)))
        g_rows = (magnitudes * phases) @ rows                                   # (n, K+2)
        S = cn(n, n_streams, L)
        # G = b g_row, so ||G S||^2 = ||b||^2 ||g_row S||^2
        y = np.einsum('dm,dml->dl', g_rows, S)
        signal_energy += np.sum(np.abs(b) ** 2) * np.sum(np.abs(y) ** 2)
        noise_energy += s.noise_power * np.sum(np.abs(cn(n, s.Nr, L)) ** 2)
    return float(signal_energy / noise_energy)


def evaluate_state(s, positions, beams, association, channels, layout=None, allocation=None, include_sensing=False):
    """
    Full exact report for one state: SINRs, rates, allocation (optimal when not
    given), WSR, sensing SNR and constraint violations.
    """
    layout = layout or default_layout(association)
    gamma_c, gamma_p = all_sinrs(channels, beams, layout, s.noise_power, include_sensing)
    report = rates_and_wsr(
        gamma_c, gamma_p, allocation, s.weights, s.bandwidth,
        share=layout.bandwidth_share, has_common=layout.has_common, thresholds=s.rate_threshold,
    )
    report.sensing_snr = sensing_snr(s, positions, beams)
    report.power_excess = float(np.max(beams.uav_powers() - s.p_max))
    report.sensing_shortfall = float(s.sensing_threshold - report.sensing_snr)
    return report
