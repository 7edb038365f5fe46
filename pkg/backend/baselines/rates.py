"""
Closed-form rates of the comparison schemes, written directly from the
channel and beam vectors (independent of the layout machinery in
``radio.rates``).
"""
import numpy as np

from radio.rates import LN2


def _received(channels, beams, u, k, j):
    """|h_{u,k}^H p_{u,j}|^2."""
    return float(np.abs(np.vdot(channels[u, k], beams.private[u, j])) ** 2)


def sdma_rate(k, channels, beams, association, bandwidth, noise_power):
    """Private rate of CS k with every other private stream of every UAV as interference."""
    U, K = channels.shape[:2]
    owner = association.owner
    signal = _received(channels, beams, owner[k], k, k)
    interference = sum(_received(channels, beams, owner[j], k, j) for j in range(K) if j != k)
    return bandwidth * np.log2(1.0 + signal / (interference + noise_power))


def noma_rates(channels, beams, association, bandwidth, noise_power):
    """
    Per-CS rates with per-cluster SIC on B/U. Inside a cluster CSs decode in
    ascending order of serving-channel norm (ties by index); each one sees
    the streams of the stronger CSs of its own cluster.
    """
    U, K = channels.shape[:2]
    rates = np.zeros(K)
    for u, cluster in enumerate(association.clusters):
        members = [int(k) for k in cluster]
        norms = {k: np.linalg.norm(channels[u, k]) for k in members}
        order = sorted(members, key=lambda k: (norms[k], k))
        for position, k in enumerate(order):
            signal = _received(channels, beams, u, k, k)
            interference = sum(_received(channels, beams, u, k, j) for j in order[position + 1:])
            rates[k] = (bandwidth / U) * np.log2(1.0 + signal / (interference + noise_power))
    return rates


def oma_rate(k, channels, beams, association, bandwidth, noise_power):
    """Interference-free rate of CS k on its B/K band."""
    K = channels.shape[1]
    signal = _received(channels, beams, association.owner[k], k, k)
    return (bandwidth / K) * np.log1p(signal / noise_power) / LN2


def single_user_capacity(channel, p_max, bandwidth, noise_power, share=1.0):
    """share * B * log2(1 + ||h||^2 P_max / sigma^2)."""
    gain = float(np.sum(np.abs(channel) ** 2))
    return share * bandwidth * np.log2(1.0 + gain * p_max / noise_power)
