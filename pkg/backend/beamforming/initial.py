"""
MRT starting beams and the interference levels the SCA linearizes at.
"""
import numpy as np

from radio.channel import sensing_steering
from radio.rates import BeamformingState

# Per-UAV power split (common, private, sensing)
DEFAULT_SPLIT = (0.5, 0.4, 0.1)

# Splits tried when the first program is infeasible at the default start
FALLBACK_SPLITS = ((0.2, 0.5, 0.3), (0.1, 0.3, 0.6), (0.0, 0.2, 0.8))


def _unit(v):
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def mrt_beams(s, channels, association, positions, split=DEFAULT_SPLIT, has_common=True, sensing_beam=True):
    """
    Maximum-ratio start: the common beam of UAV u follows the mean direction
    of its cluster's channels, private beams follow their own channel with
    equal power, and the sensing beam points at the TS.
    Shares of absent streams go to the private beams.
    """
    common_share, private_share, sensing_share = split
    if not has_common:
        private_share += common_share
        common_share = 0.0
    if not sensing_beam:
        private_share += sensing_share
        sensing_share = 0.0

    beams = BeamformingState.zeros(s.U, s.K, s.Nt)
    steer = sensing_steering(s, positions)
    for u, cluster in enumerate(association.clusters):
        cluster = [int(k) for k in cluster]
        if not cluster:
            continue
        directions = np.stack([_unit(channels[u, k]) for k in cluster])
        if common_share > 0:
            beams.common[u] = _unit(directions.mean(axis=0)) * np.sqrt(common_share * s.p_max)
        for k, direction in zip(cluster, directions):
            beams.private[u, k] = direction * np.sqrt(private_share * s.p_max / len(cluster))
        if sensing_share > 0:
            beams.sensing[u] = steer[u] / np.sqrt(s.Nt) * np.sqrt(sensing_share * s.p_max)
    return beams


def private_covariances(beams, association):
    """(K, Nt, Nt) private covariances p_k p_k^H taken from the serving UAV."""
    vectors = beams.private[association.owner, np.arange(len(association.owner))]
    return np.einsum('kn,km->knm', vectors, vectors.conj())


def interference_levels(s, channels, private, layout):
    """
    Noise-normalized interference seen when decoding the common stream
    (all private streams) and each private stream (its layout interferers),
    noise included. ``private`` holds the (K, Nt, Nt) private covariances.
    """
    owner = np.asarray(layout.owner)
    # Q[j, k] = h_{owner j, k}^H P_j h_{owner j, k}
    h = channels[owner]                                     # (K_j, K_k, Nt)
    Q = np.real(np.einsum('jkn,jnm,jkm->jk', h.conj(), private, h)) / s.noise_power
    mask = layout.interference_mask()
    common = Q.sum(axis=0) + 1.0
    individual = np.sum(np.where(mask, Q, 0.0), axis=0) + 1.0
    return common, individual
