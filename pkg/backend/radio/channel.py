"""
Channel construction: distances, communication channels, ULA steering
vectors and sensing gains.
"""
import numpy as np
from django.db import models


class ChannelMode(models.TextChoices):
    LOS_ONES = 'LOS_ONES', 'LoS, all-ones small-scale fading'
    LOS_STEERING = 'LOS_STEERING', 'LoS, steering phases toward the CS'
    RAYLEIGH = 'RAYLEIGH', 'Seeded unit-variance Rayleigh fading'


def distance3d(o, H, q):
    """Euclidean distance between a point at altitude H above ``o`` and ground point ``q``."""
    diff = np.asarray(o, dtype=float) - np.asarray(q, dtype=float)
    return np.sqrt(np.sum(diff ** 2, axis=-1) + H ** 2)


def ula_response(cos_angle, n_antennas):
    """Half-wavelength ULA phase response: entry n is exp(j*pi*n*cos_angle)."""
    return np.exp(1j * np.pi * np.arange(n_antennas) * cos_angle)


def steering_tx(o_u, q_0, H_u, Nt):
    return ula_response(H_u / distance3d(o_u, H_u, q_0), Nt)


def steering_rx(o_0, q_0, H_0, Nr):
    return ula_response(H_0 / distance3d(o_0, H_0, q_0), Nr)


def small_scale_fading(s, positions, mode, u, k, seed):
    mode = ChannelMode(mode)
    if mode == ChannelMode.LOS_ONES:
        return np.ones(s.Nt, dtype=complex)
    if mode == ChannelMode.LOS_STEERING:
        return steering_tx(positions[u], s.cs_positions[k], s.uav_altitude, s.Nt)
    rng = np.random.default_rng([int(seed), int(u), int(k)])
    return (rng.standard_normal(s.Nt) + 1j * rng.standard_normal(s.Nt)) / np.sqrt(2.0)


def comm_channel(s, positions, mode, u, k, seed=0):
    """h_{u,k} = sqrt(eps0 / r^2) * fading; the Rayleigh draw depends only on (seed, u, k)."""
    r = distance3d(positions[u], s.uav_altitude, s.cs_positions[k])
    return np.sqrt(s.eps0) / r * small_scale_fading(s, positions, mode, u, k, seed)


def channel_tensor(s, positions, mode=ChannelMode.LOS_ONES, seed=0):
    """All channels stacked as an array of shape (U, K, Nt)."""
    positions = np.asarray(positions, dtype=float)
    h = np.empty((s.U, s.K, s.Nt), dtype=complex)
    for u in range(s.U):
        for k in range(s.K):
            h[u, k] = comm_channel(s, positions, mode, u, k, seed)
    return h


def sensing_gain(s, o_u):
    r_u = distance3d(o_u, s.uav_altitude, s.ts_position)
    return np.sqrt(s.beta0 / (r_u ** 2 * s.ts_range_sq))


def sensing_steering(s, positions):
    """Transmit steering vectors toward the TS for every UAV, shape (U, Nt)."""
    return np.stack([steering_tx(o, s.ts_position, s.uav_altitude, s.Nt) for o in np.asarray(positions, dtype=float)])
