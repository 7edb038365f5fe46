"""
Multiple-access schemes and their decoding layouts.

A DecodingLayout says, for every CS, which private streams it treats as
interference, which share of the bandwidth it transmits on, and whether a
common stream exists. Rate evaluation, the beamforming program and the
deployment surrogate are all written against the layout, so the four
schemes share one optimization stack.
"""
from dataclasses import dataclass

import numpy as np
from django.db import models


class SchemeId(models.TextChoices):
    CORSMA = 'CORSMA', 'Coordinated RSMA-ISAC'
    SDMA = 'SDMA', 'SDMA-ISAC'
    NOMA = 'NOMA', 'NOMA-ISAC'
    OMA = 'OMA', 'OMA-ISAC'


@dataclass(frozen=True)
class DecodingLayout:
    scheme: str
    owner: tuple                # serving UAV of every CS
    interferers: tuple          # per CS: tuple of CS indices whose private streams interfere
    bandwidth_share: float
    has_common: bool

    @property
    def K(self):
        return len(self.owner)

    def interference_mask(self):
        """Boolean (K, K) matrix: mask[j, k] is True when stream j interferes at CS k."""
        mask = np.zeros((self.K, self.K), dtype=bool)
        for k, streams in enumerate(self.interferers):
            mask[list(streams), k] = True
        return mask


def noma_order(cluster, channel_norms):
    """CS indices of one cluster sorted weakest first; equal norms keep index order."""
    return sorted(cluster, key=lambda k: (channel_norms[k], k))


def layout_for(scheme, association, channels=None):
    """
    Build the decoding layout of ``scheme`` for a given association.

    ``channels`` (U, K, Nt) is needed only for NOMA, whose SIC order follows
    the serving-channel norms.
    """
    scheme = SchemeId(scheme)
    owner = tuple(int(u) for u in association.owner)
    K = len(owner)
    U = len(association.clusters)

    if scheme in (SchemeId.CORSMA, SchemeId.SDMA):
        interferers = tuple(tuple(j for j in range(K) if j != k) for k in range(K))
        return DecodingLayout(scheme.value, owner, interferers, 1.0, scheme == SchemeId.CORSMA)

    if scheme == SchemeId.OMA:
        return DecodingLayout(scheme.value, owner, tuple(() for _ in range(K)), 1.0 / K, False)

    if channels is None:
        raise ValueError('NOMA layout needs channels to order the SIC stages')
    norms = np.array([np.linalg.norm(channels[owner[k], k]) for k in range(K)])
    interferers = [()] * K
    for cluster in association.clusters:
        order = noma_order([int(k) for k in cluster], norms)
        for position, k in enumerate(order):
            interferers[k] = tuple(order[position + 1:])
    return DecodingLayout(scheme.value, owner, tuple(interferers), 1.0 / U, False)
