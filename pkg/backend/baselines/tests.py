"""
Tests for the comparison schemes: decoding layouts and closed-form rates
"""
import numpy as np
import pytest
from django.conf import settings

from placement.association import association_from_clusters
from radio.channel import channel_tensor
from radio.rates import BeamformingState, evaluate_state
from scenarios.loader import load_scenario
from .optimize import optimize_baseline
from .rates import noma_rates, oma_rate, sdma_rate, single_user_capacity
from .schemes import SchemeId, layout_for, noma_order


@pytest.fixture
def scenario():
    return load_scenario(settings.CORSMA['DEFAULT_SCENARIO'])


@pytest.fixture
def setting(scenario):
    association = association_from_clusters([[0, 1], [2], [3, 4]], scenario.cs_positions)
    rng = np.random.default_rng(8)
    positions = np.column_stack([rng.uniform(0, 500, scenario.U), rng.uniform(0, 500, scenario.U)])
    channels = channel_tensor(scenario, positions)
    beams = BeamformingState.zeros(scenario.U, scenario.K, scenario.Nt)
    for k, u in enumerate(association.owner):
        beams.private[u, k] = rng.standard_normal(scenario.Nt) + 1j * rng.standard_normal(scenario.Nt)
    beams = beams.scaled(np.sqrt(scenario.p_max / beams.uav_powers().max()))
    return association, positions, channels, beams


class TestLayouts:
    """Who interferes with whom, on which band"""

    def test_corsma_and_sdma(self, scenario, setting):
        association = setting[0]
        corsma = layout_for(SchemeId.CORSMA, association)
        sdma = layout_for('SDMA', association)
        assert corsma.has_common and not sdma.has_common
        assert corsma.interferers == sdma.interferers
        assert corsma.interferers[0] == (1, 2, 3, 4)
        owner = np.asarray(corsma.owner)
        assert np.any(corsma.interference_mask() & (owner[:, None] != owner[None, :]))

    def test_oma(self, scenario, setting):
        layout = layout_for(SchemeId.OMA, setting[0])
        assert layout.bandwidth_share == pytest.approx(1.0 / scenario.K)
        assert not layout.interference_mask().any()

    def test_noma_stays_in_cluster(self, scenario, setting):
        association, _, channels, _ = setting
        layout = layout_for(SchemeId.NOMA, association, channels)
        assert layout.bandwidth_share == pytest.approx(1.0 / scenario.U)
        owner = np.asarray(layout.owner)
        assert not np.any(layout.interference_mask() & (owner[:, None] != owner[None, :]))
        assert layout.interferers[2] == ()

    def test_noma_needs_channels(self, setting):
        with pytest.raises(ValueError):
            layout_for(SchemeId.NOMA, setting[0])

    def test_noma_order_ties_by_index(self):
        assert noma_order([3, 1, 2], {1: 2.0, 2: 1.0, 3: 1.0}) == [2, 3, 1]

    def test_unknown_scheme(self, setting):
        with pytest.raises(ValueError):
            layout_for('TDMA', setting[0])


class TestClosedFormRates:
    """Closed forms agree with the layout-driven evaluation"""

    def test_sdma(self, scenario, setting):
        association, positions, channels, beams = setting
        report = evaluate_state(scenario, positions, beams, association, channels, layout_for('SDMA', association))
        for k in range(scenario.K):
            expected = sdma_rate(k, channels, beams, association, scenario.bandwidth, scenario.noise_power)
            assert report.private_rates[k] == pytest.approx(expected, rel=1e-10)
        assert report.common_rate == 0.0

    def test_noma(self, scenario, setting):
        association, positions, channels, beams = setting
        layout = layout_for('NOMA', association, channels)
        report = evaluate_state(scenario, positions, beams, association, channels, layout)
        expected = noma_rates(channels, beams, association, scenario.bandwidth, scenario.noise_power)
        np.testing.assert_allclose(report.private_rates, expected, rtol=1e-10)

    def test_oma(self, scenario, setting):
        association, positions, channels, beams = setting
        report = evaluate_state(scenario, positions, beams, association, channels, layout_for('OMA', association))
        for k in range(scenario.K):
            expected = oma_rate(k, channels, beams, association, scenario.bandwidth, scenario.noise_power)
            assert report.private_rates[k] == pytest.approx(expected, rel=1e-10)

    def test_oma_half_band_halves_rate(self, scenario, setting):
        association, _, channels, beams = setting
        full = oma_rate(0, channels, beams, association, scenario.bandwidth, scenario.noise_power)
        half = oma_rate(0, channels, beams, association, scenario.bandwidth / 2, scenario.noise_power)
        assert half == pytest.approx(full / 2)

    def test_noma_strongest_member_is_interference_free(self, scenario, setting):
        association, _, channels, beams = setting
        rates = noma_rates(channels, beams, association, scenario.bandwidth, scenario.noise_power)
        u = 0
        members = [int(k) for k in association.clusters[u]]
        strongest = max(members, key=lambda k: (np.linalg.norm(channels[u, k]), k))
        signal = abs(np.vdot(channels[u, strongest], beams.private[u, strongest])) ** 2
        expected = scenario.bandwidth / scenario.U * np.log2(1 + signal / scenario.noise_power)
        assert rates[strongest] == pytest.approx(expected)

    def test_noma_single_member_cluster(self, scenario, setting):
        association, _, channels, beams = setting
        rates = noma_rates(channels, beams, association, scenario.bandwidth, scenario.noise_power)
        signal = abs(np.vdot(channels[1, 2], beams.private[1, 2])) ** 2
        assert rates[2] == pytest.approx(scenario.bandwidth / scenario.U * np.log2(1 + signal / scenario.noise_power))

    def test_single_cs_sdma_is_capacity(self, scenario):
        s = scenario.with_changes(U=1, K=1, cs_positions=[[50.0, 60.0]], rate_threshold=[0.0], weights=[1.0])
        association = association_from_clusters([[0]], s.cs_positions)
        positions = np.array([[200.0, 100.0]])
        channels = channel_tensor(s, positions)
        beams = BeamformingState.zeros(1, 1, s.Nt)
        h = channels[0, 0]
        beams.private[0, 0] = h / np.linalg.norm(h) * np.sqrt(s.p_max)
        rate = sdma_rate(0, channels, beams, association, s.bandwidth, s.noise_power)
        assert rate == pytest.approx(single_user_capacity(h, s.p_max, s.bandwidth, s.noise_power))


class TestOptimizeBaseline:
    def test_rejects_corsma(self, scenario):
        with pytest.raises(ValueError):
            optimize_baseline(SchemeId.CORSMA, scenario)
