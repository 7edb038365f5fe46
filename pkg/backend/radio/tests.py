"""
Tests for channels, rates and the sensing SNR
"""
import numpy as np
import pytest
from django.conf import settings

from baselines.schemes import layout_for
from placement.association import association_from_clusters
from scenarios.loader import load_scenario
from .channel import ChannelMode, channel_tensor, comm_channel, distance3d, steering_tx, ula_response
from .rates import (
    BeamformingState, SymbolBlock, all_sinrs, allocate_common_rate, common_sinr, evaluate_state,
    private_sinr, sensing_snr, sensing_snr_monte_carlo,
)


@pytest.fixture
def scenario():
    return load_scenario(settings.CORSMA['DEFAULT_SCENARIO'])


@pytest.fixture
def association(scenario):
    return association_from_clusters([[0, 1], [2], [3, 4]], scenario.cs_positions)


def random_state(s, association, seed=0):
    rng = np.random.default_rng(seed)
    beams = BeamformingState.zeros(s.U, s.K, s.Nt)
    beams.common[:] = rng.standard_normal((s.U, s.Nt)) + 1j * rng.standard_normal((s.U, s.Nt))
    beams.sensing[:] = rng.standard_normal((s.U, s.Nt)) + 1j * rng.standard_normal((s.U, s.Nt))
    for k, u in enumerate(association.owner):
        beams.private[u, k] = rng.standard_normal(s.Nt) + 1j * rng.standard_normal(s.Nt)
    beams = beams.scaled(np.sqrt(s.p_max / beams.uav_powers().max()))
    positions = np.column_stack([rng.uniform(0, 500, s.U), rng.uniform(0, 500, s.U)])
    return beams, positions


class TestChannel:
    """Geometry and channel construction"""

    def test_distance(self):
        assert distance3d([0.0, 0.0], 100.0, [0.0, 0.0]) == pytest.approx(100.0)
        assert distance3d([3.0, 0.0], 4.0, [0.0, 0.0]) == pytest.approx(5.0)

    def test_ula_response(self):
        np.testing.assert_allclose(ula_response(0.0, 4), np.ones(4))
        a = ula_response(0.5, 4)
        np.testing.assert_allclose(np.abs(a), np.ones(4))
        assert a[1] == pytest.approx(np.exp(0.5j * np.pi))

    def test_steering_points_down_when_overhead(self):
        a = steering_tx([250.0, 250.0], [250.0, 250.0], 100.0, 4)
        np.testing.assert_allclose(a, np.exp(1j * np.pi * np.arange(4)))

    def test_los_channel_norm(self, scenario):
        positions = np.array([[0.0, 0.0], [100.0, 100.0], [200.0, 200.0]])
        h = comm_channel(scenario, positions, ChannelMode.LOS_ONES, 0, 0)
        r = distance3d(positions[0], scenario.uav_altitude, scenario.cs_positions[0])
        assert np.linalg.norm(h) == pytest.approx(np.sqrt(scenario.eps0 * scenario.Nt) / r)

    def test_rayleigh_depends_on_seed(self, scenario):
        positions = np.zeros((scenario.U, 2))
        first = channel_tensor(scenario, positions, ChannelMode.RAYLEIGH, seed=1)
        np.testing.assert_array_equal(first, channel_tensor(scenario, positions, ChannelMode.RAYLEIGH, seed=1))
        assert not np.allclose(first, channel_tensor(scenario, positions, ChannelMode.RAYLEIGH, seed=2))

    def test_los_ignores_seed(self, scenario):
        positions = np.zeros((scenario.U, 2))
        np.testing.assert_array_equal(
            channel_tensor(scenario, positions, ChannelMode.LOS_ONES, seed=1),
            channel_tensor(scenario, positions, ChannelMode.LOS_ONES, seed=2),
        )


class TestRates:
    """SINR and rate evaluation"""

    def test_vectorized_sinrs_match_per_cs(self, scenario, association):
        beams, positions = random_state(scenario, association)
        channels = channel_tensor(scenario, positions)
        layout = layout_for('CORSMA', association)
        gamma_c, gamma_p = all_sinrs(channels, beams, layout, scenario.noise_power)
        for k in range(scenario.K):
            assert gamma_c[k] == pytest.approx(common_sinr(k, channels, beams, association, scenario.noise_power))
            assert gamma_p[k] == pytest.approx(private_sinr(k, channels, beams, association, scenario.noise_power))

    def test_single_user_rate(self, scenario):
        s = scenario.with_changes(U=1, K=1, cs_positions=[[100.0, 100.0]], rate_threshold=[0.0], weights=[1.0])
        association = association_from_clusters([[0]], s.cs_positions)
        positions = np.array([[100.0, 100.0]])
        channels = channel_tensor(s, positions)
        beams = BeamformingState.zeros(1, 1, s.Nt)
        h = channels[0, 0]
        beams.private[0, 0] = h / np.linalg.norm(h) * np.sqrt(s.p_max)
        report = evaluate_state(s, positions, beams, association, channels)
        capacity = s.bandwidth * np.log2(1 + np.linalg.norm(h) ** 2 * s.p_max / s.noise_power)
        assert report.wsr == pytest.approx(capacity, rel=1e-10)
        assert report.common_rate == 0.0

    def test_sensing_interference_ablation_lowers_rates(self, scenario, association):
        beams, positions = random_state(scenario, association)
        channels = channel_tensor(scenario, positions)
        plain = evaluate_state(scenario, positions, beams, association, channels)
        with_sensing = evaluate_state(scenario, positions, beams, association, channels, include_sensing=True)
        assert with_sensing.wsr < plain.wsr

    def test_feasibility_flags(self, scenario, association):
        beams, positions = random_state(scenario, association)
        channels = channel_tensor(scenario, positions)
        report = evaluate_state(scenario, positions, beams.scaled(2.0), association, channels)
        assert report.power_excess > 0
        assert not report.is_feasible(scenario)


class TestCommonRateAllocation:
    """Splitting R^c among CSs"""

    def test_deficits_first_remainder_to_largest_weight(self):
        allocation, feasible = allocate_common_rate(10.0, [4.0, 8.0, 1.0], [5.0, 5.0, 5.0], [0.2, 0.5, 0.3])
        assert feasible
        np.testing.assert_allclose(allocation, [1.0, 5.0, 4.0])

    def test_ties_go_to_lowest_index(self):
        allocation, _ = allocate_common_rate(3.0, [1.0, 1.0], [0.0, 0.0], [0.5, 0.5])
        np.testing.assert_allclose(allocation, [3.0, 0.0])

    def test_insufficient_common_rate(self):
        allocation, feasible = allocate_common_rate(2.0, [0.0, 0.0], [2.0, 2.0], [0.5, 0.5])
        assert not feasible
        assert allocation.sum() == pytest.approx(2.0)


class TestSensingSnr:
    """Closed form against its construction"""

    def test_single_uav_closed_form(self, scenario):
        s = scenario.with_changes(U=1)
        beams = BeamformingState.zeros(1, s.K, s.Nt)
        position = np.array([[250.0, 250.0]])
        a = steering_tx(position[0], s.ts_position, s.uav_altitude, s.Nt)
        beams.sensing[0] = a / np.sqrt(s.Nt) * np.sqrt(s.p_max)
        expected = s.beta0 * s.Nt * s.p_max / (s.ts_range_sq * s.uav_altitude ** 2 * s.noise_power)
        assert sensing_snr(s, position, beams) == pytest.approx(expected)

    def test_quadratic_in_beam_scale(self, scenario, association):
        beams, positions = random_state(scenario, association)
        base = sensing_snr(scenario, positions, beams)
        assert sensing_snr(scenario, positions, beams.scaled(np.sqrt(2.0))) == pytest.approx(2 * base)

    @pytest.mark.parametrize('U', [1, 3])
    def test_monte_carlo_agrees(self, scenario, U):
        s = scenario.with_changes(U=U)
        clusters = [[0, 1, 2, 3, 4]] if U == 1 else [[0, 1], [2], [3, 4]]
        association = association_from_clusters(clusters, s.cs_positions)
        beams, positions = random_state(s, association, seed=3)
        closed = sensing_snr(s, positions, beams)
        estimate = sensing_snr_monte_carlo(s, positions, beams, block=SymbolBlock(16), draws=20000, seed=5)
        assert estimate == pytest.approx(closed, rel=0.02)

    def test_symbol_block_needs_symbols(self):
        with pytest.raises(ValueError):
            SymbolBlock(0)
