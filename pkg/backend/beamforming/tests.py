"""
Tests for MRT starts, the relaxed beamforming program and rank-one recovery
"""
import numpy as np
import pytest
from django.conf import settings

from baselines.rates import single_user_capacity
from baselines.schemes import SchemeId, layout_for
from placement.association import association_from_clusters
from radio.channel import channel_tensor
from radio.rates import BeamformingState, evaluate_state
from scenarios.loader import load_scenario
from .initial import DEFAULT_SPLIT, interference_levels, mrt_beams, private_covariances
from .rank_one import (
    RecoveryMethod, _draws, extract_rank1, fit_power_budget, gaussian_randomization,
)
from .sca import linearize_at_beams, sca_beamforming
from .sdp import CovariancesState, Linearization, build_beamforming_sdp


@pytest.fixture
def scenario():
    return load_scenario(settings.CORSMA['DEFAULT_SCENARIO'])


@pytest.fixture
def setting(scenario):
    association = association_from_clusters([[0, 1], [2], [3, 4]], scenario.cs_positions)
    positions = association.centroids.copy()
    channels = channel_tensor(scenario, positions)
    return association, positions, channels


def rank_one_covariances(s, beams, association):
    joint = beams.common.reshape(-1)
    return CovariancesState(
        common=np.outer(joint, joint.conj()),
        private=private_covariances(beams, association),
        sensing=np.einsum('un,um->unm', beams.sensing, beams.sensing.conj()),
        allocation=np.zeros(s.K),
        private_bound=np.zeros(s.K),
        owner=np.asarray(association.owner),
    )


class TestRankOneExtraction:
    """Principal eigenvector and dominance ratio"""

    def test_rank_one_diagonal(self):
        result = extract_rank1(np.diag([1.0, 0.0]).astype(complex))
        assert result.ratio == pytest.approx(1.0)
        assert result.method == RecoveryMethod.EVD
        np.testing.assert_allclose(np.abs(result.vector), [1.0, 0.0], atol=1e-12)

    def test_flat_spectrum_needs_randomization(self):
        result = extract_rank1(0.5 * np.eye(2, dtype=complex))
        assert result.ratio == pytest.approx(0.5)
        assert result.method == RecoveryMethod.RANDOMIZATION

    def test_recovers_outer_product(self):
        rng = np.random.default_rng(1)
        q = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        result = extract_rank1(np.outer(q, q.conj()))
        np.testing.assert_allclose(np.outer(result.vector, result.vector.conj()), np.outer(q, q.conj()), atol=1e-10)

    def test_zero_matrix(self):
        result = extract_rank1(np.zeros((3, 3), dtype=complex))
        assert result.ratio == 1.0
        assert not np.any(result.vector)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            extract_rank1(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestStartingBeams:
    """MRT starts and interference levels"""

    def test_full_power_per_uav(self, scenario, setting):
        association, positions, channels = setting
        beams = mrt_beams(scenario, channels, association, positions)
        np.testing.assert_allclose(beams.uav_powers(), np.full(scenario.U, scenario.p_max))
        common_power = np.sum(np.abs(beams.common) ** 2, axis=1)
        np.testing.assert_allclose(common_power, np.full(scenario.U, DEFAULT_SPLIT[0] * scenario.p_max))

    def test_absent_streams_go_private(self, scenario, setting):
        association, positions, channels = setting
        beams = mrt_beams(scenario, channels, association, positions, has_common=False, sensing_beam=False)
        assert not np.any(beams.common) and not np.any(beams.sensing)
        np.testing.assert_allclose(beams.uav_powers(), np.full(scenario.U, scenario.p_max))

    def test_private_beams_follow_own_channel(self, scenario, setting):
        association, positions, channels = setting
        beams = mrt_beams(scenario, channels, association, positions)
        h = channels[0, 1]
        p = beams.private[0, 1]
        assert abs(np.vdot(h, p)) == pytest.approx(np.linalg.norm(h) * np.linalg.norm(p))

    def test_interference_levels(self, scenario, setting):
        association, positions, channels = setting
        beams = mrt_beams(scenario, channels, association, positions)
        private = private_covariances(beams, association)
        assert private.shape == (scenario.K, scenario.Nt, scenario.Nt)

        common, individual = interference_levels(scenario, channels, private, layout_for('OMA', association))
        np.testing.assert_allclose(individual, np.ones(scenario.K))
        k = 2
        expected = sum(
            abs(np.vdot(channels[association.owner[j], k], beams.private[association.owner[j], j])) ** 2
            for j in range(scenario.K)
        ) / scenario.noise_power + 1.0
        assert common[k] == pytest.approx(expected)

        _, sdma = interference_levels(scenario, channels, private, layout_for('SDMA', association))
        assert np.all(sdma < common)


class TestRelaxedProgram:
    """Structure of the beamforming program"""

    @pytest.fixture(autouse=True)
    def setup(self, scenario, setting):
        self.s = scenario
        self.association, self.positions, self.channels = setting
        self.beams = mrt_beams(scenario, self.channels, self.association, self.positions)

    def build(self, scheme, **kwargs):
        layout = layout_for(scheme, self.association, self.channels)
        linearization = linearize_at_beams(self.s, self.channels, self.beams, self.association, layout)
        return build_beamforming_sdp(self.s, self.channels, self.association, self.positions,
                                     linearization, layout, **kwargs)

    def test_corsma_families(self):
        sdp = self.build(SchemeId.CORSMA)
        sdp.program.check()
        assert {'common', 'common_lin', 'private', 'private_lin', 'power', 'sensing', 'qos', 'psd'} <= set(
            sdp.program.families())
        assert sdp.program.variables['Pc'].size == 2 * self.s.U * self.s.Nt

    def test_sdma_has_no_common_stream(self):
        sdp = self.build(SchemeId.SDMA)
        assert 'Pc' not in sdp.program.variables
        assert 'common' not in sdp.program.families()

    def test_without_sensing_beam(self):
        sdp = self.build(SchemeId.CORSMA, sensing_beam=False)
        assert not any(name.startswith('Pr_') for name in sdp.program.variables)

    def test_sensing_probe_drops_threshold(self):
        sdp = self.build(SchemeId.CORSMA, sensing_probe=True)
        assert 'sensing' not in sdp.program.families()
        assert sdp.sensing_probe

    def test_dimension_mismatch(self):
        layout = layout_for('CORSMA', self.association)
        linearization = Linearization(np.zeros(self.s.K), np.zeros(self.s.K))
        with pytest.raises(ValueError):
            build_beamforming_sdp(self.s, self.channels[:, :, :4], self.association, self.positions,
                                  linearization, layout)
        with pytest.raises(ValueError):
            build_beamforming_sdp(self.s, self.channels, self.association, self.positions,
                                  Linearization(np.zeros(2), np.zeros(2)), layout)


class TestRecovery:
    """Gaussian randomization and power fitting"""

    def test_draws_keep_trace(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        M = A @ A.conj().T
        draws = _draws(M, 50, np.random.default_rng(1))
        np.testing.assert_allclose(np.sum(np.abs(draws) ** 2, axis=1), np.full(50, np.trace(M).real))

    def test_fit_power_budget(self, scenario, setting):
        association, positions, channels = setting
        beams = mrt_beams(scenario, channels, association, positions).scaled(2.0)
        beams.sensing[0] *= 0.0
        fitted = fit_power_budget(scenario, beams.copy())
        assert np.all(fitted.uav_powers() <= scenario.p_max * (1 + 1e-12))

    def test_rank_one_covariances_recover_beams(self, scenario, setting):
        association, positions, channels = setting
        s = scenario.with_changes(rate_threshold=[0.0] * scenario.K, sensing_threshold=0.0)
        beams = mrt_beams(s, channels, association, positions)
        layout = layout_for('CORSMA', association)
        cov = rank_one_covariances(s, beams, association)
        result = gaussian_randomization(s, cov, channels, association, positions, layout, n_samples=5)
        assert result.method == RecoveryMethod.EVD
        assert result.status == 'ok'
        assert result.dominance == pytest.approx(1.0)
        expected = evaluate_state(s, positions, beams, association, channels, layout)
        assert result.report.wsr == pytest.approx(expected.wsr, rel=1e-8)

    def test_needs_samples(self, scenario, setting):
        association, positions, channels = setting
        beams = mrt_beams(scenario, channels, association, positions)
        cov = rank_one_covariances(scenario, beams, association)
        with pytest.raises(ValueError):
            gaussian_randomization(scenario, cov, channels, association, positions,
                                   layout_for('CORSMA', association), n_samples=0)


@pytest.mark.slow
class TestSingleUserOracle:
    """One UAV serving one CS reaches the point-to-point capacity"""

    def test_capacity(self, scenario):
        s = scenario.with_changes(U=1, K=1, cs_positions=[[100.0, 100.0]], rate_threshold=[0.0],
                                  weights=[1.0], sensing_threshold=0.0)
        association = association_from_clusters([[0]], s.cs_positions)
        positions = np.array([[100.0, 100.0]])
        channels = channel_tensor(s, positions)
        result = sca_beamforming(s, channels, association, positions, n_samples=20)
        assert result.status in ('converged', 'max_iter')
        capacity = single_user_capacity(channels[0, 0], s.p_max, s.bandwidth, s.noise_power)
        assert result.report.wsr == pytest.approx(capacity, rel=1e-3)
        assert result.report.wsr <= capacity * (1 + 1e-6)
        assert result.report.wsr <= result.relaxed_value * (1 + 1e-6)
        assert np.all(result.beams.uav_powers() <= s.p_max * (1 + 1e-6))


@pytest.mark.slow
class TestIterations:
    """Relinearization on the default scenario"""

    @pytest.fixture(autouse=True)
    def solved(self, scenario, setting):
        association, positions, channels = setting
        self.result = sca_beamforming(scenario, channels, association, positions, n_samples=30)

    def test_converges(self):
        assert self.result.status == 'converged'
        assert self.result.iterations <= 15
        assert self.result.solves >= self.result.iterations

    def test_objective_never_falls(self):
        values = [entry['objective'] for entry in self.result.trace]
        assert len(values) == self.result.iterations
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert self.result.trace[0]['step'] == 'start'
        assert {entry['step'] for entry in self.result.trace[1:]} <= {'plain', 'extrapolated'}

    def test_relaxation_bounds_rank_one(self):
        assert self.result.report.wsr <= self.result.relaxed_value * (1 + 1e-2)
        assert self.result.recovery['bound_gap'] <= 1e-2
