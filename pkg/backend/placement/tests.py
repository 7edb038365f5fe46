"""
Tests for K-Means association and the deployment surrogate
"""
import numpy as np
import pytest
from django.conf import settings

from baselines.schemes import layout_for
from conic.program import NonNeg
from radio.rates import BeamformingState
from scenarios.loader import load_scenario
from .association import (
    association_from_clusters, kmeans_associate, repair_empty_clusters, within_cluster_ss,
)
from .deployment import (
    DeploymentIterate, SurrogateTerms, build_deployment_subproblem, exact_rhat,
    private_rate_surrogate, qos_ball_bound, qos_surrogate_holds, sensing_requirement, sensing_taylor,
    steering_trace, taylor_private_rate,
)


@pytest.fixture
def scenario():
    return load_scenario(settings.CORSMA['DEFAULT_SCENARIO'])


@pytest.fixture
def association(scenario):
    return kmeans_associate(scenario.cs_positions, scenario.U, seed=0)


def random_beams(s, association, rng):
    beams = BeamformingState.zeros(s.U, s.K, s.Nt)
    beams.common[:] = rng.standard_normal((s.U, s.Nt)) + 1j * rng.standard_normal((s.U, s.Nt))
    beams.sensing[:] = rng.standard_normal((s.U, s.Nt)) + 1j * rng.standard_normal((s.U, s.Nt))
    for k, u in enumerate(association.owner):
        beams.private[u, k] = rng.standard_normal(s.Nt) + 1j * rng.standard_normal(s.Nt)
    return beams.scaled(np.sqrt(s.p_max / beams.uav_powers().max()))


def random_positions(s, rng):
    return np.column_stack([rng.uniform(0, 500, s.U), rng.uniform(0, 500, s.U)])


def central_difference(fn, x, step):
    grad = np.zeros_like(x)
    for i in range(x.size):
        delta = np.zeros_like(x)
        delta[i] = step
        grad[i] = (fn(x + delta) - fn(x - delta)) / (2 * step)
    return grad


class TestAssociation:
    """K-Means UAV-CS association"""

    def test_needs_enough_cs(self):
        with pytest.raises(ValueError):
            kmeans_associate(np.zeros((2, 2)), 3)

    def test_partition(self, scenario, association):
        members = np.concatenate(association.clusters)
        assert sorted(members.tolist()) == list(range(scenario.K))
        assert all(len(c) > 0 for c in association.clusters)
        for u, cluster in enumerate(association.clusters):
            assert np.all(association.owner[cluster] == u)
            np.testing.assert_allclose(association.centroids[u], scenario.cs_positions[cluster].mean(axis=0))

    def test_deterministic_under_seed(self, scenario):
        first = kmeans_associate(scenario.cs_positions, 3, seed=4)
        second = kmeans_associate(scenario.cs_positions, 3, seed=4)
        np.testing.assert_array_equal(first.owner, second.owner)

    def test_inertia_never_increases(self, scenario):
        trace = kmeans_associate(scenario.cs_positions, 3, seed=1, restarts=1).inertia_trace
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

    def test_single_cluster(self, scenario):
        result = kmeans_associate(scenario.cs_positions, 1)
        np.testing.assert_allclose(result.centroids[0], scenario.cs_positions.mean(axis=0))

    def test_beats_random_partitions(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            points = rng.uniform(0, 500, size=(6, 2))
            result = kmeans_associate(points, 3, seed=int(rng.integers(1000)))
            achieved = within_cluster_ss(points, result.owner)
            best_random = np.inf
            for _ in range(1000):
                labels = rng.integers(3, size=6)
                if len(np.unique(labels)) < 3:
                    continue
                best_random = min(best_random, within_cluster_ss(points, labels))
            assert achieved <= best_random + 1e-9

    def test_repair_fills_empty_cluster(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
        labels = np.zeros(3, dtype=int)
        centroids = np.array([[0.0, 0.0], [100.0, 100.0]])
        labels, _ = repair_empty_clusters(points, labels, centroids)
        assert labels.tolist() == [0, 0, 1]

    def test_from_clusters(self, scenario):
        result = association_from_clusters([[4, 0], [1], [2, 3]], scenario.cs_positions)
        assert result.owner.tolist() == [0, 1, 2, 2, 0]
        assert result.clusters[0].tolist() == [0, 4]


class TestDeploymentSurrogate:
    """Surrogate rates, expansions and the QoS ball"""

    @pytest.fixture(autouse=True)
    def setup(self, scenario, association):
        self.s = scenario
        self.association = association
        self.layout = layout_for('CORSMA', association)
        self.rng = np.random.default_rng(2)

    def test_exact_rhat(self):
        positions = random_positions(self.s, self.rng)
        rhat = exact_rhat(self.s, positions)
        diff = positions[1] - self.s.cs_positions[3]
        assert rhat[1, 3] == pytest.approx(diff @ diff + self.s.uav_altitude ** 2)

    def test_expansion_value_and_gradients(self):
        for _ in range(10):
            beams = random_beams(self.s, self.association, self.rng)
            positions = random_positions(self.s, self.rng)
            rhat = exact_rhat(self.s, positions) * self.rng.uniform(0.7, 1.3, size=(self.s.U, self.s.K))
            terms = SurrogateTerms.build(self.s, beams, self.association, self.layout)
            k = int(self.rng.integers(self.s.K))
            u = self.association.owner[k]
            coeffs = taylor_private_rate(self.s, terms, self.association, k, positions, rhat)
            assert coeffs.A == pytest.approx(
                private_rate_surrogate(self.s, terms, self.association, k, positions, rhat))

            def rate_at(o):
                moved = positions.copy()
                moved[u] = o
                return private_rate_surrogate(self.s, terms, self.association, k, moved, rhat)

            numeric = central_difference(rate_at, positions[u].copy(), 1e-3)
            np.testing.assert_allclose(coeffs.c, numeric, rtol=1e-5, atol=1e-6 * abs(coeffs.A) / 100)
            for i in np.flatnonzero(terms.inter[:, k] > 0):
                def rate_at_slack(value, i=i):
                    moved = rhat.copy()
                    moved[i, k] = value[0]
                    return private_rate_surrogate(self.s, terms, self.association, k, positions, moved)

                numeric = central_difference(rate_at_slack, np.array([rhat[i, k]]), 1e-6 * rhat[i, k])
                assert coeffs.slack_gradient[i] == pytest.approx(numeric[0], rel=1e-5)

    def test_sensing_gradients(self):
        for _ in range(10):
            beams = random_beams(self.s, self.association, self.rng)
            o = random_positions(self.s, self.rng)[0]
            R = beams.transmit_covariance(0)
            taylor = sensing_taylor(self.s, R, o)
            trace_grad = central_difference(lambda x: steering_trace(R, x, self.s), o.copy(), 1e-3)
            scale = abs(steering_trace(R, o, self.s)) / self.s.uav_altitude
            np.testing.assert_allclose(taylor.F, trace_grad, rtol=1e-5, atol=1e-8 * scale)

            def ratio(x):
                diff = x - self.s.ts_position
                return steering_trace(R, x, self.s) / (diff @ diff + self.s.uav_altitude ** 2)

            assert taylor.H == pytest.approx(ratio(o))
            np.testing.assert_allclose(taylor.e, central_difference(ratio, o.copy(), 1e-3),
                                       rtol=1e-5, atol=1e-8 * taylor.H / self.s.uav_altitude)

    def test_qos_ball_matches_sinr_form(self):
        agree = 0
        for _ in range(100):
            beams = random_beams(self.s, self.association, self.rng)
            positions = random_positions(self.s, self.rng)
            rhat = exact_rhat(self.s, positions) * self.rng.uniform(0.5, 1.5, size=(self.s.U, self.s.K))
            terms = SurrogateTerms.build(self.s, beams, self.association, self.layout)
            k = int(self.rng.integers(self.s.K))
            u = self.association.owner[k]
            C_k = self.rng.uniform(0.0, self.s.rate_threshold[k])
            bound = qos_ball_bound(self.s, terms, self.association, k, C_k, rhat)
            diff = positions[u] - self.s.cs_positions[k]
            agree += bool(diff @ diff <= bound) == qos_surrogate_holds(
                self.s, terms, self.association, k, C_k, positions[u], rhat)
        assert agree == 100

    def test_qos_ball_dropped_when_common_covers_threshold(self):
        beams = random_beams(self.s, self.association, self.rng)
        terms = SurrogateTerms.build(self.s, beams, self.association, self.layout)
        rhat = exact_rhat(self.s, random_positions(self.s, self.rng))
        assert qos_ball_bound(self.s, terms, self.association, 0, self.s.rate_threshold[0], rhat) == np.inf

    def test_sensing_requirement(self):
        expected = self.s.ts_range_sq * self.s.noise_power * self.s.sensing_threshold / self.s.beta0
        assert sensing_requirement(self.s) == pytest.approx(expected)


class TestDeploymentProgram:
    """Structure of the convex deployment step"""

    @pytest.fixture(autouse=True)
    def setup(self, scenario, association):
        self.s = scenario
        self.association = association
        rng = np.random.default_rng(5)
        self.beams = random_beams(scenario, association, rng)
        self.positions = association.centroids.copy()
        self.iterate = DeploymentIterate(self.positions, exact_rhat(scenario, self.positions))

    def test_corsma_program(self):
        allocation = np.zeros(self.s.K)
        sub = build_deployment_subproblem(self.s, self.iterate, self.beams, allocation, self.association)
        sub.program.check()
        assert {'rate', 'area', 'slack', 'sensing'} <= set(sub.program.families())
        assert sub.pairs

    def test_noma_has_no_slacks(self):
        from radio.channel import channel_tensor
        layout = layout_for('NOMA', self.association, channel_tensor(self.s, self.positions))
        sub = build_deployment_subproblem(self.s, self.iterate, self.beams, np.zeros(self.s.K),
                                          self.association, layout)
        assert sub.pairs == []
        assert 'slack' not in sub.program.families()

    def test_trust_region(self):
        sub = build_deployment_subproblem(self.s, self.iterate, self.beams, np.zeros(self.s.K),
                                          self.association, trust_region=10.0)
        trust = [c for c in sub.program.constraints if c.family == 'trust']
        assert len(trust) == 4 * self.s.U
        assert all(isinstance(c, NonNeg) for c in trust)

    def test_slack_bound_is_tight_at_expansion_point(self):
        sub = build_deployment_subproblem(self.s, self.iterate, self.beams, np.zeros(self.s.K), self.association)
        L = self.s.uav_altitude
        values = {name: np.zeros(v.shape) for name, v in sub.program.variables.items()}
        values['pos'] = (self.positions / L).reshape(-1)
        for i, k in sub.pairs:
            values[f'rhat_{i}_{k}'][0] = self.iterate.rhat[i, k] / L ** 2
        slack = [c for c in sub.program.constraints if c.family == 'slack']
        for constraint in slack:
            assert constraint.expr.value(values) == pytest.approx(0.0, abs=1e-9)
