"""
End-to-end runs of the optimization pipeline on the bundled scenario
"""
import json
from dataclasses import replace

import numpy as np
import pytest
from django.conf import settings
from django.core.management import call_command

from baselines.rates import single_user_capacity
from experiments.models import ExperimentRun
from experiments.pipeline import RunOptions, run
from experiments.sweeps import point_config
from placement.association import association_from_clusters
from placement.deployment import optimize_deployment
from radio.channel import channel_tensor
from radio.rates import BeamformingState
from scenarios.loader import load_scenario, read_config, scenario_from_config

pytestmark = pytest.mark.slow

OPTIONS = RunOptions(max_outer=5, n_samples=30)


@pytest.fixture(scope='module')
def scenario():
    return load_scenario(settings.CORSMA['DEFAULT_SCENARIO'])


@pytest.fixture(scope='module')
def solutions(scenario):
    """One run per scheme on the default scenario, shared by the tests below."""
    return {scheme: run(scenario, replace(OPTIONS, scheme=scheme)) for scheme in ('CORSMA', 'SDMA', 'NOMA', 'OMA')}


class TestCorsmaRun:
    """The coordinated RSMA run on the default scenario"""

    def test_finishes_feasible(self, scenario, solutions):
        solution = solutions['CORSMA']
        assert solution.status in ('converged', 'max_iter')
        report = solution.report
        assert report.is_feasible(scenario)
        assert np.all(solution.beams.uav_powers() <= scenario.p_max * (1 + 1e-6))
        assert np.all(report.total_rates >= scenario.rate_threshold * (1 - 1e-6))
        assert report.sensing_snr >= scenario.sensing_threshold * (1 - 1e-6)
        assert report.allocation.sum() <= report.common_rate * (1 + 1e-6) + 1e-6

    def test_positions_stay_in_area(self, scenario, solutions):
        x_min, y_min, x_max, y_max = scenario.area
        for positions in solutions['CORSMA'].path:
            assert np.all((positions[:, 0] >= x_min - 1e-6) & (positions[:, 0] <= x_max + 1e-6))
            assert np.all((positions[:, 1] >= y_min - 1e-6) & (positions[:, 1] <= y_max + 1e-6))

    def test_result_record_is_json(self, solutions):
        record = json.loads(json.dumps(solutions['CORSMA'].to_dict()))
        assert record['scheme'] == 'CORSMA'
        assert record['tool_version'] == settings.TOOL_VERSION
        assert len(record['beams']['private']['real']) == 3

    def test_beats_comparison_schemes(self, solutions):
        corsma = solutions['CORSMA'].report.wsr
        assert corsma >= solutions['SDMA'].report.wsr * (1 - 1e-3)
        assert corsma >= solutions['NOMA'].report.wsr * (1 - 1e-3)
        assert corsma > solutions['OMA'].report.wsr

    def test_more_power_more_rate(self, scenario, solutions):
        weaker = run(scenario.with_changes(p_max=10 ** (20 / 10) / 1000), OPTIONS)
        assert solutions['CORSMA'].report.wsr > weaker.report.wsr

    def test_beamforming_stages_converge(self, solutions):
        for stage in solutions['CORSMA'].beamforming_traces:
            assert stage['status'] == 'converged'
            assert stage['iterations'] <= 15


class TestSingleUserDeployment:
    """One UAV serving one CS moves toward it"""

    def test_moves_toward_cs(self, scenario):
        s = scenario.with_changes(U=1, K=1, cs_positions=[[100.0, 100.0]], rate_threshold=[0.0],
                                  weights=[1.0], sensing_threshold=0.0)
        association = association_from_clusters([[0]], s.cs_positions)
        start = np.array([[400.0, 400.0]])
        h = channel_tensor(s, start)[0, 0]
        beams = BeamformingState.zeros(1, 1, s.Nt)
        beams.private[0, 0] = h / np.linalg.norm(h) * np.sqrt(s.p_max)
        result = optimize_deployment(s, start, beams, np.zeros(1), association, max_iter=15)
        distances = [np.linalg.norm(p[0] - s.cs_positions[0]) for p in result.path]
        assert distances[-1] < distances[0]
        assert all(b <= a + 1e-9 for a, b in zip(distances, distances[1:]))
        values = [entry['objective'] for entry in result.trace]
        assert all(b >= a - 1e-6 * abs(a) for a, b in zip(values, values[1:]))


@pytest.mark.django_db
class TestRunScenarioCommand:
    def test_writes_result_and_record(self, tmp_path):
        call_command('run_scenario', '--option', 'max_outer=2', '--option', 'n_samples=10', out_dir=str(tmp_path))
        directories = list(tmp_path.iterdir())
        assert len(directories) == 1
        manifest = json.loads((directories[0] / 'manifest.json').read_text())
        assert [entry['file'] for entry in manifest['files']] == ['result.json', 'record.json']
        record = json.loads((directories[0] / 'record.json').read_text())
        stored = ExperimentRun.objects.get(scheme='CORSMA')
        assert record['id'] == stored.id
        assert record['status_display'] == stored.get_status_display()


class TestOuterLoop:
    def test_converges_within_cap(self, scenario):
        opts = RunOptions(n_samples=30)
        solution = run(scenario, opts)
        assert solution.status == 'converged'
        assert solution.iterations < opts.max_outer
        assert len(solution.history) == solution.iterations


class TestSingleUserRun:
    """The full pipeline reaches point-to-point capacity for one UAV and one CS"""

    def test_capacity(self, scenario):
        s = scenario.with_changes(U=1, K=1, cs_positions=[[100.0, 100.0]], rate_threshold=[0.0],
                                  weights=[1.0], sensing_threshold=0.0)
        solution = run(s, RunOptions(n_samples=20))
        channel = channel_tensor(s, solution.positions)[0, 0]
        capacity = single_user_capacity(channel, s.p_max, s.bandwidth, s.noise_power)
        assert solution.report.wsr == pytest.approx(capacity, rel=1e-3)
        assert np.linalg.norm(solution.positions[0] - s.cs_positions[0]) < 1.0


class TestTrends:
    """Directions the sweeps are expected to show, at fixed CS positions"""

    def test_stricter_sensing_costs_rate(self, scenario):
        loose = run(scenario.with_changes(sensing_threshold=2.0), OPTIONS)
        strict = run(scenario.with_changes(sensing_threshold=10.0), OPTIONS)
        assert strict.report.wsr <= loose.report.wsr * (1 + 1e-2)

    def test_sensing_grows_with_power(self, scenario):
        opts = replace(OPTIONS, sensing_probe=True)
        low = run(scenario.with_changes(p_max=10 ** (15 / 10) / 1000), opts)
        high = run(scenario.with_changes(p_max=10 ** (30 / 10) / 1000), opts)
        assert high.report.sensing_snr > low.report.sensing_snr

    def test_sensing_grows_with_uavs(self, scenario):
        opts = replace(OPTIONS, sensing_probe=True)
        relaxed = scenario.with_changes(rate_threshold=[0.0] * scenario.K)
        one = run(relaxed.with_changes(U=1), opts)
        three = run(relaxed, opts)
        assert three.report.sensing_snr > one.report.sensing_snr

    @pytest.mark.parametrize('K', [3, 7])
    def test_rsma_leads_across_user_counts(self, scenario, K):
        base = read_config(settings.CORSMA['DEFAULT_SCENARIO'])
        s = scenario_from_config(point_config(base, 'K', K, seed=1))
        corsma = run(s, OPTIONS)
        oma = run(s, replace(OPTIONS, scheme='OMA'))
        assert corsma.report.wsr > oma.report.wsr
