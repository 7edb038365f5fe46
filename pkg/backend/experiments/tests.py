"""
Tests for run options, sweeps, stored runs and the management commands
"""
import json

import numpy as np
import pandas as pd
import pytest
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError

from scenarios.loader import load_scenario, read_config
from .models import ExperimentRun, Sweep
from .pipeline import RunOptions, convergence_check
from .selftest import check_invariants
from .serializers import ExperimentRunSerializer, RunOptionsSerializer, SweepSerializer, SweepSpecSerializer
from .sweeps import Manifest, new_run_directory, point_config, run_point, summarize


@pytest.fixture
def base_config():
    return read_config(settings.CORSMA['DEFAULT_SCENARIO'])


class TestConvergenceCheck:
    """Outer-loop stopping rule"""

    def test_empty_history(self):
        with pytest.raises(ValueError):
            convergence_check([], 1e-3, 20)

    def test_first_entry_continues(self):
        assert convergence_check([5.0], 1e-3, 20) == (False, None)

    def test_small_change_converges(self):
        assert convergence_check([100.0, 100.05], 1e-3, 20) == (True, 'converged')

    def test_iteration_limit(self):
        assert convergence_check([100.0, 120.0], 1e-3, 2) == (True, 'max_iter')
        assert convergence_check([100.0], 1e-3, 1) == (True, 'max_iter')

    def test_large_change_continues(self):
        assert convergence_check([100.0, 120.0], 1e-3, 20) == (False, None)


class TestRunOptions:
    """Validation of pipeline options"""

    def test_defaults(self):
        opts = RunOptions()
        assert opts.scheme == 'CORSMA'
        assert opts.channel_mode == 'LOS_ONES'
        assert opts.objective == 'wsr'
        assert RunOptions(sensing_probe=True).objective == 'sensing'

    @pytest.mark.parametrize('changes', [
        {'eps_outer': 0.0},
        {'max_outer': 0},
        {'n_samples': 0},
        {'scheme': 'TDMA'},
        {'channel_mode': 'FREE_SPACE'},
    ])
    def test_rejects(self, changes):
        with pytest.raises(ValueError):
            RunOptions(**changes)

    def test_serializer_builds_options(self):
        serializer = RunOptionsSerializer(data={'scheme': 'NOMA', 'seed': 3, 'trust_region': 25.0})
        assert serializer.is_valid(), serializer.errors
        opts = serializer.save()
        assert isinstance(opts, RunOptions)
        assert (opts.scheme, opts.seed, opts.trust_region) == ('NOMA', 3, 25.0)

    def test_serializer_errors(self):
        serializer = RunOptionsSerializer(data={'n_samples': 0, 'scheme': 'TDMA'})
        assert not serializer.is_valid()
        assert {'n_samples', 'scheme'} <= set(serializer.errors)


class TestSweepSpec:
    """Sweep specification files"""

    def test_defaults(self):
        serializer = SweepSpecSerializer(data={'parameter': 'sensing_threshold', 'values': [2, 4]})
        assert serializer.is_valid(), serializer.errors
        spec = serializer.validated_data
        assert spec['schemes'] == ['CORSMA', 'SDMA', 'NOMA', 'OMA']
        assert spec['seeds'] == 1
        assert spec['run_options']['max_outer'] == 20
        assert 'trust_region' not in spec['run_options']

    def test_integer_parameters(self):
        serializer = SweepSpecSerializer(data={'parameter': 'K', 'values': [3, 4.5]})
        assert not serializer.is_valid()
        assert 'values' in serializer.errors

    def test_unknown_parameter(self):
        serializer = SweepSpecSerializer(data={'parameter': 'bandwidth', 'values': [1e6]})
        assert not serializer.is_valid()

    def test_invalid_options(self):
        serializer = SweepSpecSerializer(data={'parameter': 'U', 'values': [1], 'options': {'max_outer': 0}})
        assert not serializer.is_valid()
        assert 'options' in serializer.errors

    def test_bundled_specs_are_valid(self):
        for name in ('sweep_sensing_threshold', 'sweep_users', 'sweep_power_sensing', 'sweep_uavs_sensing'):
            data = read_config(settings.CORSMA['DEFAULT_SCENARIO'].parent / f'{name}.json')
            serializer = SweepSpecSerializer(data=data)
            assert serializer.is_valid(), (name, serializer.errors)


class TestSweepPoints:
    """Per-point configs, failures in rows and the summary table"""

    def test_point_config(self, base_config):
        config = point_config(base_config, 'K', 4.0, seed=7)
        assert config['K'] == 4 and isinstance(config['K'], int)
        assert 'cs_positions' not in config and 'weights' not in config
        assert config['cs_drop_seed'] == 7
        assert 'cs_positions' in base_config

    def test_point_config_replaces_power_spelling(self, base_config):
        config = dict(base_config, p_max=0.1)
        config.pop('p_max_dbm')
        swept = point_config(config, 'p_max_dbm', 20, seed=0)
        assert 'p_max' not in swept
        assert swept['p_max_dbm'] == 20.0

    def test_failed_point_is_recorded(self, base_config):
        row, record = run_point(base_config, 'U', 9, 'CORSMA', 0, {})
        assert record is None
        assert row['status'] == 'error'
        assert row['error'].startswith('ScenarioError')

    def test_summarize(self):
        runs = pd.DataFrame([
            {'kind': 'run', 'parameter': 'K', 'value': 3, 'scheme': 'OMA', 'seed': 0, 'status': 'converged',
             'wsr': 2.0, 'common_ratio': 0.0, 'sensing_snr': 3.0, 'iterations': 4, 'runtime': 1.0},
            {'kind': 'run', 'parameter': 'K', 'value': 3, 'scheme': 'OMA', 'seed': 1, 'status': 'max_iter',
             'wsr': 4.0, 'common_ratio': 0.0, 'sensing_snr': 5.0, 'iterations': 6, 'runtime': 3.0},
            {'kind': 'run', 'parameter': 'K', 'value': 3, 'scheme': 'OMA', 'seed': 2, 'status': 'error',
             'wsr': None, 'common_ratio': None, 'sensing_snr': None, 'iterations': None, 'runtime': 0.5},
        ])
        summary = summarize(runs)
        assert len(summary) == 1
        row = summary.iloc[0]
        assert row['kind'] == 'summary'
        assert row['wsr'] == pytest.approx(3.0)
        assert row['seed'] == 2

    def test_summarize_all_failed(self):
        runs = pd.DataFrame([{'kind': 'run', 'parameter': 'K', 'value': 3, 'scheme': 'OMA', 'status': 'error'}])
        assert summarize(runs).empty


class TestOutputFiles:
    """Run directories and manifests"""

    def test_directories_are_fresh(self, tmp_path):
        first = new_run_directory(tmp_path, 'sweep-K')
        second = new_run_directory(tmp_path, 'sweep-K')
        assert first != second
        assert first.is_dir() and second.is_dir()

    def test_manifest(self, tmp_path):
        manifest = Manifest(tmp_path, 'abc123')
        (tmp_path / 'result.json').write_text('{}')
        manifest.add(tmp_path / 'result.json', 'result')
        data = json.loads(manifest.write().read_text())
        assert data['tool_version'] == settings.TOOL_VERSION
        assert data['files'] == [{'file': 'result.json', 'kind': 'result', 'scenario_hash': 'abc123',
                                  'tool_version': settings.TOOL_VERSION}]


@pytest.mark.django_db
class TestStoredRuns:
    """Sweep and run records"""

    @pytest.fixture(autouse=True)
    def setup(self):
        self.sweep = Sweep.objects.create(
            parameter='K', values=[3, 4], schemes=['CORSMA'], seeds=2,
            scenario_hash='abc', out_dir='results', tool_version=settings.TOOL_VERSION,
        )
        self.run = ExperimentRun.objects.create(
            sweep=self.sweep, scenario_hash='abc', scheme='CORSMA', seed=1, parameter='K', value=3.0,
            status='converged', wsr=1.5e7, common_ratio=0.2, sensing_snr=4.0, iterations=3, runtime=2.5,
        )

    def test_defaults_and_links(self):
        assert self.sweep.status == 'RUNNING'
        assert self.sweep.runs.count() == 1
        assert str(self.run) == 'CORSMA seed=1 (converged)'

    def test_run_serializer(self):
        data = ExperimentRunSerializer(self.run).data
        assert data['status_display'] == 'Converged'
        assert data['wsr'] == 1.5e7
        assert data['sweep'] == self.sweep.id

    def test_sweep_serializer(self):
        data = SweepSerializer(self.sweep).data
        assert data['run_count'] == 1
        assert data['values'] == [3, 4]


class TestCommands:
    """Failure paths of the command-line surface"""

    def test_missing_config(self, tmp_path):
        with pytest.raises(CommandError):
            call_command('run_scenario', config=str(tmp_path / 'absent.json'), out_dir=str(tmp_path))

    def test_invalid_override(self, tmp_path):
        with pytest.raises(CommandError):
            call_command('run_scenario', '--set', 'U=9', out_dir=str(tmp_path))

    def test_invalid_run_option(self, tmp_path):
        with pytest.raises(CommandError):
            call_command('run_scenario', '--option', 'max_outer=0', out_dir=str(tmp_path))

    def test_invalid_sweep_spec(self, tmp_path):
        spec = tmp_path / 'spec.json'
        spec.write_text(json.dumps({'parameter': 'bandwidth', 'values': [1]}))
        with pytest.raises(CommandError):
            call_command('run_sweep', sweep=str(spec), out_dir=str(tmp_path))



class TestInvariantChecks:
    """Structural self-checks on the default scenario"""

    @pytest.mark.parametrize('seed', [0, 1, 2])
    def test_all_pass(self, seed):
        results = check_invariants(load_scenario(settings.CORSMA['DEFAULT_SCENARIO']), np.random.default_rng(seed))
        assert [r.name for r in results if not r.passed] == []
        assert 'NOMA order ignores input order' in [r.name for r in results]

@pytest.mark.slow
class TestSelfTestCommand:
    def test_passes(self, capsys):
        call_command('selftest')
        assert 'All' in capsys.readouterr().out

    def test_injected_fault_is_caught(self):
        with pytest.raises(CommandError) as exc:
            call_command('selftest', inject='sensing-gradient')
        assert 'gradient: sensing' in str(exc.value)
