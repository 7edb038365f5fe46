"""
Tests for scenario loading, unit conversion and validation
"""
import copy

import numpy as np
import pytest
from django.conf import settings

from .loader import apply_overrides, load_scenario, parse_override, read_config, scenario_from_config
from .scenario import (
    RadioConstants, ScenarioError, db_to_linear, dbm_to_watts, reference_powers, validate,
)
from .serializers import ScenarioSerializer


@pytest.fixture
def base_config():
    return read_config(settings.CORSMA['DEFAULT_SCENARIO'])


class TestUnits:
    """Decibel conversions"""

    def test_db_to_linear(self):
        assert db_to_linear(-60) == pytest.approx(1e-6)
        assert db_to_linear(0) == pytest.approx(1.0)

    def test_dbm_to_watts(self):
        assert dbm_to_watts(25) == pytest.approx(0.316227766, rel=1e-8)
        assert dbm_to_watts(-110) == pytest.approx(1e-14)
        assert dbm_to_watts(30) == pytest.approx(1.0)

    def test_reference_powers(self):
        eps0, beta0 = reference_powers(RadioConstants(1.0, 1.0, 1.0, 4 * np.pi, 4 * np.pi))
        assert eps0 == pytest.approx(1.0)
        assert beta0 == pytest.approx(1.0)

    def test_reference_powers_rejects_non_positive(self):
        with pytest.raises(ScenarioError) as exc:
            reference_powers(RadioConstants(1.0, 0.0, 1.0, 0.1, 1.0))
        assert 'gain_comm' in exc.value.errors


class TestScenarioLoading:
    """Scenario files and overrides"""

    def test_default_scenario(self):
        s = load_scenario(settings.CORSMA['DEFAULT_SCENARIO'])
        assert (s.U, s.K, s.Nt, s.Nr) == (3, 5, 8, 8)
        assert s.p_max == pytest.approx(dbm_to_watts(25))
        assert s.noise_power == pytest.approx(1e-14)
        assert s.eps0 == pytest.approx(1e-6)
        assert s.beta0 == pytest.approx(1e-5)
        np.testing.assert_allclose(s.weights, np.full(5, 0.2))
        np.testing.assert_allclose(s.rate_threshold, np.full(5, 1e6))
        np.testing.assert_allclose(s.rx_uav_position, s.ts_position)
        assert s.rx_altitude == s.uav_altitude

    def test_arrays_are_read_only(self, base_config):
        s = scenario_from_config(base_config)
        with pytest.raises(ValueError):
            s.weights[0] = 1.0

    def test_override_replaces_other_spelling(self, base_config):
        merged = apply_overrides(base_config, {'p_max': 1.0})
        assert 'p_max_dbm' not in merged
        assert scenario_from_config(merged).p_max == 1.0

    def test_conflicting_spellings(self, base_config):
        config = copy.deepcopy(base_config)
        config['p_max'] = 1.0
        with pytest.raises(ScenarioError) as exc:
            scenario_from_config(config)
        assert 'p_max_dbm' in exc.value.errors

    def test_parse_override(self):
        assert parse_override('K=4') == ('K', 4)
        assert parse_override('ts_position=[1, 2]') == ('ts_position', [1, 2])
        assert parse_override('channel_mode=RAYLEIGH') == ('channel_mode', 'RAYLEIGH')
        with pytest.raises(ScenarioError):
            parse_override('K')

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_config(tmp_path / 'absent.json')

    def test_cs_drop_is_seeded(self, base_config):
        config = copy.deepcopy(base_config)
        config.pop('cs_positions')
        config['cs_drop_seed'] = 7
        first = scenario_from_config(config)
        second = scenario_from_config(config)
        np.testing.assert_array_equal(first.cs_positions, second.cs_positions)
        assert np.all((first.cs_positions >= 0) & (first.cs_positions <= 500))
        config['cs_drop_seed'] = 8
        assert not np.array_equal(scenario_from_config(config).cs_positions, first.cs_positions)

    def test_fingerprint(self, base_config):
        s = scenario_from_config(base_config)
        assert s.fingerprint() == scenario_from_config(base_config).fingerprint()
        assert s.with_changes(p_max=1.0).fingerprint() != s.fingerprint()


class TestValidation:
    """Invariant violations are reported per field"""

    def test_fewer_cs_than_uavs(self, base_config):
        config = apply_overrides(base_config, {'U': 6})
        with pytest.raises(ScenarioError) as exc:
            scenario_from_config(config)
        assert 'K' in exc.value.errors

    def test_weights_must_sum_to_one(self, base_config):
        config = apply_overrides(base_config, {'weights': [0.5, 0.5, 0.5, 0.5, 0.5]})
        with pytest.raises(ScenarioError) as exc:
            scenario_from_config(config)
        assert 'weights' in exc.value.errors

    def test_negative_threshold(self, base_config):
        config = apply_overrides(base_config, {'sensing_threshold': -1})
        with pytest.raises(ScenarioError) as exc:
            scenario_from_config(config)
        assert 'sensing_threshold' in exc.value.errors

    def test_validate_passes_valid_scenario(self, base_config):
        s = scenario_from_config(base_config)
        assert validate(s) is s

    def test_validate_collects_every_error(self, base_config):
        s = scenario_from_config(base_config).with_changes(p_max=0.0, bandwidth=-1.0)
        with pytest.raises(ScenarioError) as exc:
            validate(s)
        assert {'p_max', 'bandwidth'} <= set(exc.value.errors)


class TestPointFields:
    """Every 2-D point field owns its child field"""

    def test_point_fields_are_independent(self):
        fields = ScenarioSerializer().fields
        children = [fields['cs_positions'].child.child, fields['ts_position'].child,
                    fields['rx_uav_position'].child]
        assert len({id(child) for child in children}) == 3

    @pytest.mark.parametrize('name, value', [
        ('ts_position', [1.0, 2.0, 3.0]),
        ('rx_uav_position', [1.0]),
        ('cs_positions', [[0.0, 0.0], [1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]]),
    ])
    def test_point_length_is_checked(self, base_config, name, value):
        with pytest.raises(ScenarioError) as exc:
            scenario_from_config(apply_overrides(base_config, {name: value}))
        assert name in exc.value.errors
