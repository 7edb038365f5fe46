from rest_framework import serializers

import numpy as np

from .scenario import (
    DEFAULT_AREA, Scenario, scenario_errors, db_to_linear, dbm_to_watts,
)


def _point(**kwargs):
    """A fresh 2-D point field; DRF binds child fields to their parent."""
    return serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, **kwargs)

# Fields that may also be given in dB / dBm (``<name>_db`` / ``<name>_dbm``)
LOG_SCALE_FIELDS = ('eps0', 'beta0', 'noise_power', 'p_max', 'sensing_threshold')


class ScalarOrListField(serializers.Field):
    """Accepts one number (broadcast later) or a list of numbers."""

    default_error_messages = {'invalid': 'Expected a number or a list of numbers.'}

    def to_internal_value(self, data):
        try:
            if isinstance(data, (list, tuple)):
                return [float(v) for v in data]
            return float(data)
        except (TypeError, ValueError):
            self.fail('invalid')

    def to_representation(self, value):
        return value


def drop_cs_positions(K, area, seed):
    """Uniform CS drop inside the rectangular area."""
    x_min, y_min, x_max, y_max = area
    rng = np.random.default_rng(seed)
    return np.column_stack([
        rng.uniform(x_min, x_max, size=K),
        rng.uniform(y_min, y_max, size=K),
    ])


class ScenarioSerializer(serializers.Serializer):
    """Validates a scenario config mapping and builds the immutable Scenario."""
    U = serializers.IntegerField()
    K = serializers.IntegerField()
    Nt = serializers.IntegerField(default=8)
    Nr = serializers.IntegerField(default=8)
    cs_positions = serializers.ListField(child=_point(), required=False, allow_null=True)
    cs_drop_seed = serializers.IntegerField(required=False, allow_null=True)
    ts_position = _point()
    rx_uav_position = _point(required=False, allow_null=True)
    uav_altitude = serializers.FloatField()
    rx_altitude = serializers.FloatField(required=False, allow_null=True)
    eps0 = serializers.FloatField()
    beta0 = serializers.FloatField()
    noise_power = serializers.FloatField()
    bandwidth = serializers.FloatField()
    p_max = serializers.FloatField()
    rate_threshold = ScalarOrListField()
    sensing_threshold = serializers.FloatField()
    weights = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True)
    area = serializers.ListField(child=serializers.FloatField(), min_length=4, max_length=4, required=False)

    def to_internal_value(self, data):
        data = dict(data)
        conflicts = {}
        for name in LOG_SCALE_FIELDS:
            for suffix, convert in (('_dbm', dbm_to_watts), ('_db', db_to_linear)):
                key = name + suffix
                if key not in data:
                    continue
                raw = data.pop(key)
                if name in data:
                    conflicts[key] = [f'conflicts with {name}; give only one of them']
                    continue
                try:
                    data[name] = float(convert(float(raw)))
                except (TypeError, ValueError):
                    conflicts[key] = ['A valid number is required.']
        if conflicts:
            raise serializers.ValidationError(conflicts)
        return super().to_internal_value(data)

    def validate(self, attrs):
        K = attrs['K']
        area = tuple(attrs.get('area') or DEFAULT_AREA)

        cs_positions = attrs.get('cs_positions')
        if cs_positions is None:
            if attrs.get('cs_drop_seed') is None:
                raise serializers.ValidationError({'cs_positions': ['give cs_positions or cs_drop_seed']})
            cs_positions = drop_cs_positions(K, area, attrs['cs_drop_seed'])

        rate_threshold = attrs['rate_threshold']
        if not isinstance(rate_threshold, list):
            rate_threshold = [rate_threshold] * K

        weights = attrs.get('weights')
        if weights is None:
            weights = [1.0 / K] * K if K > 0 else []

        rx_uav_position = attrs.get('rx_uav_position')
        if rx_uav_position is None:
            rx_uav_position = attrs['ts_position']
        rx_altitude = attrs.get('rx_altitude')
        if rx_altitude is None:
            rx_altitude = attrs['uav_altitude']

        scenario = Scenario(
            U=attrs['U'],
            K=K,
            Nt=attrs['Nt'],
            Nr=attrs['Nr'],
            cs_positions=np.asarray(cs_positions, dtype=float).reshape(-1, 2),
            ts_position=attrs['ts_position'],
            rx_uav_position=rx_uav_position,
            uav_altitude=attrs['uav_altitude'],
            rx_altitude=rx_altitude,
            eps0=attrs['eps0'],
            beta0=attrs['beta0'],
            noise_power=attrs['noise_power'],
            bandwidth=attrs['bandwidth'],
            p_max=attrs['p_max'],
            rate_threshold=rate_threshold,
            sensing_threshold=attrs['sensing_threshold'],
            weights=weights,
            area=area,
        )
        errors = scenario_errors(scenario)
        if errors:
            raise serializers.ValidationError(errors)
        return {'scenario': scenario}

    def create(self, validated_data):
        return validated_data['scenario']
