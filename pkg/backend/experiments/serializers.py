from rest_framework import serializers

from baselines.schemes import SchemeId
from radio.channel import ChannelMode
from .models import ExperimentRun, Sweep
from .pipeline import RunOptions


# Scenario fields a sweep may vary; p_max is swept in dBm
SWEEP_PARAMETERS = ('sensing_threshold', 'K', 'U', 'p_max_dbm', 'rate_threshold', 'Nt')
INTEGER_PARAMETERS = ('K', 'U', 'Nt')


class RunOptionsSerializer(serializers.Serializer):
    """Validates run options and builds RunOptions"""
    seed = serializers.IntegerField(default=0)
    channel_mode = serializers.ChoiceField(choices=ChannelMode.choices, default=ChannelMode.LOS_ONES)
    scheme = serializers.ChoiceField(choices=SchemeId.choices, default=SchemeId.CORSMA)
    eps_outer = serializers.FloatField(default=1e-3, min_value=1e-12)
    eps_deployment = serializers.FloatField(default=1e-3, min_value=1e-12)
    eps_beamforming = serializers.FloatField(default=1e-3, min_value=1e-12)
    max_outer = serializers.IntegerField(default=20, min_value=1)
    max_deployment = serializers.IntegerField(default=30, min_value=1)
    max_beamforming = serializers.IntegerField(default=20, min_value=1)
    n_samples = serializers.IntegerField(default=100, min_value=1)
    sensing_beam = serializers.BooleanField(default=True)
    sensing_probe = serializers.BooleanField(default=False)
    include_sensing_interference = serializers.BooleanField(default=False)
    trust_region = serializers.FloatField(required=False, allow_null=True, min_value=0.0)

    def create(self, validated_data):
        return RunOptions(**validated_data)


class SweepSpecSerializer(serializers.Serializer):
    """Validates a sweep specification"""
    parameter = serializers.ChoiceField(choices=SWEEP_PARAMETERS)
    values = serializers.ListField(child=serializers.FloatField(), min_length=1)
    schemes = serializers.ListField(
        child=serializers.ChoiceField(choices=SchemeId.choices),
        min_length=1,
        default=lambda: [s.value for s in SchemeId],
    )
    seeds = serializers.IntegerField(default=1, min_value=1)
    base_scenario = serializers.CharField(required=False, allow_blank=True)
    options = serializers.DictField(required=False, default=dict)

    def validate(self, data):
        if data['parameter'] in INTEGER_PARAMETERS:
            bad = [v for v in data['values'] if v != int(v) or v < 1]
            if bad:
                raise serializers.ValidationError({'values': [f'{data["parameter"]} takes positive integers, got {bad}']})
        options = RunOptionsSerializer(data=data.get('options') or {})
        if not options.is_valid():
            raise serializers.ValidationError({'options': options.errors})
        data['run_options'] = options.validated_data
        return data


class ExperimentRunSerializer(serializers.ModelSerializer):
    """Serializer for stored runs"""
    status_display = serializers.CharField(source='get_status_display', read_only=True)

    class Meta:
        model = ExperimentRun
        fields = ('id', 'sweep', 'scenario_hash', 'scheme', 'seed', 'parameter', 'value',
                  'status', 'status_display', 'wsr', 'common_ratio', 'sensing_snr',
                  'iterations', 'runtime', 'options', 'result_path', 'error', 'created_at')
        read_only_fields = ('id', 'created_at')


class SweepSerializer(serializers.ModelSerializer):
    run_count = serializers.IntegerField(source='runs.count', read_only=True)

    class Meta:
        model = Sweep
        fields = ('id', 'parameter', 'values', 'schemes', 'seeds', 'scenario_hash',
                  'out_dir', 'tool_version', 'status', 'run_count', 'created_at', 'finished_at')
        read_only_fields = ('id', 'created_at')
