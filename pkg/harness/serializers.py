"""
Harness Serializers - experiment config validation and run history output
"""
from django.utils.text import slugify
from rest_framework import serializers

from harness.domain import PromptStrategy, ProviderKind
from harness.models import ExperimentRecordEntry, ExperimentRun

IDENTIFIER = r'^[A-Za-z0-9][\w.-]*$'


class ProviderSpecSerializer(serializers.Serializer):
    id = serializers.RegexField(IDENTIFIER, max_length=100)
    kind = serializers.ChoiceField(choices=ProviderKind.choices)
    model = serializers.CharField(required=False, default='', allow_blank=True)
    endpoint = serializers.URLField(required=False, allow_null=True, default=None)
    credential_env = serializers.CharField(required=False, default='OPENAI_API_KEY')
    replay_dir = serializers.CharField(required=False, allow_null=True, default=None)
    temperature = serializers.FloatField(required=False, default=0.0, min_value=0.0, max_value=2.0)
    max_retries = serializers.IntegerField(required=False, default=2, min_value=0, max_value=10)

    def validate(self, attrs):
        if attrs['kind'] == ProviderKind.OPENAI and not attrs['model']:
            raise serializers.ValidationError({'model': "required for openai providers"})
        if attrs['kind'] == ProviderKind.REPLAY and not attrs['replay_dir']:
            raise serializers.ValidationError({'replay_dir': "required for replay providers"})
        return attrs


class ScenarioSerializer(serializers.Serializer):
    """A scenario file path, or {"path": ..., "gold": ...} to diff it against its own gold model"""
    path = serializers.CharField()
    gold = serializers.CharField(required=False, allow_null=True, default=None)

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = {'path': data}
        return super().to_internal_value(data)


class ExperimentConfigSerializer(serializers.Serializer):
    scenarios = ScenarioSerializer(many=True, allow_empty=False)
    strategies = serializers.ListField(
        child=serializers.ChoiceField(choices=PromptStrategy.choices), min_length=1,
    )
    providers = ProviderSpecSerializer(many=True, allow_empty=False)
    output_root = serializers.CharField(required=False, default='runs')
    parallelism = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    # default gold for scenarios that name none
    gold = serializers.CharField(required=False, allow_null=True, default=None)
    format_spec = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_providers(self, value):
        ids = [provider['id'] for provider in value]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise serializers.ValidationError(f"duplicate provider ids: {', '.join(duplicates)}")

        # ids name record directories
        by_directory = {}
        for provider_id in ids:
            by_directory.setdefault(slugify(provider_id), []).append(provider_id)
        clashes = sorted(', '.join(group) for group in by_directory.values() if len(group) > 1)
        if clashes:
            raise serializers.ValidationError(f"provider ids share a record directory: {'; '.join(clashes)}")
        return value

    def validate_strategies(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError("strategies must not repeat")
        return value


class ExperimentRecordEntrySerializer(serializers.ModelSerializer):
    class Meta:
        model = ExperimentRecordEntry
        fields = [
            'scenario_id', 'strategy', 'provider_id', 'outcome', 'level',
            'overall_f1', 'retries', 'template_version', 'record_dir',
        ]


class ExperimentRunSerializer(serializers.ModelSerializer):
    records = ExperimentRecordEntrySerializer(many=True, read_only=True)

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'config_path', 'output_root', 'status', 'analyzed',
            'total_records', 'ok_records', 'extraction_failed_records', 'provider_error_records',
            'error_message', 'started_at', 'completed_at', 'processing_duration', 'records',
        ]
