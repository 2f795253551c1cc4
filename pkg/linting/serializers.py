"""
Lint Serializers - machine-readable findings, levels and checklist
"""
from rest_framework import serializers


class FindingSerializer(serializers.Serializer):
    rule_id = serializers.CharField()
    severity = serializers.CharField()
    location = serializers.CharField()
    message = serializers.CharField()


class LevelAssessmentSerializer(serializers.Serializer):
    level = serializers.SerializerMethodField()
    label = serializers.SerializerMethodField()
    failed_gates = serializers.ListField(child=serializers.CharField())
    manual_review = serializers.ListField(child=serializers.CharField())

    def get_level(self, obj):
        return obj.level.code

    def get_label(self, obj):
        return obj.level.label


class ChecklistItemSerializer(serializers.Serializer):
    category = serializers.CharField()
    text = serializers.CharField()
    status = serializers.CharField()
    rule_ids = serializers.ListField(child=serializers.CharField())
