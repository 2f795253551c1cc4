"""
Diff Serializers - machine-readable DiffReport
"""
from rest_framework import serializers


class ClassCountsSerializer(serializers.Serializer):
    element_class = serializers.CharField()
    matched = serializers.IntegerField()
    missing = serializers.IntegerField()
    surplus = serializers.IntegerField()
    precision = serializers.FloatField()
    recall = serializers.FloatField()
    f1 = serializers.FloatField()
    missing_names = serializers.ListField(child=serializers.CharField())
    surplus_names = serializers.ListField(child=serializers.CharField())


class MatchMappingSerializer(serializers.Serializer):
    entity_pairs = serializers.SerializerMethodField()
    unmatched_generated = serializers.ListField(child=serializers.CharField())
    unmatched_gold = serializers.ListField(child=serializers.CharField())
    overlap_pairs = serializers.SerializerMethodField()
    overlap_total = serializers.FloatField()

    def get_entity_pairs(self, obj):
        return [{'generated': a, 'gold': b} for a, b in obj.entity_pairs]

    def get_overlap_pairs(self, obj):
        return [{'generated': a, 'gold': b, 'score': score} for a, b, score in obj.scores]


class DiffReportSerializer(serializers.Serializer):
    classes = ClassCountsSerializer(many=True)
    overall_precision = serializers.FloatField()
    overall_recall = serializers.FloatField()
    overall_f1 = serializers.FloatField()
    mapping = MatchMappingSerializer()
