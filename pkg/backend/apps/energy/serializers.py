"""
Serializers for energy ratio records and corpus summaries.
"""
from rest_framework import serializers

from apps.core.fields import ExtendedFloatField


class RatioRecordSerializer(serializers.Serializer):
    """
    Read-only representation of one energy / Wolff energy comparison.
    """
    instance_id = serializers.IntegerField()
    n_atoms = serializers.IntegerField()
    phi = serializers.CharField()
    s = serializers.FloatField()
    eps = serializers.FloatField()
    energy = serializers.FloatField()
    wolff = serializers.FloatField()
    ratio = ExtendedFloatField()
    reference = ExtendedFloatField()
    violation = serializers.BooleanField()


class NormWolffReportSerializer(serializers.Serializer):
    norm_squared = serializers.FloatField()
    wolff_sup = serializers.FloatField()
    wolff_mean = serializers.FloatField()
    total_mass = serializers.FloatField()
    upper_ratio = serializers.FloatField()
    lower_ratio = serializers.FloatField()


class RatioCorpusSummarySerializer(serializers.Serializer):
    count = serializers.IntegerField()
    quantiles = serializers.DictField(child=serializers.FloatField())
    spread = ExtendedFloatField()
    anomalies = serializers.IntegerField()
    violations = serializers.IntegerField()
    min_margin = ExtendedFloatField()
    passed = serializers.BooleanField()
