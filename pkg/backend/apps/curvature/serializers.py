"""
Serializers for triangles, bound reports and energy decompositions.
"""
from rest_framework import serializers

from apps.core.fields import ExtendedFloatField

from .triangles import Triangle


class TriangleSerializer(serializers.Serializer):
    """
    Serializer for a triangle given by its three vertices.
    """
    vertices = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=1),
        min_length=3,
        max_length=3,
    )

    def validate_vertices(self, value):
        """Ensure the vertices share a dimension and are distinct"""
        if len({len(v) for v in value}) > 1:
            raise serializers.ValidationError("All vertices must have the same dimension.")
        if len({tuple(v) for v in value}) < 3:
            raise serializers.ValidationError("Vertices must be pairwise distinct.")
        return value

    def create(self, validated_data):
        """Create and return the triangle"""
        return Triangle(*validated_data['vertices'])


class TriangleBoundReportSerializer(serializers.Serializer):
    p = serializers.FloatField()
    upper = serializers.FloatField()
    lower = ExtendedFloatField()
    upper_margin = serializers.FloatField()
    lower_margin = ExtendedFloatField()
    passed = serializers.BooleanField()


class TriangleCorpusSummarySerializer(serializers.Serializer):
    """
    Read-only representation of a triangle corpus run.
    """
    phi = serializers.CharField()
    count = serializers.IntegerField()
    upper_violations = serializers.IntegerField()
    lower_violations = serializers.IntegerField()
    min_upper_margin = ExtendedFloatField()
    min_lower_margin = ExtendedFloatField()
    passed = serializers.BooleanField()


class EnergyDecompositionSerializer(serializers.Serializer):
    pair_term = serializers.FloatField()
    triple_term = serializers.FloatField()
    total = serializers.FloatField()
