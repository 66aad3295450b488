"""
Serializers for linear programs and capacity estimates.
"""
from rest_framework import serializers

from apps.core.fields import ExtendedFloatField

from .simplex import LinearProgram


class LinearProgramSerializer(serializers.Serializer):
    """
    Serializer for a program max c.x subject to A x <= b, x >= 0.
    """
    c = serializers.ListField(child=serializers.FloatField(), min_length=1)
    A = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    b = serializers.ListField(child=serializers.FloatField())

    def validate_b(self, value):
        """Ensure the zero vector is feasible"""
        if any(v < 0 for v in value):
            raise serializers.ValidationError("Right-hand sides must be nonnegative.")
        return value

    def validate(self, attrs):
        """
        Every row must have one coefficient per variable and one right-hand side.
        """
        n = len(attrs['c'])
        if any(len(row) != n for row in attrs['A']):
            raise serializers.ValidationError({'A': f"Every row needs {n} coefficients."})
        if len(attrs['A']) != len(attrs['b']):
            raise serializers.ValidationError({'b': "Need one right-hand side per row."})
        return attrs

    def create(self, validated_data):
        """Create and return the program"""
        return LinearProgram(validated_data['c'], validated_data['A'], validated_data['b'])


class LPSolutionSerializer(serializers.Serializer):
    value = serializers.FloatField()
    x = serializers.SerializerMethodField()
    binding = serializers.ListField(child=serializers.IntegerField())
    iterations = serializers.IntegerField()

    def get_x(self, obj):
        return obj.x.tolist()


class CapacityEstimateSerializer(serializers.Serializer):
    """
    Read-only representation of a capacity estimate with its certificate digest.
    """
    value = ExtendedFloatField()
    method = serializers.SerializerMethodField()
    h = serializers.FloatField()
    certificate = serializers.DictField()
    flags = serializers.ListField(child=serializers.CharField())
    digest = serializers.SerializerMethodField()

    def get_method(self, obj):
        return obj.method.value

    def get_digest(self, obj):
        return obj.digest()


class ComparisonRowSerializer(serializers.Serializer):
    instance_id = serializers.IntegerField()
    n_atoms = serializers.IntegerField()
    first = serializers.FloatField()
    second = serializers.FloatField()
    ratio = ExtendedFloatField()
