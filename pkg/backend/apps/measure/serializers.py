"""
Serializers for measures, set generators and growth certificates.
"""
import numpy as np
from rest_framework import serializers

from . import generators
from .measures import AtomicMeasure
from .storage import load_measure

GENERATOR_KINDS = ('random', 'ball', 'interval', 'line', 'file')


class MeasureSerializer(serializers.Serializer):
    """
    Serializer for an atomic measure given as coordinate rows and masses.
    """
    points = serializers.ListField(child=serializers.ListField(child=serializers.FloatField(), min_length=1))
    masses = serializers.ListField(child=serializers.FloatField())

    def validate_masses(self, value):
        """Ensure every mass is strictly positive"""
        if any(m <= 0 for m in value):
            raise serializers.ValidationError("Masses must be strictly positive.")
        return value

    def validate(self, attrs):
        """
        Rows must share one dimension and match the masses one to one.
        """
        points, masses = attrs['points'], attrs['masses']
        if len(points) != len(masses):
            raise serializers.ValidationError("Need exactly one mass per point.")
        if len({len(p) for p in points}) > 1:
            raise serializers.ValidationError({'points': "All points must have the same dimension."})
        if len({tuple(p) for p in points}) != len(points):
            raise serializers.ValidationError({'points': "Points must be pairwise distinct."})
        return attrs

    def create(self, validated_data):
        """Create and return the measure"""
        return AtomicMeasure(validated_data['points'], validated_data['masses'])

    def to_representation(self, instance):
        return {
            'points': instance.points.tolist(),
            'masses': instance.masses.tolist(),
        }


class SetGeneratorSerializer(serializers.Serializer):
    """
    Serializer for a candidate point set / measure generator.
    """
    kind = serializers.ChoiceField(choices=GENERATOR_KINDS)
    n = serializers.IntegerField(min_value=1, required=False, default=16)
    d = serializers.IntegerField(min_value=1, max_value=3, required=False, default=1)
    radius = serializers.FloatField(required=False, default=1.0)
    length = serializers.FloatField(required=False, default=1.0)
    path = serializers.CharField(required=False)

    def validate_radius(self, value):
        """Ensure the radius is positive"""
        if value <= 0:
            raise serializers.ValidationError("Radius must be positive.")
        return value

    def validate_length(self, value):
        """Ensure the length is positive"""
        if value <= 0:
            raise serializers.ValidationError("Length must be positive.")
        return value

    def validate(self, attrs):
        if attrs['kind'] == 'file' and not attrs.get('path'):
            raise serializers.ValidationError({'path': "The file generator needs a path."})
        return attrs

    def build_points(self, rng):
        """Generate the point set described by the validated data."""
        data = self.validated_data
        kind, n, d = data['kind'], data['n'], data['d']
        if kind == 'random':
            return generators.random_cloud(rng, n, d)
        if kind == 'ball':
            if d == 1:
                return generators.interval_grid(n, data['radius'])
            return generators.ball_grid(d, data['radius'], n)
        if kind == 'interval':
            return generators.interval_grid(n, data['radius'])
        if kind == 'line':
            return generators.line_points(n, data['length'], d)
        return load_measure(data['path']).points


class GrowthCertificateSerializer(serializers.Serializer):
    """
    Read-only representation of a GrowthCertificate.
    """
    h = serializers.FloatField()
    pairs_checked = serializers.IntegerField()
    worst_ratio = serializers.FloatField()
    worst_radius = serializers.FloatField()
    worst_center = serializers.SerializerMethodField()
    passed = serializers.BooleanField()

    def get_worst_center(self, obj):
        return np.asarray(obj.worst_center).tolist()
