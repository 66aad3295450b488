"""
Serializers for Wolff potential options and values.
"""
from rest_framework import serializers

from apps.core.fields import ExtendedFloatField

from .potentials import WolffKind, WolffOptions


class WolffOptionsSerializer(serializers.Serializer):
    """
    Serializer for the puncture flag and truncation floor of a potential.
    """
    kind = serializers.ChoiceField(choices=[k.value for k in WolffKind], required=False, default='phi')
    puncture = serializers.BooleanField(required=False, default=True)
    eps_floor = serializers.FloatField(required=False, default=0.0)

    def validate_eps_floor(self, value):
        """Ensure the floor is nonnegative"""
        if value < 0:
            raise serializers.ValidationError("The truncation floor must be nonnegative.")
        return value

    def create(self, validated_data):
        """Create and return the options"""
        return WolffOptions(puncture=validated_data['puncture'], eps_floor=validated_data['eps_floor'])


class WolffValueSerializer(serializers.Serializer):
    value = ExtendedFloatField()
    punctured = serializers.BooleanField()
    eps_floor = serializers.FloatField()
