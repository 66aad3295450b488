"""
Serializers for function specifications and validation reports.
"""
import math
from pathlib import Path

from rest_framework import serializers

from .functions import Convexity, phi_from_spec

FAMILIES = ('power', 'phi_zero', 'tabulated')


class PhiSpecSerializer(serializers.Serializer):
    """
    Serializer for a function of class Phi given by family name and parameters.
    """
    family = serializers.ChoiceField(choices=FAMILIES)
    exponent = serializers.FloatField(required=False)
    t_max = serializers.FloatField(required=False, default=2.0)
    table = serializers.CharField(required=False, allow_blank=False)
    convexity = serializers.ChoiceField(choices=[c.value for c in Convexity], required=False)
    s = serializers.FloatField(required=False)

    def validate_exponent(self, value):
        """Ensure the exponent is positive and finite"""
        if not value > 0 or not math.isfinite(value):
            raise serializers.ValidationError("Exponent must be a positive number.")
        return value

    def validate_t_max(self, value):
        """Ensure the certification range reaches past the logarithmic branch"""
        if value <= math.exp(-1.5):
            raise serializers.ValidationError("t_max must exceed e^-1.5.")
        return value

    def validate_table(self, value):
        """Ensure the table file exists"""
        if not Path(value).is_file():
            raise serializers.ValidationError(f"Table file '{value}' does not exist.")
        return value

    def validate(self, attrs):
        """
        Family specific required parameters.
        """
        family = attrs['family']
        if family == 'power' and 'exponent' not in attrs:
            raise serializers.ValidationError({'exponent': "The power family needs an exponent."})
        if family == 'tabulated' and 'table' not in attrs:
            raise serializers.ValidationError({'table': "The tabulated family needs a table file."})
        return attrs

    def create(self, validated_data):
        """Build and return the function"""
        return phi_from_spec(validated_data)


class PropertyCheckSerializer(serializers.Serializer):
    passed = serializers.BooleanField()
    worst_t = serializers.FloatField(allow_null=True)
    worst_value = serializers.FloatField(allow_null=True)


class ValidationReportSerializer(serializers.Serializer):
    """
    Read-only representation of a ValidationReport.
    """
    family = serializers.CharField()
    convexity = serializers.CharField(source='convexity.value')
    s_doubling = serializers.FloatField()
    s_hat = serializers.FloatField()
    passed = serializers.BooleanField()
    checks = serializers.DictField(child=PropertyCheckSerializer())
    notes = serializers.ListField(child=serializers.CharField())
