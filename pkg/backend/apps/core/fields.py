"""
Serializer fields shared by the apps.
"""
import math

from rest_framework import serializers


class ExtendedFloatField(serializers.FloatField):
    """
    Float field that also carries +inf / -inf as the strings 'inf' / '-inf',
    since strict JSON has no infinities. NaN is rendered as null.
    """

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() in ('inf', '+inf', '-inf'):
            return -math.inf if data.strip().startswith('-') else math.inf
        return super().to_internal_value(data)

    def to_representation(self, value):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
