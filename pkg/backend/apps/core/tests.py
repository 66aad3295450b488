import math

import numpy as np
from django.test import SimpleTestCase
from rest_framework import serializers

from .arrays import compensated_sum, frozen, geometric_grid
from .exceptions import ConfigError, HypothesisError, InvalidFunctionError, RangeError, WolffcapError
from .fields import ExtendedFloatField


class ValueSerializer(serializers.Serializer):
    value = ExtendedFloatField()


class ExtendedFloatFieldTests(SimpleTestCase):
    """Test infinities and NaN through strict JSON"""

    def test_representation(self):
        """Test infinities become strings and NaN becomes null"""
        self.assertEqual(ValueSerializer({'value': math.inf}).data['value'], 'inf')
        self.assertEqual(ValueSerializer({'value': -math.inf}).data['value'], '-inf')
        self.assertIsNone(ValueSerializer({'value': math.nan}).data['value'])
        self.assertEqual(ValueSerializer({'value': np.float64(0.25)}).data['value'], 0.25)

    def test_parsing(self):
        """Test the strings 'inf' and '-inf' are read back"""
        for text, expected in (('inf', math.inf), ('-inf', -math.inf), (' +Inf ', math.inf), ('1.5', 1.5)):
            serializer = ValueSerializer(data={'value': text})
            self.assertTrue(serializer.is_valid(), serializer.errors)
            self.assertEqual(serializer.validated_data['value'], expected)

    def test_rejects_text(self):
        """Test other strings are invalid"""
        serializer = ValueSerializer(data={'value': 'infinity-ish'})
        self.assertFalse(serializer.is_valid())


class ArrayHelperTests(SimpleTestCase):
    """Test read-only copies, compensated sums and geometric grids"""

    def test_frozen(self):
        """Test the copy is read-only and the dimension is checked"""
        source = [1, 2, 3]
        arr = frozen(source)
        self.assertEqual(arr.dtype, np.float64)
        with self.assertRaises(ValueError):
            arr[0] = 5.0
        with self.assertRaises(ValueError):
            frozen([[1.0]], ndim=1)

    def test_compensated_sum(self):
        """Test cancellation that defeats naive summation"""
        values = [1e16, 1.0, -1e16, 1.0]
        self.assertEqual(compensated_sum(values), 2.0)
        rows = np.array([values, [0.1] * 4])
        np.testing.assert_array_equal(compensated_sum(rows, axis=1), [2.0, math.fsum([0.1] * 4)])
        np.testing.assert_array_equal(compensated_sum(rows.T, axis=0), [2.0, math.fsum([0.1] * 4)])

    def test_geometric_grid(self):
        """Test both endpoints are kept and nonpositive ends refused"""
        grid = geometric_grid(2.0 ** -10, 2.0 ** 10, 21)
        self.assertEqual(grid.size, 21)
        self.assertAlmostEqual(grid[10], 1.0, delta=1e-15)
        self.assertAlmostEqual(grid[-1], 1024.0, delta=1e-12)
        with self.assertRaises(ValueError):
            geometric_grid(0.0, 1.0, 5)


class ExceptionTests(SimpleTestCase):
    """Test the shared exception hierarchy"""

    def test_config_error_message(self):
        """Test the line number prefixes the message"""
        exc = ConfigError("duplicate key 'h'", line=4, field='h')
        self.assertEqual(str(exc), "line 4: duplicate key 'h'")
        self.assertEqual(exc.field, 'h')
        self.assertEqual(str(ConfigError('no file')), 'no file')

    def test_invalid_function(self):
        """Test the offending argument is kept"""
        exc = InvalidFunctionError(200.0, math.inf)
        self.assertEqual(exc.t, 200.0)
        self.assertIn('t=200.0', str(exc))

    def test_hierarchy(self):
        """Test argument errors are also ValueErrors"""
        self.assertTrue(issubclass(RangeError, ValueError))
        self.assertTrue(issubclass(HypothesisError, WolffcapError))
