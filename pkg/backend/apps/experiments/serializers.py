"""
Serializers for experiment configuration files and run summaries.
"""
from rest_framework import serializers

from apps.measure.serializers import SetGeneratorSerializer
from apps.phi.functions import phi_from_spec
from apps.phi.serializers import PhiSpecSerializer

from .config import ExperimentConfig

EXPERIMENTS = (
    'verify-phi',
    'metric',
    'cz-check',
    'energy-ratios',
    'curvature-corpus',
    'capacity',
    'capacity-vs-wolff',
    'corollary22',
    'refinement',
    'acceptance',
)
ALIASES = {'bessel-compare': 'corollary22'}

ACCEPTANCE_CRITERIA = tuple(range(1, 11))
DEFAULT_GRID = {'min': 2.0 ** -10, 'max': 2.0 ** 10, 'points': 201}
DEFAULT_PSI = {'r_max': 2.0, 'n_grid': 2048}


def parse_family(token):
    """'power:0.3' -> {'family': 'power', 'exponent': '0.3'}; 'phi_zero[:t_max]' likewise."""
    name, _, arg = token.strip().partition(':')
    spec = {'family': name}
    if arg:
        spec['t_max' if name == 'phi_zero' else 'exponent'] = arg
    return spec


class GridSerializer(serializers.Serializer):
    """
    Serializer for the geometric grid a function is certified on.
    """
    min = serializers.FloatField(required=False, default=2.0 ** -10)
    max = serializers.FloatField(required=False, default=2.0 ** 10)
    points = serializers.IntegerField(required=False, default=201, min_value=3)

    def validate(self, attrs):
        if not 0 < attrs['min'] < attrs['max']:
            raise serializers.ValidationError("Need 0 < grid.min < grid.max.")
        return attrs


class PsiGridSerializer(serializers.Serializer):
    r_max = serializers.FloatField(required=False, default=2.0)
    n_grid = serializers.IntegerField(required=False, default=2048, min_value=2)

    def validate_r_max(self, value):
        """Ensure the table covers a positive range"""
        if value <= 0:
            raise serializers.ValidationError("r_max must be positive.")
        return value


class ExperimentConfigSerializer(serializers.Serializer):
    """
    Serializer for a whole experiment configuration file.
    """
    experiment = serializers.ChoiceField(choices=EXPERIMENTS + tuple(ALIASES))
    phi = PhiSpecSerializer(required=False)
    families = serializers.ListField(child=serializers.CharField(), required=False, min_length=1)
    generator = SetGeneratorSerializer(required=False)
    h = serializers.FloatField(required=False)
    instances = serializers.IntegerField(required=False, default=20, min_value=1)
    sizes = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False, default=list)
    dimensions = serializers.ListField(
        child=serializers.IntegerField(min_value=1, max_value=3), required=False, default=lambda: [1, 2, 3],
    )
    r_grid = serializers.ListField(child=serializers.FloatField(), required=False, default=list)
    samples = serializers.IntegerField(required=False, default=10000, min_value=1)
    n_atoms = serializers.IntegerField(required=False, default=64, min_value=2)
    grid = GridSerializer(required=False)
    psi = PsiGridSerializer(required=False)
    criteria = serializers.ListField(child=serializers.IntegerField(min_value=1, max_value=10), required=False,
                                     default=list)
    seed = serializers.IntegerField(required=False, min_value=0)

    def validate_h(self, value):
        """Ensure the resolution is positive"""
        if value <= 0:
            raise serializers.ValidationError("Resolution h must be positive.")
        return value

    def validate_r_grid(self, value):
        """Radii must be positive"""
        if any(r <= 0 for r in value):
            raise serializers.ValidationError("Radii must be positive.")
        return value

    def validate_families(self, value):
        """
        Each entry names a family with an optional parameter, e.g. power:0.5.
        """
        specs = []
        errors = {}
        for i, token in enumerate(value):
            spec = PhiSpecSerializer(data=parse_family(token))
            if spec.is_valid():
                specs.append(spec.validated_data)
            else:
                errors[i] = spec.errors
        if errors:
            raise serializers.ValidationError(errors)
        return specs

    def validate(self, attrs):
        """
        Experiments that build point sets need a generator; every experiment
        needs at least one function.
        """
        attrs['experiment'] = ALIASES.get(attrs['experiment'], attrs['experiment'])
        if 'phi' not in attrs and 'families' not in attrs and attrs['experiment'] not in ('corollary22', 'acceptance'):
            raise serializers.ValidationError({'phi': "Give either phi.* or families."})
        if attrs['experiment'] in ('capacity', 'capacity-vs-wolff') and 'generator' not in attrs:
            raise serializers.ValidationError({'generator': "This experiment needs a point-set generator."})
        if attrs['experiment'] in ('capacity', 'capacity-vs-wolff') and 'h' not in attrs:
            raise serializers.ValidationError({'h': "This experiment needs a resolution h."})
        return attrs

    def create(self, validated_data):
        """Build the configuration record, keeping the raw input for the summary"""
        specs = []
        if 'phi' in validated_data:
            specs.append(validated_data['phi'])
        specs.extend(validated_data.get('families', []))
        generator = None
        if 'generator' in validated_data:
            generator = SetGeneratorSerializer(data=self.initial_data['generator'])
            generator.is_valid(raise_exception=True)
        return ExperimentConfig(
            experiment=validated_data['experiment'],
            phis=tuple(phi_from_spec(spec) for spec in specs),
            generator=generator,
            h=validated_data.get('h'),
            instances=validated_data['instances'],
            sizes=tuple(validated_data['sizes']),
            dimensions=tuple(validated_data['dimensions']),
            r_grid=tuple(validated_data['r_grid']),
            samples=validated_data['samples'],
            n_atoms=validated_data['n_atoms'],
            grid=dict(validated_data.get('grid') or DEFAULT_GRID),
            psi=dict(validated_data.get('psi') or DEFAULT_PSI),
            criteria=tuple(validated_data['criteria']) or ACCEPTANCE_CRITERIA,
            seed=validated_data.get('seed'),
            echo=dict(self.initial_data),
        )


class CriterionResultSerializer(serializers.Serializer):
    criterion = serializers.IntegerField()
    name = serializers.CharField()
    passed = serializers.BooleanField()
    detail = serializers.CharField()
    seconds = serializers.FloatField()
