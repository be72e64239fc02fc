from rest_framework import serializers

from material.types import RegularizationKind
from mesh.generators import GENERATORS, SOLID_MESHES

REG_CHOICES = [(kind.value, kind.value) for kind in RegularizationKind]


class BodyMaterialSerializer(serializers.Serializer):
    """Bulk and shear modulus of one body region"""
    K = serializers.FloatField()
    mu = serializers.FloatField()

    def validate(self, data):
        if not (data['K'] > 0 and data['mu'] > 0):
            raise serializers.ValidationError(f"K and mu must be > 0, got K={data['K']}, mu={data['mu']}")
        return data


class MediumSerializer(serializers.Serializer):
    """Third-medium parameters; mu defaults to the softest body"""
    gamma = serializers.FloatField()
    alpha_r = serializers.FloatField(min_value=0)
    beta = serializers.FloatField(min_value=0, required=False, default=0.0)
    reg = serializers.ChoiceField(choices=REG_CHOICES, required=False, default=RegularizationKind.HUHU_DEV.value)
    mu = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_gamma(self, value):
        if not value > 0:
            raise serializers.ValidationError("gamma must be > 0")
        return value


class AutoAdjustSerializer(serializers.Serializer):
    enabled = serializers.BooleanField(required=False, default=True)
    min_factor = serializers.FloatField(required=False)
    grow_after = serializers.IntegerField(min_value=1, required=False)

    def validate_min_factor(self, value):
        if not 0.0 < value <= 1.0:
            raise serializers.ValidationError("min_factor must lie in (0, 1]")
        return value


class LoadSerializer(serializers.Serializer):
    """Prescribed displacement per boundary set at full load; null leaves a component free"""
    targets = serializers.DictField(
        child=serializers.ListField(
            child=serializers.FloatField(allow_null=True), min_length=2, max_length=2
        )
    )
    load_set = serializers.CharField(required=False, allow_null=True, default=None)
    n_steps = serializers.IntegerField(min_value=1)
    auto_adjust = AutoAdjustSerializer(required=False)

    def validate_targets(self, value):
        if not value:
            raise serializers.ValidationError("At least one boundary target is required")
        return value

    def validate(self, data):
        load_set = data.get('load_set')
        if load_set and load_set not in data['targets']:
            raise serializers.ValidationError(f"load_set '{load_set}' is not among the targets")
        return data


class GapProbeSerializer(serializers.Serializer):
    upper = serializers.CharField(max_length=100)
    lower = serializers.CharField(max_length=100)

    def validate(self, data):
        if data['upper'] == data['lower']:
            raise serializers.ValidationError("upper and lower chains must differ")
        return data


class NewtonSerializer(serializers.Serializer):
    tol_rel = serializers.FloatField(required=False, allow_null=True)
    tol_abs_scale = serializers.FloatField(min_value=0, required=False, allow_null=True)
    max_iter = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    line_search = serializers.BooleanField(required=False, allow_null=True)

    def validate_tol_rel(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("tol_rel must be > 0")
        return value


class BenchmarkConfigSerializer(serializers.Serializer):
    """Serializer for a benchmark configuration document"""
    name = serializers.CharField(max_length=200, required=False)
    problem = serializers.ChoiceField(choices=sorted(GENERATORS))
    refinement = serializers.IntegerField(min_value=0, max_value=4, default=0)
    solid = serializers.ChoiceField(choices=list(SOLID_MESHES), required=False, default='quad')
    bodies = serializers.DictField(child=BodyMaterialSerializer())
    medium = MediumSerializer()
    load = LoadSerializer()
    gap_probe = GapProbeSerializer()
    newton = NewtonSerializer(required=False)
    quadrature_extra_degree = serializers.IntegerField(min_value=0, required=False)
    volume_term = serializers.ChoiceField(choices=['k', '1'], required=False)
    threads = serializers.IntegerField(min_value=1, required=False)
    output_dir = serializers.CharField(required=False, allow_null=True, allow_blank=True)
    write_vtk = serializers.BooleanField(required=False)

    def validate_bodies(self, value):
        if not value:
            raise serializers.ValidationError("At least one body is required")
        for tag in value:
            if not tag.startswith('body:'):
                raise serializers.ValidationError(f"'{tag}' is not a body region tag")
        return value


class SweepGridSerializer(serializers.Serializer):
    """Parameter grid of a sweep; axes left out keep the template value"""
    gamma = serializers.ListField(child=serializers.FloatField(), required=False, default=list)
    alpha_r = serializers.ListField(child=serializers.FloatField(min_value=0), required=False, default=list)
    reg = serializers.ListField(child=serializers.ChoiceField(choices=REG_CHOICES), required=False, default=list)

    def validate_gamma(self, value):
        if any(not g > 0 for g in value):
            raise serializers.ValidationError("gamma values must be > 0")
        return value

    def validate(self, data):
        if not (data['gamma'] or data['alpha_r'] or data['reg']):
            raise serializers.ValidationError("The sweep grid is empty")
        return data


class RunRequestSerializer(serializers.Serializer):
    """Serializer for the synchronous run endpoint: a preset plus overrides"""
    preset = serializers.CharField(max_length=50)
    refinement = serializers.IntegerField(min_value=0, max_value=4, required=False)
    solid = serializers.ChoiceField(choices=list(SOLID_MESHES), required=False)
    gamma = serializers.FloatField(required=False)
    alpha_r = serializers.FloatField(min_value=0, required=False)
    beta = serializers.FloatField(min_value=0, required=False)
    reg = serializers.ChoiceField(choices=REG_CHOICES, required=False)
    steps = serializers.IntegerField(min_value=1, max_value=1000, required=False)
    uy = serializers.FloatField(required=False)
    tol = serializers.FloatField(required=False)

    def validate_preset(self, value):
        from .benchmarks import PRESETS

        if value not in PRESETS:
            raise serializers.ValidationError(f"Unknown preset. Expected one of {sorted(PRESETS)}")
        return value
