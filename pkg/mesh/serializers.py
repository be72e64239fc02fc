from rest_framework import serializers

from .generators import SOLID_MESHES
from .geometry import MeshError, parse_region


class BoundarySetSerializer(serializers.Serializer):
    """One named boundary set: vertex ids plus vertex pairs"""
    vertices = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False, default=list)
    edges = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2),
        required=False,
        default=list,
    )


class MeshDocumentSerializer(serializers.Serializer):
    """Serializer for the JSON mesh file"""
    vertices = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    )
    elements = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(min_value=0))
    )
    regions = serializers.ListField(child=serializers.CharField())
    boundary_sets = serializers.DictField(child=BoundarySetSerializer(), required=False, default=dict)

    def validate_regions(self, value):
        for tag in value:
            try:
                parse_region(tag)
            except MeshError as exc:
                raise serializers.ValidationError(str(exc))
        return value

    def validate(self, data):
        if len(data['regions']) != len(data['elements']):
            raise serializers.ValidationError(
                f"{len(data['regions'])} regions for {len(data['elements'])} elements"
            )
        n = len(data['vertices'])
        for e, ring in enumerate(data['elements']):
            if any(v >= n for v in ring):
                raise serializers.ValidationError(f"element {e} references a missing vertex")
        return data


class MeshRequestSerializer(serializers.Serializer):
    """Serializer for the mesh generation endpoint"""
    problem = serializers.CharField(max_length=50)
    refinement = serializers.IntegerField(min_value=0, max_value=4, default=0)
    solid = serializers.ChoiceField(choices=list(SOLID_MESHES), required=False, default='quad')
    include_mesh = serializers.BooleanField(required=False, default=False)
