from rest_framework import serializers

from core.coco import NUM_KEYPOINTS
from core.geometry import CameraIntrinsics, CartesianLocation, validate_intrinsics
from core.heights import PRESETS
from core.records import Person3D, Pose2D, PoseRecord


# ============================================================================
# INPUT SERIALIZERS
# ============================================================================

class IntrinsicsSerializer(serializers.Serializer):
    """
    Serializer for camera intrinsics {"fx", "fy", "cx", "cy"[, "width", "height"]}.
    """
    fx = serializers.FloatField(required=True)
    fy = serializers.FloatField(required=True)
    cx = serializers.FloatField(required=True)
    cy = serializers.FloatField(required=True)
    width = serializers.IntegerField(required=False, min_value=1)
    height = serializers.IntegerField(required=False, min_value=1)

    def validate(self, attrs):
        """Validate focal lengths and finiteness."""
        is_valid, error_msg = validate_intrinsics(attrs['fx'], attrs['fy'], attrs['cx'], attrs['cy'])
        if not is_valid:
            raise serializers.ValidationError(error_msg)
        return attrs

    def create(self, validated_data):
        return CameraIntrinsics(**validated_data)


def _triplet_list(length, **kwargs):
    return serializers.ListField(
        child=serializers.ListField(
            child=serializers.FloatField(), min_length=3, max_length=3
        ),
        min_length=length,
        max_length=length,
        **kwargs
    )


def _vector(length, **kwargs):
    return serializers.ListField(
        child=serializers.FloatField(), min_length=length, max_length=length, **kwargs
    )


class GroundTruthSerializer(serializers.Serializer):
    """
    Serializer for a ground-truth person {"xyz", "theta", "height", "dims"}.
    """
    xyz = _vector(3)
    theta = serializers.FloatField()
    height = serializers.FloatField()
    dims = _vector(3)

    def validate_xyz(self, value):
        if value[2] <= 0:
            raise serializers.ValidationError("Ground-truth location must be in front of the camera (z > 0).")
        return value

    def validate_height(self, value):
        if value <= 0:
            raise serializers.ValidationError("Height must be positive.")
        return value

    def create(self, validated_data):
        return Person3D(
            location=CartesianLocation(*validated_data['xyz']),
            theta=validated_data['theta'],
            height_m=validated_data['height'],
            dims=tuple(validated_data['dims']),
        )


class PoseRecordSerializer(serializers.Serializer):
    """
    Serializer for one JSON-lines pose record.

    {"pose": [[u, v, c] x 17], "K": {...}, "gt": {...}?, "meta": {...}?}
    """
    pose = _triplet_list(NUM_KEYPOINTS)
    K = IntrinsicsSerializer()
    gt = GroundTruthSerializer(required=False)
    meta = serializers.DictField(required=False)

    def validate_pose(self, value):
        """Confidences must lie in [0, 1]."""
        for joint, (_, _, confidence) in enumerate(value):
            if not 0.0 <= confidence <= 1.0:
                raise serializers.ValidationError(
                    f"Joint {joint} confidence must be between 0 and 1. Got: {confidence}"
                )
        return value

    def create(self, validated_data):
        gt = validated_data.get('gt')
        return PoseRecord(
            pose=Pose2D(validated_data['pose']),
            K=IntrinsicsSerializer().create(validated_data['K']),
            gt=GroundTruthSerializer().create(gt) if gt is not None else None,
            meta=dict(validated_data.get('meta', {})),
        )


class GroundPoseSerializer(serializers.Serializer):
    """
    Serializer for a ground-plane person {"x", "z", "theta", "b"?}.
    """
    x = serializers.FloatField()
    z = serializers.FloatField()
    theta = serializers.FloatField()
    b = serializers.FloatField(default=0.0, min_value=0.0)


class LocalizeRequestSerializer(serializers.Serializer):
    """
    Serializer for the localization endpoint.
    """
    poses = serializers.ListField(child=_triplet_list(NUM_KEYPOINTS), min_length=1)
    K = IntrinsicsSerializer()
    mc_passes = serializers.IntegerField(required=False, min_value=0)
    mc_samples = serializers.IntegerField(required=False, min_value=1)


class MonitorRequestSerializer(serializers.Serializer):
    """
    Serializer for the monitoring endpoint.
    """
    MODE_CHOICES = ['interaction', 'distancing']

    people = GroundPoseSerializer(many=True)
    mode = serializers.ChoiceField(choices=MODE_CHOICES, default='distancing')
    seed = serializers.IntegerField(default=0, min_value=0)


class TaskErrorQuerySerializer(serializers.Serializer):
    """
    Serializer for task-error table query parameters.
    """
    heights = serializers.ChoiceField(choices=sorted(PRESETS), default='adults')
    d_max = serializers.FloatField(default=40.0, min_value=0.0, max_value=1000.0)
    step = serializers.FloatField(default=5.0, min_value=0.01)


# ============================================================================
# OUTPUT SERIALIZERS (documented report schemas)
# ============================================================================

class EstimateSerializer(serializers.Serializer):
    """
    Serializer for one localization estimate.
    """
    index = serializers.IntegerField()
    d = serializers.FloatField()
    b = serializers.FloatField(required=False, allow_null=True)
    sigma = serializers.FloatField(required=False, allow_null=True)
    beta = serializers.FloatField()
    psi = serializers.FloatField()
    theta = serializers.FloatField(allow_null=True)
    xyz = _vector(3)
    dims = _vector(3, allow_null=True)
    box = _vector(4)
    scene = serializers.IntegerField(required=False)


class EstimatesFileSerializer(serializers.Serializer):
    """
    Serializer for the predict command output {"seed", "method", "estimates": [...]}.
    """
    METHOD_CHOICES = ['network', 'geometric']

    seed = serializers.IntegerField(required=False)
    method = serializers.ChoiceField(choices=METHOD_CHOICES, default='network')
    estimates = EstimateSerializer(many=True)


class PairVerdictSerializer(serializers.Serializer):
    i = serializers.IntegerField(min_value=0)
    j = serializers.IntegerField(min_value=0)
    vote_fraction = serializers.FloatField(min_value=0.0, max_value=1.0)
    interacting = serializers.BooleanField()


class VerdictReportSerializer(serializers.Serializer):
    """
    Serializer for a verdict report {"pairs": [...], "at_risk": [...]}.
    """
    pairs = PairVerdictSerializer(many=True)
    at_risk = serializers.ListField(child=serializers.IntegerField(min_value=0))


class SceneVerdictSerializer(VerdictReportSerializer):
    scene = serializers.IntegerField()


class ClassificationSerializer(serializers.Serializer):
    accuracy = serializers.FloatField(min_value=0.0, max_value=100.0, allow_null=True)
    recall = serializers.FloatField(min_value=0.0, max_value=100.0, allow_null=True)
    matched = serializers.IntegerField(min_value=0)
    missed = serializers.IntegerField(min_value=0)


class MonitorReportSerializer(serializers.Serializer):
    """
    Serializer for the monitor command output, one verdict report per scene.
    """
    MODE_CHOICES = ['interaction', 'distancing']
    UNCERTAINTY_CHOICES = ['network', 'task_error', 'none']

    seed = serializers.IntegerField(min_value=0)
    mode = serializers.ChoiceField(choices=MODE_CHOICES)
    uncertainty = serializers.ChoiceField(choices=UNCERTAINTY_CHOICES)
    scenes = SceneVerdictSerializer(many=True)
    at_risk = serializers.ListField(child=serializers.IntegerField(min_value=0))
    classification = ClassificationSerializer(required=False)


class BinSerializer(serializers.Serializer):
    lower = serializers.FloatField()
    upper = serializers.FloatField(allow_null=True)
    ale = serializers.FloatField(min_value=0.0, allow_null=True)
    count = serializers.IntegerField(min_value=0)


class DifficultySerializer(serializers.Serializer):
    ale = serializers.FloatField(min_value=0.0, allow_null=True)
    count = serializers.IntegerField(min_value=0)


class SpreadRowSerializer(serializers.Serializer):
    lower = serializers.FloatField()
    upper = serializers.FloatField(allow_null=True)
    mean_b = serializers.FloatField(min_value=0.0, allow_null=True)
    task_error = serializers.FloatField(min_value=0.0, allow_null=True)
    count = serializers.IntegerField(min_value=0)


class EvalReportSerializer(serializers.Serializer):
    """
    Serializer for the evaluation report written by the eval command.
    """
    seed = serializers.IntegerField(required=False)
    bins = BinSerializer(many=True)
    difficulty = serializers.DictField(child=DifficultySerializer())
    ala = serializers.DictField(child=serializers.FloatField(min_value=0.0, max_value=100.0))
    recall = serializers.FloatField(min_value=0.0, max_value=100.0)
    matched = serializers.IntegerField(min_value=0)
    ground_truths = serializers.IntegerField(min_value=0)
    interval_recall = serializers.DictField(
        child=serializers.FloatField(min_value=0.0, max_value=100.0, allow_null=True)
    )
    uncertainty = serializers.DictField(child=serializers.FloatField(allow_null=True))
    spread = SpreadRowSerializer(many=True, required=False, allow_null=True)
