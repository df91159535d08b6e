import logging
from functools import lru_cache
from pathlib import Path

from django.conf import settings
from django_ratelimit.decorators import ratelimit
from rest_framework import status
from rest_framework.decorators import api_view, permission_classes
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from core.exceptions import PoseProxemicsError, WeightFormatError
from core.heights import get_preset, task_error_curve
from core.keypoints import first_error
from core.records import Pose2D, PoseRecord
from core.serializers import (
    IntrinsicsSerializer, LocalizeRequestSerializer, MonitorRequestSerializer,
    TaskErrorQuerySerializer, VerdictReportSerializer
)
from core.social import GroundPose, SocialConfig, monitor
from core.utils import network_estimates
from core.weights import load_weights

logger = logging.getLogger(__name__)


@lru_cache(maxsize=4)
def _cached_weights(path, mtime):
    return load_weights(path)


def get_params():
    """
    Weights at settings WEIGHTS_PATH, reloaded when the file changes.

    Returns:
        NetworkParams, or None when no weight file exists
    """
    path = Path(settings.POSE_PROXEMICS['WEIGHTS_PATH'])
    if not path.is_file():
        return None
    return _cached_weights(str(path), path.stat().st_mtime_ns)


def _bad_request(errors):
    return Response({'error': first_error(errors)}, status=status.HTTP_400_BAD_REQUEST)


# ============================================================================
# LOCALIZATION
# ============================================================================

@api_view(['POST'])
@permission_classes([AllowAny])
@ratelimit(key='ip', rate='30/m', method='POST', block=False)
def localize_view(request):
    """
    POST /api/localize/

    Localize 2D poses seen by one camera.

    Edge cases:
    - Rate limit: max 30 requests per IP per minute, returns 429
    - Invalid payload: 400 with the first validation error
    - No usable weight file: 503
    - Poses with fewer than 3 visible joints are skipped
    """
    if getattr(request, 'limited', False):
        return Response(
            {'error': 'Too many localization requests. Try again later.'},
            status=status.HTTP_429_TOO_MANY_REQUESTS
        )

    serializer = LocalizeRequestSerializer(data=request.data)
    if not serializer.is_valid():
        return _bad_request(serializer.errors)
    data = serializer.validated_data

    try:
        params = get_params()
    except WeightFormatError as exc:
        logger.error("Cannot load weights: %s", exc)
        params = None
    if params is None:
        return Response(
            {'error': 'No trained weights are available.'},
            status=status.HTTP_503_SERVICE_UNAVAILABLE
        )

    K = IntrinsicsSerializer().create(data['K'])
    records = [PoseRecord(pose=Pose2D(pose), K=K) for pose in data['poses']]
    mc_passes = data.get('mc_passes', 0)
    mc_samples = data.get('mc_samples', settings.POSE_PROXEMICS['INFERENCE']['MC_SAMPLES'])
    try:
        estimates = network_estimates(params, records, mc_passes, mc_samples)
    except PoseProxemicsError as exc:
        return Response({'error': str(exc)}, status=status.HTTP_400_BAD_REQUEST)

    for estimate in estimates:
        estimate.pop('scene', None)
        if estimate['sigma'] is None:
            del estimate['sigma']
    return Response({'estimates': estimates}, status=status.HTTP_200_OK)


# ============================================================================
# PROXEMICS
# ============================================================================

@api_view(['POST'])
@permission_classes([AllowAny])
def monitor_view(request):
    """
    POST /api/monitor/

    Pair verdicts and at-risk people for one scene of ground-plane poses.
    """
    serializer = MonitorRequestSerializer(data=request.data)
    if not serializer.is_valid():
        return _bad_request(serializer.errors)
    data = serializer.validated_data

    try:
        people = [GroundPose(**person) for person in data['people']]
        config = SocialConfig.from_settings(mode=data['mode'], seed=data['seed'])
    except PoseProxemicsError as exc:
        return Response({'error': str(exc)}, status=status.HTTP_400_BAD_REQUEST)

    report = monitor(people, config)
    data = VerdictReportSerializer(report.as_dict()).data
    return Response(dict(data, mode=config.mode), status=status.HTTP_200_OK)


@api_view(['GET'])
@permission_classes([AllowAny])
def task_error_view(request):
    """
    GET /api/task-error/?heights=adults&d_max=40&step=5

    Expected localization error caused by stature ambiguity.
    """
    serializer = TaskErrorQuerySerializer(data=request.query_params)
    if not serializer.is_valid():
        return _bad_request(serializer.errors)
    data = serializer.validated_data

    rows = task_error_curve(get_preset(data['heights']), data['d_max'], data['step'])
    return Response({
        'heights': data['heights'],
        'rows': [{'d': d, 'task_error': e} for d, e in rows],
    }, status=status.HTTP_200_OK)
