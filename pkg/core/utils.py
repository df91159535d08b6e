"""
Helpers shared by the management commands and the API views.
"""
import json
import logging
from collections import defaultdict
from pathlib import Path

from core.baseline import localize_pose
from core.exceptions import InsufficientKeypointsError, SchemaError
from core.geometry import spherical_from_cartesian
from core.inference import predict_batch, predict_mc_batch
from core.keypoints import first_error, keypoint_box, normalize_records
from core.serializers import EstimatesFileSerializer
from core.social import make_ground_pose

logger = logging.getLogger(__name__)


def load_json_config(path):
    """
    Read a --config file: a JSON object whose keys mirror command options.

    Returns:
        dict
    """
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as exc:
        raise SchemaError(f"Cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"Config file {path} is not valid JSON ({exc.msg}).") from None
    if not isinstance(data, dict):
        raise SchemaError(f"Config file {path} must hold a JSON object.")
    return {key.replace('-', '_'): value for key, value in data.items()}


def _estimate_dict(index, record, estimate):
    return {
        'index': index,
        'scene': record.scene,
        'd': estimate.d,
        'b': estimate.b,
        'sigma': estimate.sigma,
        'beta': estimate.beta,
        'psi': estimate.psi,
        'theta': estimate.theta,
        'xyz': estimate.xyz,
        'dims': list(estimate.dims),
        'box': keypoint_box(record.pose),
    }


def network_estimates(params, records, mc_passes=0, mc_samples=100, seed=0):
    """
    Run the regressor on every usable record.

    Args:
        params: NetworkParams
        records: PoseRecord list
        mc_passes: Monte Carlo dropout passes; 0 for a single eval pass
        mc_samples: Distance draws per pass
        seed: Seed of the Monte Carlo streams

    Returns:
        list of estimate dicts (EstimateSerializer schema), in record order
    """
    inputs, kept = normalize_records(records)
    if not kept:
        return []
    if mc_passes:
        estimates = predict_mc_batch(params, inputs, mc_passes, mc_samples, seed)
    else:
        estimates = predict_batch(params, inputs)
    return [_estimate_dict(i, records[i], e) for i, e in zip(kept, estimates)]


def geometric_estimates(calibration, records):
    """Baseline estimates; they carry no spread and no orientation."""
    results = []
    for index, record in enumerate(records):
        try:
            location = localize_pose(record.pose, record.K, calibration)
        except InsufficientKeypointsError as exc:
            logger.warning("Skipping record %d: %s", index, exc)
            continue
        spherical = spherical_from_cartesian(location)
        results.append({
            'index': index,
            'scene': record.scene,
            'd': spherical.d,
            'b': None,
            'sigma': None,
            'beta': spherical.beta,
            'psi': spherical.psi,
            'theta': None,
            'xyz': [location.x, location.y, location.z],
            'dims': None,
            'box': keypoint_box(record.pose),
        })
    return results


def ground_truth_estimates(records):
    """Estimates that repeat the labels of every labeled record, with zero spread."""
    results = []
    for index, record in enumerate(records):
        if record.gt is None:
            continue
        location = record.gt.location
        spherical = spherical_from_cartesian(location)
        results.append({
            'index': index,
            'scene': record.scene,
            'd': record.gt.distance,
            'b': 0.0,
            'sigma': None,
            'beta': spherical.beta,
            'psi': spherical.psi,
            'theta': record.gt.theta,
            'xyz': [location.x, location.y, location.z],
            'dims': list(record.gt.dims),
            'box': keypoint_box(record.pose),
        })
    return results


def group_by_scene(items, key=lambda item: item.get('scene', 0)):
    """Stable grouping into {scene: [items]} in first-seen order."""
    groups = defaultdict(list)
    for item in items:
        groups[key(item)].append(item)
    return dict(groups)


def ground_poses_from_estimates(estimates, uncertainty='network', heights=None):
    return [
        make_ground_pose(e['xyz'][0], e['xyz'][2], e.get('theta'), e['d'], e.get('b'), uncertainty, heights)
        for e in estimates
    ]


def load_estimates(path):
    """
    Read and validate a predict output file.

    Returns:
        tuple: (estimate dicts, document seed or None)
    """
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as exc:
        raise SchemaError(f"Cannot read estimates file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"Estimates file {path} is not valid JSON ({exc.msg}).") from None
    serializer = EstimatesFileSerializer(data=data)
    if not serializer.is_valid():
        raise SchemaError(f"Estimates file {path}: {first_error(serializer.errors)}")
    estimates = [dict(e) for e in serializer.validated_data['estimates']]
    return estimates, serializer.validated_data.get('seed')
