"""
Closed-form distance from a calibrated vertical body segment.

A segment is a pair of joint families (e.g. shoulders over hips). Its
metric length is calibrated on labeled records; at test time the pixel
rows of its two ends fix the depth by similar triangles.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.coco import INDEX
from core.exceptions import CalibrationError, CameraError, InsufficientKeypointsError
from core.geometry import CameraIntrinsics, CartesianLocation, back_project

logger = logging.getLogger(__name__)

MIN_CALIBRATION_RECORDS = 30

SEGMENTS = {
    'head-shoulder': ('ear', 'shoulder'),
    'shoulder-hip': ('shoulder', 'hip'),
    'hip-ankle': ('hip', 'ankle'),
}


@dataclass(frozen=True)
class SegmentCalibration:
    segment: str
    mean_m: float
    std_m: float
    count: int = 0

    def __post_init__(self):
        if self.mean_m <= 0:
            raise CalibrationError(f"Segment '{self.segment}' must have a positive mean length. Got: {self.mean_m}")
        if self.std_m < 0:
            raise CalibrationError(f"Segment '{self.segment}' has a negative std: {self.std_m}")


@dataclass
class Calibration:
    """Calibrated segments and the one used for localization."""
    segments: dict = field(default_factory=dict)
    selected: str = 'shoulder-hip'

    @property
    def selected_segment(self) -> SegmentCalibration:
        return self.segments[self.selected]

    def as_dict(self):
        return {
            'selected': self.selected,
            'segments': {
                name: {'mean': s.mean_m, 'std': s.std_m, 'count': s.count}
                for name, s in self.segments.items()
            },
        }


def _side_indices(family):
    return INDEX[f'left_{family}'], INDEX[f'right_{family}']


def _segment_rows(pose, K, segment):
    """
    Normalized rows of the segment ends, averaged over the visible sides.

    Returns:
        tuple (y_upper*, y_lower*, list of visible side pairs) or None
    """
    upper, lower = SEGMENTS[segment]
    kps = pose.keypoints
    pairs = [
        (u, l) for u, l in zip(_side_indices(upper), _side_indices(lower))
        if kps[u, 2] > 0 and kps[l, 2] > 0
    ]
    if not pairs:
        return None
    coords = back_project(kps[:, :2], K)
    y_upper = float(np.mean([coords[u, 1] for u, _ in pairs]))
    y_lower = float(np.mean([coords[l, 1] for _, l in pairs]))
    return y_upper, y_lower, pairs


def calibrate_segments(records, min_records: int = MIN_CALIBRATION_RECORDS) -> Calibration:
    """
    Measure each candidate segment on labeled records.

    Each joint is lifted to 3D at the depth of its person's ground-truth
    mid-hip; left and right lengths are averaged. The segment with the
    smallest standard deviation is selected.

    Raises:
        CalibrationError: fewer than `min_records` labeled records
    """
    labeled = [r for r in records if r.gt is not None]
    if len(labeled) < min_records:
        raise CalibrationError(
            f"Calibration needs at least {min_records} labeled records. Got: {len(labeled)}"
        )

    lengths = {name: [] for name in SEGMENTS}
    for record in labeled:
        depth = record.gt.location.z
        for name in SEGMENTS:
            rows = _segment_rows(record.pose, record.K, name)
            if rows is not None:
                lengths[name].append(depth * (rows[1] - rows[0]))

    segments = {}
    for name, values in lengths.items():
        if len(values) < min_records:
            logger.warning("Skipping segment %s: only %d measurements", name, len(values))
            continue
        segments[name] = SegmentCalibration(name, float(np.mean(values)), float(np.std(values)), len(values))
    if not segments:
        raise CalibrationError("No segment was visible in enough records to calibrate.")

    selected = min(segments.values(), key=lambda s: s.std_m).segment
    logger.info("Calibrated %s; selected %s (mean %.4f m, std %.4f m)",
                ', '.join(segments), selected, segments[selected].mean_m, segments[selected].std_m)
    return Calibration(segments=segments, selected=selected)


def distance_from_segment(v1, v2, u, delta_y, K: CameraIntrinsics) -> CartesianLocation:
    """
    Locate a vertical segment of known length from its end rows.

    The two-point pinhole constraints, with the segment oriented either
    way, give two mirror solutions; each is solved by least squares and
    the one in front of the camera is kept.

    Args:
        v1: Pixel row of the upper end
        v2: Pixel row of the lower end
        u: Pixel column of the segment
        delta_y: Metric segment length
        K: Camera intrinsics

    Returns:
        CartesianLocation of the lower end

    Raises:
        CameraError: degenerate rows, or both solutions behind the camera
    """
    if v1 == v2:
        raise CameraError("Segment ends share a pixel row; the depth is undetermined.")
    x_star, y1 = back_project((u, v1), K)
    _, y2 = back_project((u, v2), K)

    # unknowns (X, Y_upper, Z)
    A = np.array([
        [1.0, 0.0, -x_star],
        [0.0, 1.0, -y1],
        [0.0, 1.0, -y2],
    ])
    for sign in (1.0, -1.0):
        rhs = np.array([0.0, 0.0, -sign * delta_y])
        (X, Y, Z), *_ = np.linalg.lstsq(A, rhs, rcond=None)
        if Z > 0:
            return CartesianLocation(float(X), float(Y + sign * delta_y), float(Z))
    raise CameraError("Both segment solutions lie behind the camera.")


def localize_pose(pose, K: CameraIntrinsics, calibration: Calibration, segment: str | None = None) -> CartesianLocation:
    """
    Mid-hip location from the depth of the calibrated segment.

    Falls back to the segment's lower end when no hip is visible.

    Raises:
        InsufficientKeypointsError: the segment is not visible
    """
    name = segment or calibration.selected
    calib = calibration.segments[name]
    rows = _segment_rows(pose, K, name)
    if rows is None:
        raise InsufficientKeypointsError(f"Segment '{name}' is not visible on either side.")
    y_upper, y_lower, pairs = rows

    kps = pose.keypoints
    u = float(np.mean([kps[i, 0] for pair in pairs for i in pair]))
    v1 = K.fy * y_upper + K.cy
    v2 = K.fy * y_lower + K.cy
    depth = distance_from_segment(v1, v2, u, calib.mean_m, K).z

    hips = [i for i in _side_indices('hip') if kps[i, 2] > 0]
    anchor = hips or [l for _, l in pairs]
    x_star, y_star = back_project(kps[anchor, :2].mean(axis=0), K)
    return CartesianLocation(depth * x_star, depth * y_star, depth)


# ============================================================================
# FILES
# ============================================================================

def save_calibration(calibration: Calibration, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(calibration.as_dict(), indent=2), encoding='utf-8')


def load_calibration(path) -> Calibration:
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
        segments = {
            name: SegmentCalibration(name, float(s['mean']), float(s['std']), int(s.get('count', 0)))
            for name, s in data['segments'].items()
        }
        selected = data['selected']
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CalibrationError(f"Cannot read calibration file {path}: {exc}") from None
    if selected not in segments:
        raise CalibrationError(f"Selected segment '{selected}' is not in the calibration file.")
    return Calibration(segments=segments, selected=selected)
