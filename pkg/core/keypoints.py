"""
Pose files, network inputs, flip augmentation and detection matching.

Input vectors are 51 floats: 17 normalized (x*, y*) pairs followed by a
17-entry visibility mask. Invisible joints contribute exact zeros.
"""
from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from core.coco import FLIP_PERMUTATION, NUM_KEYPOINTS
from core.exceptions import InsufficientKeypointsError, SchemaError
from core.geometry import CameraIntrinsics, CartesianLocation, back_project, wrap_angle
from core.records import MIN_VISIBLE_JOINTS, Person3D, Pose2D, PoseRecord
from core.serializers import PoseRecordSerializer

logger = logging.getLogger(__name__)

INPUT_SIZE = 3 * NUM_KEYPOINTS
DEFAULT_IOU_THRESHOLD = 0.3


# ============================================================================
# FILES
# ============================================================================

def first_error(detail):
    """Flatten a DRF error detail into a single readable message."""
    if isinstance(detail, dict):
        for key, value in detail.items():
            inner = first_error(value)
            return inner if key == 'non_field_errors' else f"{key}: {inner}"
    if isinstance(detail, list) and detail:
        for item in detail:
            if item:
                return first_error(item)
    return str(detail)


def parse_record(data, line=None) -> PoseRecord:
    """
    Validate one decoded JSON object into a PoseRecord.

    Raises:
        SchemaError: the object does not match the record schema
    """
    serializer = PoseRecordSerializer(data=data)
    if not serializer.is_valid():
        raise SchemaError(first_error(serializer.errors), line=line)
    return serializer.save()


def parse_poses(file):
    """
    Load a JSON-lines pose file.

    Args:
        file: Path, str path, or an open text stream

    Returns:
        list of PoseRecord in file order (blank lines skipped)

    Raises:
        SchemaError: naming the first offending line
    """
    if isinstance(file, (str, Path)):
        with open(file, encoding='utf-8') as handle:
            return parse_poses(handle)

    records = []
    for number, raw in enumerate(file, start=1):
        if not raw.strip():
            continue
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON ({exc.msg})", line=number) from None
        records.append(parse_record(data, line=number))
    logger.debug("Parsed %d pose records", len(records))
    return records


def record_to_dict(record: PoseRecord) -> dict:
    data = {
        'pose': [[float(u), float(v), float(c)] for u, v, c in record.pose.keypoints],
        'K': record.K.as_dict(),
    }
    if record.gt is not None:
        gt = record.gt
        data['gt'] = {
            'xyz': [gt.location.x, gt.location.y, gt.location.z],
            'theta': gt.theta,
            'height': gt.height_m,
            'dims': [float(v) for v in gt.dims],
        }
    if record.meta:
        data['meta'] = record.meta
    return data


def dumps_records(records) -> str:
    buffer = io.StringIO()
    for record in records:
        buffer.write(json.dumps(record_to_dict(record)))
        buffer.write('\n')
    return buffer.getvalue()


def write_records(records, path):
    Path(path).write_text(dumps_records(records), encoding='utf-8')


# ============================================================================
# NETWORK INPUTS
# ============================================================================

def normalize_pose(p: Pose2D, K: CameraIntrinsics) -> np.ndarray:
    """
    Back-project visible joints into normalized image coordinates.

    Returns:
        InputVector: (51,) array [x*_0, y*_0, ..., x*_16, y*_16, mask_0..mask_16]

    Raises:
        InsufficientKeypointsError: fewer than 3 visible joints
    """
    visible = p.visible
    if np.count_nonzero(visible) < MIN_VISIBLE_JOINTS:
        raise InsufficientKeypointsError(
            f"A pose needs at least {MIN_VISIBLE_JOINTS} visible joints. Got: {int(np.count_nonzero(visible))}"
        )
    coords = back_project(p.keypoints[:, :2], K)
    coords[~visible] = 0.0
    return np.concatenate([coords.reshape(-1), visible.astype(float)])


def normalize_records(records):
    """
    Stack input vectors for every usable record.

    Returns:
        tuple: (inputs (N, 51), indices of the records kept)
    """
    rows, kept = [], []
    for index, record in enumerate(records):
        if not record.pose.is_usable:
            logger.warning("Skipping record %d: only %d visible joints", index, record.pose.num_visible)
            continue
        rows.append(normalize_pose(record.pose, record.K))
        kept.append(index)
    inputs = np.array(rows) if rows else np.empty((0, INPUT_SIZE))
    return inputs, kept


# ============================================================================
# AUGMENTATION
# ============================================================================

def horizontal_flip(p: Pose2D, image_width: int) -> Pose2D:
    """
    Mirror a pose about the vertical image midline and swap left/right labels.
    """
    if image_width <= 0:
        raise SchemaError(f"Image width must be positive. Got: {image_width}")
    kps = p.keypoints.copy()
    kps[:, 0] = (image_width - 1) - kps[:, 0]
    return Pose2D(kps[list(FLIP_PERMUTATION)])


def flip_record(record: PoseRecord, image_width: int | None = None) -> PoseRecord:
    """
    Mirror a whole record: pose, principal point and ground truth.

    Mirroring cx as well keeps normalized coordinates an exact reflection
    (x* -> -x*), so the flipped ground truth is (x, y, z) -> (-x, y, z) with
    heading theta -> pi - theta.
    """
    width = image_width or record.K.width
    if width is None:
        raise SchemaError("Flipping needs the image width.")
    K = replace(record.K, cx=(width - 1) - record.K.cx)
    gt = record.gt
    if gt is not None:
        gt = Person3D(
            location=CartesianLocation(-gt.location.x, gt.location.y, gt.location.z),
            theta=wrap_angle(math.pi - gt.theta),
            height_m=gt.height_m,
            dims=gt.dims,
        )
    meta = dict(record.meta, flipped=not record.meta.get('flipped', False))
    return PoseRecord(pose=horizontal_flip(record.pose, width), K=K, gt=gt, meta=meta)


# ============================================================================
# MATCHING
# ============================================================================

def keypoint_box(p: Pose2D):
    """Axis-aligned [u0, v0, u1, v1] box around the visible joints."""
    pts = p.keypoints[p.visible, :2]
    if len(pts) == 0:
        return [0.0, 0.0, 0.0, 0.0]
    u0, v0 = pts.min(axis=0)
    u1, v1 = pts.max(axis=0)
    return [float(u0), float(v0), float(u1), float(v1)]


def iou(box_a, box_b) -> float:
    ix = max(0.0, min(box_a[2], box_b[2]) - max(box_a[0], box_b[0]))
    iy = max(0.0, min(box_a[3], box_b[3]) - max(box_a[1], box_b[1]))
    inter = ix * iy
    area_a = max(0.0, box_a[2] - box_a[0]) * max(0.0, box_a[3] - box_a[1])
    area_b = max(0.0, box_b[2] - box_b[0]) * max(0.0, box_b[3] - box_b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def _as_box(item):
    return keypoint_box(item) if isinstance(item, Pose2D) else list(item)


def match_detections(poses, gts, iou_threshold: float = DEFAULT_IOU_THRESHOLD):
    """
    Greedily match detections to ground truths by descending IoU.

    Args:
        poses: Detected Pose2D objects (or boxes)
        gts: Ground-truth Pose2D objects (or boxes)
        iou_threshold: Minimum IoU for a match, in (0, 1]

    Returns:
        list of (pose_index, gt_index, iou) with every index used at most once
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise SchemaError(f"IoU threshold must be in (0, 1]. Got: {iou_threshold}")
    det_boxes = [_as_box(p) for p in poses]
    gt_boxes = [_as_box(g) for g in gts]
    candidates = []
    for i, box_a in enumerate(det_boxes):
        for j, box_b in enumerate(gt_boxes):
            overlap = iou(box_a, box_b)
            if overlap >= iou_threshold:
                candidates.append((-overlap, i, j))
    candidates.sort()

    used_det, used_gt, matches = set(), set(), []
    for neg_overlap, i, j in candidates:
        if i in used_det or j in used_gt:
            continue
        used_det.add(i)
        used_gt.add(j)
        matches.append((i, j, -neg_overlap))
    return matches
