"""
Tests for the geometric baseline.

Tests cover:
- Segment calibration on generated people (means, zero spread, selection)
- Closed-form distance from a segment: exact inversion, scaling, camera invariance
- Error of the baseline against the stature-ambiguity task error
- Calibration files
"""
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.baseline import (
    Calibration, SegmentCalibration, calibrate_segments, distance_from_segment, load_calibration,
    localize_pose, save_calibration
)
from core.coco import INDEX
from core.exceptions import CalibrationError, CameraError, InsufficientKeypointsError
from core.geometry import CameraIntrinsics, CartesianLocation
from core.heights import PRESETS, mean_height, task_error
from core.records import Person3D, PoseRecord
from core.scenes import DEFAULT_SKELETON, Scene, SceneConfig, generate_records, render_scene

K = CameraIntrinsics(720.0, 720.0, 620.0, 190.0)
SHOULDER_HIP = DEFAULT_SKELETON.segment_fraction('shoulder', 'hip')


def _facing(x, z, height):
    """A person facing the camera, so every joint lies at the same depth."""
    y = 1.65 - DEFAULT_SKELETON.hip_fraction * height
    return Person3D(CartesianLocation(x, y, z), -math.pi / 2, height, (0.6, height, 0.5))


def _records(people, camera=K):
    rendered = render_scene(Scene(people, camera), 0.0, np.random.default_rng(0))
    return [PoseRecord(pose=pose, K=camera, gt=gt) for pose, gt in rendered]


def _rows(record, upper, lower):
    kps = record.pose.keypoints
    v1 = kps[[INDEX[f'left_{upper}'], INDEX[f'right_{upper}']], 1].mean()
    v2 = kps[[INDEX[f'left_{lower}'], INDEX[f'right_{lower}']], 1].mean()
    u = kps[[INDEX[f'left_{upper}'], INDEX[f'right_{upper}'],
             INDEX[f'left_{lower}'], INDEX[f'right_{lower}']], 0].mean()
    return v1, v2, u


class CalibrateSegmentsTests(SimpleTestCase):
    """Tests for calibrate_segments"""

    def test_identical_heights_have_zero_spread(self):
        rng = np.random.default_rng(0)
        people = [_facing(rng.uniform(-3, 3), rng.uniform(5, 30), 1.75) for _ in range(40)]
        calibration = calibrate_segments(_records(people))
        for segment in calibration.segments.values():
            self.assertAlmostEqual(segment.std_m, 0.0, places=9)
            self.assertEqual(segment.count, 40)
        self.assertAlmostEqual(calibration.segments['shoulder-hip'].mean_m, 0.288 * 1.75)

    def test_shoulder_hip_matches_anthropometry(self):
        """Test the calibrated shoulder-hip length is 0.288 of the mean stature."""
        records = [r for r in generate_records(600, SceneConfig(), 5) if not r.meta['truncated']]
        calibration = calibrate_segments(records)
        expected = SHOULDER_HIP * float(np.mean([r.gt.height_m for r in records]))
        self.assertAlmostEqual(calibration.segments['shoulder-hip'].mean_m, expected, delta=0.001 * expected)

    def test_minimum_std_segment_is_selected(self):
        records = generate_records(200, SceneConfig(noise_px=1.0), 6)
        calibration = calibrate_segments(records)
        smallest = min(calibration.segments.values(), key=lambda s: s.std_m)
        self.assertEqual(calibration.selected, smallest.segment)

    def test_too_few_records(self):
        records = generate_records(29, SceneConfig(), 1)
        with self.assertRaises(CalibrationError):
            calibrate_segments(records)

    def test_unlabeled_records_do_not_count(self):
        records = generate_records(35, SceneConfig(), 1)
        for record in records[:10]:
            record.gt = None
        with self.assertRaises(CalibrationError):
            calibrate_segments(records)


class DistanceFromSegmentTests(SimpleTestCase):
    """Tests for distance_from_segment"""

    def test_exact_inversion(self):
        person = _facing(1.2, 12.0, 1.8)
        record = _records([person])[0]
        v1, v2, u = _rows(record, 'shoulder', 'hip')
        location = distance_from_segment(v1, v2, u, SHOULDER_HIP * 1.8, K)
        self.assertAlmostEqual(location.z / 12.0, 1.0, delta=1e-6)
        self.assertAlmostEqual(location.x, 1.2, delta=1e-6)
        self.assertAlmostEqual(location.y, person.location.y, delta=1e-6)

    def test_doubling_length_doubles_distance(self):
        first = distance_from_segment(150.0, 210.0, 640.0, 0.5, K)
        second = distance_from_segment(150.0, 210.0, 640.0, 1.0, K)
        self.assertAlmostEqual(second.z, 2.0 * first.z)
        self.assertAlmostEqual(second.x, 2.0 * first.x)

    def test_camera_invariance(self):
        first = distance_from_segment(150.0, 210.0, 640.0, 0.5, K)
        second = distance_from_segment(300.0, 420.0, 1280.0, 0.5, K.scaled(2.0))
        self.assertAlmostEqual(first.z, second.z)
        self.assertAlmostEqual(first.x, second.x)

    def test_error_follows_stature_ratio(self):
        """Test a person of another height is misplaced by d * |1 - h_mean / h|."""
        h_mean = 1.715
        for height in (1.55, 1.9):
            person = _facing(0.0, 20.0, height)
            record = _records([person])[0]
            v1, v2, u = _rows(record, 'shoulder', 'hip')
            location = distance_from_segment(v1, v2, u, SHOULDER_HIP * h_mean, K)
            self.assertAlmostEqual(abs(location.z - 20.0), 20.0 * abs(1.0 - h_mean / height), delta=1e-6)

    def test_same_rows_rejected(self):
        with self.assertRaises(CameraError):
            distance_from_segment(200.0, 200.0, 640.0, 0.5, K)

    def test_zero_length_rejected(self):
        with self.assertRaises(CameraError):
            distance_from_segment(150.0, 210.0, 640.0, 0.0, K)


class LocalizePoseTests(SimpleTestCase):
    """Tests for localize_pose"""

    def setUp(self):
        self.calibration = Calibration(
            segments={'shoulder-hip': SegmentCalibration('shoulder-hip', SHOULDER_HIP * 1.7, 0.0)},
            selected='shoulder-hip',
        )

    def test_recovers_mid_hip(self):
        person = _facing(-0.8, 9.0, 1.7)
        record = _records([person])[0]
        location = localize_pose(record.pose, K, self.calibration)
        np.testing.assert_allclose(location.as_array(), person.location.as_array(), atol=1e-6)

    def test_one_side_is_enough(self):
        person = _facing(-0.8, 9.0, 1.7)
        record = _records([person])[0]
        record.pose.keypoints[INDEX['right_shoulder'], 2] = 0.0
        location = localize_pose(record.pose, K, self.calibration)
        self.assertAlmostEqual(location.z, 9.0, delta=1e-6)

    def test_invisible_segment(self):
        record = _records([_facing(0.0, 9.0, 1.7)])[0]
        record.pose.keypoints[[INDEX['left_shoulder'], INDEX['right_shoulder']], 2] = 0.0
        with self.assertRaises(InsufficientKeypointsError):
            localize_pose(record.pose, K, self.calibration)

    def test_error_tracks_task_error(self):
        """Test per-bin baseline error matches the task error within 15 percent."""
        config = SceneConfig()
        records = generate_records(2400, config, 17)
        calibration = calibrate_segments(records[:800])
        dist = PRESETS['adults']
        self.assertAlmostEqual(calibration.segments['shoulder-hip'].mean_m,
                               SHOULDER_HIP * mean_height(dist), delta=0.01)
        edges = [0.0, 10.0, 20.0, 30.0, math.inf]
        errors = {i: [] for i in range(4)}
        oracle = {i: [] for i in range(4)}
        for record in records[800:]:
            d_gt = record.gt.distance
            try:
                location = localize_pose(record.pose, record.K, calibration, 'shoulder-hip')
            except InsufficientKeypointsError:
                continue
            index = next(i for i in range(4) if edges[i] <= d_gt < edges[i + 1])
            errors[index].append(abs(location.distance - d_gt))
            oracle[index].append(task_error(dist, d_gt))
        for index in range(4):
            if len(errors[index]) < 100:
                continue
            self.assertAlmostEqual(np.mean(errors[index]) / np.mean(oracle[index]), 1.0, delta=0.15)


class CalibrationFileTests(SimpleTestCase):
    """Tests for save_calibration / load_calibration"""

    def test_round_trip(self):
        calibration = Calibration(
            segments={
                'shoulder-hip': SegmentCalibration('shoulder-hip', 0.49, 0.03, 120),
                'hip-ankle': SegmentCalibration('hip-ankle', 0.84, 0.05, 100),
            },
            selected='shoulder-hip',
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'calibration.json'
            save_calibration(calibration, path)
            loaded = load_calibration(path)
        self.assertEqual(loaded.segments, calibration.segments)
        self.assertEqual(loaded.selected, 'shoulder-hip')

    def test_missing_file(self):
        with self.assertRaises(CalibrationError):
            load_calibration('/nonexistent/calibration.json')

    def test_unknown_selected_segment(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'calibration.json'
            path.write_text('{"selected": "knee-ankle", "segments": {}}')
            with self.assertRaises(CalibrationError):
                load_calibration(path)

    def test_invalid_mean(self):
        with self.assertRaises(CalibrationError):
            SegmentCalibration('shoulder-hip', 0.0, 0.1)
