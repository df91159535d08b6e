"""
Localization and classification metrics.

Errors are absolute distance errors |d_pred - d_gt| in meters on
matched instances. Percentages are in [0, 100]; quantities with nothing
to average over are reported as None rather than zero.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from core.exceptions import PoseProxemicsError
from core.heights import task_error
from core.keypoints import DEFAULT_IOU_THRESHOLD, keypoint_box, match_detections

logger = logging.getLogger(__name__)

DEFAULT_BIN_EDGES = (0.0, 10.0, 20.0, 30.0)
DEFAULT_ALA_THRESHOLDS = (0.5, 1.0, 2.0)
DIFFICULTIES = ('easy', 'moderate', 'hard')
EASY_MIN_HEIGHT_PX = 40.0
MODERATE_MIN_HEIGHT_PX = 25.0


@dataclass(frozen=True)
class BinResult:
    lower: float
    upper: float | None
    ale: float | None
    count: int

    def as_dict(self):
        return {'lower': self.lower, 'upper': self.upper, 'ale': self.ale, 'count': self.count}


def _errors(predicted, ground_truth):
    predicted = np.asarray(predicted, dtype=float)
    ground_truth = np.asarray(ground_truth, dtype=float)
    if predicted.shape != ground_truth.shape:
        raise PoseProxemicsError(f"Prediction and ground-truth lengths differ: {predicted.shape} vs {ground_truth.shape}")
    return np.abs(predicted - ground_truth), ground_truth


def _mean_or_none(values):
    return float(np.mean(values)) if len(values) else None


def ale(predicted, ground_truth, bin_edges=DEFAULT_BIN_EDGES):
    """
    Average localization error per ground-truth distance bin.

    The last bin is open-ended. Empty bins report ale=None.

    Returns:
        list of BinResult
    """
    errors, gt = _errors(predicted, ground_truth)
    edges = list(bin_edges) + [math.inf]
    results = []
    for lower, upper in zip(edges[:-1], edges[1:]):
        in_bin = (gt >= lower) & (gt < upper)
        results.append(BinResult(
            lower=float(lower),
            upper=None if math.isinf(upper) else float(upper),
            ale=_mean_or_none(errors[in_bin]),
            count=int(np.count_nonzero(in_bin)),
        ))
    return results


def ala(errors, n_missed: int = 0, thresholds=DEFAULT_ALA_THRESHOLDS):
    """
    Share of ground truths localized within each threshold, and recall.

    Misses count as failures at every threshold.

    Returns:
        tuple: ({threshold: %}, recall %)
    """
    if any(t <= 0 for t in thresholds):
        raise PoseProxemicsError(f"ALA thresholds must be positive. Got: {list(thresholds)}")
    errors = np.asarray(errors, dtype=float)
    total = len(errors) + n_missed
    if total == 0:
        return {float(t): 0.0 for t in thresholds}, 0.0
    accuracy = {float(t): 100.0 * np.count_nonzero(errors <= t) / total for t in thresholds}
    return accuracy, 100.0 * len(errors) / total


def interval_recall(errors, uncertainty):
    """Percentage of matched instances whose error lies within the predicted interval."""
    errors = np.asarray(errors, dtype=float)
    uncertainty = np.asarray(uncertainty, dtype=float)
    if errors.shape != uncertainty.shape:
        raise PoseProxemicsError("Errors and uncertainties must have the same length.")
    if len(errors) == 0:
        return None
    return 100.0 * np.count_nonzero(errors <= uncertainty) / len(errors)


def classification_accuracy(predicted, labels):
    """
    Returns:
        tuple: (accuracy %, recall % on the positive class); None when undefined
    """
    predicted = np.asarray(predicted, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    if predicted.shape != labels.shape:
        raise PoseProxemicsError(f"Prediction and label lengths differ: {len(predicted)} vs {len(labels)}")
    if len(labels) == 0:
        return None, None
    accuracy = 100.0 * np.count_nonzero(predicted == labels) / len(labels)
    positives = np.count_nonzero(labels)
    recall = 100.0 * np.count_nonzero(predicted & labels) / positives if positives else None
    return accuracy, recall


def difficulty(box, truncated: bool = False) -> str:
    """
    easy: box at least 40 px tall; moderate: at least 25 px; else hard.
    Truncated instances drop one level.
    """
    height = box[3] - box[1]
    if height >= EASY_MIN_HEIGHT_PX:
        level = 0
    elif height >= MODERATE_MIN_HEIGHT_PX:
        level = 1
    else:
        level = 2
    if truncated:
        level = min(level + 1, 2)
    return DIFFICULTIES[level]


def ale_by_difficulty(predicted, ground_truth, categories):
    errors, _ = _errors(predicted, ground_truth)
    categories = list(categories)
    result = {}
    for name in DIFFICULTIES:
        selected = errors[[c == name for c in categories]] if len(categories) else errors[:0]
        result[name] = {'ale': _mean_or_none(selected), 'count': int(len(selected))}
    result['all'] = {'ale': _mean_or_none(errors), 'count': int(len(errors))}
    return result


def uncertainty_summary(predicted, ground_truth, b=None, sigma=None, heights=None):
    """Mean error, mean spreads, mean task error and interval recall of each spread."""
    errors, gt = _errors(predicted, ground_truth)
    summary = {
        'mean_error': _mean_or_none(errors),
        'mean_b': None,
        'mean_sigma': None,
        'mean_task_error': None,
        'recall_b': None,
        'recall_sigma': None,
    }
    if b is not None:
        summary['mean_b'] = _mean_or_none(b)
        summary['recall_b'] = interval_recall(errors, b)
    if sigma is not None:
        summary['mean_sigma'] = _mean_or_none(sigma)
        summary['recall_sigma'] = interval_recall(errors, sigma)
    if heights is not None and len(gt):
        summary['mean_task_error'] = float(np.mean([task_error(heights, d) for d in gt]))
    return summary


def spread_vs_task_error(ground_truth, b, heights, bin_edges=DEFAULT_BIN_EDGES):
    """
    Mean predicted spread per bin next to the task error at the bin center.

    The open last bin is evaluated at the mean distance of its members.

    Returns:
        list of dicts {lower, upper, mean_b, task_error, count}
    """
    gt = np.asarray(ground_truth, dtype=float)
    b = np.asarray(b, dtype=float)
    edges = list(bin_edges) + [math.inf]
    rows = []
    for lower, upper in zip(edges[:-1], edges[1:]):
        in_bin = (gt >= lower) & (gt < upper)
        if math.isinf(upper):
            center = float(gt[in_bin].mean()) if np.any(in_bin) else None
        else:
            center = 0.5 * (lower + upper)
        rows.append({
            'lower': float(lower),
            'upper': None if math.isinf(upper) else float(upper),
            'mean_b': _mean_or_none(b[in_bin]),
            'task_error': task_error(heights, center) if center is not None else None,
            'count': int(np.count_nonzero(in_bin)),
        })
    return rows


def error_curve(predicted, ground_truth, heights, step: float = 5.0):
    """
    (d, ALE, task error) rows at the centers of `step`-wide bins.

    Returns:
        list of (d, ale or None, e_hat)
    """
    if step <= 0:
        raise PoseProxemicsError(f"Step must be positive. Got: {step}")
    errors, gt = _errors(predicted, ground_truth)
    if len(gt) == 0:
        return []
    n_bins = int(math.floor(gt.max() / step)) + 1
    rows = []
    for k in range(n_bins):
        lower, upper = k * step, (k + 1) * step
        in_bin = (gt >= lower) & (gt < upper)
        center = lower + 0.5 * step
        rows.append((center, _mean_or_none(errors[in_bin]), task_error(heights, center)))
    return rows


# ============================================================================
# REPORTS
# ============================================================================

@dataclass(frozen=True)
class EvaluationConfig:
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    ala_thresholds: tuple = DEFAULT_ALA_THRESHOLDS
    bin_edges: tuple = DEFAULT_BIN_EDGES

    @classmethod
    def from_settings(cls, **overrides):
        conf = settings.POSE_PROXEMICS['EVALUATION']
        values = {
            'iou_threshold': conf['IOU_THRESHOLD'],
            'ala_thresholds': tuple(conf['ALA_THRESHOLDS']),
            'bin_edges': tuple(conf['BIN_EDGES']),
        }
        values.update({k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items() if v is not None})
        return cls(**values)


def match_estimates(estimates, records, iou_threshold=DEFAULT_IOU_THRESHOLD):
    """
    Match estimate dicts to labeled records scene by scene.

    Args:
        estimates: dicts with at least 'box', 'd' and optionally 'scene'
        records: PoseRecord list with ground truth

    Returns:
        tuple: (list of (estimate, record) pairs, number of unmatched ground truths)
    """
    gt_by_scene = defaultdict(list)
    for record in records:
        if record.gt is not None:
            gt_by_scene[record.scene].append(record)
    est_by_scene = defaultdict(list)
    for estimate in estimates:
        est_by_scene[estimate.get('scene', 0)].append(estimate)

    pairs, missed = [], 0
    for scene, gts in gt_by_scene.items():
        candidates = est_by_scene.get(scene, [])
        matches = match_detections(
            [c['box'] for c in candidates],
            [keypoint_box(r.pose) for r in gts],
            iou_threshold,
        )
        pairs.extend((candidates[i], gts[j]) for i, j, _ in matches)
        missed += len(gts) - len(matches)
    return pairs, missed


def evaluate(estimates, records, config: EvaluationConfig = EvaluationConfig(), heights=None, seed=None):
    """
    Build the evaluation report for predicted estimates against labeled records.

    Returns:
        dict following the EvalReportSerializer schema
    """
    pairs, missed = match_estimates(estimates, records, config.iou_threshold)
    predicted = [e['d'] for e, _ in pairs]
    ground_truth = [r.gt.distance for _, r in pairs]
    errors = [abs(p - g) for p, g in zip(predicted, ground_truth)]
    categories = [difficulty(keypoint_box(r.pose), bool(r.meta.get('truncated', False))) for _, r in pairs]

    b = [e.get('b') for e, _ in pairs]
    sigma = [e.get('sigma') for e, _ in pairs]
    has_b = bool(pairs) and all(v is not None for v in b)
    has_sigma = bool(pairs) and all(v is not None for v in sigma)

    accuracy, recall = ala(errors, missed, config.ala_thresholds)
    spread = None
    if has_b and heights is not None:
        spread = spread_vs_task_error(ground_truth, b, heights, config.bin_edges)
    report = {
        'bins': [r.as_dict() for r in ale(predicted, ground_truth, config.bin_edges)],
        'difficulty': ale_by_difficulty(predicted, ground_truth, categories),
        'ala': {f'{t:g}': v for t, v in accuracy.items()},
        'recall': recall,
        'matched': len(pairs),
        'ground_truths': len(pairs) + missed,
        'interval_recall': {
            'b': interval_recall(errors, b) if has_b else None,
            'sigma': interval_recall(errors, sigma) if has_sigma else None,
        },
        'uncertainty': uncertainty_summary(
            predicted, ground_truth,
            b=b if has_b else None,
            sigma=sigma if has_sigma else None,
            heights=heights,
        ),
        'spread': spread,
    }
    if seed is not None:
        report['seed'] = seed
    logger.info("Evaluated %d matches, %d missed ground truths", len(pairs), missed)
    return report


def report_csv(report) -> str:
    """One row per distance bin and per ALA threshold."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['kind', 'key', 'upper', 'value', 'count'])
    for row in report['bins']:
        writer.writerow(['ale', row['lower'], '' if row['upper'] is None else row['upper'],
                         '' if row['ale'] is None else row['ale'], row['count']])
    for threshold, value in report['ala'].items():
        writer.writerow(['ala', threshold, '', value, report['ground_truths']])
    return buffer.getvalue()


def curve_csv(rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['d', 'ale', 'task_error'])
    for d, value, e_hat in rows:
        writer.writerow([d, '' if value is None else value, e_hat])
    return buffer.getvalue()
