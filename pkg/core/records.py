"""
Record types exchanged between the generator, the parsers and the models.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from core.coco import NUM_KEYPOINTS
from core.exceptions import SchemaError
from core.geometry import CameraIntrinsics, CartesianLocation

MIN_VISIBLE_JOINTS = 3


@dataclass(frozen=True)
class Person3D:
    """Ground truth for one person: mid-hip location, heading, stature, box dims."""
    location: CartesianLocation
    theta: float
    height_m: float
    dims: tuple[float, float, float]

    @property
    def distance(self) -> float:
        return self.location.distance


@dataclass(frozen=True, eq=False)
class Pose2D:
    """17 COCO keypoints as rows of (u, v, confidence); confidence 0 = not visible."""
    keypoints: np.ndarray

    def __post_init__(self):
        kps = np.asarray(self.keypoints, dtype=float)
        if kps.shape != (NUM_KEYPOINTS, 3):
            raise SchemaError(
                f"A pose needs {NUM_KEYPOINTS} keypoints of (u, v, c). Got shape {kps.shape}."
            )
        object.__setattr__(self, 'keypoints', kps)

    @property
    def visible(self) -> np.ndarray:
        return self.keypoints[:, 2] > 0

    @property
    def num_visible(self) -> int:
        return int(np.count_nonzero(self.visible))

    @property
    def is_usable(self) -> bool:
        return self.num_visible >= MIN_VISIBLE_JOINTS

    def __eq__(self, other):
        return isinstance(other, Pose2D) and np.array_equal(self.keypoints, other.keypoints)

    __hash__ = None


@dataclass(eq=False)
class PoseRecord:
    """One line of a pose file: a pose, its camera and optional ground truth."""
    pose: Pose2D
    K: CameraIntrinsics
    gt: Person3D | None = None
    meta: dict = field(default_factory=dict)

    @property
    def scene(self):
        return self.meta.get('scene', 0)
