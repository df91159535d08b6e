"""
Synthetic ground-truth generator.

Samples upright pedestrians with mixture statures, builds anthropometric
skeletons, projects them through a pinhole camera and writes labeled
JSON-lines datasets. Output bytes are a pure function of (n, config, seed).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.coco import INDEX, KEYPOINT_NAMES, NUM_KEYPOINTS, side
from core.exceptions import PoseProxemicsError
from core.geometry import CameraIntrinsics, CartesianLocation, project_points, wrap_angle
from core.heights import HeightDistribution, get_preset
from core.keypoints import write_records
from core.records import Person3D, Pose2D, PoseRecord

logger = logging.getLogger(__name__)

PERSON_WIDTH = 0.6
PERSON_LENGTH = 0.5
CANDIDATE_RADII = (0.3, 0.5, 1.0)
MAX_PLACEMENT_ATTEMPTS = 1000

# Angle of the companion on the o-space circle, relative to the anchor heading.
FORMATION_ANGLES = {
    'vis-a-vis': (0.0,),
    'l-shape': (1.5 * math.pi, 0.5 * math.pi),
    'side-by-side': (math.pi - math.pi / 3, math.pi + math.pi / 3),
}


# ============================================================================
# SKELETON
# ============================================================================

# Joint heights above the ground as fractions of stature (Drillis-style
# anthropometry); shoulder (0.818) minus hip (0.530) gives the 0.288 segment.
DEFAULT_VERTICAL = {
    'nose': 0.925, 'eye': 0.936, 'ear': 0.936,
    'shoulder': 0.818, 'elbow': 0.630, 'wrist': 0.485,
    'hip': 0.530, 'knee': 0.285, 'ankle': 0.039,
}

# Distance of each joint from the body midline, as fractions of stature
DEFAULT_HALF_WIDTH = {
    'nose': 0.0, 'eye': 0.018, 'ear': 0.045,
    'shoulder': 0.129, 'elbow': 0.150, 'wrist': 0.155,
    'hip': 0.095, 'knee': 0.070, 'ankle': 0.060,
}


def _part(name):
    return name.replace('left_', '').replace('right_', '')


@dataclass(frozen=True)
class SkeletonModel:
    """Per-joint vertical fractions and lateral half-widths in COCO order."""
    vertical: tuple[float, ...] = tuple(DEFAULT_VERTICAL[_part(n)] for n in KEYPOINT_NAMES)
    half_width: tuple[float, ...] = tuple(DEFAULT_HALF_WIDTH[_part(n)] for n in KEYPOINT_NAMES)

    def __post_init__(self):
        if len(self.vertical) != NUM_KEYPOINTS or len(self.half_width) != NUM_KEYPOINTS:
            raise PoseProxemicsError(f"A skeleton model needs {NUM_KEYPOINTS} entries per table.")
        if not all(0.0 < v < 1.0 for v in self.vertical):
            raise PoseProxemicsError("Vertical fractions must lie in (0, 1).")
        if not all(0.0 <= w < 1.0 for w in self.half_width):
            raise PoseProxemicsError("Half-widths must lie in [0, 1).")
        for i, name in enumerate(KEYPOINT_NAMES):
            if name.startswith('left_'):
                j = INDEX[name.replace('left_', 'right_')]
                if self.vertical[i] != self.vertical[j] or self.half_width[i] != self.half_width[j]:
                    raise PoseProxemicsError(f"Skeleton model is not mirror-symmetric at '{name}'.")

    @property
    def hip_fraction(self) -> float:
        return self.vertical[INDEX['left_hip']]

    def segment_fraction(self, upper, lower) -> float:
        """Vertical gap between two joint families, e.g. ('shoulder', 'hip')."""
        return self.vertical[INDEX[f'left_{upper}']] - self.vertical[INDEX[f'left_{lower}']]


DEFAULT_SKELETON = SkeletonModel()


# ============================================================================
# SAMPLING
# ============================================================================

@dataclass(frozen=True)
class Region:
    """Ground-plane box in which people are placed (camera frame, meters)."""
    x_min: float = -15.0
    x_max: float = 15.0
    z_min: float = 3.0
    z_max: float = 40.0

    def __post_init__(self):
        if self.x_min >= self.x_max or self.z_min >= self.z_max:
            raise PoseProxemicsError(
                f"Region is empty: x=[{self.x_min}, {self.x_max}], z=[{self.z_min}, {self.z_max}]"
            )
        if self.z_min <= 0:
            raise PoseProxemicsError(f"Region must lie in front of the camera. Got z_min={self.z_min}")

    def contains(self, x, z) -> bool:
        return self.x_min <= x <= self.x_max and self.z_min <= z <= self.z_max


@dataclass(frozen=True)
class Scene:
    people: list
    intrinsics: CameraIntrinsics
    seed: int = 0


@dataclass(frozen=True)
class SceneConfig:
    image_width: int = 1242
    image_height: int = 375
    focal: float = 720.0
    camera_height: float = 1.65
    max_people: int = 4
    group_fraction: float = 0.5
    noise_px: float = 0.0
    heights: str = 'adults'
    region: Region = field(default_factory=Region)
    skeleton: SkeletonModel = DEFAULT_SKELETON

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            self.focal, self.focal,
            (self.image_width - 1) / 2.0, (self.image_height - 1) / 2.0,
            self.image_width, self.image_height,
        )

    @property
    def distribution(self) -> HeightDistribution:
        return get_preset(self.heights)


def _person_at(x, z, theta, height, y_ground, model):
    y = y_ground - model.hip_fraction * height
    return Person3D(
        location=CartesianLocation(float(x), float(y), float(z)),
        theta=float(theta),
        height_m=float(height),
        dims=(PERSON_WIDTH, float(height), PERSON_LENGTH),
    )


def sample_person(dist: HeightDistribution, region: Region, rng: np.random.Generator,
                  y_ground: float = 1.65, model: SkeletonModel = DEFAULT_SKELETON) -> Person3D:
    """
    Draw one upright person standing on the ground plane y = y_ground.

    Height comes from `dist`, (x, z) uniformly from `region`, heading
    uniformly from (-pi, pi].
    """
    height = float(dist.sample(1, rng)[0])
    x = rng.uniform(region.x_min, region.x_max)
    z = rng.uniform(region.z_min, region.z_max)
    theta = wrap_angle(rng.uniform(-math.pi, math.pi))
    return _person_at(x, z, theta, height, y_ground, model)


def skeleton_from_person(p: Person3D, model: SkeletonModel = DEFAULT_SKELETON) -> np.ndarray:
    """
    Place the 17 joints of an upright person.

    Joints lie on the vertical plane through the mid-hip that is
    perpendicular to the heading; the person's left points along
    (-sin theta, cos theta) in the (x, z) plane.

    Returns:
        (17, 3) array of camera-frame joint positions
    """
    left = np.array([-math.sin(p.theta), 0.0, math.cos(p.theta)])
    anchor = p.location.as_array()
    joints = np.empty((NUM_KEYPOINTS, 3))
    for i in range(NUM_KEYPOINTS):
        rise = (model.vertical[i] - model.hip_fraction) * p.height_m
        lateral = side(i) * model.half_width[i] * p.height_m
        joints[i] = anchor + lateral * left + np.array([0.0, -rise, 0.0])
    return joints


def _in_image(uv, K):
    return (uv[..., 0] >= 0) & (uv[..., 0] < K.width) & (uv[..., 1] >= 0) & (uv[..., 1] < K.height)


def _project_joints(joints, K):
    """Project joints; joints at or behind the image plane come back as NaN."""
    uv = np.full((len(joints), 2), np.nan)
    in_front = joints[:, 2] > 0
    uv[in_front] = project_points(joints[in_front], K)
    return uv


def render_scene(s: Scene, pixel_noise_std: float, rng: np.random.Generator):
    """
    Project every person of a scene to a noisy 2D pose.

    Joints outside the image (or behind the camera) get confidence 0.

    Returns:
        list of (Pose2D, Person3D) tuples
    """
    if pixel_noise_std < 0:
        raise PoseProxemicsError(f"Pixel noise must be non-negative. Got: {pixel_noise_std}")
    K = s.intrinsics
    rendered = []
    for person in s.people:
        uv = _project_joints(skeleton_from_person(person), K)
        if pixel_noise_std > 0:
            uv = uv + rng.normal(0.0, pixel_noise_std, size=uv.shape)
        visible = np.isfinite(uv).all(axis=1)
        if K.width is not None and K.height is not None:
            visible &= _in_image(np.nan_to_num(uv, nan=-1.0), K)
        uv = np.nan_to_num(uv, nan=0.0)
        keypoints = np.column_stack([uv, visible.astype(float)])
        rendered.append((Pose2D(keypoints), person))
    return rendered


def _fits_frame(person, K, model, min_visible=5):
    uv = _project_joints(skeleton_from_person(person, model), K)
    if not np.isfinite(uv).all():
        return False
    hip = uv[[INDEX['left_hip'], INDEX['right_hip']]].mean(axis=0)
    return bool(_in_image(hip, K)) and int(np.count_nonzero(_in_image(uv, K))) >= min_visible


def _sample_in_frame(config, rng):
    K = config.intrinsics
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        person = sample_person(config.distribution, config.region, rng,
                               config.camera_height, config.skeleton)
        if _fits_frame(person, K, config.skeleton):
            return person
    raise PoseProxemicsError("Could not place a person inside the camera frustum; check the region bounds.")


def sample_companion(anchor: Person3D, config: SceneConfig, rng: np.random.Generator,
                     formation: str | None = None):
    """
    Place a second person sharing an o-space with `anchor`.

    The anchor looks at an o-space center at a random candidate radius; the
    companion stands on the same circle and faces the center. A vis-a-vis
    companion stands across the circle, an L-shape companion a quarter turn
    away and a side-by-side companion a sixth of a turn away, at the anchor's
    left or right.

    Args:
        formation: one of FORMATION_ANGLES, drawn uniformly when omitted

    Returns:
        Person3D, or None if the companion would leave the region/frame
    """
    if formation is None:
        formation = str(rng.choice(sorted(FORMATION_ANGLES)))
    elif formation not in FORMATION_ANGLES:
        raise PoseProxemicsError(
            f"Unknown formation '{formation}'. Choose from: {', '.join(sorted(FORMATION_ANGLES))}"
        )
    r = float(rng.choice(CANDIDATE_RADII))
    heading = np.array([math.cos(anchor.theta), math.sin(anchor.theta)])
    center = np.array([anchor.location.x, anchor.location.z]) + r * heading
    phi = anchor.theta + float(rng.choice(FORMATION_ANGLES[formation]))
    x, z = center + r * np.array([math.cos(phi), math.sin(phi)])
    height = float(config.distribution.sample(1, rng)[0])
    companion = _person_at(x, z, wrap_angle(phi + math.pi), height, config.camera_height, config.skeleton)
    if not config.region.contains(x, z) or not _fits_frame(companion, config.intrinsics, config.skeleton):
        return None
    return companion


def sample_scene(config: SceneConfig, n_people: int, rng: np.random.Generator, seed: int = 0) -> Scene:
    people = []
    while len(people) < n_people:
        companion = None
        if people and rng.random() < config.group_fraction:
            companion = sample_companion(people[int(rng.integers(len(people)))], config, rng)
        people.append(companion or _sample_in_frame(config, rng))
    return Scene(people=people, intrinsics=config.intrinsics, seed=seed)


# ============================================================================
# DATASETS
# ============================================================================

def generate_records(n: int, config: SceneConfig, seed: int):
    """
    Generate n labeled pose records, grouped into scenes of 1..max_people.

    Returns:
        list of PoseRecord
    """
    if n <= 0:
        raise PoseProxemicsError(f"Number of records must be positive. Got: {n}")
    rng = np.random.default_rng(seed)
    records = []
    scene_index = 0
    while len(records) < n:
        n_people = int(rng.integers(1, config.max_people + 1))
        scene = sample_scene(config, n_people, rng, seed)
        for person_index, (pose, person) in enumerate(render_scene(scene, config.noise_px, rng)):
            records.append(PoseRecord(
                pose=pose,
                K=scene.intrinsics,
                gt=person,
                meta={
                    'scene': scene_index,
                    'person': person_index,
                    'seed': seed,
                    'truncated': bool(np.any(~pose.visible)),
                },
            ))
        scene_index += 1
    logger.info("Generated %d records in %d scenes (seed=%d)", n, scene_index, seed)
    # a scene cut short still keeps its first people
    return records[:n]


def generate_dataset(n: int, config: SceneConfig, seed: int, path):
    """Write n generated records to `path` as JSON lines and return them."""
    records = generate_records(n, config, seed)
    write_records(records, path)
    return records
