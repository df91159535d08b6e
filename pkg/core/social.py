"""
F-formations, social interaction voting and social-distancing verdicts.

People live on the ground plane as (x, z, theta) with the heading
(cos theta, sin theta). Each person votes for an o-space center at a
candidate radius r along their heading; a pair forms a formation when

    (a) they stand at most D_max apart,
    (b) nobody else stands strictly inside the o-space disc,
    (c) their candidate centers lie at most R_max apart.

Interaction uses R_max = r_o; distancing relaxes it to R_max = 2 r_o.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from django.conf import settings

from core.evaluation import classification_accuracy
from core.exceptions import PoseProxemicsError
from core.heights import task_error
from core.scenes import SceneConfig, sample_scene

logger = logging.getLogger(__name__)

MODES = ('interaction', 'distancing')
UNCERTAINTY_SOURCES = ('network', 'task_error', 'none')
MIN_RANGE = 1e-6


@dataclass(frozen=True)
class GroundPose:
    x: float
    z: float
    theta: float
    b: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.z, self.theta, self.b)):
            raise PoseProxemicsError(f"Ground pose must be finite. Got: {self}")
        if self.b < 0:
            raise PoseProxemicsError(f"Spread must be non-negative. Got: {self.b}")

    @property
    def position(self):
        return np.array([self.x, self.z])

    @property
    def heading(self):
        return np.array([math.cos(self.theta), math.sin(self.theta)])


@dataclass(frozen=True)
class OSpace:
    center: tuple
    radius: float
    candidate_radius: float


@dataclass(frozen=True)
class FormationCheck:
    """Result of one pair check with the verdict of every condition."""
    passed: bool
    close_enough: bool
    unobstructed: bool
    facing: bool
    o_space: OSpace


@dataclass(frozen=True)
class SocialConfig:
    d_max: float = 2.0
    radii: tuple = (0.3, 0.5, 1.0)
    mode: str = 'interaction'
    n_samples: int = 100
    threshold: float = 0.25
    seed: int = 0
    use_orientation: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise PoseProxemicsError(f"Unknown mode '{self.mode}'. Must be one of: {', '.join(MODES)}")
        if not self.radii or any(r <= 0 for r in self.radii):
            raise PoseProxemicsError(f"Candidate radii must be positive. Got: {self.radii}")
        if not 0.0 < self.threshold <= 1.0:
            raise PoseProxemicsError(f"Agreement threshold must be in (0, 1]. Got: {self.threshold}")
        if self.n_samples < 1:
            raise PoseProxemicsError(f"Number of samples must be positive. Got: {self.n_samples}")
        if self.d_max <= 0:
            raise PoseProxemicsError(f"D_max must be positive. Got: {self.d_max}")

    @classmethod
    def from_settings(cls, **overrides):
        conf = settings.POSE_PROXEMICS['SOCIAL']
        values = {
            'd_max': conf['D_MAX'],
            'radii': tuple(conf['RADII']),
            'n_samples': conf['N_SAMPLES'],
            'threshold': conf['THRESHOLD'],
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if 'radii' in values:
            values['radii'] = tuple(values['radii'])
        return cls(**values)

    def r_max(self, r_o):
        return 2.0 * r_o if self.mode == 'distancing' else r_o


@dataclass(frozen=True)
class PairVerdict:
    i: int
    j: int
    vote_fraction: float
    interacting: bool

    def as_dict(self):
        return {'i': self.i, 'j': self.j, 'vote_fraction': self.vote_fraction, 'interacting': self.interacting}


@dataclass
class VerdictReport:
    pairs: list = field(default_factory=list)
    at_risk: list = field(default_factory=list)

    def as_dict(self):
        return {
            'pairs': [p.as_dict() for p in self.pairs],
            'at_risk': [i for i, flagged in enumerate(self.at_risk) if flagged],
        }


# ============================================================================
# GEOMETRY
# ============================================================================

def o_space(p0: GroundPose, p1: GroundPose, r: float) -> OSpace:
    """O-space of a pair: midpoint of both candidate centers, radius to the nearer person."""
    if r <= 0:
        raise PoseProxemicsError(f"Candidate radius must be positive. Got: {r}")
    mu0 = p0.position + r * p0.heading
    mu1 = p1.position + r * p1.heading
    center = 0.5 * (mu0 + mu1)
    radius = min(np.linalg.norm(center - p0.position), np.linalg.norm(center - p1.position))
    return OSpace(center=(float(center[0]), float(center[1])), radius=float(radius), candidate_radius=r)


def _check_arrays(pos0, pos1, heading0, heading1, others, r, config):
    """
    Vectorized formation check over sample rows.

    Args:
        pos0, pos1: (n, 2) positions
        heading0, heading1: (2,) unit headings
        others: (m, 2) positions of everybody else
        r: candidate radius

    Returns:
        tuple of (n,) bool arrays: (passed, a, b, c)
    """
    mu0 = pos0 + r * heading0
    mu1 = pos1 + r * heading1
    center = 0.5 * (mu0 + mu1)
    r_o = np.minimum(np.linalg.norm(center - pos0, axis=1), np.linalg.norm(center - pos1, axis=1))

    close = np.linalg.norm(pos0 - pos1, axis=1) <= config.d_max
    if len(others):
        gaps = np.linalg.norm(center[:, None, :] - others[None, :, :], axis=2)
        unobstructed = np.all(gaps >= r_o[:, None], axis=1)
    else:
        unobstructed = np.ones(len(pos0), dtype=bool)
    if config.use_orientation:
        facing = np.linalg.norm(mu0 - mu1, axis=1) <= config.r_max(r_o)
    else:
        facing = np.ones(len(pos0), dtype=bool)
    return close & unobstructed & facing, close, unobstructed, facing


def f_formation_check(p0: GroundPose, p1: GroundPose, others, r: float,
                      config: SocialConfig = SocialConfig()) -> FormationCheck:
    others_xy = np.array([o.position for o in others]).reshape(-1, 2)
    passed, a, b, c = _check_arrays(
        p0.position[None, :], p1.position[None, :], p0.heading, p1.heading, others_xy, r, config
    )
    return FormationCheck(bool(passed[0]), bool(a[0]), bool(b[0]), bool(c[0]), o_space(p0, p1, r))


# ============================================================================
# VOTING
# ============================================================================

def _radial_samples(person, n, rng):
    """n positions with Laplace noise of scale b on the ground-plane range."""
    position = person.position
    if person.b == 0:
        return np.repeat(position[None, :], n, axis=0)
    rho = float(np.linalg.norm(position))
    direction = position / rho if rho > MIN_RANGE else np.array([0.0, 1.0])
    ranges = np.maximum(rho + rng.laplace(0.0, person.b, size=n), MIN_RANGE)
    return ranges[:, None] * direction[None, :]


def vote_fraction(people, i, j, config: SocialConfig) -> float:
    """Fraction of joint samples of (i, j) for which any candidate radius passes."""
    p0, p1 = people[i], people[j]
    others = np.array([p.position for k, p in enumerate(people) if k not in (i, j)]).reshape(-1, 2)
    deterministic = p0.b == 0 and p1.b == 0
    n = 1 if deterministic else config.n_samples
    lo, hi = sorted((i, j))
    rng = np.random.default_rng([config.seed, lo, hi])
    samples = {lo: _radial_samples(people[lo], n, rng)}
    samples[hi] = _radial_samples(people[hi], n, rng)
    pos0, pos1 = samples[i], samples[j]

    votes = np.zeros(n, dtype=bool)
    for r in config.radii:
        passed, *_ = _check_arrays(pos0, pos1, p0.heading, p1.heading, others, r, config)
        votes |= passed
    return float(np.count_nonzero(votes)) / n


def detect_interactions(people, config: SocialConfig = SocialConfig()):
    """
    All-vs-all pair verdicts.

    A pair interacts when at least `config.threshold` of its joint
    samples pass. People with b = 0 are not sampled, so an all-zero
    scene reduces to the deterministic check.

    Returns:
        list of PairVerdict for i < j
    """
    people = list(people)
    verdicts = []
    for i in range(len(people)):
        for j in range(i + 1, len(people)):
            fraction = vote_fraction(people, i, j, config)
            verdicts.append(PairVerdict(i, j, fraction, fraction >= config.threshold))
    logger.debug("Checked %d pairs among %d people (%s)", len(verdicts), len(people), config.mode)
    return verdicts


def social_distancing_check(people, config: SocialConfig = SocialConfig()) -> VerdictReport:
    """Flag everyone who belongs to at least one pair passing the relaxed check."""
    people = list(people)
    pairs = detect_interactions(people, replace(config, mode='distancing'))
    at_risk = [False] * len(people)
    for verdict in pairs:
        if verdict.interacting:
            at_risk[verdict.i] = at_risk[verdict.j] = True
    return VerdictReport(pairs=pairs, at_risk=at_risk)


def augment_labels(gt_people, config: SocialConfig = SocialConfig()):
    """Distancing labels computed on ground truth, ignoring any spread."""
    exact = [replace(p, b=0.0) for p in gt_people]
    return social_distancing_check(exact, config).at_risk


def monitor(people, config: SocialConfig = SocialConfig()) -> VerdictReport:
    """Verdict report in the configured mode."""
    if config.mode == 'distancing':
        return social_distancing_check(people, config)
    pairs = detect_interactions(people, config)
    at_risk = [False] * len(people)
    for verdict in pairs:
        if verdict.interacting:
            at_risk[verdict.i] = at_risk[verdict.j] = True
    return VerdictReport(pairs=pairs, at_risk=at_risk)


# ============================================================================
# GROUND POSES
# ============================================================================

def ground_pose_from_person(person) -> GroundPose:
    return GroundPose(person.location.x, person.location.z, person.theta, 0.0)


def make_ground_pose(x, z, theta, d, b=None, uncertainty: str = 'network', heights=None) -> GroundPose:
    """
    Ground pose of an estimate with the spread chosen by `uncertainty`.

    Args:
        x, z: Ground-plane position (m)
        theta: Heading (rad)
        d: Estimated distance (m)
        b: Predicted spread in meters, or None
        uncertainty: 'network' uses b, 'task_error' the height-ambiguity
            error at distance d, 'none' zero
        heights: HeightDistribution for 'task_error'
    """
    if uncertainty not in UNCERTAINTY_SOURCES:
        raise PoseProxemicsError(
            f"Unknown uncertainty source '{uncertainty}'. Must be one of: {', '.join(UNCERTAINTY_SOURCES)}"
        )
    if theta is None:
        raise PoseProxemicsError("Estimates without an orientation cannot be monitored.")
    if uncertainty == 'network':
        spread = b or 0.0
    elif uncertainty == 'task_error':
        if heights is None:
            raise PoseProxemicsError("Task-error uncertainty needs a height distribution.")
        spread = task_error(heights, d)
    else:
        spread = 0.0
    return GroundPose(float(x), float(z), float(theta), float(spread))


# ============================================================================
# EXPERIMENTS
# ============================================================================

def _noisy(person, relative_spread, rng):
    rho = float(np.linalg.norm(person.position))
    b = relative_spread * rho
    observed = max(rho + rng.laplace(0.0, b), MIN_RANGE)
    scale = observed / rho
    return GroundPose(person.x * scale, person.z * scale, person.theta, b)


def voting_benefit(n_scenes: int = 500, relative_spread: float = 0.05, seed: int = 0,
                   config: SocialConfig | None = None, scene_config: SceneConfig | None = None):
    """
    Deterministic vs voting accuracy on generated multi-person scenes.

    Scenes come from the synthetic generator, so companions in vis-a-vis,
    L-shape and side-by-side formations mix with unrelated passers-by.
    Every pair is labeled by the deterministic check on the true poses.
    Observed ranges carry Laplace noise of scale relative_spread * range,
    and that scale is reported as b.

    Returns:
        dict with deterministic and voting accuracy (%), the scene and pair
        counts and the number of interacting pairs
    """
    if n_scenes < 1:
        raise PoseProxemicsError(f"Number of scenes must be positive. Got: {n_scenes}")
    if relative_spread < 0:
        raise PoseProxemicsError(f"Relative spread must be non-negative. Got: {relative_spread}")
    config = config or SocialConfig(seed=seed)
    scene_config = scene_config or SceneConfig(max_people=3, group_fraction=0.8)
    rng = np.random.default_rng(seed)
    labels, deterministic, voting = [], [], []
    for index in range(n_scenes):
        n_people = int(rng.integers(2, max(scene_config.max_people, 2) + 1))
        scene = sample_scene(scene_config, n_people, rng, seed)
        truth = [ground_pose_from_person(p) for p in scene.people]
        observed = [_noisy(p, relative_spread, rng) for p in truth]
        pair_config = replace(config, seed=config.seed + index)

        labels.extend(v.interacting for v in detect_interactions(truth, pair_config))
        deterministic.extend(v.interacting for v in detect_interactions(
            [replace(p, b=0.0) for p in observed], pair_config))
        voting.extend(v.interacting for v in detect_interactions(observed, pair_config))

    det_accuracy, _ = classification_accuracy(deterministic, labels)
    vote_accuracy, _ = classification_accuracy(voting, labels)
    logger.info("Voting benefit over %d scenes (%d pairs): deterministic %.1f%%, voting %.1f%%",
                n_scenes, len(labels), det_accuracy, vote_accuracy)
    return {
        'scenes': n_scenes,
        'pairs': len(labels),
        'interacting': int(sum(labels)),
        'deterministic': det_accuracy,
        'voting': vote_accuracy,
    }
