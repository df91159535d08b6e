"""
Tests for F-formations, interaction voting and distancing verdicts.

Tests cover:
- O-space geometry and the three formation conditions
- Deterministic verdicts against a naive condition-enumeration oracle
- Symmetry, rigid-motion invariance and D_max monotonicity
- Voting under radial Laplace noise
- Distancing verdicts, ground-truth labels and the voting benefit
- Ground poses built from estimates
"""
import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from core.evaluation import classification_accuracy
from core.exceptions import PoseProxemicsError
from core.heights import PRESETS, task_error
from core.social import (
    GroundPose, SocialConfig, augment_labels, detect_interactions, f_formation_check, make_ground_pose,
    monitor, o_space, social_distancing_check, vote_fraction, voting_benefit
)

HAND_P0 = GroundPose(0.0, 0.0, 0.0)
HAND_P1 = GroundPose(1.6, 0.0, math.pi)


def _naive_pair(people, i, j, config):
    """Enumerate the formation conditions directly for a deterministic pair."""
    p0, p1 = people[i], people[j]
    if math.hypot(p0.x - p1.x, p0.z - p1.z) > config.d_max:
        return False
    for r in config.radii:
        m0 = (p0.x + r * math.cos(p0.theta), p0.z + r * math.sin(p0.theta))
        m1 = (p1.x + r * math.cos(p1.theta), p1.z + r * math.sin(p1.theta))
        cx, cz = (m0[0] + m1[0]) / 2, (m0[1] + m1[1]) / 2
        r_o = min(math.hypot(cx - p0.x, cz - p0.z), math.hypot(cx - p1.x, cz - p1.z))
        intruded = any(
            math.hypot(cx - p.x, cz - p.z) < r_o for k, p in enumerate(people) if k not in (i, j)
        )
        limit = 2 * r_o if config.mode == 'distancing' else r_o
        if not intruded and math.hypot(m0[0] - m1[0], m0[1] - m1[1]) <= limit:
            return True
    return False


def _random_scene(rng, n, b=0.0):
    return [
        GroundPose(rng.uniform(-2, 2), rng.uniform(3, 7), rng.uniform(-math.pi, math.pi), b)
        for _ in range(n)
    ]


class OSpaceTests(SimpleTestCase):
    """Tests for o_space"""

    def test_hand_geometry(self):
        space = o_space(HAND_P0, HAND_P1, 0.5)
        self.assertAlmostEqual(space.center[0], 0.8)
        self.assertAlmostEqual(space.center[1], 0.0)
        self.assertAlmostEqual(space.radius, 0.8)
        self.assertEqual(space.candidate_radius, 0.5)

    def test_perfect_formation(self):
        p0 = GroundPose(0.0, 5.0, 0.0)
        p1 = GroundPose(1.0, 5.0, math.pi)
        space = o_space(p0, p1, 0.5)
        self.assertAlmostEqual(space.center[0], 0.5)
        self.assertAlmostEqual(space.center[1], 5.0)
        self.assertAlmostEqual(space.radius, 0.5)

    def test_symmetric(self):
        p0, p1 = GroundPose(0.3, 4.0, 1.0), GroundPose(-0.4, 5.2, -2.0)
        a, b = o_space(p0, p1, 1.0), o_space(p1, p0, 1.0)
        self.assertAlmostEqual(a.center[0], b.center[0])
        self.assertAlmostEqual(a.center[1], b.center[1])
        self.assertAlmostEqual(a.radius, b.radius)

    def test_radius_must_be_positive(self):
        with self.assertRaises(PoseProxemicsError):
            o_space(HAND_P0, HAND_P1, 0.0)


class FormationCheckTests(SimpleTestCase):
    """Tests for f_formation_check"""

    def test_too_far_apart(self):
        check = f_formation_check(GroundPose(0.0, 0.0, 0.0), GroundPose(5.0, 0.0, math.pi), [], 0.5)
        self.assertFalse(check.passed)
        self.assertFalse(check.close_enough)

    def test_hand_geometry_passes(self):
        check = f_formation_check(HAND_P0, HAND_P1, [], 0.5)
        self.assertTrue(check.passed)
        self.assertTrue(check.facing)
        self.assertAlmostEqual(check.o_space.radius, 0.8)

    def test_intruder_at_center(self):
        check = f_formation_check(HAND_P0, HAND_P1, [GroundPose(0.8, 0.0, 0.0)], 0.5)
        self.assertFalse(check.passed)
        self.assertFalse(check.unobstructed)
        self.assertTrue(check.close_enough)

    def test_boundary_counts_as_formation(self):
        """Test a pair exactly D_max apart still passes."""
        p0, p1 = GroundPose(0.0, 0.0, 0.0), GroundPose(2.0, 0.0, math.pi)
        self.assertTrue(f_formation_check(p0, p1, [], 1.0).passed)

    def test_relaxed_facing_rule(self):
        interaction = f_formation_check(HAND_P0, HAND_P1, [], 0.3, SocialConfig(mode='interaction'))
        distancing = f_formation_check(HAND_P0, HAND_P1, [], 0.3, SocialConfig(mode='distancing'))
        self.assertFalse(interaction.facing)
        self.assertTrue(distancing.facing)

    def test_without_orientation(self):
        p0, p1 = GroundPose(0.0, 0.0, math.pi), GroundPose(1.0, 0.0, 0.0)
        self.assertFalse(f_formation_check(p0, p1, [], 0.5).passed)
        self.assertTrue(f_formation_check(p0, p1, [], 0.5, SocialConfig(use_orientation=False)).passed)


class DeterministicVerdictTests(SimpleTestCase):
    """Tests for detect_interactions with exact positions"""

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(0)
        for mode in ('interaction', 'distancing'):
            config = SocialConfig(mode=mode)
            for _ in range(500):
                people = _random_scene(rng, int(rng.integers(2, 5)))
                for verdict in detect_interactions(people, config):
                    self.assertEqual(verdict.interacting, _naive_pair(people, verdict.i, verdict.j, config))
                    self.assertIn(verdict.vote_fraction, (0.0, 1.0))

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(1)
        config = SocialConfig(mode='distancing')
        for _ in range(100):
            people = _random_scene(rng, 4)
            phi, tx, tz = rng.uniform(-math.pi, math.pi), rng.uniform(-5, 5), rng.uniform(-5, 5)
            c, s = math.cos(phi), math.sin(phi)
            moved = [GroundPose(c * p.x - s * p.z + tx, s * p.x + c * p.z + tz, p.theta + phi) for p in people]
            before = [v.interacting for v in detect_interactions(people, config)]
            after = [v.interacting for v in detect_interactions(moved, config)]
            self.assertEqual(before, after)

    def test_d_max_monotonicity(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            people = _random_scene(rng, 3, b=0.2)
            small = detect_interactions(people, SocialConfig(d_max=1.0, seed=4))
            large = detect_interactions(people, SocialConfig(d_max=3.0, seed=4))
            for a, b in zip(small, large):
                self.assertGreaterEqual(b.vote_fraction, a.vote_fraction)


class VotingTests(SimpleTestCase):
    """Tests for vote_fraction and the probabilistic verdicts"""

    def test_pair_order_does_not_matter(self):
        rng = np.random.default_rng(3)
        config = SocialConfig(seed=9)
        for _ in range(50):
            people = _random_scene(rng, 4, b=0.3)
            for i in range(4):
                for j in range(i + 1, 4):
                    self.assertEqual(vote_fraction(people, i, j, config), vote_fraction(people, j, i, config))

    def test_perfect_formation_with_small_spread(self):
        people = [GroundPose(-0.5, 5.0, 0.0, 0.05), GroundPose(0.5, 5.0, math.pi, 0.05)]
        verdict, = detect_interactions(people, SocialConfig(n_samples=10_000))
        self.assertGreater(verdict.vote_fraction, 0.9)
        self.assertTrue(verdict.interacting)

    def test_back_to_back(self):
        people = [GroundPose(-0.5, 5.0, math.pi, 0.05), GroundPose(0.5, 5.0, 0.0, 0.05)]
        verdict, = detect_interactions(people, SocialConfig(n_samples=10_000))
        self.assertLess(verdict.vote_fraction, 0.01)
        self.assertFalse(verdict.interacting)

    def test_same_seed_same_votes(self):
        people = _random_scene(np.random.default_rng(4), 5, b=0.4)
        first = detect_interactions(people, SocialConfig(seed=3))
        second = detect_interactions(people, SocialConfig(seed=3))
        self.assertEqual(first, second)

    def test_pairs_listed_once(self):
        verdicts = detect_interactions(_random_scene(np.random.default_rng(5), 4))
        self.assertEqual([(v.i, v.j) for v in verdicts], [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])

    def test_voting_beats_deterministic(self):
        """Test voting on noisy generated scenes recovers more verdicts than the deterministic check."""
        result = voting_benefit(n_scenes=300, relative_spread=0.02, seed=0)
        self.assertEqual(result['scenes'], 300)
        self.assertGreaterEqual(result['pairs'], 300)
        self.assertGreater(result['interacting'], 0)
        self.assertLess(result['deterministic'], 100.0)
        self.assertGreaterEqual(result['voting'], result['deterministic'])

    def test_voting_benefit_without_noise(self):
        result = voting_benefit(n_scenes=40, relative_spread=0.0, seed=1)
        self.assertEqual(result['deterministic'], 100.0)
        self.assertEqual(result['voting'], 100.0)

    def test_voting_benefit_needs_scenes(self):
        with self.assertRaises(PoseProxemicsError):
            voting_benefit(n_scenes=0)
        with self.assertRaises(PoseProxemicsError):
            voting_benefit(n_scenes=5, relative_spread=-0.1)


class DistancingTests(SimpleTestCase):
    """Tests for social_distancing_check, monitor and augment_labels"""

    def test_single_person(self):
        report = social_distancing_check([GroundPose(0.0, 5.0, 0.0)])
        self.assertEqual(report.at_risk, [False])
        self.assertEqual(report.pairs, [])

    def test_facing_pair_is_at_risk(self):
        people = [GroundPose(0.0, 5.0, 0.0), GroundPose(1.0, 5.0, math.pi), GroundPose(8.0, 5.0, 0.0)]
        report = social_distancing_check(people)
        self.assertEqual(report.at_risk, [True, True, False])
        self.assertEqual(report.as_dict()['at_risk'], [0, 1])

    def test_far_apart_never_at_risk(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            thetas = rng.uniform(-math.pi, math.pi, 2)
            people = [GroundPose(0.0, 5.0, thetas[0]), GroundPose(3.0, 5.0, thetas[1])]
            self.assertEqual(social_distancing_check(people).at_risk, [False, False])

    def test_monitor_modes(self):
        config = SocialConfig(radii=(0.3,))
        interaction = monitor([HAND_P0, HAND_P1], config)
        distancing = monitor([HAND_P0, HAND_P1], replace(config, mode='distancing'))
        self.assertEqual(interaction.at_risk, [False, False])
        self.assertEqual(distancing.at_risk, [True, True])

    def test_report_dict(self):
        report = monitor([GroundPose(0.0, 5.0, 0.0), GroundPose(1.0, 5.0, math.pi)])
        document = report.as_dict()
        self.assertEqual(document['pairs'], [{'i': 0, 'j': 1, 'vote_fraction': 1.0, 'interacting': True}])
        self.assertEqual(document['at_risk'], [0, 1])

    def test_labels_are_self_consistent(self):
        rng = np.random.default_rng(7)
        people = _random_scene(rng, 20)
        labels = augment_labels(people)
        predicted = social_distancing_check(people).at_risk
        self.assertEqual(classification_accuracy(predicted, labels)[0], 100.0)

    def test_labels_ignore_spread(self):
        people = [GroundPose(0.0, 5.0, 0.0, 2.0), GroundPose(1.0, 5.0, math.pi, 2.0)]
        self.assertEqual(augment_labels(people), [True, True])

    def test_empty_scene(self):
        self.assertEqual(augment_labels([]), [])

    def test_labels_repeat(self):
        people = _random_scene(np.random.default_rng(8), 20)
        self.assertEqual(augment_labels(people, SocialConfig(seed=1)), augment_labels(people, SocialConfig(seed=1)))


class GroundPoseTests(SimpleTestCase):
    """Tests for GroundPose, SocialConfig and make_ground_pose"""

    def test_invalid_pose(self):
        with self.assertRaises(PoseProxemicsError):
            GroundPose(0.0, 1.0, 0.0, -0.1)
        with self.assertRaises(PoseProxemicsError):
            GroundPose(float('nan'), 1.0, 0.0)

    def test_invalid_config(self):
        for kwargs in ({'mode': 'crowd'}, {'radii': ()}, {'radii': (0.0,)}, {'threshold': 0.0},
                       {'n_samples': 0}, {'d_max': 0.0}):
            with self.assertRaises(PoseProxemicsError):
                SocialConfig(**kwargs)

    def test_uncertainty_sources(self):
        heights = PRESETS['adults']
        self.assertEqual(make_ground_pose(1.0, 10.0, 0.0, 10.0, 0.4).b, 0.4)
        self.assertEqual(make_ground_pose(1.0, 10.0, 0.0, 10.0, None).b, 0.0)
        self.assertAlmostEqual(make_ground_pose(1.0, 10.0, 0.0, 10.0, 0.4, 'task_error', heights).b,
                               task_error(heights, 10.0))
        self.assertEqual(make_ground_pose(1.0, 10.0, 0.0, 10.0, 0.4, 'none').b, 0.0)

    def test_missing_orientation(self):
        with self.assertRaises(PoseProxemicsError):
            make_ground_pose(1.0, 10.0, None, 10.0, 0.4)

    def test_task_error_needs_heights(self):
        with self.assertRaises(PoseProxemicsError):
            make_ground_pose(1.0, 10.0, 0.0, 10.0, None, 'task_error')

    def test_unknown_source(self):
        with self.assertRaises(PoseProxemicsError):
            make_ground_pose(1.0, 10.0, 0.0, 10.0, None, 'oracle')
