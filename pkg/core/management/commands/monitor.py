"""
Social interaction and social-distancing verdicts, scene by scene.

People come either from predict estimates (--estimates) or from the
ground truth of a labeled dataset (--dataset). With --gt, verdicts are
scored against labels computed on that dataset's ground truth.
"""
import logging
from dataclasses import replace

import numpy as np
from django.conf import settings
from django.core.management.base import CommandError

from core.evaluation import classification_accuracy, match_estimates
from core.heights import PRESETS, get_preset
from core.keypoints import keypoint_box, parse_poses
from core.management.commands._pipeline import PipelineCommand
from core.serializers import MonitorReportSerializer
from core.social import MODES, UNCERTAINTY_SOURCES, SocialConfig, ground_pose_from_person, monitor
from core.utils import group_by_scene, ground_poses_from_estimates, load_estimates

logger = logging.getLogger(__name__)


def scene_seed(seed, scene):
    return int(np.random.SeedSequence([seed, scene]).generate_state(1)[0])


class Command(PipelineCommand):
    help = 'Flag interacting pairs (R_max = r_o) or social-distancing risk (R_max = 2 r_o)'

    def add_command_arguments(self, parser):
        source = parser.add_mutually_exclusive_group()
        source.add_argument('--estimates', default=None, help='Output of the predict command')
        source.add_argument('--dataset', default=None, help='Labeled dataset; its ground truth is monitored')
        parser.add_argument('--gt', default=None, help='Labeled dataset to score the verdicts against')
        parser.add_argument('--out', default=None, help='Verdict JSON (default: stdout)')
        parser.add_argument('--mode', choices=MODES, default=None, help='Verdict rule (default: distancing)')
        parser.add_argument('--d-max', type=float, default=None, help='Maximum pair distance in meters (default: 2)')
        parser.add_argument('--radii', type=float, nargs='+', default=None,
                            help='Candidate o-space radii in meters (default: 0.3 0.5 1.0)')
        parser.add_argument('--n-samples', type=int, default=None, help='Votes per pair (default: 100)')
        parser.add_argument('--threshold', type=float, default=None, help='Vote share to agree (default: 0.25)')
        parser.add_argument('--uncertainty', choices=UNCERTAINTY_SOURCES, default=None,
                            help='Spread used for voting (default: network)')
        parser.add_argument('--deterministic', action='store_true', default=None,
                            help='Ignore spreads; same as --uncertainty none')
        parser.add_argument('--no-orientation', dest='use_orientation', action='store_false', default=None,
                            help='Drop the facing condition')
        parser.add_argument('--heights', choices=sorted(PRESETS), default=None,
                            help='Stature preset for --uncertainty task_error')

    def defaults(self):
        return {
            'mode': 'distancing',
            'uncertainty': 'network',
            'deterministic': False,
            'use_orientation': True,
            'heights': settings.POSE_PROXEMICS['SCENES']['HEIGHTS'],
        }

    def run(self, **options):
        if not options.get('estimates') and not options.get('dataset'):
            raise CommandError("One of --estimates or --dataset is required.")
        config = SocialConfig.from_settings(
            mode=options['mode'],
            d_max=options.get('d_max'),
            radii=options.get('radii'),
            n_samples=options.get('n_samples'),
            threshold=options.get('threshold'),
            seed=options['seed'],
            use_orientation=options['use_orientation'],
        )
        uncertainty = 'none' if options['deterministic'] else options['uncertainty']

        if options.get('estimates'):
            items, _ = load_estimates(options['estimates'])
            heights = get_preset(options['heights'])

            def people_of(group):
                return ground_poses_from_estimates(group, uncertainty, heights)
        else:
            records = parse_poses(options['dataset'])
            items = [
                {'index': i, 'scene': r.scene, 'box': keypoint_box(r.pose), 'record': r}
                for i, r in enumerate(records) if r.gt is not None
            ]

            def people_of(group):
                return [ground_pose_from_person(item['record'].gt) for item in group]

        scenes, flagged = [], {}
        for scene, group in group_by_scene(items).items():
            report = monitor(people_of(group), replace(config, seed=scene_seed(config.seed, scene)))
            index = [item['index'] for item in group]
            for k, item in enumerate(group):
                flagged[id(item)] = report.at_risk[k]
            scenes.append({
                'scene': scene,
                'pairs': [dict(p.as_dict(), i=index[p.i], j=index[p.j]) for p in report.pairs],
                'at_risk': [index[k] for k, risk in enumerate(report.at_risk) if risk],
            })

        document = {
            'seed': options['seed'],
            'mode': config.mode,
            'uncertainty': uncertainty,
            'scenes': scenes,
            'at_risk': sorted(i for s in scenes for i in s['at_risk']),
        }
        if options.get('gt'):
            document['classification'] = self.score(items, flagged, parse_poses(options['gt']), config)
        serializer = MonitorReportSerializer(data=document)
        if not serializer.is_valid():
            raise CommandError(f"Internal error: verdicts do not match their schema: {serializer.errors}")
        self.emit_json(document, options.get('out'))

    @staticmethod
    def score(items, flagged, gt_records, config):
        """Accuracy of the verdicts on matched ground truths, against ground-truth verdicts."""
        labeled = [r for r in gt_records if r.gt is not None]
        labels = {}
        for scene, group in group_by_scene(labeled, key=lambda r: r.scene).items():
            report = monitor([ground_pose_from_person(r.gt) for r in group],
                             replace(config, seed=scene_seed(config.seed, scene)))
            for record, risk in zip(group, report.at_risk):
                labels[id(record)] = risk

        pairs, missed = match_estimates(items, labeled)
        predicted = [flagged[id(item)] for item, _ in pairs]
        truth = [labels[id(record)] for _, record in pairs]
        accuracy, recall = classification_accuracy(predicted, truth)
        return {'accuracy': accuracy, 'recall': recall, 'matched': len(pairs), 'missed': missed}
