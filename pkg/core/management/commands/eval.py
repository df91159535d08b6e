"""
Evaluate predicted estimates against a labeled dataset.

With --source ground-truth the labels of --gt are scored against
themselves, which gives zero localization error.
"""
import logging

from django.conf import settings
from django.core.management.base import CommandError

from core.evaluation import EvaluationConfig, curve_csv, error_curve, evaluate, match_estimates, report_csv
from core.heights import PRESETS, get_preset
from core.keypoints import parse_poses
from core.management.commands._pipeline import PipelineCommand
from core.serializers import EvalReportSerializer
from core.utils import ground_truth_estimates, load_estimates

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Compute ALE per distance bin and difficulty, ALA, recall and interval recall'

    def add_command_arguments(self, parser):
        parser.add_argument('--estimates', default=None, help='Output of the predict command')
        parser.add_argument('--source', choices=['estimates', 'ground-truth'], default=None,
                            help='Score --estimates, or the labels of --gt against themselves (default: estimates)')
        parser.add_argument('--gt', default=None, help='Labeled JSON-lines dataset')
        parser.add_argument('--out', default=None, help='Report JSON (default: stdout)')
        parser.add_argument('--csv', default=None, help='Also write one CSV row per bin and threshold')
        parser.add_argument('--curve', default=None, help='Write a (d, ALE, task_error) CSV')
        parser.add_argument('--curve-step', type=float, default=None, help='Curve bin width in meters (default: 5)')
        parser.add_argument('--heights', choices=sorted(PRESETS), default=None,
                            help='Stature preset for task-error columns (default: settings SCENE_HEIGHTS)')
        parser.add_argument('--iou-threshold', type=float, default=None, help='Matching IoU (default: 0.3)')
        parser.add_argument('--bin-edges', type=float, nargs='+', default=None,
                            help='Lower distance bin edges; the last bin is open (default: 0 10 20 30)')
        parser.add_argument('--ala-thresholds', type=float, nargs='+', default=None,
                            help='ALA thresholds in meters (default: 0.5 1 2)')

    def defaults(self):
        return {
            'source': 'estimates',
            'heights': settings.POSE_PROXEMICS['SCENES']['HEIGHTS'],
            'curve_step': 5.0,
        }

    def run(self, **options):
        if not options.get('gt'):
            raise CommandError("--gt is required.")
        records = parse_poses(options['gt'])
        if options['source'] == 'ground-truth':
            estimates, estimates_seed = ground_truth_estimates(records), None
        elif options.get('estimates'):
            estimates, estimates_seed = load_estimates(options['estimates'])
        else:
            raise CommandError("--estimates is required unless --source ground-truth.")
        heights = get_preset(options['heights'])
        config = EvaluationConfig.from_settings(
            iou_threshold=options.get('iou_threshold'),
            bin_edges=options.get('bin_edges'),
            ala_thresholds=options.get('ala_thresholds'),
        )
        seed = estimates_seed if estimates_seed is not None else options['seed']
        report = evaluate(estimates, records, config, heights=heights, seed=seed)

        serializer = EvalReportSerializer(data=report)
        if not serializer.is_valid():
            raise CommandError(f"Internal error: report does not match its schema: {serializer.errors}")
        self.emit_json(report, options.get('out'))
        if options.get('csv'):
            self.emit(report_csv(report), options['csv'])
        if options.get('curve'):
            pairs, _ = match_estimates(estimates, records, config.iou_threshold)
            rows = error_curve([e['d'] for e, _ in pairs], [r.gt.distance for _, r in pairs],
                               heights, options['curve_step'])
            self.emit(curve_csv(rows), options['curve'])
