"""
Localize every pose of a JSON-lines file.

Output: {"seed": ..., "method": ..., "estimates": [...]}, one estimate per
usable pose. Estimates carry "sigma" only with Monte Carlo inference.
"""
import logging

from django.conf import settings
from django.core.management.base import CommandError

from core.baseline import load_calibration
from core.keypoints import parse_poses
from core.management.commands._pipeline import PipelineCommand
from core.utils import geometric_estimates, network_estimates
from core.weights import load_weights

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Predict 3D locations, spreads and orientations from 2D poses'

    def add_command_arguments(self, parser):
        parser.add_argument('--poses', default=None, help='JSON-lines pose file (intrinsics required per line)')
        parser.add_argument('--out', default=None, help='Output JSON file (default: stdout)')
        parser.add_argument('--method', choices=['network', 'geometric'], default=None,
                            help='Regressor or closed-form segment baseline (default: network)')
        parser.add_argument('--weights', default=None, help='Weight file (default: settings WEIGHTS_PATH)')
        parser.add_argument('--calibration', default=None,
                            help='Baseline calibration (default: settings CALIBRATION_PATH)')
        parser.add_argument('--mc-passes', type=int, default=None,
                            help='Dropout passes T; 0 disables Monte Carlo inference (default: 50)')
        parser.add_argument('--mc-samples', type=int, default=None,
                            help='Distance draws I per pass (default: 100)')

    def defaults(self):
        conf = settings.POSE_PROXEMICS
        return {
            'method': 'network',
            'weights': conf['WEIGHTS_PATH'],
            'calibration': conf['CALIBRATION_PATH'],
            'mc_passes': conf['INFERENCE']['MC_PASSES'],
            'mc_samples': conf['INFERENCE']['MC_SAMPLES'],
        }

    def run(self, **options):
        if not options.get('poses'):
            raise CommandError("--poses is required.")
        if options['mc_passes'] < 0:
            raise CommandError(f"--mc-passes must be non-negative. Got: {options['mc_passes']}")
        if options['mc_samples'] < 1:
            raise CommandError(f"--mc-samples must be positive. Got: {options['mc_samples']}")

        records = parse_poses(options['poses'])
        if options['method'] == 'geometric':
            estimates = geometric_estimates(load_calibration(options['calibration']), records)
        else:
            params = load_weights(options['weights'])
            estimates = network_estimates(
                params, records, options['mc_passes'], options['mc_samples'], options['seed']
            )
        for estimate in estimates:
            if estimate['sigma'] is None:
                del estimate['sigma']

        skipped = len(records) - len(estimates)
        if skipped:
            logger.warning("%d of %d poses could not be localized", skipped, len(records))
        self.emit_json({'seed': options['seed'], 'method': options['method'], 'estimates': estimates},
                       options.get('out'))
