"""
Generate a synthetic labeled pose dataset.

Usage:
    python manage.py simulate --n 1000 --seed 1 --out data/train.jsonl
"""
import logging

from django.conf import settings
from django.core.management.base import CommandError

from core.heights import PRESETS
from core.management.commands._pipeline import PipelineCommand
from core.scenes import SceneConfig, generate_dataset

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Generate a synthetic JSON-lines dataset of 2D poses with 3D ground truth'

    def add_command_arguments(self, parser):
        parser.add_argument('--n', type=int, default=None, help='Number of person records')
        parser.add_argument('--out', default=None, help='Output JSON-lines file')
        parser.add_argument('--noise-px', type=float, default=None, help='Keypoint pixel noise std (default: 0)')
        parser.add_argument('--heights', choices=sorted(PRESETS), default=None,
                            help='Stature distribution preset (default: adults)')
        parser.add_argument('--max-people', type=int, default=None, help='People per scene, at most (default: 4)')
        parser.add_argument('--group-fraction', type=float, default=None,
                            help='Chance that a new person joins a formation (default: 0.5)')

    def defaults(self):
        conf = settings.POSE_PROXEMICS['SCENES']
        return {
            'noise_px': conf['NOISE_PX'],
            'heights': conf['HEIGHTS'],
            'max_people': conf['MAX_PEOPLE'],
            'group_fraction': conf['GROUP_FRACTION'],
        }

    def run(self, **options):
        n = options.get('n')
        if n is None or n <= 0:
            raise CommandError(f"--n must be a positive integer. Got: {n}")
        if not options.get('out'):
            raise CommandError("--out is required.")
        if options['heights'] not in PRESETS:
            raise CommandError(f"Unknown heights preset '{options['heights']}'.")
        if options['noise_px'] < 0:
            raise CommandError(f"--noise-px must be non-negative. Got: {options['noise_px']}")
        if options['max_people'] < 1:
            raise CommandError(f"--max-people must be at least 1. Got: {options['max_people']}")

        conf = settings.POSE_PROXEMICS['SCENES']
        scene_config = SceneConfig(
            image_width=conf['IMAGE_WIDTH'],
            image_height=conf['IMAGE_HEIGHT'],
            focal=conf['FOCAL'],
            camera_height=conf['CAMERA_HEIGHT'],
            max_people=options['max_people'],
            group_fraction=options['group_fraction'],
            noise_px=options['noise_px'],
            heights=options['heights'],
        )
        generate_dataset(n, scene_config, options['seed'], options['out'])
        if self.verbosity > 0:
            self.stderr.write(f"Wrote {n} records to {options['out']} (seed={options['seed']})")
