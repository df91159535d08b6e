"""
Tabulate the height-ambiguity localization error against distance.
"""
import csv
import io

from django.conf import settings
from django.core.management.base import CommandError

from core.heights import PRESETS, get_preset, task_error_curve
from core.management.commands._pipeline import PipelineCommand


class Command(PipelineCommand):
    help = 'Write the expected localization error from stature ambiguity as a CSV (d, task_error)'

    def add_command_arguments(self, parser):
        parser.add_argument('--heights', choices=sorted(PRESETS), default=None,
                            help='Stature distribution preset (default: settings SCENE_HEIGHTS)')
        parser.add_argument('--d-max', type=float, default=None, help='Largest distance in meters (default: 40)')
        parser.add_argument('--step', type=float, default=None, help='Distance step in meters (default: 1)')
        parser.add_argument('--start', type=float, default=None, help='First distance in meters (default: 0)')
        parser.add_argument('--out', default=None, help='Output CSV (default: stdout)')

    def defaults(self):
        return {
            'heights': settings.POSE_PROXEMICS['SCENES']['HEIGHTS'],
            'd_max': 40.0,
            'step': 1.0,
            'start': 0.0,
        }

    def run(self, **options):
        if options['start'] < 0:
            raise CommandError(f"--start must be non-negative. Got: {options['start']}")
        rows = task_error_curve(get_preset(options['heights']), options['d_max'], options['step'], options['start'])
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['d', 'task_error'])
        writer.writerows(rows)
        self.emit(buffer.getvalue(), options.get('out'))
