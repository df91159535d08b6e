"""
Base class for the pipeline management commands.

Option precedence: settings (environment) < --config JSON file < flags.
Options that can come from settings or a config file default to None in
argparse so an unset flag never masks them.
"""
import argparse
import json
import logging

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import PoseProxemicsError
from core.utils import load_json_config

logger = logging.getLogger('core')


def seed_type(value):
    """argparse type for --seed."""
    seed = int(value)
    if seed < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {seed}")
    return seed


class PipelineCommand(BaseCommand):
    """
    Adds --seed, --config and --quiet, resolves option precedence and turns
    domain errors into CommandError.

    Subclasses implement add_command_arguments(), defaults() and run().
    """

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=seed_type, default=None, help='Random seed (default: 0)')
        parser.add_argument('--config', default=None, help='JSON file of option values; explicit flags override it')
        parser.add_argument('--quiet', action='store_true', help='Only print warnings and errors')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def defaults(self):
        """Option values taken from settings."""
        return {}

    def resolve_options(self, options):
        resolved = {'seed': 0}
        resolved.update(self.defaults())
        if options.get('config'):
            resolved.update(load_json_config(options['config']))
        resolved.update({key: value for key, value in options.items() if value is not None})
        if not isinstance(resolved['seed'], int) or resolved['seed'] < 0:
            raise CommandError(f"--seed must be a non-negative integer. Got: {resolved['seed']}")
        return resolved

    def execute(self, *args, **options):
        previous = logger.level
        if options.get('quiet'):
            options['verbosity'] = 0
            logger.setLevel(logging.WARNING)
        try:
            return super().execute(*args, **options)
        finally:
            logger.setLevel(previous)

    def handle(self, *args, **options):
        self.verbosity = options.get('verbosity', 1)
        try:
            options = self.resolve_options(options)
            return self.run(**options)
        except PoseProxemicsError as exc:
            raise CommandError(str(exc)) from exc
        except OSError as exc:
            raise CommandError(f"{exc.filename or 'I/O error'}: {exc.strerror}") from exc

    def run(self, **options):
        raise NotImplementedError

    def emit(self, text, path=None):
        """Write an artifact to `path`, or to stdout when no path is given."""
        if path:
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write(text)
            if self.verbosity > 0:
                self.stderr.write(f"Wrote {path}")
        else:
            self.stdout.write(text, ending='' if text.endswith('\n') else '\n')

    def emit_json(self, document, path=None):
        self.emit(json.dumps(document, indent=2) + '\n', path)
