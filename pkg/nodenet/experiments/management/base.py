"""
Shared plumbing for the experiment management commands.
"""
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import NodeNetError
from experiments.runconfig import load_run_config, parse_overrides
from experiments.services import resolve_output_dir

logger = logging.getLogger(__name__)


class ExperimentCommand(BaseCommand):
    """
    Base for commands that read a run config.

    Subclasses implement ``run(config, output_dir, **options)``; library
    errors surface as ``CommandError`` so the exit status is nonzero.
    """
    requires_system_checks = []
    requires_migrations_checks = False

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Config file or preset name (see experiments/presets)')
        parser.add_argument(
            '--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
            help='Override one config key, e.g. --set loss.alpha_ll=0.1 (repeatable)',
        )
        parser.add_argument('--output-dir', help='Directory for every written artifact')

    def handle(self, *args, **options):
        if options['verbosity'] >= 2:
            logging.getLogger().setLevel(logging.DEBUG)
            for name in settings.NODENET_APPS:
                logging.getLogger(name).setLevel(logging.DEBUG)
        try:
            config = load_run_config(options.get('config'), self.collect_overrides(options))
            output_dir = resolve_output_dir(config, options.get('output_dir'))
            rest = {k: v for k, v in options.items() if k not in ('config', 'output_dir')}
            return self.run(config, output_dir, **rest)
        except NodeNetError as exc:
            logger.error(f"{self.__class__.__module__.rsplit('.', 1)[-1]} failed: {exc}")
            raise CommandError(str(exc)) from exc

    def collect_overrides(self, options):
        return parse_overrides(options.get('overrides'))

    def run(self, config, output_dir, **options):
        raise NotImplementedError
