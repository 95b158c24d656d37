import itertools

from django.core.management.base import CommandError

from experiments.management.base import ExperimentCommand
from experiments.services import cmd_sweep


def _grid(raw):
    try:
        return tuple(float(v) for v in raw.split(','))
    except ValueError:
        raise CommandError(f"expected comma separated numbers, got '{raw}'") from None


class Command(ExperimentCommand):
    help = 'Train every combination of the given alpha values and collect the aggregates in sweep.csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--alpha-ll', default='0', help='Comma separated alpha_ll values')
        parser.add_argument('--alpha-lu', default='0', help='Comma separated alpha_lu values')
        parser.add_argument('--alpha-uu', default='0', help='Comma separated alpha_uu values')
        parser.add_argument('--seeds', help='Comma separated seeds')

    def collect_overrides(self, options):
        overrides = super().collect_overrides(options)
        if options.get('seeds'):
            overrides['run.seeds'] = options['seeds']
        return overrides

    def run(self, config, output_dir, **options):
        grid = list(itertools.product(_grid(options['alpha_ll']), _grid(options['alpha_lu']), _grid(options['alpha_uu'])))
        sweep = cmd_sweep(config, output_dir, grid)
        self.stdout.write(sweep.to_string(index=False))
