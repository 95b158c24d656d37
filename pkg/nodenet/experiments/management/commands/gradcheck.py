from experiments.management.base import ExperimentCommand
from experiments.services import cmd_gradcheck, require_passing


def _corrupt_first_weight(gradients):
    """Perturb one analytic gradient entry; the check must then fail."""
    corrupted = dict(gradients)
    corrupted['W0'] = gradients['W0'].copy()
    corrupted['W0'].flat[0] += 1.0
    return corrupted


class Command(ExperimentCommand):
    help = 'Finite-difference check of the full cost gradient for every metric, with and without batch norm'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--corrupt', action='store_true', help='Deliberately break one gradient entry')

    def run(self, config, output_dir, **options):
        hook = _corrupt_first_weight if options['corrupt'] else None
        lines = cmd_gradcheck(config, gradient_hook=hook)
        for line in lines:
            self.stdout.write(line.describe())
        require_passing(lines)
