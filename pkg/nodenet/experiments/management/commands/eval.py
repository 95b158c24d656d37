from experiments.management.base import ExperimentCommand
from experiments.services import cmd_eval


class Command(ExperimentCommand):
    help = 'Evaluate a saved checkpoint and write per-node predictions'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('checkpoint', help='Path to a checkpoint.npz written by train')
        parser.add_argument(
            '--drop-edges', action='store_true',
            help='Remove every edge before evaluating; predictions must not change',
        )

    def run(self, config, output_dir, **options):
        accuracies, target = cmd_eval(config, output_dir, options['checkpoint'], drop_edges=options['drop_edges'])
        for name, value in accuracies.items():
            self.stdout.write(f"{name}_acc={value:.4f}")
        self.stdout.write(f"wrote {target}")
