from django.core.management.base import CommandError

from experiments.management.base import ExperimentCommand
from experiments.services import cmd_train


class Command(ExperimentCommand):
    help = 'Train NodeNet (or the baseline with all alphas at zero) for every configured seed'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--seeds', help='Comma separated seeds, shorthand for --set run.seeds=...')
        parser.add_argument('--workers', type=int, help='Parallel seed processes, shorthand for --set run.workers=...')

    def collect_overrides(self, options):
        overrides = super().collect_overrides(options)
        if options.get('seeds'):
            overrides['run.seeds'] = options['seeds']
        if options.get('workers'):
            overrides['run.workers'] = str(options['workers'])
        return overrides

    def run(self, config, output_dir, **options):
        report = cmd_train(config, output_dir)
        for row in report.summary.itertuples(index=False):
            self.stdout.write(f"seed={row.seed} best_val_acc={row.best_val_acc:.4f} test_acc={row.test_acc:.4f}")
        aggregate = report.aggregate.iloc[0]
        self.stdout.write(
            f"{aggregate['dataset']} {aggregate['metric']} test_acc_mean={aggregate['test_acc_mean']:.4f} "
            f"test_acc_std={aggregate['test_acc_std']:.4f} reference={aggregate['reference_acc']:.4f}"
        )
        self.stdout.write(f"wrote {report.run_dir}")
        if not report.ok:
            failed = ', '.join(str(o.seed) for o in report.failures)
            raise CommandError(f"{len(report.failures)} seed(s) diverged: {failed}")
