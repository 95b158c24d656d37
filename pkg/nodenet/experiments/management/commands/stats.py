from experiments.management.base import ExperimentCommand
from experiments.services import cmd_stats


class Command(ExperimentCommand):
    help = 'Print node, edge, feature and class counts of a citation dataset'

    def run(self, config, output_dir, **options):
        stats, mismatches, target = cmd_stats(config, output_dir)
        self.stdout.write(
            f"dataset={stats.name} nodes={stats.nodes} edges_raw={stats.edges_raw} "
            f"edges_undirected={stats.edges_undirected} features={stats.features} classes={stats.classes} "
            f"feature_type={stats.feature_type}"
        )
        for mismatch in mismatches:
            self.stdout.write(self.style.WARNING(f"differs from published statistics: {mismatch}"))
        self.stdout.write(f"wrote {target}")
