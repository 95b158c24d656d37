"""
Experiment orchestration behind the management commands.

Every file written here lands under the resolved output directory and is
written atomically.
"""
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from django.conf import settings

from citegraph.loaders import load_dataset
from citegraph.services import dataset_stats, make_split, reference_mismatches, stats_frame, without_edges
from citegraph.structures import CitationGraph, DatasetStats
from core.exceptions import DivergenceError, GradientCheckError
from core.files import atomic_path, ensure_within, write_text_atomic
from featurize.services import featurize_dataset, is_binary
from featurize.structures import FeatureMode
from graphloss.structures import GraphLossConfig, Metric
from neuralnet.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from neuralnet.services import predict
from trainer.services import evaluate, gradient_check, make_toy_instance, train
from trainer.structures import GradientCheckReport, default_tolerance
from .runconfig import RunConfig, serialize

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['dataset', 'metric', 'alpha_ll', 'alpha_lu', 'alpha_uu', 'seed', 'best_val_acc', 'test_acc']

# Published NodeNet test accuracy per (dataset, featurize mode)
REFERENCE_ACCURACY: Dict[Tuple[str, str], float] = {
    ('cora', 'identity'): 0.8680,
    ('cora', 'mtfidf'): 0.8517,
    ('citeseer', 'identity'): 0.8009,
    ('citeseer', 'mtfidf'): 0.7802,
    ('pubmed', 'identity'): 0.9021,
}

GRADCHECK_ALPHAS = (0.5, 0.5, 0.5)


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    best_val_acc: float = float('nan')
    test_acc: float = float('nan')
    best_epoch: int = 0
    error: Optional[str] = None


@dataclass
class TrainReport:
    run_dir: Path
    summary: pd.DataFrame
    aggregate: pd.DataFrame
    failures: List[SeedOutcome]

    @property
    def ok(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class GradcheckLine:
    metric: str
    batchnorm: bool
    report: GradientCheckReport
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.report.passed(self.tolerance)

    def describe(self) -> str:
        status = 'ok' if self.passed else 'FAIL'
        return (
            f"metric={self.metric:<6} batchnorm={'on' if self.batchnorm else 'off':<3} "
            f"max_rel_error={self.report.max_relative_error:.3e} tolerance={self.tolerance:.0e} "
            f"worst={self.report.worst_parameter or '-'} checked={self.report.checked} "
            f"skipped={self.report.skipped} {status}"
        )


def resolve_output_dir(config: RunConfig, override: Optional[str] = None) -> Path:
    """Command-line flag, then the environment override, then ``run.output_dir``."""
    chosen = override or getattr(settings, 'NODENET_OUTPUT_DIR', None) or config.run.output_dir
    return Path(chosen).resolve()


def load_graph(config: RunConfig, featurize: bool = True) -> CitationGraph:
    """Load the configured dataset; shipped weights such as PubMed's are typed ``tfidf``."""
    content_path, cites_path = config.dataset_files()
    graph = load_dataset(
        content_path, cites_path, name=config.dataset.name,
        include_cited_only=config.dataset.include_cited_only,
    )
    if not is_binary(graph.features):
        graph = dataclasses.replace(graph, feature_type='tfidf')
    if featurize:
        graph = featurize_dataset(graph, config.featurize.mode, log_base=config.featurize.log_base)
    return graph


def cmd_stats(config: RunConfig, output_dir: Path) -> Tuple[DatasetStats, List[str], Path]:
    """
    Dataset statistics with the raw and undirected edge counts.

    Returns:
        tuple: (stats, reference mismatches, csv path)
    """
    graph = load_graph(config, featurize=False)
    stats = dataset_stats(graph)
    mismatches = reference_mismatches(stats)
    for mismatch in mismatches:
        logger.warning(f"{stats.name} differs from the published statistics: {mismatch}")
    target = ensure_within(output_dir, output_dir / f"{stats.name}_stats.csv")
    with atomic_path(target) as tmp:
        stats_frame([stats]).to_csv(tmp, index=False)
    return stats, mismatches, target


def dataset_tag(config: RunConfig) -> str:
    """``cora`` for raw features, ``cora-tfidf`` once modified TF-IDF is applied."""
    if config.featurize.mode == FeatureMode.MTFIDF.value:
        return f"{config.dataset.name}-tfidf"
    return config.dataset.name


def run_label(loss: GraphLossConfig) -> str:
    return f"{loss.label}_{loss.alpha_ll:g}-{loss.alpha_lu:g}-{loss.alpha_uu:g}"


def _run_seed(config: RunConfig, graph: CitationGraph, seed: int, run_dir: Path) -> SeedOutcome:
    """Train one seed and write its metrics CSV and checkpoint."""
    seed_dir = run_dir / f"seed-{seed}"
    try:
        masks = make_split(graph, config.split_spec(), config.split_seed(seed))
        net_config = config.network_config(graph.num_features, graph.num_classes)
        result = train(
            graph, masks, net_config, config.loss_config(), config.train_config(seed),
            edge_weight=config.loss.edge_weight,
        )
    except DivergenceError as exc:
        logger.error(f"Seed {seed} diverged: {exc}")
        return SeedOutcome(seed=seed, error=str(exc))

    result.log.write_csv(seed_dir / 'metrics.csv', record_seconds=config.run.record_seconds)
    best = result.log.best
    save_checkpoint(seed_dir / 'checkpoint.npz', Checkpoint(
        params=result.params,
        config=net_config,
        seed=seed,
        epoch=result.log.best_epoch,
        optimizer_step=result.optimizer_state.step,
        optimizer_tensors=result.optimizer_state.to_groups(),
        extra={'dataset': graph.name, 'featurize': config.featurize.mode},
    ))
    return SeedOutcome(seed=seed, best_val_acc=best.val_acc, test_acc=best.test_acc, best_epoch=best.epoch)


def aggregate_outcomes(config: RunConfig, outcomes: Sequence[SeedOutcome]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Per-seed summary rows and the mean / sample standard deviation over successful seeds."""
    loss = config.loss_config()
    common = {
        'dataset': dataset_tag(config),
        'metric': loss.label,
        'alpha_ll': loss.alpha_ll,
        'alpha_lu': loss.alpha_lu,
        'alpha_uu': loss.alpha_uu,
    }
    done = [o for o in outcomes if o.error is None]
    summary = pd.DataFrame(
        [{**common, 'seed': o.seed, 'best_val_acc': o.best_val_acc, 'test_acc': o.test_acc} for o in done],
        columns=SUMMARY_COLUMNS,
    )
    reference = REFERENCE_ACCURACY.get((config.dataset.name.split('-')[0], config.featurize.mode), np.nan)
    accuracies = summary['test_acc']
    mean = float(accuracies.mean()) if len(done) else np.nan
    aggregate = pd.DataFrame([{
        **common,
        'seeds': len(done),
        'failed_seeds': len(outcomes) - len(done),
        'test_acc_mean': mean,
        'test_acc_std': float(accuracies.std(ddof=1)) if len(done) > 1 else np.nan,
        'reference_acc': reference,
        'gap': reference - mean,
    }])
    return summary, aggregate


def cmd_train(config: RunConfig, output_dir: Path) -> TrainReport:
    """
    Train every configured seed and write the run artifacts.

    A diverging seed is recorded as a failure; the remaining seeds still run.
    """
    config.validate()
    graph = load_graph(config)
    run_dir = ensure_within(output_dir, output_dir / dataset_tag(config) / run_label(config.loss_config()))
    write_text_atomic(run_dir / 'config.cfg', serialize(config))

    seeds = list(config.run.seeds)
    if config.run.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(config.run.workers, len(seeds))) as pool:
            outcomes = list(pool.map(_run_seed, [config] * len(seeds), [graph] * len(seeds), seeds,
                                     [run_dir] * len(seeds)))
    else:
        outcomes = [_run_seed(config, graph, seed, run_dir) for seed in seeds]

    summary, aggregate = aggregate_outcomes(config, outcomes)
    with atomic_path(run_dir / 'summary.csv') as tmp:
        summary.to_csv(tmp, index=False)
    with atomic_path(run_dir / 'aggregate.csv') as tmp:
        aggregate.to_csv(tmp, index=False)
    failures = [o for o in outcomes if o.error is not None]
    row = aggregate.iloc[0]
    logger.info(
        f"{dataset_tag(config)} {row['metric']}: test accuracy {row['test_acc_mean']:.4f} "
        f"+- {row['test_acc_std']:.4f} over {row['seeds']} seeds (reference {row['reference_acc']:.4f})"
    )
    return TrainReport(run_dir=run_dir, summary=summary, aggregate=aggregate, failures=failures)


def cmd_sweep(config: RunConfig, output_dir: Path, alpha_grid: Sequence[Tuple[float, float, float]]) -> pd.DataFrame:
    """Run ``cmd_train`` once per alpha triple and stack the aggregates into ``sweep.csv``."""
    frames = []
    for alpha_ll, alpha_lu, alpha_uu in alpha_grid:
        variant = dataclasses.replace(
            config, loss=dataclasses.replace(config.loss, alpha_ll=alpha_ll, alpha_lu=alpha_lu, alpha_uu=alpha_uu)
        )
        frames.append(cmd_train(variant, output_dir).aggregate)
    sweep = pd.concat(frames, ignore_index=True)
    target = ensure_within(output_dir, output_dir / dataset_tag(config) / 'sweep.csv')
    with atomic_path(target) as tmp:
        sweep.to_csv(tmp, index=False)
    return sweep


def cmd_eval(config: RunConfig, output_dir: Path, checkpoint_path, drop_edges: bool = False):
    """
    Evaluate a checkpoint on the configured split and write its predictions.

    ``drop_edges`` removes every edge first; predictions are unaffected
    because inference reads node features only.

    Returns:
        tuple: (accuracies by split name, predictions csv path)
    """
    checkpoint = load_checkpoint(checkpoint_path)
    graph = load_graph(config)
    if drop_edges:
        graph = without_edges(graph)
    masks = make_split(graph, config.split_spec(), config.split_seed(checkpoint.seed))
    X = graph.features

    accuracies = {}
    for name, index in (('train', masks.train_idx), ('val', masks.val_idx), ('test', masks.test_idx)):
        if index.size:
            accuracies[name] = evaluate(checkpoint.params, checkpoint.config, X, graph.labels, index)

    predictions = predict(checkpoint.params, checkpoint.config, X)
    frame = pd.DataFrame({
        'node_id': list(graph.node_ids),
        'predicted': [graph.label_names[p] for p in predictions],
    })
    suffix = '-no-edges' if drop_edges else ''
    target = ensure_within(output_dir, output_dir / 'eval' / f"{graph.name}-seed-{checkpoint.seed}{suffix}" / 'predictions.csv')
    with atomic_path(target) as tmp:
        frame.to_csv(tmp, index=False)
    return accuracies, target


def cmd_gradcheck(
    config: RunConfig,
    gradient_hook: Optional[Callable[[Dict[str, np.ndarray]], Dict[str, np.ndarray]]] = None,
    num_nodes: int = 8,
    num_features: int = 5,
    num_classes: int = 3,
    hidden_widths: Tuple[int, ...] = (6, 5),
) -> List[GradcheckLine]:
    """Gradient check for every metric with batch norm off and on."""
    seed = config.run.seeds[0] if config.run.seeds else 0
    instance = make_toy_instance(num_nodes, num_features, num_classes, seed=seed)
    lines = []
    for metric in Metric:
        loss_config = dataclasses.replace(
            config.loss_config(),
            alpha_ll=GRADCHECK_ALPHAS[0], alpha_lu=GRADCHECK_ALPHAS[1], alpha_uu=GRADCHECK_ALPHAS[2],
            metric=metric,
        )
        for batchnorm in (False, True):
            net_config = dataclasses.replace(
                config.network_config(num_features, num_classes),
                layer_widths=(num_features, *hidden_widths, num_classes),
                batchnorm=batchnorm,
                latent_layer=None,
                dropout_rate=0.0,
                precision='float64',
            )
            report = gradient_check(net_config, loss_config, instance, gradient_hook=gradient_hook)
            line = GradcheckLine(metric.value, batchnorm, report, default_tolerance(net_config.batchnorm))
            logger.info(line.describe())
            lines.append(line)
    return lines


def require_passing(lines: Sequence[GradcheckLine]) -> None:
    """
    Raises:
        GradientCheckError: Naming the worst failing entry, if any line failed
    """
    failed = [line for line in lines if not line.passed]
    if failed:
        worst = max(failed, key=lambda line: line.report.max_relative_error)
        raise GradientCheckError(
            f"{len(failed)} of {len(lines)} gradient checks failed; worst {worst.report.worst_parameter} "
            f"with metric={worst.metric} batchnorm={'on' if worst.batchnorm else 'off'} "
            f"(relative error {worst.report.max_relative_error:.3e})"
        )
