import io

import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from core.exceptions import ConfigError
from experiments.runconfig import (
    RunConfig,
    list_presets,
    load_run_config,
    parse_config_text,
    parse_overrides,
    serialize,
)
from experiments.services import SUMMARY_COLUMNS, cmd_train, resolve_output_dir


def write_config(directory, overrides):
    path = directory / 'run.cfg'
    path.write_text(''.join(f"{key} = {value}\n" for key, value in overrides.items()), encoding='utf-8')
    return str(path)


def run(command, *args):
    out = io.StringIO()
    call_command(command, *args, stdout=out)
    return out.getvalue()


class TestRunConfig:
    def test_serialize_round_trip(self, tiny_config):
        text = serialize(tiny_config)
        assert RunConfig.from_mapping(parse_config_text(text)) == tiny_config
        assert serialize(RunConfig.from_mapping(parse_config_text(text))) == text

    def test_defaults(self):
        config = load_run_config()
        assert config.run.seeds == (0,)
        assert config.net.hidden_widths == (64, 64)
        assert config.loss_config().label == 'baseline'

    def test_overrides_win(self, tiny_config):
        config = tiny_config.with_overrides(parse_overrides(['loss.metric=l1', 'run.seeds=3,4,5']))
        assert config.loss.metric == 'l1'
        assert config.run.seeds == (3, 4, 5)
        assert config.net.hidden_widths == (8,)

    @pytest.mark.parametrize('pair', ['net.depth=3', 'model.size=2', 'train.epochs=many', 'net.batchnorm=maybe'])
    def test_bad_override(self, pair):
        with pytest.raises(ConfigError):
            load_run_config(None, parse_overrides([pair]))

    def test_malformed_line(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text("train.epochs = 3\nnot a setting\n", source='x.cfg')
        assert 'x.cfg:2' in str(excinfo.value)

    def test_split_seed_follows_run_seed(self, tiny_config):
        assert tiny_config.split_seed(4) == 4
        assert tiny_config.with_overrides({'split.seed': '9'}).split_seed(4) == 9

    def test_presets(self):
        assert list_presets() == ('citeseer', 'citeseer-tfidf', 'cora', 'cora-tfidf', 'pubmed')
        assert load_run_config('cora-tfidf').featurize.mode == 'mtfidf'
        assert load_run_config('pubmed').featurize.mode == 'identity'
        assert load_run_config('citeseer').dataset.name == 'citeseer'
        assert load_run_config('citeseer-tfidf').dataset.include_cited_only
        assert not load_run_config('cora').dataset.include_cited_only
        assert len(load_run_config('cora').run.seeds) == 5

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_run_config('imagenet')

    def test_missing_dataset_files(self, tmp_path):
        config = load_run_config(None, {'dataset.path': str(tmp_path)})
        with pytest.raises(ConfigError):
            config.validate()


class TestOutputDir:
    def test_flag_then_setting_then_config(self, tiny_config, settings, tmp_path):
        assert resolve_output_dir(tiny_config) == (tmp_path / 'runs').resolve()
        settings.NODENET_OUTPUT_DIR = str(tmp_path / 'env')
        assert resolve_output_dir(tiny_config) == (tmp_path / 'env').resolve()
        assert resolve_output_dir(tiny_config, str(tmp_path / 'flag')) == (tmp_path / 'flag').resolve()


class TestStatsCommand:
    def test_reports_counts(self, tiny_overrides, tmp_path):
        output = run('stats', '--config', write_config(tmp_path, tiny_overrides), '--output-dir', str(tmp_path / 'out'))
        assert 'nodes=30' in output
        assert 'edges_raw=31 edges_undirected=28' in output
        frame = pd.read_csv(tmp_path / 'out' / 'tiny_stats.csv')
        assert frame.loc[0, 'classes'] == 3
        assert frame.loc[0, 'feature_type'] == 'binary'

    def test_cited_only_nodes_included_on_request(self, tiny_overrides, tmp_path):
        config_path = write_config(tmp_path, {**tiny_overrides, 'dataset.include_cited_only': 'true'})
        output = run('stats', '--config', config_path, '--output-dir', str(tmp_path / 'out'))
        assert 'nodes=31' in output
        assert 'edges_raw=31 edges_undirected=29' in output

    def test_real_valued_features_reported_as_tfidf(self, tmp_path):
        data = tmp_path / 'weighted'
        data.mkdir()
        (data / 'weighted.content').write_text(
            "a\t0.25\t0\tX\nb\t0\t0.5\tY\nc\t0.1\t0.1\tX\n", encoding='utf-8',
        )
        (data / 'weighted.cites').write_text("a\tb\nb\tc\n", encoding='utf-8')
        output_dir = tmp_path / 'out'
        run('stats', '--set', 'dataset.name=weighted', '--set', f'dataset.path={data}',
            '--output-dir', str(output_dir))
        frame = pd.read_csv(output_dir / 'weighted_stats.csv')
        assert frame.loc[0, 'feature_type'] == 'tfidf'

    def test_bad_config_is_a_command_error(self, tmp_path):
        with pytest.raises(CommandError):
            run('stats', '--set', 'dataset.path=' + str(tmp_path / 'nowhere'))


class TestTrainCommand:
    def test_writes_one_metrics_file_per_seed(self, tiny_overrides, tmp_path):
        output = run('train', '--config', write_config(tmp_path, tiny_overrides))
        run_dir = tmp_path / 'runs' / 'tiny-tfidf' / 'cosine_0.1-0.1-0.05'
        assert 'test_acc_mean=' in output
        assert sorted(p.parent.name for p in run_dir.glob('seed-*/metrics.csv')) == ['seed-0', 'seed-1']
        assert len(list(run_dir.glob('seed-*/checkpoint.npz'))) == 2
        summary = pd.read_csv(run_dir / 'summary.csv')
        assert list(summary.columns) == SUMMARY_COLUMNS
        assert summary['seed'].tolist() == [0, 1]
        aggregate = pd.read_csv(run_dir / 'aggregate.csv')
        assert aggregate.loc[0, 'seeds'] == 2
        assert aggregate.loc[0, 'test_acc_mean'] == pytest.approx(summary['test_acc'].mean())
        assert load_run_config(str(run_dir / 'config.cfg')) == load_run_config(None, tiny_overrides)

    def test_zero_alpha_is_labeled_baseline(self, tiny_overrides, tmp_path):
        overrides = {**tiny_overrides, 'loss.alpha_ll': '0', 'loss.alpha_lu': '0', 'loss.alpha_uu': '0',
                     'run.seeds': '0', 'featurize.mode': 'identity'}
        run('train', '--config', write_config(tmp_path, overrides))
        summary = pd.read_csv(tmp_path / 'runs' / 'tiny' / 'baseline_0-0-0' / 'summary.csv')
        assert summary['metric'].tolist() == ['baseline']

    def test_metrics_files_are_reproducible(self, tiny_config, tmp_path):
        first = cmd_train(tiny_config, tmp_path / 'first')
        second = cmd_train(tiny_config, tmp_path / 'second')
        for seed in (0, 1):
            relative = f"seed-{seed}/metrics.csv"
            assert (first.run_dir / relative).read_bytes() == (second.run_dir / relative).read_bytes()
        assert (first.run_dir / 'summary.csv').read_bytes() == (second.run_dir / 'summary.csv').read_bytes()

    def test_worker_processes_match_serial_run(self, tiny_config, tmp_path):
        serial = cmd_train(tiny_config, tmp_path / 'serial')
        parallel = cmd_train(tiny_config.with_overrides({'run.workers': '2'}), tmp_path / 'parallel')
        assert serial.summary.equals(parallel.summary)

    def test_trains_with_cited_only_nodes(self, tiny_config, tmp_path):
        report = cmd_train(tiny_config.with_overrides({'dataset.include_cited_only': 'true'}), tmp_path / 'out')
        assert report.ok
        assert report.summary['seed'].tolist() == [0, 1]

    def test_seeds_flag(self, tiny_overrides, tmp_path):
        run('train', '--config', write_config(tmp_path, tiny_overrides), '--seeds', '7')
        run_dir = tmp_path / 'runs' / 'tiny-tfidf' / 'cosine_0.1-0.1-0.05'
        assert [p.name for p in run_dir.glob('seed-*')] == ['seed-7']


class TestEvalCommand:
    def test_edges_do_not_change_predictions(self, tiny_overrides, tmp_path):
        config_path = write_config(tmp_path, {**tiny_overrides, 'run.seeds': '0'})
        run('train', '--config', config_path)
        checkpoint = tmp_path / 'runs' / 'tiny-tfidf' / 'cosine_0.1-0.1-0.05' / 'seed-0' / 'checkpoint.npz'
        output = run('eval', str(checkpoint), '--config', config_path)
        assert 'test_acc=' in output
        run('eval', str(checkpoint), '--config', config_path, '--drop-edges')
        eval_dir = tmp_path / 'runs' / 'eval'
        with_edges = (eval_dir / 'tiny-seed-0' / 'predictions.csv').read_bytes()
        without = (eval_dir / 'tiny-seed-0-no-edges' / 'predictions.csv').read_bytes()
        assert with_edges == without
        assert pd.read_csv(eval_dir / 'tiny-seed-0' / 'predictions.csv').shape == (30, 2)

    def test_missing_checkpoint(self, tiny_overrides, tmp_path):
        with pytest.raises(CommandError):
            run('eval', str(tmp_path / 'none.npz'), '--config', write_config(tmp_path, tiny_overrides))


class TestGradcheckCommand:
    def test_default_config_passes(self):
        lines = [line for line in run('gradcheck').splitlines() if line.startswith('metric=')]
        assert len(lines) == 6
        assert all(line.endswith(' ok') for line in lines)

    def test_corrupted_gradient_fails(self):
        with pytest.raises(CommandError) as excinfo:
            run('gradcheck', '--corrupt')
        assert 'W0' in str(excinfo.value)


class TestSweepCommand:
    def test_one_row_per_grid_point(self, tiny_overrides, tmp_path):
        overrides = {**tiny_overrides, 'train.epochs': '5'}
        run('sweep', '--config', write_config(tmp_path, overrides), '--alpha-ll', '0,0.5', '--alpha-uu', '0.1', '--seeds', '0')
        sweep = pd.read_csv(tmp_path / 'runs' / 'tiny-tfidf' / 'sweep.csv')
        assert sweep['alpha_ll'].tolist() == [0.0, 0.5]
        assert (tmp_path / 'runs' / 'tiny-tfidf' / 'cosine_0-0-0.1' / 'summary.csv').is_file()


def test_convert_pubmed_command(tmp_path):
    nodes = tmp_path / 'nodes.tab'
    nodes.write_text(
        "NODE\tpaper\n"
        "cat=1,2,3:label\tnumeric:w-a:0.0\tnumeric:w-b:0.0\n"
        "1\tlabel=2\tw-a=0.25\tsummary=w-a\n"
        "2\tlabel=1\tw-b=0.5\tsummary=w-b\n"
    )
    cites = tmp_path / 'cites.tab'
    cites.write_text("DIRECTED\tcites\nNO_FEATURES\n9\tpaper:1\t|\tpaper:2\n")
    run('convert_pubmed', str(nodes), str(cites), str(tmp_path / 'pubmed'))
    assert (tmp_path / 'pubmed' / 'pubmed.content').read_text() == "1\t0.25\t0\t2\n2\t0\t0.5\t1\n"
    assert (tmp_path / 'pubmed' / 'pubmed.cites').read_text() == "2\t1\n"
