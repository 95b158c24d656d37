"""
Shared fixtures: a small synthetic citation dataset written in the
``.content`` / ``.cites`` layout, and run configs pointing at it.
"""
import numpy as np
import pytest

from experiments.runconfig import load_run_config

TINY_CLASSES = ('Alpha', 'Beta', 'Gamma')
TINY_NODES = 30
TINY_WORDS = 12


def write_tiny_dataset(directory, name='tiny', seed=7):
    """Three classes of ten papers; each class favours its own block of four words."""
    rng = np.random.default_rng(seed)
    labels = np.arange(TINY_NODES) % len(TINY_CLASSES)
    features = (rng.random((TINY_NODES, TINY_WORDS)) < 0.1).astype(int)
    for node, label in enumerate(labels):
        block = slice(4 * label, 4 * label + 4)
        features[node, block] |= (rng.random(4) < 0.7).astype(int)
        features[node, 4 * label] = 1

    content_lines = [
        '\t'.join([f"p{node}", *map(str, features[node]), TINY_CLASSES[label]])
        for node, label in enumerate(labels)
    ]
    cites_lines = []
    for node in range(TINY_NODES):
        same_class = node + len(TINY_CLASSES)
        if same_class < TINY_NODES:
            cites_lines.append(f"p{same_class}\tp{node}")
    cites_lines += ['p0\tp1', 'p1\tp0', 'p5\tp5', 'p2\tmissing']

    directory.mkdir(parents=True, exist_ok=True)
    content_path = directory / f"{name}.content"
    cites_path = directory / f"{name}.cites"
    content_path.write_text('\n'.join(content_lines) + '\n', encoding='utf-8')
    cites_path.write_text('\n'.join(cites_lines) + '\n', encoding='utf-8')
    return content_path, cites_path


@pytest.fixture
def tiny_dataset(tmp_path):
    """Returns the directory holding ``tiny.content`` and ``tiny.cites``."""
    directory = tmp_path / 'data'
    write_tiny_dataset(directory)
    return directory


@pytest.fixture
def tiny_overrides(tiny_dataset, tmp_path):
    return {
        'dataset.name': 'tiny',
        'dataset.path': str(tiny_dataset),
        'featurize.mode': 'mtfidf',
        'split.strategy': 'random',
        'net.hidden_widths': '8',
        'net.dropout_rate': '0.2',
        'loss.alpha_ll': '0.1',
        'loss.alpha_lu': '0.1',
        'loss.alpha_uu': '0.05',
        'train.epochs': '15',
        'train.patience': '0',
        'run.seeds': '0,1',
        'run.output_dir': str(tmp_path / 'runs'),
    }


@pytest.fixture
def tiny_config(tiny_overrides):
    return load_run_config(None, tiny_overrides)
