"""
Flat key-value experiment configuration.

A config file holds one ``section.key = value`` pair per line; ``#`` starts a
comment. Later assignments win, and command-line overrides are applied on top
with the same syntax. ``serialize`` writes every key, so parse -> serialize ->
parse is lossless.
"""
import dataclasses
import logging
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

from citegraph.loaders import resolve_dataset_files
from citegraph.structures import SplitSpec
from core.exceptions import ConfigError, DatasetFormatError
from graphloss.structures import GraphLossConfig
from neuralnet.structures import NetworkConfig
from trainer.structures import TrainConfig

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent / 'presets'
TRUE_WORDS = {'true', 'yes', 'on', '1'}
FALSE_WORDS = {'false', 'no', 'off', '0'}


@dataclass(frozen=True)
class DatasetSection:
    name: str = 'cora'
    path: Optional[str] = None
    content: Optional[str] = None
    cites: Optional[str] = None
    include_cited_only: bool = False


@dataclass(frozen=True)
class FeaturizeSection:
    mode: str = 'identity'
    log_base: float = math.e


@dataclass(frozen=True)
class SplitSection:
    strategy: str = 'planetoid'
    per_class: int = 20
    num_val: int = 500
    num_test: int = 1000
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: Optional[int] = None


@dataclass(frozen=True)
class NetSection:
    hidden_widths: Tuple[int, ...] = (64, 64)
    dropout_rate: float = 0.5
    batchnorm: bool = True
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9
    activation: str = 'relu'
    latent_layer: Optional[int] = None
    precision: str = 'float64'


@dataclass(frozen=True)
class LossSection:
    alpha_ll: float = 0.0
    alpha_lu: float = 0.0
    alpha_uu: float = 0.0
    metric: str = 'cosine'
    cosine_epsilon: float = 1e-12
    raw_cosine: bool = False
    reduction: str = 'mean'
    edge_weight: float = 1.0


@dataclass(frozen=True)
class TrainSection:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 2000
    patience: int = 50
    batch_mode: str = 'full'
    batch_edges: int = 512
    weight_decay: float = 5e-4


@dataclass(frozen=True)
class RunSection:
    seeds: Tuple[int, ...] = (0,)
    output_dir: str = 'runs'
    workers: int = 1
    record_seconds: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs, grouped by the dotted key prefix."""
    dataset: DatasetSection = field(default_factory=DatasetSection)
    featurize: FeaturizeSection = field(default_factory=FeaturizeSection)
    split: SplitSection = field(default_factory=SplitSection)
    net: NetSection = field(default_factory=NetSection)
    loss: LossSection = field(default_factory=LossSection)
    train: TrainSection = field(default_factory=TrainSection)
    run: RunSection = field(default_factory=RunSection)

    @classmethod
    def from_mapping(cls, values: Dict[str, str]) -> 'RunConfig':
        """Build a config from ``{'section.key': 'raw value'}``; unknown keys are rejected."""
        sections = {f.name: {} for f in dataclasses.fields(cls)}
        section_types = {f.name: f.default_factory for f in dataclasses.fields(cls)}
        for dotted, raw in values.items():
            section, _, key = dotted.partition('.')
            if section not in sections:
                raise ConfigError(f"unknown config section in '{dotted}'")
            hints = typing.get_type_hints(section_types[section])
            if key not in hints:
                raise ConfigError(f"unknown config key '{dotted}'")
            sections[section][key] = _coerce(raw, hints[key], dotted)
        return cls(**{name: section_types[name](**kwargs) for name, kwargs in sections.items()})

    def to_mapping(self) -> Dict[str, str]:
        values = {}
        for section in dataclasses.fields(self):
            block = getattr(self, section.name)
            for item in dataclasses.fields(block):
                values[f"{section.name}.{item.name}"] = _format(getattr(block, item.name))
        return values

    def with_overrides(self, overrides: Dict[str, str]) -> 'RunConfig':
        merged = self.to_mapping()
        merged.update(overrides)
        return RunConfig.from_mapping(merged)

    def dataset_files(self) -> Tuple[Path, Path]:
        """Resolve the ``.content`` and ``.cites`` paths; either explicit or ``<path>/<name>.*``."""
        if self.dataset.content and self.dataset.cites:
            return Path(self.dataset.content), Path(self.dataset.cites)
        if not self.dataset.path:
            raise ConfigError("set dataset.path or both dataset.content and dataset.cites")
        try:
            return resolve_dataset_files(self.dataset.path, self.dataset.name)
        except DatasetFormatError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self) -> None:
        """
        Check cross-field rules and that dataset files exist.

        Raises:
            ConfigError: On the first violation found
        """
        for candidate in self.dataset_files():
            if not candidate.is_file():
                raise ConfigError(f"dataset file not found: {candidate}")
        if not self.run.seeds:
            raise ConfigError("run.seeds must list at least one seed")
        if self.run.workers < 1:
            raise ConfigError(f"run.workers must be at least 1, got {self.run.workers}")
        self.split_spec()
        self.loss_config()
        self.train_config(self.run.seeds[0])
        self.network_config(1, 2)

    def split_spec(self) -> SplitSpec:
        try:
            return SplitSpec(
                strategy=self.split.strategy,
                per_class=self.split.per_class,
                num_val=self.split.num_val,
                num_test=self.split.num_test,
                train_fraction=self.split.train_fraction,
                val_fraction=self.split.val_fraction,
                test_fraction=self.split.test_fraction,
            )
        except ValueError as exc:
            raise ConfigError(f"split: {exc}") from exc

    def network_config(self, num_features: int, num_classes: int) -> NetworkConfig:
        return NetworkConfig.for_dataset(
            num_features,
            num_classes,
            hidden_widths=self.net.hidden_widths,
            dropout_rate=self.net.dropout_rate,
            batchnorm=self.net.batchnorm,
            bn_epsilon=self.net.bn_epsilon,
            bn_momentum=self.net.bn_momentum,
            activation=self.net.activation,
            latent_layer=self.net.latent_layer,
            precision=self.net.precision,
        )

    def loss_config(self) -> GraphLossConfig:
        try:
            return GraphLossConfig(
                alpha_ll=self.loss.alpha_ll,
                alpha_lu=self.loss.alpha_lu,
                alpha_uu=self.loss.alpha_uu,
                metric=self.loss.metric,
                cosine_epsilon=self.loss.cosine_epsilon,
                raw_cosine=self.loss.raw_cosine,
                reduction=self.loss.reduction,
            )
        except ValueError as exc:
            raise ConfigError(f"loss: {exc}") from exc

    def train_config(self, seed: int) -> TrainConfig:
        try:
            return TrainConfig(seed=seed, **dataclasses.asdict(self.train))
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from exc

    def split_seed(self, seed: int) -> int:
        return self.split.seed if self.split.seed is not None else seed


def _coerce(raw: str, hint, key: str):
    raw = raw.strip()
    origin = typing.get_origin(hint)
    if origin is Union:
        inner = [arg for arg in typing.get_args(hint) if arg is not type(None)][0]
        if raw.lower() in ('', 'none', 'null'):
            return None
        return _coerce(raw, inner, key)
    if origin is tuple:
        item_type = typing.get_args(hint)[0]
        parts = [p for p in raw.replace(' ', ',').split(',') if p]
        return tuple(_coerce(p, item_type, key) for p in parts)
    try:
        if hint is bool:
            lowered = raw.lower()
            if lowered in TRUE_WORDS:
                return True
            if lowered in FALSE_WORDS:
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"invalid {hint.__name__} for '{key}': '{raw}'") from None
    return raw


def _format(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ','.join(_format(v) for v in value)
    return str(value)


def parse_config_text(text: str, source: str = '<config>') -> Dict[str, str]:
    """Split config text into ``{'section.key': 'raw value'}``."""
    values: Dict[str, str] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or '.' not in key:
            raise ConfigError(f"{source}:{line_number}: expected 'section.key = value'")
        values[key] = value.strip()
    return values


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """Turn ``['loss.alpha_ll=0.1', ...]`` into a mapping."""
    values: Dict[str, str] = {}
    for pair in pairs or ():
        key, sep, value = pair.partition('=')
        if not sep:
            raise ConfigError(f"override '{pair}' must look like section.key=value")
        values[key.strip()] = value.strip()
    return values


def resolve_config_path(name_or_path: str) -> Path:
    """Accept a file path or the name of a shipped preset."""
    path = Path(name_or_path)
    if path.is_file():
        return path
    preset = PRESET_DIR / f"{name_or_path}.cfg"
    if preset.is_file():
        return preset
    raise ConfigError(f"config '{name_or_path}' is neither a file nor a preset ({', '.join(list_presets())})")


def list_presets() -> Tuple[str, ...]:
    return tuple(sorted(p.stem for p in PRESET_DIR.glob('*.cfg')))


def load_run_config(name_or_path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """Defaults, then the config file (if any), then ``overrides``."""
    values: Dict[str, str] = {}
    if name_or_path:
        path = resolve_config_path(name_or_path)
        values.update(parse_config_text(path.read_text(encoding='utf-8'), source=str(path)))
        logger.debug(f"Loaded config {path}")
    values.update(overrides or {})
    return RunConfig().with_overrides(values)


def serialize(config: RunConfig) -> str:
    lines = [f"{key} = {value}" for key, value in config.to_mapping().items()]
    return '\n'.join(lines) + '\n'
