"""Run configuration stored as an INI file with one section per concern.

Every key has a default, so a config file only needs the values it changes.
Unknown sections and keys are rejected. ``parse_config(render_config(c)) == c``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractError
from .model import ModelConfig


@dataclass(frozen=True)
class RunSection:
    seed: int = 0


@dataclass(frozen=True)
class ModelSection:
    d: int = 512
    emb_size: int = 512
    hidden_size: int = 1024
    vocab_size: int = 30000
    maxout_pieces: int = 2
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    lr: float = 0.0002


@dataclass(frozen=True)
class DataSection:
    max_len: int = 50
    test_fraction: float = 0.1
    min_test: int = 1
    idf: str = "smooth"


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 10
    batch_size: int = 32


@dataclass(frozen=True)
class AnnSection:
    n_trees: int = 400
    leaf_size: int = 16
    budget_factor: int = 20


@dataclass(frozen=True)
class EvalSection:
    recall_ks: tuple[int, ...] = (1, 5, 10)
    emm_ks: tuple[int, ...] = (1, 5)
    cov_ks: tuple[int, ...] = (10, 50, 100)
    generated: bool = True
    skipgram_dim: int = 32
    skipgram_epochs: int = 5


@dataclass(frozen=True)
class BenchSection:
    ks: tuple[int, ...] = (10, 30, 50, 70, 90, 110, 130, 150, 170, 190)
    runs: int = 100
    warmup: int = 10
    n_queries: int = 100
    pool_size: int = 10000


@dataclass(frozen=True)
class PathsSection:
    """Empty artifact paths resolve to standard names inside ``work_dir``."""

    corpus: str = ""
    responses: str = ""
    work_dir: str = "work"
    vocab: str = ""
    checkpoint: str = ""
    index: str = ""
    report: str = ""
    embeddings: str = ""


SECTIONS = {
    "run": RunSection, "model": ModelSection, "data": DataSection, "train": TrainSection,
    "ann": AnnSection, "eval": EvalSection, "bench": BenchSection, "paths": PathsSection,
}

DEFAULT_NAMES = {
    "vocab": "vocab.txt", "checkpoint": "checkpoint.ckpt", "index": "index.bin", "report": "report.tsv",
}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    model: ModelSection = field(default_factory=ModelSection)
    data: DataSection = field(default_factory=DataSection)
    train: TrainSection = field(default_factory=TrainSection)
    ann: AnnSection = field(default_factory=AnnSection)
    eval: EvalSection = field(default_factory=EvalSection)
    bench: BenchSection = field(default_factory=BenchSection)
    paths: PathsSection = field(default_factory=PathsSection)

    @property
    def seed(self) -> int:
        return self.run.seed

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, run=RunSection(seed=seed))

    def replace(self, section: str, **values) -> "RunConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **values)})

    @property
    def work_dir(self) -> Path:
        return Path(self.paths.work_dir)

    def path(self, name: str) -> Path:
        """Configured artifact path, or its standard location in the work directory."""
        value = getattr(self.paths, name)
        if value:
            return Path(value)
        if name not in DEFAULT_NAMES:
            raise ContractError(f"no path configured for {name!r}")
        return self.work_dir / DEFAULT_NAMES[name]

    def model_config(self, vocab_size: int | None = None) -> ModelConfig:
        """Model hyperparameters; ``vocab_size`` overrides the configured cap with the built size."""
        values = dataclasses.asdict(self.model)
        if vocab_size is not None:
            values["vocab_size"] = vocab_size
        return ModelConfig(seed=self.seed, **values)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(kind: str, raw: str, where: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        if kind.startswith("tuple"):
            return tuple(int(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError:
        raise ContractError(f"{where}: cannot read {raw!r} as {kind}") from None


def render_config(cfg: RunConfig) -> str:
    parts = []
    for name in SECTIONS:
        section = getattr(cfg, name)
        parts.append(f"[{name}]")
        parts += [f"{f.name} = {_format(getattr(section, f.name))}" for f in dataclasses.fields(section)]
        parts.append("")
    return "\n".join(parts)


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False)
    parser.optionxform = str  # keep key case so typos are caught rather than folded
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ContractError(f"malformed config: {exc}") from None
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ContractError(f"unknown config sections: {unknown}")
    sections = {}
    for name, cls in SECTIONS.items():
        kinds = {f.name: str(f.type) for f in dataclasses.fields(cls)}
        values = {}
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in kinds:
                    raise ContractError(f"unknown key {key!r} in section [{name}]")
                values[key] = _coerce(kinds[key], raw, f"[{name}] {key}")
        sections[name] = cls(**values)
    return RunConfig(**sections)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
