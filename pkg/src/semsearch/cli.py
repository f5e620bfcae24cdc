"""Command-line pipeline: prepare -> train -> index -> query / eval / bench.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from ._io import atomic_write_text
from .config import RunConfig, load_config, render_config
from .data import (
    Vocabulary,
    build_word_targets,
    encode_pairs,
    format_targets,
    load_corpus,
    make_synthetic_responses,
    parse_pair_line,
    parse_targets,
    tokenize,
    write_corpus,
)
from .errors import ContractError, DataError, NumericError, SemsearchError
from .eval import (
    EvalOptions,
    EvalSet,
    LatencyTable,
    SkipGramConfig,
    encode_queries,
    evaluate,
    latency_bench,
    load_word2vec,
    save_word2vec,
    train_skipgram,
)
from .eval.plotting import plot_coverage, plot_latency, plot_recall
from .index import AnnConfig, InvertedIndex, build_index, load_index, save_index
from .model import (
    Checkpoint,
    EpochLog,
    SemanticSearchModel,
    Trainer,
    load_checkpoint,
    save_checkpoint,
)
from .numerics import precision
from .rng import substream

logger = logging.getLogger("semsearch")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- work directory layout -------------------------------------------------------------

def _wd(cfg: RunConfig, name: str) -> Path:
    return cfg.work_dir / name


def _read_pairs(path: Path) -> list[tuple[str, str]]:
    return [p for p in map(parse_pair_line, path.read_text(encoding="utf-8").splitlines(True)) if p]


def _read_lines(path: Path) -> tuple[list[str], int]:
    """Non-blank lines and the number of blank (malformed) ones."""
    lines = path.read_text(encoding="utf-8").splitlines()
    kept = [ln for ln in lines if tokenize(ln)]
    return kept, len(lines) - len(kept)


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_vocab(cfg: RunConfig) -> Vocabulary:
    return Vocabulary.load(cfg.path("vocab"))


def _load_model(cfg: RunConfig) -> SemanticSearchModel:
    ckpt = load_checkpoint(cfg.path("checkpoint"))
    return SemanticSearchModel(ckpt.config, ckpt.params)


def _ann_config(cfg: RunConfig) -> AnnConfig:
    return AnnConfig(cfg.ann.n_trees, cfg.ann.leaf_size, cfg.seed, cfg.ann.budget_factor)


def _split(pairs: list[tuple[str, str]], cfg: RunConfig) -> tuple[list, list]:
    """Seeded train/test split; a single pair goes to training."""
    n = len(pairs)
    n_test = 0 if n < 2 else min(n - 1, max(cfg.data.min_test, int(round(cfg.data.test_fraction * n))))
    order = substream(cfg.seed, "data").permutation(n)
    test = sorted(order[:n_test].tolist())
    train = sorted(order[n_test:].tolist())
    return [pairs[i] for i in train], [pairs[i] for i in test]


def _ground_truth(pairs: list[tuple[str, str]], pool_ids: dict[str, int]) -> str:
    """``query<TAB>id,id,...`` grouped by query text in first-seen order."""
    groups: dict[str, list[int]] = {}
    for q, r in pairs:
        ids = groups.setdefault(q, [])
        if pool_ids[r] not in ids:
            ids.append(pool_ids[r])
    return "".join(f"{q}\t{','.join(map(str, sorted(ids)))}\n" for q, ids in groups.items())


def parse_ground_truth(text: str) -> tuple[list[str], list[frozenset[int]]]:
    queries, truth = [], []
    for n, line in enumerate(text.splitlines(), start=1):
        q, sep, ids = line.partition("\t")
        if not sep:
            raise DataError(f"ground-truth line {n}: missing TAB")
        try:
            truth.append(frozenset(int(i) for i in ids.split(",") if i))
        except ValueError:
            raise DataError(f"ground-truth line {n}: bad id list {ids!r}") from None
        queries.append(q)
    return queries, truth


# -- commands --------------------------------------------------------------------------

def cmd_prepare(cfg: RunConfig, corpus: str | None = None) -> dict:
    path = Path(corpus or cfg.paths.corpus)
    if not str(path) or not path.is_file():
        raise DataError(f"corpus file not found: {path}")
    loaded = load_corpus(path)
    if not loaded.pairs:
        raise DataError(f"{path}: corpus holds no valid pairs")
    train_raw, test_raw = _split(loaded.pairs, cfg)
    vocab = Vocabulary.from_pairs(train_raw, cfg.model.vocab_size)
    pairs, dropped = encode_pairs(train_raw, vocab, cfg.data.max_len)
    if not pairs:
        raise DataError("no training pair survives encoding")
    targets, excluded = build_word_targets(pairs, idf=cfg.data.idf)

    pool: list[str] = []
    seen: set[str] = set()
    extra: list[str] = []
    if cfg.paths.responses:
        extra, _ = _read_lines(Path(cfg.paths.responses))
    for r in [r for _, r in train_raw] + [r for _, r in test_raw] + extra:
        if r not in seen:
            seen.add(r)
            pool.append(r)
    pool_ids = {r: i for i, r in enumerate(pool)}

    # everything is computed before the first write, so a failure leaves no outputs
    manifest = {
        "version": __version__, "seed": cfg.seed, "corpus": str(path),
        "lines": loaded.lines, "malformed": loaded.malformed, "pairs": len(loaded.pairs),
        "train_pairs": len(train_raw), "test_pairs": len(test_raw), "encoded_dropped": dropped,
        "vocab_size": len(vocab), "target_queries": len(targets), "targets_excluded": excluded,
        "responses": len(pool), "extra_responses": len(extra),
    }
    outputs = {
        cfg.path("vocab"): vocab.dumps(),
        _wd(cfg, "targets.tsv"): format_targets(targets),
        _wd(cfg, "train.tsv"): write_corpus(train_raw),
        _wd(cfg, "test.tsv"): write_corpus(test_raw),
        _wd(cfg, "responses.txt"): "".join(r + "\n" for r in pool),
        _wd(cfg, "groundtruth_train.tsv"): _ground_truth(train_raw, pool_ids),
        _wd(cfg, "groundtruth_test.tsv"): _ground_truth(test_raw, pool_ids),
        _wd(cfg, "config.ini"): render_config(cfg),
    }
    for out, text in outputs.items():
        atomic_write_text(out, text)
    _write_json(_wd(cfg, "manifest.json"), manifest)
    logger.info("prepared %d train / %d test pairs, vocab %d, pool %d",
                len(train_raw), len(test_raw), len(vocab), len(pool))
    return manifest


def _training_data(cfg: RunConfig):
    vocab = _load_vocab(cfg)
    pairs, _ = encode_pairs(_read_pairs(_wd(cfg, "train.tsv")), vocab, cfg.data.max_len)
    targets = parse_targets(_wd(cfg, "targets.tsv").read_text(encoding="utf-8"))
    return vocab, pairs, targets


def cmd_train(cfg: RunConfig, epochs: int | None = None, resume: str | None = None) -> list[EpochLog]:
    vocab, pairs, targets = _training_data(cfg)
    model_cfg = cfg.model_config(vocab_size=len(vocab))
    epochs = cfg.train.epochs if epochs is None else epochs
    log_path = _wd(cfg, "train.log")
    ckpt_dir = _wd(cfg, "checkpoints")

    history: list[EpochLog] = []
    if resume is not None:
        ckpt = load_checkpoint(resume or cfg.path("checkpoint"))
        diff = ckpt.config.architecture_diff(model_cfg)
        if diff:
            listing = ", ".join(f"{k}: checkpoint {a} vs config {b}" for k, (a, b) in diff.items())
            raise DataError(f"checkpoint does not match the configuration ({listing})")
        trainer = Trainer(model_cfg, pairs, targets, cfg.train.batch_size,
                          params=ckpt.params, adam_state=ckpt.adam, epoch=ckpt.epoch)
        if log_path.exists():
            lines = log_path.read_text(encoding="utf-8").splitlines(True)
            history = [EpochLog.parse(ln) for ln in lines if ln.strip()][:ckpt.epoch]
        logger.info("resuming from epoch %d", ckpt.epoch)
    else:
        trainer = Trainer(model_cfg, pairs, targets, cfg.train.batch_size)

    def on_epoch(tr: Trainer, log: EpochLog) -> None:
        history.append(log)
        ckpt = Checkpoint(tr.cfg, tr.params, tr.epoch, tr.adam_state)
        save_checkpoint(ckpt_dir / f"epoch_{tr.epoch:03d}.ckpt", ckpt)
        save_checkpoint(cfg.path("checkpoint"), ckpt)
        atomic_write_text(log_path, "".join(h.line() for h in history))

    trainer.train(epochs, on_epoch)
    return history


def cmd_index(cfg: RunConfig, responses: str | None = None) -> dict:
    path = Path(responses) if responses else _wd(cfg, "responses.txt")
    texts, malformed = _read_lines(path)
    if not texts:
        raise DataError(f"{path}: no responses to index")
    model = _load_model(cfg)
    index = build_index(texts, model, _load_vocab(cfg), _ann_config(cfg), cfg.data.max_len)
    save_index(cfg.path("index"), index)
    logger.info("indexed %d responses (%d blank lines skipped)", len(index), malformed)
    return {"items": len(index), "malformed": malformed}


def cmd_query(cfg: RunConfig, text: str, k: int = 10, mode: str = "exact",
              budget: int | None = None) -> list[tuple[int, float, str]]:
    if k < 1:
        raise UsageError("k must be >= 1")
    model = _load_model(cfg)
    index = load_index(cfg.path("index"))
    (ids,) = encode_queries([text], _load_vocab(cfg), cfg.data.max_len)
    q = model.project_query(ids)
    if mode == "exact":
        res = index.search_exact(q, k)
    else:
        res = index.search_ann(q, k, budget if budget is not None else cfg.ann.budget_factor * k)
    return [(rank, score, index.texts[i]) for rank, (i, score) in enumerate(res.pairs(), start=1)]


def _embeddings(cfg: RunConfig):
    if cfg.paths.embeddings:
        return load_word2vec(cfg.paths.embeddings)
    path = _wd(cfg, "embeddings.txt")
    sentences = [tokenize(t) for pair in _read_pairs(_wd(cfg, "train.tsv")) for t in pair]
    table = train_skipgram(sentences, SkipGramConfig(dim=cfg.eval.skipgram_dim,
                                                     epochs=cfg.eval.skipgram_epochs), seed=cfg.seed)
    save_word2vec(path, table)
    return table


def cmd_eval(cfg: RunConfig, split: str = "test") -> Path:
    queries, truth = parse_ground_truth(_wd(cfg, f"groundtruth_{split}.tsv").read_text(encoding="utf-8"))
    if not queries:
        raise DataError(f"the {split} split has no queries")
    index = load_index(cfg.path("index"))
    evalset = EvalSet(tuple(queries), index.texts, tuple(truth))
    model = _load_model(cfg)
    opts = EvalOptions(cfg.eval.recall_ks, cfg.eval.emm_ks, cfg.eval.cov_ks, cfg.ann.budget_factor,
                       cfg.eval.generated)
    report = evaluate(model, index, evalset, _load_vocab(cfg), opts, _embeddings(cfg))
    out = cfg.path("report")
    atomic_write_text(out, report.format())
    plot_recall(report, out.with_name(out.stem + "_recall.png"))
    plot_coverage(report, out.with_name(out.stem + "_coverage.png"))
    return out


def cmd_bench(cfg: RunConfig) -> Path:
    """Latency of exact, ANN and keyword retrieval over a pool padded to ``bench.pool_size``."""
    model = _load_model(cfg)
    vocab = _load_vocab(cfg)
    texts, _ = _read_lines(_wd(cfg, "responses.txt"))
    if len(texts) < cfg.bench.pool_size:
        words = vocab.itos[4:]
        seed = int(substream(cfg.seed, "bench").integers(2**31))
        texts = texts + make_synthetic_responses(cfg.bench.pool_size - len(texts), seed=seed, words=words)
    index = build_index(texts, model, vocab, _ann_config(cfg), cfg.data.max_len)
    keyword = InvertedIndex.build(texts)

    queries = [q for q, _ in _read_pairs(_wd(cfg, "test.tsv")) + _read_pairs(_wd(cfg, "train.tsv"))]
    queries = queries[:cfg.bench.n_queries]
    if not queries:
        raise DataError("no queries available for benchmarking")
    q_vecs = model.project_queries(encode_queries(queries, vocab, cfg.data.max_len))
    factor = cfg.ann.budget_factor
    engines = {
        "exact": lambda i, k: index.search_exact(q_vecs[i], k),
        "ann": lambda i, k: index.search_ann(q_vecs[i], k, factor * k),
        "keyword": lambda i, k: keyword.search(queries[i], k),
    }
    table = latency_bench(engines, len(queries), cfg.bench.ks, cfg.bench.runs, cfg.bench.warmup)
    out = _wd(cfg, "latency.tsv")
    atomic_write_text(out, table.format())
    plot_latency(LatencyTable.parse(table.format()), out.with_name("latency.png"))
    return out


# -- argument parsing ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the flags with SUPPRESS defaults so they do not clobber earlier values
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", help="INI run configuration", **kw)
    parser.add_argument("--seed", type=int, help="override [run] seed", **kw)
    parser.add_argument("--quiet", action="store_true", help="only warnings and errors", **kw)
    parser.add_argument("--work-dir", help="override [paths] work_dir", **kw)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)

    parser = _Parser(prog="semsearch", description="Dual-encoder response retrieval pipeline.")
    _global_flags(parser, suppress=False)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", parents=[common], help="build vocabulary, targets and splits")
    p.add_argument("corpus", nargs="?", help="query<TAB>response file (default: [paths] corpus)")

    p = sub.add_parser("train", parents=[common], help="train and checkpoint every epoch")
    p.add_argument("--epochs", type=int, help="train until this many epochs are complete")
    p.add_argument("--resume", nargs="?", const="", default=None, metavar="CHECKPOINT",
                   help="continue from a checkpoint (default: the latest)")

    p = sub.add_parser("index", parents=[common], help="project responses and build the index")
    p.add_argument("responses", nargs="?", help="one response per line (default: the prepared pool)")

    p = sub.add_parser("query", parents=[common], help="retrieve responses for one query")
    p.add_argument("text")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--mode", choices=("exact", "ann"), default="exact")
    p.add_argument("--budget", type=int)

    p = sub.add_parser("eval", parents=[common], help="write the metric report and figures")
    p.add_argument("--split", choices=("test", "train"), default="test")

    sub.add_parser("bench", parents=[common], help="write the latency table and figure")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.work_dir:
        cfg = cfg.replace("paths", work_dir=args.work_dir)
    return cfg


def run(args) -> None:
    cfg = resolve_config(args)
    if args.command == "prepare":
        cmd_prepare(cfg, args.corpus)
    elif args.command == "train":
        cmd_train(cfg, args.epochs, args.resume)
    elif args.command == "index":
        cmd_index(cfg, args.responses)
    elif args.command == "query":
        for rank, score, text in cmd_query(cfg, args.text, args.k, args.mode, args.budget):
            print(f"{rank}\t{score:.4f}\t{text}")
    elif args.command == "eval":
        print(cmd_eval(cfg, args.split).read_text(encoding="utf-8"), end="")
    elif args.command == "bench":
        print(cmd_bench(cfg).read_text(encoding="utf-8"), end="")


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"semsearch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        with precision("float32"):
            run(args)
    except (UsageError, ContractError) as exc:
        print(f"semsearch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"semsearch: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, SemsearchError) as exc:
        print(f"semsearch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
