"""Corpus ingestion, vocabulary, TF-IDF targets and batch assembly."""

from .batching import (
    MAX_LEN,
    Batch,
    QRPair,
    TrainingExample,
    encode_pairs,
    make_batches,
    make_examples,
    mask_from_lengths,
    pad,
    sample_negative,
)
from .synthetic import make_synthetic_corpus, make_synthetic_responses
from .targets import WordTargets, build_word_targets, dense_targets, format_targets, parse_targets
from .text import (
    BOS,
    EOS,
    PAD,
    RESERVED,
    UNK,
    LoadedCorpus,
    Vocabulary,
    load_corpus,
    parse_pair_line,
    tokenize,
    write_corpus,
)

__all__ = [
    "BOS", "EOS", "MAX_LEN", "PAD", "RESERVED", "UNK",
    "Batch", "LoadedCorpus", "QRPair", "TrainingExample", "Vocabulary", "WordTargets",
    "build_word_targets", "dense_targets", "encode_pairs", "format_targets", "load_corpus",
    "make_batches", "make_examples", "make_synthetic_corpus", "make_synthetic_responses",
    "mask_from_lengths", "pad", "parse_pair_line", "parse_targets", "sample_negative",
    "tokenize", "write_corpus",
]
