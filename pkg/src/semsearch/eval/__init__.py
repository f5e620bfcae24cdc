"""Retrieval, coverage and embedding metrics, latency measurement, reports and figures."""

from .embedding import (
    EmbeddingScores,
    EmbeddingTable,
    EmMResult,
    average_score,
    emm_at_k,
    extrema_score,
    extrema_vector,
    greedy_score,
    sentence_scores,
)
from .evaluate import EvalOptions, encode_queries, evaluate
from .latency import DEFAULT_KS, LatencyTable, latency_bench, summarize, time_engine
from .metrics import CoverageResult, EvalSet, coverage_at_k, r_precision, recall_at_k, reference_words
from .report import EvalReport
from .skipgram import (
    SkipGramConfig,
    format_word2vec,
    load_word2vec,
    parse_word2vec,
    save_word2vec,
    train_skipgram,
)

__all__ = [
    "DEFAULT_KS", "CoverageResult", "EmMResult", "EmbeddingScores", "EmbeddingTable", "EvalOptions",
    "EvalReport", "EvalSet", "LatencyTable", "SkipGramConfig", "average_score", "coverage_at_k",
    "emm_at_k", "encode_queries", "evaluate", "extrema_score", "extrema_vector", "format_word2vec",
    "greedy_score", "latency_bench", "load_word2vec", "parse_word2vec", "r_precision", "recall_at_k",
    "reference_words", "save_word2vec", "sentence_scores", "summarize", "time_engine", "train_skipgram",
]
