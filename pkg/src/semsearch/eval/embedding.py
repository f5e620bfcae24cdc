"""Embedding-based sentence similarity: greedy matching, vector average and vector extrema."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import ContractError


class EmbeddingTable:
    """Word -> vector lookup backed by one dense matrix."""

    def __init__(self, words: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(words) != len(vectors):
            raise ContractError("need one vector row per word")
        if len(set(words)) != len(words):
            raise ContractError("duplicate words in embedding table")
        self.words = list(words)
        self.vectors = vectors
        self.index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_dict(cls, table: Mapping[str, Sequence[float]]) -> "EmbeddingTable":
        words = list(table)
        return cls(words, np.array([table[w] for w in words], dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def lookup(self, tokens: Sequence[str]) -> np.ndarray:
        """Vectors for the in-vocabulary tokens, OOV tokens dropped."""
        rows = [self.index[t] for t in tokens if t in self.index]
        return self.vectors[rows].reshape(len(rows), self.dim)


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def _unit_rows(m: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, n, out=np.zeros_like(m), where=n > 0)


def greedy_score(ref: np.ndarray, hyp: np.ndarray) -> float:
    """Each word's best cosine in the other sentence, averaged, then symmetrised."""
    sims = _unit_rows(ref) @ _unit_rows(hyp).T
    return float((sims.max(axis=1).mean() + sims.max(axis=0).mean()) / 2.0)


def average_score(ref: np.ndarray, hyp: np.ndarray) -> float:
    return _cos(ref.mean(axis=0), hyp.mean(axis=0))


def extrema_vector(m: np.ndarray) -> np.ndarray:
    """Per dimension, the value of largest magnitude (the maximum wins ties)."""
    hi, lo = m.max(axis=0), m.min(axis=0)
    return np.where(hi >= np.abs(lo), hi, lo)


def extrema_score(ref: np.ndarray, hyp: np.ndarray) -> float:
    return _cos(extrema_vector(ref), extrema_vector(hyp))


@dataclass(frozen=True)
class EmbeddingScores:
    greedy: float
    average: float
    extrema: float


def sentence_scores(ref_tokens: Sequence[str], hyp_tokens: Sequence[str],
                    table: EmbeddingTable) -> EmbeddingScores | None:
    """All three scores, or ``None`` when either sentence has no in-vocabulary token."""
    ref, hyp = table.lookup(ref_tokens), table.lookup(hyp_tokens)
    if not len(ref) or not len(hyp):
        return None
    return EmbeddingScores(greedy_score(ref, hyp), average_score(ref, hyp), extrema_score(ref, hyp))


@dataclass(frozen=True)
class EmMResult:
    greedy: float
    average: float
    extrema: float
    scored: int   # queries contributing at least one pair
    skipped: int  # sentence pairs dropped for lack of in-vocabulary tokens


def emm_at_k(truths: Sequence[Sequence[str]], retrieved: Sequence[Sequence[Sequence[str]]],
             table: EmbeddingTable, k: int) -> EmMResult:
    """Scores averaged over each query's top ``k`` retrieved responses, then over queries."""
    if len(truths) != len(retrieved):
        raise ContractError("one retrieved list per query is required")
    if k < 1:
        raise ContractError("k must be >= 1")
    per_query = []
    skipped = 0
    for ref, hyps in zip(truths, retrieved):
        rows = []
        for hyp in hyps[:k]:
            s = sentence_scores(ref, hyp, table)
            if s is None:
                skipped += 1
            else:
                rows.append((s.greedy, s.average, s.extrema))
        if rows:
            per_query.append(np.mean(rows, axis=0))
    if not per_query:
        return EmMResult(0.0, 0.0, 0.0, 0, skipped)
    g, a, e = np.mean(per_query, axis=0).tolist()
    return EmMResult(g, a, e, len(per_query), skipped)
