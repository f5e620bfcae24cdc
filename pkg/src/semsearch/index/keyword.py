"""TF-IDF inverted index used as the keyword-matching baseline."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..data import tokenize
from .store import RetrievalResult, top_k


def smooth_idf(n_docs: int, df: int) -> float:
    return math.log((1 + n_docs) / (1 + df)) + 1.0


@dataclass(frozen=True)
class Postings:
    ids: np.ndarray  # int64, ascending
    tf: np.ndarray   # int64 term counts


class InvertedIndex:
    """Token -> postings, scored by cosine similarity of smoothed TF-IDF vectors."""

    def __init__(self, postings: dict[str, Postings], n_docs: int, doc_lengths: np.ndarray):
        self.postings = postings
        self.n_docs = n_docs
        self.doc_lengths = doc_lengths  # token count per document
        self.idf = {t: smooth_idf(n_docs, len(p.ids)) for t, p in postings.items()}
        sq = np.zeros(n_docs)
        for t, p in postings.items():
            sq[p.ids] += (p.tf * self.idf[t]) ** 2
        self.doc_norms = np.sqrt(sq)

    @classmethod
    def build(cls, documents: Sequence[str]) -> "InvertedIndex":
        acc: dict[str, tuple[list[int], list[int]]] = {}
        lengths = np.zeros(len(documents), dtype=np.int64)
        for i, doc in enumerate(documents):
            counts = Counter(tokenize(doc))
            lengths[i] = sum(counts.values())
            for tok in sorted(counts):
                ids, tfs = acc.setdefault(tok, ([], []))
                ids.append(i)
                tfs.append(counts[tok])
        postings = {t: Postings(np.array(ids, dtype=np.int64), np.array(tfs, dtype=np.int64))
                    for t, (ids, tfs) in sorted(acc.items())}
        return cls(postings, len(documents), lengths)

    def __len__(self) -> int:
        return self.n_docs

    def search(self, query: str, k: int) -> RetrievalResult:
        """Top ``k`` documents sharing at least one token with ``query``; empty when none do."""
        counts = Counter(t for t in tokenize(query) if t in self.postings)
        if not counts:
            return RetrievalResult(np.zeros(0, dtype=np.int64), np.zeros(0))
        scores = np.zeros(self.n_docs)
        hit = np.zeros(self.n_docs, dtype=bool)
        q_sq = 0.0
        for tok in sorted(counts):
            p = self.postings[tok]
            w_q = counts[tok] * self.idf[tok]
            q_sq += w_q * w_q
            scores[p.ids] += w_q * p.tf * self.idf[tok]
            hit[p.ids] = True
        ids = np.flatnonzero(hit)
        return top_k(ids, scores[ids] / (self.doc_norms[ids] * math.sqrt(q_sq)), k)
