"""TF-IDF word distributions used as Word Predictor targets."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import FormatError
from .text import BOS, EOS, PAD

_EXCLUDED = frozenset((PAD, BOS, EOS))


@dataclass(frozen=True)
class WordTargets:
    """Sparse distribution over response token ids, sorted by id."""

    ids: tuple[int, ...]
    probs: tuple[float, ...]

    def dense(self, vocab_size: int, dtype=np.float64) -> np.ndarray:
        out = np.zeros(vocab_size, dtype=dtype)
        out[list(self.ids)] = self.probs
        return out

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.ids, self.probs))


def build_word_targets(pairs: Iterable, idf: str = "smooth") -> tuple[dict[tuple[int, ...], WordTargets], int]:
    """Map each distinct query (id sequence) to the normalized TF-IDF of its pooled responses.

    ``pairs`` yields objects with ``query`` and ``response`` id sequences.
    tf counts a token over the concatenation of all responses of a query;
    df counts query bags containing the token. ``idf="smooth"`` uses
    ``ln((1+N)/(1+df)) + 1``, ``idf="raw"`` uses ``ln(N/df)``.

    Returns the mapping and the number of queries excluded for having no
    scorable tokens.
    """
    if idf not in ("smooth", "raw"):
        raise ValueError(f"idf must be 'smooth' or 'raw', got {idf!r}")
    bags: dict[tuple[int, ...], Counter] = defaultdict(Counter)
    for p in pairs:
        bags[tuple(p.query)].update(t for t in p.response if t not in _EXCLUDED)

    n_queries = len(bags)
    df: Counter = Counter()
    for bag in bags.values():
        df.update(bag.keys())

    targets: dict[tuple[int, ...], WordTargets] = {}
    excluded = 0
    for query, bag in bags.items():
        weights = {}
        for tok, tf in bag.items():
            if idf == "smooth":
                w = tf * (math.log((1 + n_queries) / (1 + df[tok])) + 1.0)
            else:
                w = tf * math.log(n_queries / df[tok])
            if w > 0:
                weights[tok] = w
        if not weights:
            excluded += 1
            continue
        ids = tuple(sorted(weights))
        total = math.fsum(weights.values())
        targets[query] = WordTargets(ids, tuple(weights[t] / total for t in ids))
    return targets, excluded


def format_targets(targets: dict[tuple[int, ...], WordTargets]) -> str:
    lines = []
    for query in sorted(targets):
        t = targets[query]
        dist = " ".join(f"{i}:{p!r}" for i, p in zip(t.ids, t.probs))
        lines.append(" ".join(map(str, query)) + "\t" + dist + "\n")
    return "".join(lines)


def parse_targets(text: str) -> dict[tuple[int, ...], WordTargets]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        try:
            q, dist = line.split("\t")
            query = tuple(int(x) for x in q.split())
            items = [item.split(":") for item in dist.split()]
            out[query] = WordTargets(tuple(int(i) for i, _ in items), tuple(float(p) for _, p in items))
        except ValueError as exc:
            raise FormatError(f"targets line {n}: {exc}") from None
    return out


def dense_targets(batch_targets: Sequence[WordTargets], vocab_size: int, dtype=np.float64) -> np.ndarray:
    out = np.zeros((len(batch_targets), vocab_size), dtype=dtype)
    for row, t in enumerate(batch_targets):
        out[row, list(t.ids)] = t.probs
    return out
