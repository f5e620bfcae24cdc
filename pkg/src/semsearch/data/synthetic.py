"""Seeded toy corpora with topical structure, for smoke runs and tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def make_synthetic_corpus(n_pairs: int, seed: int = 0, n_topics: int = 8,
                          words_per_topic: int = 6, min_len: int = 3,
                          max_len: int = 6) -> list[tuple[str, str]]:
    """Distinct (query, response) text pairs.

    Each pair belongs to a topic; its query draws from that topic's query
    words and its response from the topic's response words, so responses
    share no surface tokens with their queries.
    """
    rng = np.random.default_rng(seed)
    qwords = [[f"q{t}x{i}" for i in range(words_per_topic)] for t in range(n_topics)]
    rwords = [[f"r{t}y{i}" for i in range(words_per_topic)] for t in range(n_topics)]
    seen_q, seen_r = set(), set()
    pairs: list[tuple[str, str]] = []
    attempts = 0
    while len(pairs) < n_pairs:
        attempts += 1
        if attempts > 1000 * n_pairs:
            raise ValueError("cannot draw enough distinct pairs; enlarge the topic vocabulary")
        topic = len(pairs) % n_topics
        q = " ".join(rng.choice(qwords[topic], size=rng.integers(min_len, max_len + 1)))
        r = " ".join(rng.choice(rwords[topic], size=rng.integers(min_len, max_len + 1)))
        if q in seen_q or r in seen_r:
            continue
        seen_q.add(q)
        seen_r.add(r)
        pairs.append((q, r))
    return pairs


def make_synthetic_responses(n: int, seed: int = 0, vocab_size: int = 400,
                             min_len: int = 3, max_len: int = 10,
                             words: Sequence[str] | None = None) -> list[str]:
    """Zipf-ish random sentences for index-scale experiments.

    ``words`` (most frequent first) replaces the generated ``w0 w1 ...`` vocabulary.
    """
    rng = np.random.default_rng(seed)
    words = np.array(list(words) if words is not None else [f"w{i}" for i in range(vocab_size)])
    if not len(words):
        raise ValueError("need at least one word")
    p = 1.0 / np.arange(1, len(words) + 1)
    p /= p.sum()
    return [" ".join(words[rng.choice(len(words), size=rng.integers(min_len, max_len + 1), p=p)])
            for _ in range(n)]
