"""Encoded pairs, negative sampling and padded batches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..errors import ContractError, SamplingError
from .targets import WordTargets, dense_targets
from .text import BOS, EOS, PAD, Vocabulary

MAX_LEN = 50


@dataclass(frozen=True)
class QRPair:
    query: tuple[int, ...]
    response: tuple[int, ...]

    def __post_init__(self):
        if not self.query or not self.response:
            raise ContractError("query and response must each hold at least one token")


@dataclass(frozen=True)
class TrainingExample:
    query: tuple[int, ...]
    positive: tuple[int, ...]
    negative: tuple[int, ...]
    targets: WordTargets

    def __post_init__(self):
        if self.negative == self.positive:
            raise ContractError("negative response equals the positive one")


def encode_pairs(raw: Sequence[tuple[str, str]], vocab: Vocabulary,
                 max_len: int = MAX_LEN) -> tuple[list[QRPair], int]:
    """Encode text pairs, truncating to ``max_len`` tokens; returns pairs and the count dropped as empty."""
    pairs, dropped = [], 0
    for q, r in raw:
        qi, ri = vocab.encode_text(q, max_len), vocab.encode_text(r, max_len)
        if not qi or not ri:
            dropped += 1
            continue
        pairs.append(QRPair(tuple(qi), tuple(ri)))
    return pairs, dropped


def sample_negative(index: int, responses: Sequence[tuple[int, ...]], rng: np.random.Generator,
                    max_tries: int = 64) -> tuple[int, ...]:
    """Uniform draw over ``responses`` rejecting anything token-identical to ``responses[index]``."""
    positive = responses[index]
    n = len(responses)
    for _ in range(max_tries):
        cand = responses[int(rng.integers(n))]
        if cand != positive:
            return cand
    # rejection keeps failing: fall back to an explicit draw over the admissible set
    admissible = [i for i, r in enumerate(responses) if r != positive]
    if not admissible:
        raise SamplingError("every response is identical to the positive; cannot sample a negative")
    return responses[admissible[int(rng.integers(len(admissible)))]]


def pad(seqs: Sequence[Sequence[int]], prefix: int | None = None,
        suffix: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences with PAD; returns the matrix and the true lengths."""
    rows = [([prefix] if prefix is not None else []) + list(s) + ([suffix] if suffix is not None else [])
            for s in seqs]
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    out = np.full((len(rows), int(lengths.max()) if rows else 0), PAD, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out, lengths


def mask_from_lengths(lengths: np.ndarray, width: int) -> np.ndarray:
    return np.arange(width)[None, :] < np.asarray(lengths)[:, None]


@dataclass
class Batch:
    query: np.ndarray
    query_len: np.ndarray
    positive: np.ndarray
    positive_len: np.ndarray
    negative: np.ndarray
    negative_len: np.ndarray
    decoder_in: np.ndarray
    decoder_out: np.ndarray
    decoder_len: np.ndarray
    targets: list[WordTargets]

    def __len__(self) -> int:
        return self.query.shape[0]

    @property
    def query_mask(self) -> np.ndarray:
        return mask_from_lengths(self.query_len, self.query.shape[1])

    @property
    def positive_mask(self) -> np.ndarray:
        return mask_from_lengths(self.positive_len, self.positive.shape[1])

    @property
    def negative_mask(self) -> np.ndarray:
        return mask_from_lengths(self.negative_len, self.negative.shape[1])

    @property
    def decoder_mask(self) -> np.ndarray:
        return mask_from_lengths(self.decoder_len, self.decoder_in.shape[1])

    def dense_targets(self, vocab_size: int, dtype=np.float64) -> np.ndarray:
        return dense_targets(self.targets, vocab_size, dtype)

    @classmethod
    def from_examples(cls, examples: Sequence[TrainingExample]) -> "Batch":
        q, ql = pad([e.query for e in examples])
        p, pl = pad([e.positive for e in examples])
        n, nl = pad([e.negative for e in examples])
        di, dl = pad([e.positive for e in examples], prefix=BOS)
        do, _ = pad([e.positive for e in examples], suffix=EOS)
        return cls(q, ql, p, pl, n, nl, di, do, dl, [e.targets for e in examples])


def make_batches(examples: Sequence[TrainingExample], batch_size: int,
                 rng: np.random.Generator) -> Iterator[Batch]:
    """Shuffle once with ``rng`` and yield padded batches, the last one possibly partial."""
    if batch_size < 1:
        raise ContractError("batch_size must be >= 1")
    order = rng.permutation(len(examples))
    for start in range(0, len(order), batch_size):
        yield Batch.from_examples([examples[i] for i in order[start:start + batch_size]])


def make_examples(pairs: Sequence[QRPair], targets: dict[tuple[int, ...], WordTargets],
                  rng: np.random.Generator) -> list[TrainingExample]:
    """Attach a fresh negative and the query's word targets to every pair that has targets."""
    responses = [p.response for p in pairs]
    out = []
    for i, p in enumerate(pairs):
        t = targets.get(p.query)
        if t is None:
            continue
        out.append(TrainingExample(p.query, p.response, sample_negative(i, responses, rng), t))
    return out
