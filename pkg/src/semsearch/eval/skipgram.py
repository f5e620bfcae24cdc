"""Small skip-gram trainer with negative sampling, plus word2vec text-format I/O.

Supplies the external embedding table for the embedding metrics so the
evaluation suite needs no downloaded vectors.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .._io import atomic_write_text
from ..errors import ContractError, FormatError
from ..rng import substream
from .embedding import EmbeddingTable


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 32
    window: int = 2
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    min_count: int = 1
    batch_size: int = 256


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def train_skipgram(sentences: Sequence[Sequence[str]], cfg: SkipGramConfig = SkipGramConfig(),
                   seed: int = 0) -> EmbeddingTable:
    """Minibatch SGD on log sigma(u.v) + sum log sigma(-u.v_neg), learning rate decayed linearly."""
    counts = Counter(t for s in sentences for t in s)
    words = sorted((w for w, c in counts.items() if c >= cfg.min_count), key=lambda w: (-counts[w], w))
    if not words:
        raise ContractError("no words reach min_count")
    index = {w: i for i, w in enumerate(words)}
    rng = substream(seed, "skipgram")

    centers, contexts = [], []
    for s in sentences:
        ids = [index[t] for t in s if t in index]
        for i, c in enumerate(ids):
            for j in range(max(0, i - cfg.window), min(len(ids), i + cfg.window + 1)):
                if j != i:
                    centers.append(c)
                    contexts.append(ids[j])
    centers = np.array(centers, dtype=np.int64)
    contexts = np.array(contexts, dtype=np.int64)

    n_words = len(words)
    w_in = (rng.random((n_words, cfg.dim)) - 0.5) / cfg.dim
    w_out = np.zeros((n_words, cfg.dim))
    if not len(centers):
        return EmbeddingTable(words, w_in)

    noise = np.array([counts[w] for w in words], dtype=np.float64) ** 0.75
    noise /= noise.sum()
    total_steps = cfg.epochs * -(-len(centers) // cfg.batch_size)
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(centers))
        for start in range(0, len(order), cfg.batch_size):
            lr = cfg.lr * max(1e-4, 1.0 - step / total_steps)
            step += 1
            sel = order[start:start + cfg.batch_size]
            c, o = centers[sel], contexts[sel]
            neg = rng.choice(n_words, size=(len(sel), cfg.negatives), p=noise)
            targets = np.concatenate([o[:, None], neg], axis=1)      # (b, 1 + n)
            labels = np.zeros(targets.shape)
            labels[:, 0] = 1.0
            v = w_in[c]                                               # (b, dim)
            u = w_out[targets]                                        # (b, 1 + n, dim)
            g = labels - _sigmoid(np.einsum("bd,bnd->bn", v, u))     # ascent direction
            np.add.at(w_in, c, lr * np.einsum("bn,bnd->bd", g, u))
            np.add.at(w_out, targets, lr * g[:, :, None] * v[:, None, :])
    return EmbeddingTable(words, w_in)


def format_word2vec(table: EmbeddingTable) -> str:
    lines = [f"{len(table)} {table.dim}"]
    for w, v in zip(table.words, table.vectors):
        lines.append(w + " " + " ".join(repr(float(x)) for x in v))
    return "\n".join(lines) + "\n"


def save_word2vec(path: str | Path, table: EmbeddingTable) -> None:
    atomic_write_text(path, format_word2vec(table))


def parse_word2vec(text: str) -> EmbeddingTable:
    """Text format: optional ``count dim`` header, then ``word v1 ... vd`` per line."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty embedding file")
    head = lines[0].split()
    if len(head) == 2 and all(p.isdigit() for p in head):
        expected = (int(head[0]), int(head[1]))
        lines = lines[1:]
    else:
        expected = None
    words, rows = [], []
    for n, line in enumerate(lines, start=1):
        parts = line.rstrip().split(" ")
        try:
            rows.append([float(x) for x in parts[1:]])
        except ValueError:
            raise FormatError(f"embedding line {n}: non-numeric value") from None
        words.append(parts[0])
    dims = {len(r) for r in rows}
    if len(dims) != 1:
        raise FormatError(f"inconsistent vector sizes: {sorted(dims)}")
    if expected is not None and expected != (len(rows), dims.pop()):
        raise FormatError(f"header says {expected}, file holds {len(rows)} vectors")
    return EmbeddingTable(words, np.array(rows))


def load_word2vec(path: str | Path) -> EmbeddingTable:
    return parse_word2vec(Path(path).read_text(encoding="utf-8"))
