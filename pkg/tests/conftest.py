import numpy as np
import pytest

from semsearch.data import Batch, TrainingExample, WordTargets
from semsearch.model import ModelConfig, ModelParams

TINY = dict(vocab_size=12, d=4, emb_size=4, hidden_size=6)


def tiny_examples(rng: np.random.Generator, n: int = 3, vocab_size: int = 12, max_len: int = 4):
    """Random triplets over word ids 4..V-1 with lengths 1..max_len."""
    examples = []
    for _ in range(n):
        q = tuple(rng.integers(4, vocab_size, size=rng.integers(1, max_len + 1)).tolist())
        pos = tuple(rng.integers(4, vocab_size, size=rng.integers(1, max_len + 1)).tolist())
        neg = pos
        while neg == pos:
            neg = tuple(rng.integers(4, vocab_size, size=rng.integers(1, max_len + 1)).tolist())
        ids = sorted(set(pos))
        probs = rng.random(len(ids)) + 0.1
        targets = WordTargets(tuple(ids), tuple((probs / probs.sum()).tolist()))
        examples.append(TrainingExample(q, pos, neg, targets))
    return examples


@pytest.fixture
def tiny():
    """(config, params, batch) at the gradient-check dimensions."""
    cfg = ModelConfig(seed=0, **TINY)
    params = ModelParams.initialize(cfg)
    batch = Batch.from_examples(tiny_examples(np.random.default_rng(0)))
    return cfg, params, batch
