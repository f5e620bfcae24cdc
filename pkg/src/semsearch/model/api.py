"""Sequence-level wrapper around the batched network functions."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..data import pad
from ..errors import ContractError
from . import network
from .params import ModelConfig, ModelParams


def _batches(seqs: Sequence[Sequence[int]], size: int):
    for start in range(0, len(seqs), size):
        chunk = seqs[start:start + size]
        if any(len(s) == 0 for s in chunk):
            raise ContractError("empty sequence")
        yield pad(chunk)


class SemanticSearchModel:
    """Trained (or freshly initialised) parameters plus their configuration.

    Methods accept plain lists of token-id sequences and return NumPy arrays.
    """

    def __init__(self, config: ModelConfig, params: ModelParams | None = None, batch_size: int = 256):
        self.config = config
        self.params = params if params is not None else ModelParams.initialize(config)
        self.batch_size = batch_size

    def _map(self, fn, seqs) -> np.ndarray:
        seqs = [list(s) for s in seqs]
        parts = [fn(ids, lens) for ids, lens in _batches(seqs, self.batch_size)]
        return np.concatenate(parts, axis=0)

    def project_queries(self, queries: Sequence[Sequence[int]]) -> np.ndarray:
        return self._map(lambda i, l: network.project_query(self.params, self.config, i, l), queries)

    def project_responses(self, responses: Sequence[Sequence[int]]) -> np.ndarray:
        return self._map(lambda i, l: network.project_response(self.params, i, l), responses)

    def project_query(self, query: Sequence[int]) -> np.ndarray:
        return self.project_queries([query])[0]

    def project_response(self, response: Sequence[int]) -> np.ndarray:
        return self.project_responses([response])[0]

    def predict_topk(self, queries, k: int) -> np.ndarray:
        return self._map(lambda i, l: network.predict_topk(self.params, self.config, i, l, k), queries)

    def first_step_topk(self, queries, k: int) -> np.ndarray:
        return self._map(lambda i, l: network.first_step_topk(self.params, self.config, i, l, k), queries)

    def greedy_decode(self, queries, max_len: int = 50) -> list[list[int]]:
        out: list[list[int]] = []
        for ids, lens in _batches([list(q) for q in queries], self.batch_size):
            out.extend(network.greedy_decode(self.params, self.config, ids, lens, max_len))
        return out

    def num_parameters(self) -> int:
        return self.params.num_parameters()
