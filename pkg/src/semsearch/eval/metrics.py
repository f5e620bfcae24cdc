"""Ranking and coverage metrics over per-query result lists."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..data import RESERVED
from ..errors import ContractError, DataError


@dataclass(frozen=True)
class EvalSet:
    """Queries, a response pool and the true response ids of each query."""

    queries: tuple[str, ...]
    pool: tuple[str, ...]
    truth: tuple[frozenset[int], ...]

    def __post_init__(self):
        if len(self.queries) != len(self.truth):
            raise ContractError("one ground-truth set per query is required")
        missing = sorted({i for t in self.truth for i in t if not 0 <= i < len(self.pool)})
        if missing:
            raise DataError(f"ground-truth ids missing from the pool: {missing}")
        empty = [q for q, t in enumerate(self.truth) if not t]
        if empty:
            raise DataError(f"queries without ground truth: {empty}")

    def __len__(self) -> int:
        return len(self.queries)

    def primary_truth(self) -> list[int]:
        """Lowest true id per query: the designated response for R-precision."""
        return [min(t) for t in self.truth]


def _check_lengths(rankings: Sequence, expected: int) -> None:
    if len(rankings) != expected:
        raise ContractError(f"results for {len(rankings)} queries, expected {expected}")
    for i, r in enumerate(rankings):
        if r is None:
            raise ContractError(f"query {i} has no results")


def recall_at_k(rankings: Sequence[Sequence[int]], truth: Sequence[Iterable[int]], k: int) -> float:
    """Mean over queries of |top-k ∩ truth| / |truth|."""
    if k < 1:
        raise ContractError("k must be >= 1")
    _check_lengths(rankings, len(truth))
    if not truth:
        raise ContractError("no queries")
    total = 0.0
    for ranked, t in zip(rankings, truth):
        t = set(t)
        if not t:
            raise ContractError("empty ground-truth set")
        total += len(t.intersection(ranked[:k])) / len(t)
    return total / len(truth)


def r_precision(rankings: Sequence[Sequence[int]], true_ids: Sequence[int]) -> float:
    """Mean reciprocal 1-based rank of each query's true response; absent -> 0."""
    _check_lengths(rankings, len(true_ids))
    if not true_ids:
        raise ContractError("no queries")
    total = 0.0
    for ranked, t in zip(rankings, true_ids):
        for pos, rid in enumerate(ranked, start=1):
            if rid == t:
                total += 1.0 / pos
                break
    return total / len(true_ids)


@dataclass(frozen=True)
class CoverageResult:
    value: float
    n_queries: int
    excluded: int  # queries dropped because their reference set was empty


def reference_words(ids: Iterable[int]) -> set[int]:
    """Distinct word ids with the reserved tokens removed."""
    return {i for i in ids if i >= len(RESERVED)}


def coverage_at_k(predicted: Sequence[Sequence[int]], references: Sequence[Iterable[int]],
                  k: int | None = None) -> CoverageResult:
    """Mean over queries of |top-k predicted ∩ reference| / |reference|."""
    _check_lengths(predicted, len(references))
    total = 0.0
    used = excluded = 0
    for pred, ref in zip(predicted, references):
        ref = set(ref)
        if not ref:
            excluded += 1
            continue
        top = pred if k is None else pred[:k]
        total += len(ref.intersection(top)) / len(ref)
        used += 1
    if used == 0:
        raise DataError("every reference word set is empty")
    return CoverageResult(total / used, used, excluded)
