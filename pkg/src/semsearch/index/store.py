"""
Response index: unit vectors for a frozen pool plus a random-projection forest.

Index file layout (little-endian)::

    b"MSSI"                       magic
    u32 version, u32 d, u32 count
    count*d x f32                 vectors, row-major
    count x (u32 n, n bytes)      response texts, UTF-8
    u32 n_trees, u32 leaf_size, u64 seed
    n_trees x tree:
        u32 n_internal, u32 n_leaves
        n_internal*d x f32        split vectors
        n_internal x f32          thresholds
        n_internal*2 x i32        child codes (see FlatTree)
        (n_leaves+1) x u32        leaf offsets
        offsets[-1] x u32         leaf item ids
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .._io import atomic_write_bytes
from ..errors import ContractError, DataError, FormatError, NumericError
from .forest import FlatTree, build_forest, collect_candidates

MAGIC = b"MSSI"
VERSION = 1
NORM_TOL = 1e-6


@dataclass(frozen=True)
class AnnConfig:
    n_trees: int = 50
    leaf_size: int = 16
    seed: int = 0
    budget_factor: int = 20  # search budget defaults to budget_factor * k


@dataclass(frozen=True)
class RetrievalResult:
    ids: np.ndarray     # int64, ranked
    scores: np.ndarray  # float64 dot products, non-increasing

    def __len__(self) -> int:
        return len(self.ids)

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.ids.tolist(), self.scores.tolist()))


def dot_scores(vectors: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise dot products; each row is reduced on its own, so any subset scores identically."""
    return (vectors.astype(np.float64) * q.astype(np.float64)).sum(axis=1)


def top_k(ids: np.ndarray, scores: np.ndarray, k: int) -> RetrievalResult:
    """Highest ``k`` scores, ties to the lower id."""
    if k < 1:
        raise ContractError("k must be >= 1")
    if k < len(ids):
        neg = -scores
        kth = np.partition(neg, k - 1)[k - 1]
        keep = np.flatnonzero(neg <= kth)
        ids, scores = ids[keep], scores[keep]
    order = np.lexsort((ids, -scores))[:k]
    return RetrievalResult(ids[order].astype(np.int64), scores[order])


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ResponseIndex:
    texts: tuple[str, ...]
    vectors: np.ndarray
    trees: tuple[FlatTree, ...]
    n_trees: int
    leaf_size: int
    seed: int

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.texts)

    def _check_query(self, q) -> np.ndarray:
        q = np.asarray(q)
        if q.shape != (self.d,):
            raise ContractError(f"query vector has shape {q.shape}, index expects ({self.d},)")
        return q

    def search_exact(self, q, k: int) -> RetrievalResult:
        q = self._check_query(q)
        return top_k(np.arange(len(self), dtype=np.int64), dot_scores(self.vectors, q), k)

    def search_ann(self, q, k: int, budget: int | None = None) -> RetrievalResult:
        q = self._check_query(q)
        if k < 1:
            raise ContractError("k must be >= 1")
        budget = 20 * k if budget is None else budget
        if budget < k:
            raise ContractError(f"search budget {budget} is below k={k}")
        ids = collect_candidates(list(self.trees), q, budget, len(self))
        return top_k(ids, dot_scores(self.vectors[ids], q), k)


def index_from_vectors(texts: Sequence[str], vectors: np.ndarray, ann: AnnConfig = AnnConfig()) -> ResponseIndex:
    """Build from precomputed unit vectors."""
    texts = tuple(texts)
    if not texts:
        raise ContractError("cannot index an empty response list")
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or len(vectors) != len(texts):
        raise ContractError(f"expected {len(texts)} vectors, got array of shape {vectors.shape}")
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    bad = np.flatnonzero(~(np.abs(norms - 1.0) <= NORM_TOL))
    if len(bad):
        i = int(bad[0])
        raise DataError(f"response {i} ({texts[i]!r}) has vector norm {norms[i]}, expected 1")
    trees = build_forest(vectors, ann.n_trees, ann.leaf_size, ann.seed)
    for t in trees:
        for name in ("splits", "thresholds", "children", "offsets", "items"):
            setattr(t, name, _freeze(getattr(t, name)))
    return ResponseIndex(texts, _freeze(vectors), tuple(trees), ann.n_trees, ann.leaf_size, ann.seed)


def build_index(responses: Sequence[str], model, vocab, ann: AnnConfig = AnnConfig(),
                max_len: int | None = None) -> ResponseIndex:
    """Project ``responses`` through the response encoder and index them."""
    if not responses:
        raise ContractError("cannot index an empty response list")
    encoded = [vocab.encode_text(r, max_len) for r in responses]
    for i, ids in enumerate(encoded):
        if not ids:
            raise DataError(f"response {i} ({responses[i]!r}) has no tokens")
    try:
        vectors = model.project_responses(encoded)
    except NumericError:
        for i, ids in enumerate(encoded):
            try:
                model.project_response(ids)
            except NumericError:
                raise DataError(f"response {i} ({responses[i]!r}) projects to the zero vector") from None
        raise
    return index_from_vectors(responses, vectors, ann)


def dumps_index(index: ResponseIndex) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<III", VERSION, index.d, len(index)))
    buf.write(index.vectors.astype("<f4").tobytes())
    for text in index.texts:
        raw = text.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    buf.write(struct.pack("<IIQ", index.n_trees, index.leaf_size, index.seed))
    for t in index.trees:
        buf.write(struct.pack("<II", len(t.thresholds), t.n_leaves))
        buf.write(t.splits.astype("<f4").tobytes())
        buf.write(t.thresholds.astype("<f4").tobytes())
        buf.write(t.children.astype("<i4").tobytes())
        buf.write(t.offsets.astype("<u4").tobytes())
        buf.write(t.items.astype("<u4").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError("index file is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int, shape=None) -> np.ndarray:
        dt = np.dtype(dtype)
        arr = np.frombuffer(self.take(dt.itemsize * count), dtype=dt)
        return arr.reshape(shape) if shape is not None else arr


def loads_index(data: bytes) -> ResponseIndex:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("not an index file (bad magic bytes)")
    version, d, count = r.unpack("<III")
    if version != VERSION:
        raise FormatError(f"unsupported index version {version}")
    vectors = r.array("<f4", count * d, (count, d)).astype(np.float32)
    texts = []
    for _ in range(count):
        (n,) = r.unpack("<I")
        try:
            texts.append(r.take(n).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"bad response text: {exc}") from None
    n_trees, leaf_size, seed = r.unpack("<IIQ")
    trees = []
    for _ in range(n_trees):
        n_int, n_leaves = r.unpack("<II")
        splits = r.array("<f4", n_int * d, (n_int, d)).astype(np.float32)
        thresholds = r.array("<f4", n_int).astype(np.float32)
        children = r.array("<i4", 2 * n_int, (n_int, 2)).astype(np.int32)
        offsets = r.array("<u4", n_leaves + 1).astype(np.uint32)
        items = r.array("<u4", int(offsets[-1]) if n_leaves + 1 else 0).astype(np.uint32)
        if len(items) != count:
            raise FormatError("tree leaves do not cover the item set")
        trees.append(FlatTree(*(_freeze(a) for a in (splits, thresholds, children, offsets, items))))
    if r.pos != len(data):
        raise FormatError("trailing bytes after the last tree")
    return ResponseIndex(tuple(texts), _freeze(vectors), tuple(trees), n_trees, leaf_size, seed)


def save_index(path: str | Path, index: ResponseIndex) -> None:
    atomic_write_bytes(path, dumps_index(index))


def load_index(path: str | Path) -> ResponseIndex:
    return loads_index(Path(path).read_bytes())
