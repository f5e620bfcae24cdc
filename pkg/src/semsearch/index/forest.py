"""Random-projection forest for approximate maximum inner product search on unit vectors."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..rng import substream


@dataclass
class FlatTree:
    """One tree in array form.

    Internal nodes are numbered in preorder from 0. ``children[i]`` holds the
    (left, right) child codes of node ``i``: a code ``c >= 0`` is internal node
    ``c``, a negative code is leaf ``-c - 1``. Leaf ``j`` owns
    ``items[offsets[j]:offsets[j + 1]]``.
    """

    splits: np.ndarray       # (n_internal, d) float32 unit vectors
    thresholds: np.ndarray   # (n_internal,) float32
    children: np.ndarray     # (n_internal, 2) int32
    offsets: np.ndarray      # (n_leaves + 1,) uint32
    items: np.ndarray        # (n_items,) uint32

    @property
    def root(self) -> int:
        return 0 if len(self.thresholds) else -1

    @property
    def n_leaves(self) -> int:
        return len(self.offsets) - 1

    def leaves(self) -> list[np.ndarray]:
        return [self.items[self.offsets[j]:self.offsets[j + 1]] for j in range(self.n_leaves)]

    def margins(self, q: np.ndarray) -> np.ndarray:
        if not len(self.thresholds):
            return np.zeros(0)
        return self.splits.astype(np.float64) @ q - self.thresholds.astype(np.float64)


def build_tree(vectors: np.ndarray, leaf_size: int, rng: np.random.Generator) -> FlatTree:
    """Split recursively at the median projection onto a random unit direction."""
    if leaf_size < 1:
        raise ContractError("leaf_size must be >= 1")
    n, d = vectors.shape
    data = vectors.astype(np.float64)
    splits, thresholds, children = [], [], []
    leaves: list[np.ndarray] = []

    def grow(ids: np.ndarray) -> int:
        if len(ids) <= leaf_size:
            leaves.append(ids)
            return -len(leaves)
        v = rng.standard_normal(d)
        v = (v / np.linalg.norm(v)).astype(np.float32)
        proj = data[ids] @ v.astype(np.float64)
        order = np.argsort(proj, kind="stable")
        half = len(ids) // 2
        node = len(thresholds)
        splits.append(v)
        thresholds.append(np.float32(np.median(proj)))
        children.append([0, 0])
        left = grow(ids[order[:half]])
        right = grow(ids[order[half:]])
        children[node] = [left, right]
        return node

    grow(np.arange(n, dtype=np.uint32))
    sizes = np.array([len(leaf) for leaf in leaves], dtype=np.uint32)
    return FlatTree(
        splits=np.array(splits, dtype=np.float32).reshape(-1, d),
        thresholds=np.array(thresholds, dtype=np.float32),
        children=np.array(children, dtype=np.int32).reshape(-1, 2),
        offsets=np.concatenate([[0], np.cumsum(sizes)]).astype(np.uint32),
        items=np.concatenate(leaves).astype(np.uint32),
    )


def build_forest(vectors: np.ndarray, n_trees: int, leaf_size: int, seed: int) -> list[FlatTree]:
    """Tree ``t`` draws its split directions from the ``forest`` substream ``(seed, t)``."""
    if n_trees < 1:
        raise ContractError("n_trees must be >= 1")
    return [build_tree(vectors, leaf_size, substream(seed, "forest", t)) for t in range(n_trees)]


def collect_candidates(trees: list[FlatTree], q: np.ndarray, budget: int, n_items: int) -> np.ndarray:
    """Distinct item ids gathered best-first across all trees.

    A shared max-heap orders nodes by the smallest split margin on their
    root path (ties by insertion order); whole leaves are taken until at
    least ``budget`` distinct ids are found or the trees are exhausted.
    """
    q = np.asarray(q, dtype=np.float64)
    margins = [t.margins(q) for t in trees]
    children = [t.children for t in trees]
    heap = [(-np.inf, i, i, t.root) for i, t in enumerate(trees)]
    counter = len(heap)
    seen = np.zeros(n_items, dtype=bool)
    found: list[np.ndarray] = []
    count = 0
    while heap and count < budget:
        neg_p, _, ti, code = heapq.heappop(heap)
        if code < 0:
            tree = trees[ti]
            leaf = -code - 1
            items = tree.items[tree.offsets[leaf]:tree.offsets[leaf + 1]]
            new = items[~seen[items]]
            if len(new):
                seen[new] = True
                found.append(new)
                count += len(new)
            continue
        p = -neg_p
        m = margins[ti][code]
        left, right = children[ti][code]
        heapq.heappush(heap, (-min(p, m), counter, ti, int(right)))
        heapq.heappush(heap, (-min(p, -m), counter + 1, ti, int(left)))
        counter += 2
    if not found:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate(found).astype(np.int64))
