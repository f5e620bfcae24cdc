"""Offline response projection, exact/approximate dot-product search and a keyword baseline."""

from .forest import FlatTree, build_forest, build_tree, collect_candidates
from .keyword import InvertedIndex, Postings, smooth_idf
from .store import (
    AnnConfig,
    ResponseIndex,
    RetrievalResult,
    build_index,
    dot_scores,
    dumps_index,
    index_from_vectors,
    load_index,
    loads_index,
    save_index,
    top_k,
)

__all__ = [
    "AnnConfig", "FlatTree", "InvertedIndex", "Postings", "ResponseIndex", "RetrievalResult",
    "build_forest", "build_index", "build_tree", "collect_candidates", "dot_scores", "dumps_index",
    "index_from_vectors", "load_index", "loads_index", "save_index", "smooth_idf", "top_k",
]
