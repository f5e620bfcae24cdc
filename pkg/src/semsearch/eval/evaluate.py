"""End-to-end evaluation of a trained model against an indexed response pool."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..data import MAX_LEN, UNK, tokenize
from ..errors import ContractError
from .embedding import EmbeddingTable, emm_at_k
from .metrics import EvalSet, coverage_at_k, r_precision, recall_at_k, reference_words
from .report import EvalReport


@dataclass(frozen=True)
class EvalOptions:
    recall_ks: tuple[int, ...] = (1, 5, 10)
    emm_ks: tuple[int, ...] = (1, 5)
    cov_ks: tuple[int, ...] = (10, 50, 100)
    budget_factor: int = 20
    generated: bool = True  # also score coverage against greedily decoded responses


def encode_queries(queries: Sequence[str], vocab, max_len: int = MAX_LEN) -> list[list[int]]:
    """Token ids; a query with no tokens at all becomes a single UNK."""
    return [vocab.encode_text(q, max_len) or [UNK] for q in queries]


def evaluate(model, index, evalset: EvalSet, vocab, options: EvalOptions = EvalOptions(),
             embeddings: EmbeddingTable | None = None) -> EvalReport:
    """Recall (exact and ANN), R-precision, embedding metrics and word coverage."""
    if len(index) != len(evalset.pool):
        raise ContractError(f"index holds {len(index)} responses, eval pool has {len(evalset.pool)}")
    report = EvalReport()
    q_ids = encode_queries(evalset.queries, vocab)
    q_vecs = model.project_queries(q_ids)

    full = [index.search_exact(v, len(index)).ids.tolist() for v in q_vecs]
    truth = [set(t) for t in evalset.truth]
    for k in options.recall_ks:
        report.add("recall_exact", k, recall_at_k(full, truth, k))
    for k in options.recall_ks:
        ann = [index.search_ann(v, k, options.budget_factor * k).ids.tolist() for v in q_vecs]
        report.add("recall_ann", k, recall_at_k(ann, truth, k))
    report.add("r_precision", None, r_precision(full, evalset.primary_truth()))

    if embeddings is not None:
        ref_tokens = [tokenize(evalset.pool[t]) for t in evalset.primary_truth()]
        for k in options.emm_ks:
            hyps = [[tokenize(evalset.pool[i]) for i in ranked[:k]] for ranked in full]
            res = emm_at_k(ref_tokens, hyps, embeddings, k)
            report.add("emm_greedy", k, res.greedy)
            report.add("emm_average", k, res.average)
            report.add("emm_extrema", k, res.extrema)
            report.add("emm_skipped", k, res.skipped)

    cov_ks = sorted({min(k, model.config.vocab_size) for k in options.cov_ks})
    if cov_ks:
        refs = [reference_words(w for i in t for w in vocab.encode_text(evalset.pool[i], MAX_LEN))
                for t in evalset.truth]
        kmax = cov_ks[-1]
        predicted = {
            "cov_word": np.asarray(model.predict_topk(q_ids, kmax)).tolist(),
            "cov_first": np.asarray(model.first_step_topk(q_ids, kmax)).tolist(),
        }
        gen_refs = [reference_words(g) for g in model.greedy_decode(q_ids)] if options.generated else None
        for name, pred in predicted.items():
            for k in cov_ks:
                res = coverage_at_k(pred, refs, k)
                report.add(name, k, res.value)
            if gen_refs is None:
                continue
            if any(gen_refs):
                for k in cov_ks:
                    res = coverage_at_k(pred, gen_refs, k)
                    report.add(f"{name}_gen", k, res.value)
                excluded = res.excluded
            else:
                excluded = len(gen_refs)
            report.add(f"{name}_gen_excluded", None, excluded)
    return report
